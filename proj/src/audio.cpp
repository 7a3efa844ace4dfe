#include "qfta/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "qfta/errors.hpp"

namespace fs = std::filesystem;

namespace qfta {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kEnrollP1: return "enroll-P1";
    case Split::kEnrollP2: return "enroll-P2";
    case Split::kTest: return "test";
    case Split::kImposter: return "imposter";
  }
  return "?";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "enroll-P1") return Split::kEnrollP1;
  if (name == "enroll-P2") return Split::kEnrollP2;
  if (name == "test") return Split::kTest;
  if (name == "imposter") return Split::kImposter;
  throw FormatError("unknown split tag \"" + name + "\"");
}

std::vector<const Waveform*> SpeakerCorpus::voices(
    const std::string& speaker_id, Split split) const {
  std::vector<const Waveform*> out;
  for (const Speaker& s : speakers) {
    if (s.speaker_id != speaker_id) continue;
    for (const Utterance& u : s.utterances)
      if (u.split == split) out.push_back(&u.wave);
  }
  return out;
}

const Speaker& SpeakerCorpus::speaker(const std::string& speaker_id) const {
  for (const Speaker& s : speakers)
    if (s.speaker_id == speaker_id) return s;
  throw Error("no such speaker: " + speaker_id);
}

// ---------------------------------------------------------------------------
// Synthesis

// Ranges are deliberately tight: speakers must overlap enough that imposter
// voices sit within an attack budget of enrolled speakers, as human voices
// do, while staying separable by the embedders.
SpeakerProfile sample_profile(uint64_t seed, int speaker_index) {
  Rng rng(Rng::derive(seed, 0x5eedu + static_cast<uint64_t>(speaker_index)));
  SpeakerProfile p;
  p.f0_hz = rng.uniform(110.0, 220.0);
  p.formant_centers_hz[0] = rng.uniform(350.0, 750.0);
  p.formant_centers_hz[1] = rng.uniform(1000.0, 2000.0);
  p.formant_centers_hz[2] = rng.uniform(2500.0, 3200.0);
  for (double& bw : p.formant_bandwidths_hz) bw = rng.uniform(80.0, 180.0);
  p.tilt_db_per_octave = rng.uniform(-8.0, -4.0);
  return p;
}

namespace {

// One second-order resonator section, coefficients refreshed per block so the
// formant centers can drift slowly within an utterance.
struct Resonator {
  double b0 = 1, a1 = 0, a2 = 0;
  double y1 = 0, y2 = 0;

  void tune(double fc_hz, double bw_hz) {
    const double r = std::exp(-M_PI * bw_hz / kSampleRateHz);
    const double theta = 2.0 * M_PI * fc_hz / kSampleRateHz;
    a1 = 2.0 * r * std::cos(theta);
    a2 = -r * r;
    b0 = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);
  }

  double step(double x) {
    const double y = b0 * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

Waveform synth_utterance(const SpeakerProfile& profile, double duration_s,
                         uint64_t utt_seed) {
  if (duration_s < 0.5) throw Error("synth_utterance: duration_s < 0.5");
  Rng rng(utt_seed);
  const int64_t n = static_cast<int64_t>(std::llround(duration_s *
                                                      kSampleRateHz));
  const double f0 = profile.f0_hz * (1.0 + 0.08 * (2.0 * rng.uniform() - 1.0));
  const double vib_rate = rng.uniform(3.5, 6.5);
  const double vib_depth = rng.uniform(0.02, 0.05);
  const double vib_phase = rng.uniform(0.0, 2.0 * M_PI);

  const int harmonics =
      static_cast<int>(std::min(48.0, std::floor(7600.0 / f0)));
  std::vector<double> amp(harmonics), phase(harmonics);
  for (int h = 0; h < harmonics; ++h) {
    const double octaves = std::log2(static_cast<double>(h + 1));
    amp[h] = (1.0 / (h + 1)) *
             std::pow(10.0, profile.tilt_db_per_octave * octaves / 20.0);
    phase[h] = rng.uniform(0.0, 2.0 * M_PI);
  }

  Resonator res[3];
  double drift_rate[3], drift_depth[3], drift_phase[3];
  for (int k = 0; k < 3; ++k) {
    drift_rate[k] = rng.uniform(0.3, 1.2);
    drift_depth[k] = rng.uniform(0.01, 0.04);
    drift_phase[k] = rng.uniform(0.0, 2.0 * M_PI);
  }

  Waveform w;
  w.samples.resize(static_cast<size_t>(n));
  constexpr int kBlock = 160;
  double source_phase = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRateHz;
    if (i % kBlock == 0) {
      for (int k = 0; k < 3; ++k) {
        const double fc =
            profile.formant_centers_hz[k] *
            (1.0 + drift_depth[k] *
                       std::sin(2.0 * M_PI * drift_rate[k] * t +
                                drift_phase[k]));
        res[k].tune(fc, profile.formant_bandwidths_hz[k]);
      }
    }
    const double f_inst =
        f0 * (1.0 + vib_depth * std::sin(2.0 * M_PI * vib_rate * t +
                                         vib_phase));
    source_phase += 2.0 * M_PI * f_inst / kSampleRateHz;
    double src = 0.0;
    for (int h = 0; h < harmonics; ++h)
      src += amp[h] * std::sin((h + 1) * source_phase + phase[h]);
    double y = src;
    for (auto& r : res) y = r.step(y);
    w.samples[static_cast<size_t>(i)] = y;
  }

  // -30 dB noise floor relative to the voiced signal
  double power = 0.0;
  for (double v : w.samples) power += v * v;
  power /= static_cast<double>(n);
  const double noise_sigma = std::sqrt(power * std::pow(10.0, -30.0 / 10.0));
  for (double& v : w.samples) v += noise_sigma * rng.normal();

  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    const double scale = 0.9 / peak;
    for (double& v : w.samples) v *= scale;
  }
  return w;
}

SpeakerCorpus synth_corpus(int n_speakers, int utts_per_speaker,
                           double duration_s, uint64_t seed, Split split) {
  if (n_speakers < 2) throw Error("synth_corpus: need at least 2 speakers");
  if (duration_s < 0.5) throw Error("synth_corpus: duration_s < 0.5");
  SpeakerCorpus corpus;
  corpus.speakers.resize(static_cast<size_t>(n_speakers));
  for (int s = 0; s < n_speakers; ++s) {
    Speaker& spk = corpus.speakers[static_cast<size_t>(s)];
    char buf[16];
    std::snprintf(buf, sizeof(buf), "spk%03d", s);
    spk.speaker_id = buf;
    const SpeakerProfile profile = sample_profile(seed, s);
    for (int u = 0; u < utts_per_speaker; ++u) {
      const uint64_t utt_seed =
          Rng::derive(seed, (static_cast<uint64_t>(s) << 20) |
                                static_cast<uint64_t>(u));
      spk.utterances.push_back({synth_utterance(profile, duration_s, utt_seed),
                                split});
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// WAV codec

namespace {

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0]) | (static_cast<uint16_t>(b[1]) << 8);
}

void write_u32(std::ostream& out, uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff),
                     static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff),
                     static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("read_wav: cannot open " + path);
  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0)
    throw FormatError("read_wav: missing RIFF header in " + path);
  read_u32(in);  // riff size
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0)
    throw FormatError("read_wav: missing WAVE tag in " + path);

  bool got_fmt = false;
  Waveform w;
  while (in.read(tag, 4)) {
    uint32_t chunk_size = read_u32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      const uint16_t format = read_u16(in);
      const uint16_t channels = read_u16(in);
      const uint32_t rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      const uint16_t bits = read_u16(in);
      if (format != 1)
        throw FormatError("read_wav: format=" + std::to_string(format) +
                          ", expected 1 (PCM)");
      if (channels != 1)
        throw FormatError("read_wav: channels=" + std::to_string(channels) +
                          ", expected 1");
      if (rate != kSampleRateHz)
        throw FormatError("read_wav: sample_rate=" + std::to_string(rate) +
                          ", expected 16000");
      if (bits != 16)
        throw FormatError("read_wav: bits_per_sample=" +
                          std::to_string(bits) + ", expected 16");
      if (chunk_size > 16) in.ignore(chunk_size - 16);
      got_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!got_fmt)
        throw FormatError("read_wav: data chunk before fmt chunk in " + path);
      const size_t count = chunk_size / 2;
      w.samples.resize(count);
      std::vector<unsigned char> raw(chunk_size);
      in.read(reinterpret_cast<char*>(raw.data()), chunk_size);
      if (!in) throw FormatError("read_wav: truncated data chunk in " + path);
      for (size_t i = 0; i < count; ++i) {
        const int16_t s = static_cast<int16_t>(
            static_cast<uint16_t>(raw[2 * i]) |
            (static_cast<uint16_t>(raw[2 * i + 1]) << 8));
        w.samples[i] = static_cast<double>(s) / 32768.0;
      }
      return w;
    } else {
      in.ignore(chunk_size + (chunk_size & 1));
    }
  }
  throw FormatError("read_wav: no data chunk in " + path);
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("write_wav: cannot open " + path);
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, kSampleRateHz);
  write_u32(out, kSampleRateHz * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (double v : w.samples) {
    // round half away from zero, then saturate
    double scaled = v * 32768.0;
    scaled = scaled >= 0.0 ? std::floor(scaled + 0.5) : std::ceil(scaled - 0.5);
    scaled = std::min(32767.0, std::max(-32768.0, scaled));
    write_u16(out, static_cast<uint16_t>(static_cast<int16_t>(scaled)));
  }
  if (!out) throw FormatError("write_wav: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Corpus persistence

void save_corpus(const SpeakerCorpus& corpus, const std::string& dir) {
  fs::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  for (const Speaker& spk : corpus.speakers) {
    int idx = 0;
    for (const Utterance& u : spk.utterances) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%s_%03d.wav",
                    spk.speaker_id.c_str(), split_name(u.split), idx++);
      write_wav((fs::path(dir) / name).string(), u.wave);
      manifest.push_back({{"speaker_id", spk.speaker_id},
                          {"split", split_name(u.split)},
                          {"path", name}});
    }
  }
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << manifest.dump(2) << "\n";
}

SpeakerCorpus load_corpus(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw FormatError("load_corpus: missing manifest.json in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(in);
  SpeakerCorpus corpus;
  for (const auto& rec : manifest) {
    const std::string id = rec.at("speaker_id").get<std::string>();
    const Split split = split_from_name(rec.at("split").get<std::string>());
    const std::string rel = rec.at("path").get<std::string>();
    Speaker* spk = nullptr;
    for (Speaker& s : corpus.speakers)
      if (s.speaker_id == id) spk = &s;
    if (!spk) {
      corpus.speakers.push_back({id, {}});
      spk = &corpus.speakers.back();
    }
    spk->utterances.push_back(
        {read_wav((fs::path(dir) / rel).string()), split});
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Metrics

double snr_db(const Waveform& reference, const Waveform& perturbed) {
  if (reference.size() != perturbed.size())
    throw Error("snr_db: length mismatch");
  double p_ref = 0.0, p_delta = 0.0;
  for (int64_t i = 0; i < reference.size(); ++i) {
    const double r = reference.samples[static_cast<size_t>(i)];
    const double d = perturbed.samples[static_cast<size_t>(i)] - r;
    p_ref += r * r;
    p_delta += d * d;
  }
  if (p_ref == 0.0) throw DomainError("snr_db: zero reference power");
  if (p_delta == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(p_ref / p_delta);
}

namespace {

// Plain power spectrogram used only by the LSD metric (the differentiable
// version lives in the features module).
std::vector<std::vector<double>> lsd_power_spec(const Waveform& w) {
  constexpr int kFrame = 400, kHop = 160, kDft = 512;
  const int64_t n = w.size();
  if (n < kFrame) throw Error("log_spectral_distance: input too short");
  const int64_t frames = 1 + (n - kFrame) / kHop;
  const int bins = kDft / 2 + 1;
  static thread_local std::vector<double> cos_tab, sin_tab, hann;
  if (cos_tab.empty()) {
    cos_tab.resize(kFrame * bins);
    sin_tab.resize(kFrame * bins);
    hann.resize(kFrame);
    for (int i = 0; i < kFrame; ++i)
      hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (kFrame - 1));
    for (int i = 0; i < kFrame; ++i)
      for (int b = 0; b < bins; ++b) {
        const double ang = 2.0 * M_PI * i * b / kDft;
        cos_tab[i * bins + b] = std::cos(ang);
        sin_tab[i * bins + b] = std::sin(ang);
      }
  }
  std::vector<std::vector<double>> out(static_cast<size_t>(frames));
  for (int64_t t = 0; t < frames; ++t) {
    std::vector<double>& row = out[static_cast<size_t>(t)];
    row.assign(static_cast<size_t>(bins), 0.0);
    std::vector<double> re(static_cast<size_t>(bins), 0.0),
        im(static_cast<size_t>(bins), 0.0);
    for (int i = 0; i < kFrame; ++i) {
      const double v = w.samples[static_cast<size_t>(t * kHop + i)] * hann[i];
      const double* ct = &cos_tab[static_cast<size_t>(i) * bins];
      const double* st = &sin_tab[static_cast<size_t>(i) * bins];
      for (int b = 0; b < bins; ++b) {
        re[static_cast<size_t>(b)] += v * ct[b];
        im[static_cast<size_t>(b)] -= v * st[b];
      }
    }
    for (int b = 0; b < bins; ++b)
      row[static_cast<size_t>(b)] = re[static_cast<size_t>(b)] *
                                        re[static_cast<size_t>(b)] +
                                    im[static_cast<size_t>(b)] *
                                        im[static_cast<size_t>(b)];
  }
  return out;
}

}  // namespace

double log_spectral_distance(const Waveform& a, const Waveform& b) {
  if (a.size() != b.size())
    throw Error("log_spectral_distance: length mismatch");
  constexpr double kFloor = 1e-10;
  const auto pa = lsd_power_spec(a);
  const auto pb = lsd_power_spec(b);
  double frame_acc = 0.0;
  for (size_t t = 0; t < pa.size(); ++t) {
    double freq_acc = 0.0;
    for (size_t f = 0; f < pa[t].size(); ++f) {
      const double d =
          10.0 * (std::log10(pa[t][f] + kFloor) - std::log10(pb[t][f] +
                                                             kFloor));
      freq_acc += d * d;
    }
    frame_acc += freq_acc / static_cast<double>(pa[t].size());
  }
  return std::sqrt(frame_acc / static_cast<double>(pa.size()));
}

}  // namespace qfta
