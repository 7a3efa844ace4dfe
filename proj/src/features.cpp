#include "qfta/features.hpp"

#include <cmath>
#include <mutex>

#include "qfta/errors.hpp"

namespace qfta {

const char* feature_kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::kSpectrogram: return "spectrogram";
    case FeatureKind::kFbank: return "fbank";
    case FeatureKind::kMfcc: return "mfcc";
  }
  return "?";
}

FeatureKind feature_kind_from_name(const std::string& name) {
  if (name == "spectrogram") return FeatureKind::kSpectrogram;
  if (name == "fbank") return FeatureKind::kFbank;
  if (name == "mfcc") return FeatureKind::kMfcc;
  throw ConfigError("unknown feature kind \"" + name + "\"");
}

int feature_dim(FeatureKind k, const FeatureConfig& cfg) {
  switch (k) {
    case FeatureKind::kSpectrogram: return cfg.n_bins();
    case FeatureKind::kFbank: return cfg.n_mels;
    case FeatureKind::kMfcc: return cfg.n_mfcc;
  }
  return 0;
}

void FeatureConfig::validate() const {
  if (dft_size < frame_len_samples())
    throw ConfigError("feature config: dft_size " + std::to_string(dft_size) +
                      " < frame length " +
                      std::to_string(frame_len_samples()));
  if (n_mfcc > n_mels)
    throw ConfigError("feature config: n_mfcc > n_mels");
  if (log_floor <= 0.0) throw ConfigError("feature config: log_floor <= 0");
}

int64_t frame_count(int64_t n_samples, const FeatureConfig& cfg) {
  const int64_t fl = cfg.frame_len_samples();
  if (n_samples < fl) return 0;
  return 1 + (n_samples - fl) / cfg.hop_samples();
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

FeatureMatrices build_matrices(const FeatureConfig& cfg) {
  cfg.validate();
  FeatureMatrices m;
  const int64_t fl = cfg.frame_len_samples();
  const int bins = cfg.n_bins();

  m.hann = Tensor::zeros({fl});
  for (int64_t i = 0; i < fl; ++i)
    m.hann.data[static_cast<size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                             static_cast<double>(fl - 1));

  m.dft_re = Tensor::zeros({fl, bins});
  m.dft_im = Tensor::zeros({fl, bins});
  for (int64_t i = 0; i < fl; ++i)
    for (int b = 0; b < bins; ++b) {
      const double ang = 2.0 * M_PI * static_cast<double>(i) * b /
                         cfg.dft_size;
      m.dft_re.at(i, b) = std::cos(ang);
      m.dft_im.at(i, b) = -std::sin(ang);
    }

  // Triangular mel filters spanning [0, Nyquist] on the HTK mel scale.
  const double nyquist = kSampleRateHz / 2.0;
  const double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(nyquist);
  std::vector<double> edges(static_cast<size_t>(cfg.n_mels) + 2);
  for (size_t k = 0; k < edges.size(); ++k)
    edges[k] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(k) /
                                      static_cast<double>(cfg.n_mels + 1));
  m.mel = Tensor::zeros({cfg.n_mels, bins});
  for (int f = 0; f < cfg.n_mels; ++f) {
    const double lo = edges[static_cast<size_t>(f)];
    const double mid = edges[static_cast<size_t>(f) + 1];
    const double hi = edges[static_cast<size_t>(f) + 2];
    for (int b = 0; b < bins; ++b) {
      const double hz = static_cast<double>(b) * kSampleRateHz / cfg.dft_size;
      double wgt = 0.0;
      if (hz > lo && hz < hi)
        wgt = hz <= mid ? (hz - lo) / (mid - lo) : (hi - hz) / (hi - mid);
      m.mel.at(f, b) = wgt;
    }
  }

  // Orthonormal DCT-II rows.
  m.dct = Tensor::zeros({cfg.n_mfcc, cfg.n_mels});
  for (int k = 0; k < cfg.n_mfcc; ++k) {
    const double norm = k == 0 ? std::sqrt(1.0 / cfg.n_mels)
                               : std::sqrt(2.0 / cfg.n_mels);
    for (int j = 0; j < cfg.n_mels; ++j)
      m.dct.at(k, j) =
          norm * std::cos(M_PI * k * (2.0 * j + 1.0) / (2.0 * cfg.n_mels));
  }
  return m;
}

struct MatrixCacheKey {
  double frame_len_ms, hop_ms;
  int dft_size, n_mels, n_mfcc;
  auto operator<=>(const MatrixCacheKey&) const = default;
};

}  // namespace

const FeatureMatrices& feature_matrices(const FeatureConfig& cfg) {
  static std::mutex mu;
  static std::map<MatrixCacheKey, std::unique_ptr<FeatureMatrices>> cache;
  const MatrixCacheKey key{cfg.frame_len_ms, cfg.hop_ms, cfg.dft_size,
                           cfg.n_mels, cfg.n_mfcc};
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, std::make_unique<FeatureMatrices>(
                                build_matrices(cfg)))
             .first;
  }
  return *it->second;
}

Var spectrogram_on_tape(Tape& tape, Var wave, const FeatureConfig& cfg) {
  const FeatureMatrices& m = feature_matrices(cfg);
  const int64_t n = tape.value(wave).numel();
  if (frame_count(n, cfg) < 1)
    throw ShapeError("spectrogram: input of " + std::to_string(n) +
                     " samples is shorter than one frame (" +
                     std::to_string(cfg.frame_len_samples()) + ")");
  Var f = tape.frames(wave, cfg.frame_len_samples(), cfg.hop_samples());
  Var windowed = tape.mul_rows(f, tape.constant(m.hann));
  Var re = tape.matmul(windowed, tape.constant(m.dft_re));
  Var im = tape.matmul(windowed, tape.constant(m.dft_im));
  return tape.add(tape.mul(re, re), tape.mul(im, im));
}

Var fbank_from_power(Tape& tape, Var power, const FeatureConfig& cfg) {
  const FeatureMatrices& m = feature_matrices(cfg);
  // (T x bins)(n_mels x bins)^T = (T x n_mels)
  Var energies = tape.matmul_nt(power, tape.constant(m.mel));
  return tape.log(tape.add_scalar(energies, cfg.log_floor));
}

Var mfcc_from_fbank(Tape& tape, Var fbank, const FeatureConfig& cfg) {
  const FeatureMatrices& m = feature_matrices(cfg);
  return tape.matmul_nt(fbank, tape.constant(m.dct));
}

Var features_from_power(Tape& tape, Var power, FeatureKind kind,
                        const FeatureConfig& cfg) {
  switch (kind) {
    case FeatureKind::kSpectrogram: return power;
    case FeatureKind::kFbank: return fbank_from_power(tape, power, cfg);
    case FeatureKind::kMfcc:
      return mfcc_from_fbank(tape, fbank_from_power(tape, power, cfg), cfg);
  }
  throw Error("features_from_power: bad kind");
}

Tensor extract_features(const Waveform& w, FeatureKind kind,
                        const FeatureConfig& cfg) {
  Tape tape;
  Var x = tape.constant(Tensor::vec(w.samples));
  Var power = spectrogram_on_tape(tape, x, cfg);
  Var feats = features_from_power(tape, power, kind, cfg);
  return tape.value(feats);
}

Var FeatureCache::power(Tape& tape, Var wave, const FeatureConfig& cfg) {
  if (!have_cfg_ || !(cfg_ == cfg)) {
    by_var_.clear();
    cfg_ = cfg;
    have_cfg_ = true;
  }
  auto it = by_var_.find(wave.id);
  if (it != by_var_.end()) return it->second;
  Var p = spectrogram_on_tape(tape, wave, cfg);
  by_var_.emplace(wave.id, p);
  return p;
}

}  // namespace qfta
