#include "qfta/defense.hpp"

#include <algorithm>
#include <cmath>

#include "qfta/corrosion.hpp"
#include "qfta/errors.hpp"
#include "qfta/kernels.hpp"
#include "qfta/rng.hpp"

namespace qfta {

const char* defense_kind_name(DefenseKind k) {
  switch (k) {
    case DefenseKind::kQT: return "qt";
    case DefenseKind::kAT: return "at";
    case DefenseKind::kAS: return "as";
    case DefenseKind::kMS: return "ms";
    case DefenseKind::kDS: return "ds";
    case DefenseKind::kLPF: return "lpf";
    case DefenseKind::kBPF: return "bpf";
  }
  return "?";
}

DefenseKind defense_kind_from_name(const std::string& name) {
  for (DefenseKind k : {DefenseKind::kQT, DefenseKind::kAT, DefenseKind::kAS,
                        DefenseKind::kMS, DefenseKind::kDS, DefenseKind::kLPF,
                        DefenseKind::kBPF})
    if (name == defense_kind_name(k)) return k;
  throw ConfigError("unknown defense \"" + name + "\"");
}

Defense defense_qt(int levels) {
  if (levels < 2) throw ConfigError("qt: levels >= 2");
  Defense d;
  d.kind = DefenseKind::kQT;
  d.levels = levels;
  return d;
}

Defense defense_at(double snr_db, uint64_t seed) {
  Defense d;
  d.kind = DefenseKind::kAT;
  d.snr_db = snr_db;
  d.seed = seed;
  return d;
}

Defense defense_as(int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("as: kernel must be odd");
  Defense d;
  d.kind = DefenseKind::kAS;
  d.kernel = kernel;
  return d;
}

Defense defense_ms(int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("ms: kernel must be odd");
  Defense d;
  d.kind = DefenseKind::kMS;
  d.kernel = kernel;
  return d;
}

Defense defense_ds(int factor) {
  if (factor < 2) throw ConfigError("ds: factor >= 2");
  Defense d;
  d.kind = DefenseKind::kDS;
  d.factor = factor;
  return d;
}

Defense defense_lpf(double cutoff_hz) {
  if (cutoff_hz <= 0 || cutoff_hz >= kSampleRateHz / 2.0)
    throw ConfigError("lpf: cutoff must be inside (0, Nyquist)");
  Defense d;
  d.kind = DefenseKind::kLPF;
  d.cutoff_hz = cutoff_hz;
  return d;
}

Defense defense_bpf(double low_hz, double high_hz) {
  if (low_hz <= 0 || low_hz >= high_hz || high_hz >= kSampleRateHz / 2.0)
    throw ConfigError("bpf: need 0 < low < high < Nyquist");
  Defense d;
  d.kind = DefenseKind::kBPF;
  d.low_hz = low_hz;
  d.high_hz = high_hz;
  return d;
}

namespace {

void clamp_unit(std::vector<double>& v) {
  for (double& x : v) x = std::min(1.0, std::max(-1.0, x));
}

// Windowed-sinc low-pass, 101 taps, Hamming.
std::vector<double> lowpass_fir(double cutoff_hz, int taps = 101) {
  const int m = (taps - 1) / 2;
  std::vector<double> h(static_cast<size_t>(taps));
  for (int n = 0; n < taps; ++n) {
    const double x = static_cast<double>(n - m);
    const double arg = 2.0 * cutoff_hz / kSampleRateHz;
    const double sinc =
        n == m ? arg : arg * std::sin(M_PI * arg * x) / (M_PI * arg * x);
    const double hamming = 0.54 - 0.46 * std::cos(2.0 * M_PI * n / (taps - 1));
    h[static_cast<size_t>(n)] = sinc * hamming;
  }
  return h;
}

std::vector<double> fir_same(const std::vector<double>& x,
                             const std::vector<double>& h) {
  std::vector<double> y(x.size());
  kernels::conv1d_same(x.data(), static_cast<int64_t>(x.size()), h.data(),
                       static_cast<int64_t>(h.size()), y.data());
  return y;
}

}  // namespace

Waveform apply_defense(const Defense& d, const Waveform& x) {
  Waveform out = x;
  const int64_t n = x.size();
  switch (d.kind) {
    case DefenseKind::kQT: {
      for (double& v : out.samples) {
        double scaled = v * d.levels;
        scaled = scaled >= 0 ? std::floor(scaled + 0.5)
                             : std::ceil(scaled - 0.5);
        v = scaled / d.levels;
      }
      break;
    }
    case DefenseKind::kAT: {
      Rng rng(Rng::derive(d.seed, 0xA7));
      double power = 0.0;
      for (double v : x.samples) power += v * v;
      power /= static_cast<double>(n);
      const double sigma =
          std::sqrt(power / std::pow(10.0, d.snr_db / 10.0));
      for (double& v : out.samples) v += sigma * rng.normal();
      break;
    }
    case DefenseKind::kAS: {
      const int half = d.kernel / 2;
      for (int64_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int j = -half; j <= half; ++j) {
          const int64_t idx = std::min(n - 1, std::max<int64_t>(0, i + j));
          acc += x.samples[static_cast<size_t>(idx)];
        }
        out.samples[static_cast<size_t>(i)] = acc / d.kernel;
      }
      break;
    }
    case DefenseKind::kMS: {
      const int half = d.kernel / 2;
      std::vector<double> window(static_cast<size_t>(d.kernel));
      for (int64_t i = 0; i < n; ++i) {
        for (int j = -half; j <= half; ++j) {
          const int64_t idx = std::min(n - 1, std::max<int64_t>(0, i + j));
          window[static_cast<size_t>(j + half)] =
              x.samples[static_cast<size_t>(idx)];
        }
        std::nth_element(window.begin(), window.begin() + half, window.end());
        out.samples[static_cast<size_t>(i)] = window[static_cast<size_t>(half)];
      }
      break;
    }
    case DefenseKind::kDS: {
      // decimate then linearly interpolate back to the original length
      std::vector<double> down;
      for (int64_t i = 0; i < n; i += d.factor)
        down.push_back(x.samples[static_cast<size_t>(i)]);
      const int64_t dn = static_cast<int64_t>(down.size());
      for (int64_t i = 0; i < n; ++i) {
        const double pos = static_cast<double>(i) / d.factor;
        int64_t lo = static_cast<int64_t>(std::floor(pos));
        lo = std::min(lo, dn - 1);
        const int64_t hi = std::min(lo + 1, dn - 1);
        const double w = pos - static_cast<double>(lo);
        out.samples[static_cast<size_t>(i)] =
            (1.0 - w) * down[static_cast<size_t>(lo)] +
            w * down[static_cast<size_t>(hi)];
      }
      break;
    }
    case DefenseKind::kLPF: {
      out.samples = fir_same(x.samples, lowpass_fir(d.cutoff_hz));
      break;
    }
    case DefenseKind::kBPF: {
      const std::vector<double> lo = lowpass_fir(d.low_hz);
      const std::vector<double> hi = lowpass_fir(d.high_hz);
      std::vector<double> band(hi.size());
      for (size_t i = 0; i < band.size(); ++i) band[i] = hi[i] - lo[i];
      out.samples = fir_same(x.samples, band);
      break;
    }
  }
  clamp_unit(out.samples);
  return out;
}

DefenseReport evaluate_defense(
    const Defense& defense, const SRSModel& target, Task task,
    const std::vector<std::pair<const Waveform*, int>>& enrolled_voices,
    const std::vector<const Waveform*>& imposter_voices,
    const std::vector<std::pair<const Waveform*, int>>& adversarial_voices) {
  DefenseReport report;
  if (!enrolled_voices.empty()) {
    int ok = 0;
    for (const auto& [wave, speaker] : enrolled_voices) {
      const Decision d =
          decide(target, score(target, apply_defense(defense, *wave)), task);
      if (d.speaker_index == speaker) ++ok;
    }
    report.acc_enrolled =
        static_cast<double>(ok) / static_cast<double>(enrolled_voices.size());
  }
  if (!imposter_voices.empty()) {
    int ok = 0;
    for (const Waveform* wave : imposter_voices) {
      const Decision d =
          decide(target, score(target, apply_defense(defense, *wave)), task);
      if (!d.accepted()) ++ok;
    }
    report.acc_imposter =
        static_cast<double>(ok) / static_cast<double>(imposter_voices.size());
  }
  if (!adversarial_voices.empty()) {
    int ok = 0;
    for (const auto& [wave, goal] : adversarial_voices) {
      const Decision d =
          decide(target, score(target, apply_defense(defense, *wave)), task);
      const bool attack_succeeds =
          goal >= 0 ? d.speaker_index == goal : d.accepted();
      if (!attack_succeeds) ++ok;
    }
    report.acc_adversarial = static_cast<double>(ok) /
                             static_cast<double>(adversarial_voices.size());
  }
  return report;
}

}  // namespace qfta
