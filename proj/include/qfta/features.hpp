#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "qfta/audio.hpp"
#include "qfta/tensor.hpp"

namespace qfta {

enum class FeatureKind { kSpectrogram, kFbank, kMfcc };

const char* feature_kind_name(FeatureKind k);
FeatureKind feature_kind_from_name(const std::string& name);
int feature_dim(FeatureKind k, const struct FeatureConfig& cfg);

struct FeatureConfig {
  double frame_len_ms = 25.0;
  double hop_ms = 10.0;
  int dft_size = 512;
  int n_mels = 40;
  int n_mfcc = 20;
  double log_floor = 1e-10;

  int64_t frame_len_samples() const {
    return static_cast<int64_t>(frame_len_ms * kSampleRateHz / 1000.0);
  }
  int64_t hop_samples() const {
    return static_cast<int64_t>(hop_ms * kSampleRateHz / 1000.0);
  }
  int n_bins() const { return dft_size / 2 + 1; }
  void validate() const;

  bool operator==(const FeatureConfig&) const = default;
};

// Frame count for a waveform of n samples: 1 + floor((n - frame_len) / hop).
int64_t frame_count(int64_t n_samples, const FeatureConfig& cfg);

// Precomputed Hann window, real/imag DFT matrices, mel filterbank and DCT
// basis for one config; built once and shared read-only.
struct FeatureMatrices {
  Tensor hann;      // (frame_len)
  Tensor dft_re;    // (frame_len x bins)
  Tensor dft_im;    // (frame_len x bins)
  Tensor mel;       // (n_mels x bins), triangular filters, HTK mel scale
  Tensor dct;       // (n_mfcc x n_mels), orthonormal DCT-II rows
};

const FeatureMatrices& feature_matrices(const FeatureConfig& cfg);

// Power spectrogram (T x bins), fully on-tape.
Var spectrogram_on_tape(Tape& tape, Var wave, const FeatureConfig& cfg);

// fbank = log(mel * power^T + floor)^T -> (T x n_mels);
// mfcc  = fbank * dct^T               -> (T x n_mfcc).
// Both accept the power spectrogram so frequency-domain corrosion can be
// applied between the two stages.
Var fbank_from_power(Tape& tape, Var power, const FeatureConfig& cfg);
Var mfcc_from_fbank(Tape& tape, Var fbank, const FeatureConfig& cfg);

// Final feature matrix of the requested kind from a power spectrogram.
Var features_from_power(Tape& tape, Var power, FeatureKind kind,
                        const FeatureConfig& cfg);

// Convenience non-tape extraction (used for training caches and metrics).
Tensor extract_features(const Waveform& w, FeatureKind kind,
                        const FeatureConfig& cfg);

// Per-iteration memo for sharing the power spectrogram of one waveform Var
// across zoo members whose time-domain path is identical.
class FeatureCache {
 public:
  Var power(Tape& tape, Var wave, const FeatureConfig& cfg);

 private:
  std::map<int32_t, Var> by_var_;
  FeatureConfig cfg_{};
  bool have_cfg_ = false;
};

}  // namespace qfta
