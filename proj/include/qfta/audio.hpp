#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qfta/rng.hpp"

namespace qfta {

constexpr int kSampleRateHz = 16000;

// Mono audio in [-1, 1] at 16 kHz.
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = kSampleRateHz;

  int64_t size() const { return static_cast<int64_t>(samples.size()); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

enum class Split { kTrain, kEnrollP1, kEnrollP2, kTest, kImposter };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct Utterance {
  Waveform wave;
  Split split = Split::kTrain;
};

struct Speaker {
  std::string speaker_id;
  std::vector<Utterance> utterances;
};

struct SpeakerCorpus {
  std::vector<Speaker> speakers;

  // All waveforms of one speaker restricted to a split.
  std::vector<const Waveform*> voices(const std::string& speaker_id,
                                      Split split) const;
  const Speaker& speaker(const std::string& speaker_id) const;
};

// Synthetic stand-in for a real speaker: glottal pitch plus three vocal-tract
// resonances and a spectral tilt.
struct SpeakerProfile {
  double f0_hz = 0;                      // in [80, 300]
  double formant_centers_hz[3] = {};     // strictly increasing, below Nyquist
  double formant_bandwidths_hz[3] = {};
  double tilt_db_per_octave = 0;
};

// Deterministic per (seed, speaker_index).
SpeakerProfile sample_profile(uint64_t seed, int speaker_index);

// One utterance of the given speaker: harmonic source at jittered f0 through
// time-varying formant resonators plus a -30 dB noise floor, peak-normalized
// to 0.9. Deterministic per (profile, utt_seed).
Waveform synth_utterance(const SpeakerProfile& profile, double duration_s,
                         uint64_t utt_seed);

// n_speakers x utts_per_speaker corpus; speaker ids "spkNNN". All utterances
// carry the given split tag.
SpeakerCorpus synth_corpus(int n_speakers, int utts_per_speaker,
                           double duration_s, uint64_t seed,
                           Split split = Split::kTrain);

// --- WAV codec: RIFF/WAVE, PCM 16-bit little-endian, mono, 16 kHz only ---
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& w);

// Corpus on disk: one WAV per utterance plus manifest.json holding
// {speaker_id, split, relative path} records.
void save_corpus(const SpeakerCorpus& corpus, const std::string& dir);
SpeakerCorpus load_corpus(const std::string& dir);

// --- metrics ---

// 10*log10(P_ref / P_delta). Returns +inf when the perturbation is zero;
// throws DomainError when the reference has zero power.
double snr_db(const Waveform& reference, const Waveform& perturbed);

// RMS over frames of the RMS-over-frequency of the difference of the two
// log power spectrograms, in dB.
double log_spectral_distance(const Waveform& a, const Waveform& b);

}  // namespace qfta
