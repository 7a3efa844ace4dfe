#pragma once

#include <string>
#include <vector>

#include "qfta/audio.hpp"
#include "qfta/srs.hpp"

namespace qfta {

enum class DefenseKind { kQT, kAT, kAS, kMS, kDS, kLPF, kBPF };

const char* defense_kind_name(DefenseKind k);
DefenseKind defense_kind_from_name(const std::string& name);

// Transformation defense in front of a target SRS. All members preserve
// length and the [-1, 1] range.
struct Defense {
  DefenseKind kind = DefenseKind::kQT;
  int levels = 512;        // QT
  double snr_db = 15.0;    // AT (noise is drawn from `seed`)
  int kernel = 5;          // AS / MS, odd
  int factor = 2;          // DS
  double cutoff_hz = 4000.0;               // LPF
  double low_hz = 300.0, high_hz = 4000.0; // BPF
  uint64_t seed = 0;
};

Defense defense_qt(int levels = 512);
Defense defense_at(double snr_db = 15.0, uint64_t seed = 0);
Defense defense_as(int kernel = 5);
Defense defense_ms(int kernel = 5);
Defense defense_ds(int factor = 2);
Defense defense_lpf(double cutoff_hz = 4000.0);
Defense defense_bpf(double low_hz = 300.0, double high_hz = 4000.0);

Waveform apply_defense(const Defense& defense, const Waveform& x);

struct DefenseReport {
  double acc_enrolled = 0.0;     // correct accept + identify
  double acc_imposter = 0.0;     // correct reject
  double acc_adversarial = 0.0;  // attack fails on the defended SRS
};

// Accuracy of the defended target on enrolled-speaker voices, imposter
// voices, and adversarial voices. For the adversarial set, "accurate" means
// the attack goal fails: rejection or, for targeted goals, any decision
// other than the intended target speaker.
DefenseReport evaluate_defense(
    const Defense& defense, const SRSModel& target, Task task,
    const std::vector<std::pair<const Waveform*, int>>& enrolled_voices,
    const std::vector<const Waveform*>& imposter_voices,
    const std::vector<std::pair<const Waveform*, int>>& adversarial_voices);

}  // namespace qfta
