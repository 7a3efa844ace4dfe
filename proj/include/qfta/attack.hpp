#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qfta/corrosion.hpp"
#include "qfta/losses.hpp"
#include "qfta/srs.hpp"

namespace qfta {

// Dynamic weighting normalizes each member's loss by its running mean and
// deviation; uniform weighting averages the raw losses (the image-domain
// baseline it is compared against).
enum class WeightingMode { kDynamic, kUniform };

struct AttackConfig {
  double epsilon = 0.02;      // L-infinity budget
  double alpha = 0.004;       // step size, epsilon / 5
  int n_steps = 300;          // N
  int sampling_size = 5;      // beta; 1 when no corrosion
  LossKind loss = LossKind::kF1;
  RankStrategy rank_strategy = RankStrategy::kSumGlobal;
  WeightingMode weighting = WeightingMode::kDynamic;
  Scenario scenario = Scenario::kTargetedOSI;
  int target_speaker = 0;  // t for targeted OSI
  uint64_t seed = 0;
  bool record_trace = false;
  // CW-style confidence margin: loss becomes max{margin, -kappa} and the
  // attack stops early once margin <= -kappa.
  std::optional<double> cw_kappa;
  // Called after every iterate update (feasibility checks, live monitoring).
  std::function<void(int iteration, const Waveform& x)> on_iterate;
};

AttackConfig default_config(Scenario scenario);

struct TraceRow {
  int iteration = 0;
  std::vector<double> raw_loss;         // per zoo member
  std::vector<double> normalized_loss;  // per zoo member
  double f_ens = 0.0;
};

struct AttackResult {
  Waveform adversarial;
  double final_loss = 0.0;
  double snr_db = 0.0;
  // score vector of the adversarial voice on each distinct base model of the
  // zoo, in first-appearance order
  std::vector<std::vector<double>> final_scores;
  std::vector<TraceRow> trace;
  int iterations_run = 0;
};

// Per-SRS running loss statistics with dynamic weighting:
//   mu_k <- mu_k + (f_k - mu_k) / n
//   sigma_k <- sigma_k + ((f_k - mu_k)^2 - sigma_k) / n   (updated mu)
// sigma is clamped to >= 1e-12 after each update; the normalized loss is
// (f_k - mu_k) / sqrt(sigma_k), with 0/0 read as 0.
class EnsembleStats {
 public:
  static constexpr double kSigmaFloor = 1e-12;

  explicit EnsembleStats(int k) : mu_(k, 0.0), sigma_(k, 1.0) {}

  void next_iteration() { ++n_; }
  // Updates the statistics of SRS k and returns the normalized loss value.
  double update(int k, double f);
  double mu(int k) const { return mu_[static_cast<size_t>(k)]; }
  double sigma(int k) const { return sigma_[static_cast<size_t>(k)]; }
  double weight(int k) const {
    return 1.0 / std::sqrt(sigma_[static_cast<size_t>(k)]);
  }
  int iteration() const { return n_; }

 private:
  std::vector<double> mu_, sigma_;
  int n_ = 0;
};

// Iterative sign-gradient attack against a (possibly simulated) SRS zoo with
// dynamic loss weighting. Every iterate satisfies |x - x0|_inf <= epsilon
// and x in [-1, 1].
AttackResult ensemble_attack(const Waveform& x0,
                             const std::vector<SimulatedSRS>& zoo,
                             const AttackConfig& cfg);

// As above but starting from a different point inside the ball (the clip
// still references x0). Used by the random-restart baseline.
AttackResult ensemble_attack_from(const Waveform& x0, const Waveform& start,
                                  const std::vector<SimulatedSRS>& zoo,
                                  const AttackConfig& cfg);

// Builds the simulated zoo (bare zoo when mods is empty) and runs the
// ensemble attack.
AttackResult qfa2sr(const Waveform& x0,
                    const std::vector<const SRSModel*>& srs_zoo,
                    const std::vector<SerialMod>& mods,
                    const AttackConfig& cfg);

// --- baselines ---

// Single surrogate, no corrosion, beta = 1.
AttackResult bim(const Waveform& x0, const SRSModel& srs, AttackConfig cfg);

// Random-start restarts of BIM; returns the restart with minimal final loss.
// All restarts respect the epsilon ball around the original x0.
AttackResult pgd(const Waveform& x0, const SRSModel& srs, AttackConfig cfg,
                 int restarts = 10, bool random_start = true);

// BIM driven by max{margin, -kappa} with kappa = 5 * theta of the surrogate.
AttackResult cw_margin(const Waveform& x0, const SRSModel& srs,
                       AttackConfig cfg);

// Reverses the samples inside consecutive windows of `window_samples`.
Waveform reverse_in_windows(const Waveform& x, int64_t window_samples);

// Time-domain-inversion hidden voice: sweeps the window from 1 ms to 10 ms
// in 0.5 ms steps and returns the first variant that the SRS still
// recognizes as `original_speaker`; nullopt if none survives.
std::optional<Waveform> tdi_hidden_voice(const Waveform& x,
                                         const SRSModel& srs, Task task,
                                         int original_speaker);

// --- few-query candidate selection ---

struct SelectionRanking {
  // per_surrogate[r][i] = rank of candidate i by surrogate r (1 = best)
  std::vector<std::vector<int>> per_surrogate;
  std::vector<int> aggregate;  // lambda(i) = sum_r per_surrogate[r][i]
  std::vector<int> order;      // candidate indices, best first
};

struct GeneralizedResult {
  std::vector<AttackResult> candidates;
  SelectionRanking ranking;
};

// Crafts one adversarial voice per seed, ranks the candidates by their
// target-speaker scores across the surrogate zoo, and orders them for the
// query-limited transfer phase. Targeted scenarios only.
GeneralizedResult generalized_qfa2sr(
    int target_speaker, const std::vector<const Waveform*>& seeds,
    const std::vector<const SRSModel*>& srs_zoo,
    const std::vector<SerialMod>& mods, const AttackConfig& cfg);

// Ranks pre-built candidates (used by tests and the CLI `select` command).
SelectionRanking rank_candidates(
    const std::vector<const Waveform*>& candidates, int target_speaker,
    const std::vector<const SRSModel*>& srs_zoo);

// Core of the ranking: target_scores[r][i] is candidate i's target-speaker
// score on surrogate r.
SelectionRanking rank_candidates_from_scores(
    const std::vector<std::vector<double>>& target_scores);

// Attack trace as CSV: iteration, per-SRS raw loss, normalized loss, f_ens.
void write_trace_csv(const std::string& path,
                     const std::vector<TraceRow>& trace);

}  // namespace qfta
