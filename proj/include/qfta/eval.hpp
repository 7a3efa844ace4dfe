#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qfta/attack.hpp"
#include "qfta/defense.hpp"

namespace qfta {

enum class EnrollmentSetting { kSameEnroll, kDifferEnroll };

const char* enrollment_name(EnrollmentSetting s);
EnrollmentSetting enrollment_from_name(const std::string& name);

enum class AttackMethod { kBIM, kPGD, kCW, kTDI, kQFA2SR };

const char* attack_method_name(AttackMethod m);
AttackMethod attack_method_from_name(const std::string& name);

// Shape of the synthetic benchmark: disjoint train, enrolled, and imposter
// speaker pools; enrolled speakers carry two disjoint enrollment voice sets
// (P1 for surrogates, P2 for differ-enroll targets) plus test voices.
struct CorpusPlan {
  int n_train_speakers = 40;
  int train_utts = 5;
  double train_duration_s = 2.0;
  int n_enrolled = 10;
  int enroll_voices = 5;  // per split P1 / P2
  double enroll_duration_s = 1.5;
  int test_utts = 4;
  double test_duration_s = 1.0;
  int n_imposters = 10;
  int imposter_utts = 10;
  double imposter_duration_s = 1.0;
  uint64_t seed = 7;
};

SpeakerCorpus build_benchmark_corpus(const CorpusPlan& plan);

// The four-model surrogate zoo used throughout: feature kind x scoring x
// pooling x width diversity.
std::vector<ModelSpec> default_zoo_specs();

// Trained models enrolled with each voice split, thresholds tuned at the
// EER point on the test / imposter splits.
struct BenchmarkModels {
  std::vector<SRSModel> enrolled_p1;
  std::vector<SRSModel> enrolled_p2;
};

BenchmarkModels build_benchmark_models(const SpeakerCorpus& corpus,
                                       const std::vector<ModelSpec>& specs,
                                       const FeatureConfig& cfg = {});

// Enrolls a trained background model with one split and tunes its OSI
// threshold.
SRSModel enroll_and_tune(const SRSModel& background,
                         const SpeakerCorpus& corpus, Split enroll_split,
                         Task task);

// OSI trial set: genuine = enrolled test voices scored at their own index,
// imposter = imposter voices at their maximal score.
TrialSet osi_trials(const SRSModel& model, const SpeakerCorpus& corpus);

// SV trial set for a single-speaker enrollment: scalar scores of the
// enrolled speaker's test voices vs imposter voices.
TrialSet sv_trials(const SRSModel& model, const SpeakerCorpus& corpus);

// --- transfer runs ---

struct TransferOutcome {
  int seed_index = -1;
  std::string source_speaker;
  int assigned_target = -1;  // -1 for untargeted
  Waveform adversarial;
  Decision surrogate_decision;  // on the first surrogate
  Decision target_decision;
  bool success = false;
  double snr_db = 0.0;
  double lsd = 0.0;
};

struct SeedVoice {
  const Waveform* wave = nullptr;
  std::string speaker_id;
  int seed_index = 0;
  int assigned_target = -1;
};

// Seed voices already accepted by the target are discarded before attacking.
std::vector<SeedVoice> filter_falsely_accepted(
    const std::vector<SeedVoice>& seeds, const SRSModel& target, Task task);

// Crafts one adversarial voice per seed against the surrogates and evaluates
// on the target. Seeds are processed by an OpenMP worker pool; per-seed
// attack seeds derive from (cfg.seed, seed_index) so results do not depend
// on scheduling. An optional defense is applied in front of the target.
std::vector<TransferOutcome> run_transfer(
    const std::vector<SeedVoice>& seeds,
    const std::vector<const SRSModel*>& surrogates, const SRSModel& target,
    const std::vector<SerialMod>& mods, AttackMethod method,
    const AttackConfig& cfg, int jobs = 0,
    const std::optional<Defense>& defense = std::nullopt);

// Success fraction; throws on an empty result set.
double asr(const std::vector<TransferOutcome>& results, Scenario scenario);

// Fraction of target speakers imitated within the first `gamma` ranked
// candidates. `decisions[i]` is the target's decision on candidate i.
double asr_with_queries(const SelectionRanking& ranking,
                        const std::vector<Decision>& decisions,
                        int target_speaker_index, int gamma);

// --- experiment plans and reports ---

struct ExperimentPlan {
  Scenario scenario = Scenario::kTargetedOSI;
  EnrollmentSetting enrollment = EnrollmentSetting::kDifferEnroll;
  CorpusPlan corpus;
  std::vector<ModelSpec> zoo;      // empty -> default zoo
  int target_index = 0;            // leave-one-out selector
  AttackMethod method = AttackMethod::kQFA2SR;
  bool use_corrosion = true;
  AttackConfig attack;
  int n_seeds = 40;                // seed voices drawn from the imposter pool
  std::optional<Defense> defense;
  std::optional<int> gamma;
  uint64_t master_seed = 1;
  int jobs = 0;
  int rir_count = 16;
};

struct ExperimentReport {
  std::vector<TransferOutcome> rows;
  double asr = 0.0;
  double mean_snr_db = 0.0;
  double mean_lsd = 0.0;
  std::string run_id;
  std::string plan_echo_json;
};

// Full pipeline: corpus -> zoo -> enroll per setting -> tune -> discard
// falsely accepted seeds -> attacks -> evaluation. Stage failures carry the
// stage name.
ExperimentReport run_experiment(const ExperimentPlan& plan);

// rows as CSV; aggregates + plan echo + run id as JSON
void write_report(const ExperimentReport& report, const std::string& csv_path,
                  const std::string& json_path);

// Re-aggregates a rows CSV and checks it against the stored aggregates;
// returns the recomputed ASR.
double verify_report(const std::string& csv_path,
                     const std::string& json_path);

std::string plan_to_json(const ExperimentPlan& plan);

}  // namespace qfta
