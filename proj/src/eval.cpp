#include "qfta/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "qfta/errors.hpp"

namespace qfta {

const char* enrollment_name(EnrollmentSetting s) {
  return s == EnrollmentSetting::kSameEnroll ? "same-enroll" : "differ-enroll";
}

EnrollmentSetting enrollment_from_name(const std::string& name) {
  if (name == "same-enroll") return EnrollmentSetting::kSameEnroll;
  if (name == "differ-enroll") return EnrollmentSetting::kDifferEnroll;
  throw ConfigError("unknown enrollment setting \"" + name + "\"");
}

const char* attack_method_name(AttackMethod m) {
  switch (m) {
    case AttackMethod::kBIM: return "bim";
    case AttackMethod::kPGD: return "pgd";
    case AttackMethod::kCW: return "cw";
    case AttackMethod::kTDI: return "tdi";
    case AttackMethod::kQFA2SR: return "qfa2sr";
  }
  return "?";
}

AttackMethod attack_method_from_name(const std::string& name) {
  for (AttackMethod m : {AttackMethod::kBIM, AttackMethod::kPGD,
                         AttackMethod::kCW, AttackMethod::kTDI,
                         AttackMethod::kQFA2SR})
    if (name == attack_method_name(m)) return m;
  throw ConfigError("unknown attack method \"" + name + "\"");
}

// ---------------------------------------------------------------------------
// Benchmark assembly

SpeakerCorpus build_benchmark_corpus(const CorpusPlan& plan) {
  SpeakerCorpus corpus;
  int profile_index = 0;
  char buf[32];

  for (int s = 0; s < plan.n_train_speakers; ++s) {
    const SpeakerProfile profile = sample_profile(plan.seed, profile_index);
    std::snprintf(buf, sizeof(buf), "train%03d", s);
    Speaker spk{buf, {}};
    for (int u = 0; u < plan.train_utts; ++u)
      spk.utterances.push_back(
          {synth_utterance(profile, plan.train_duration_s,
                           Rng::derive(plan.seed,
                                       (static_cast<uint64_t>(profile_index)
                                        << 20) |
                                           static_cast<uint64_t>(u))),
           Split::kTrain});
    corpus.speakers.push_back(std::move(spk));
    ++profile_index;
  }

  for (int s = 0; s < plan.n_enrolled; ++s) {
    const SpeakerProfile profile = sample_profile(plan.seed, profile_index);
    std::snprintf(buf, sizeof(buf), "spk%03d", s);
    Speaker spk{buf, {}};
    int utt = 0;
    auto add = [&](Split split, int count, double duration) {
      for (int u = 0; u < count; ++u)
        spk.utterances.push_back(
            {synth_utterance(profile, duration,
                             Rng::derive(plan.seed,
                                         (static_cast<uint64_t>(profile_index)
                                          << 20) |
                                             static_cast<uint64_t>(utt++))),
             split});
    };
    add(Split::kEnrollP1, plan.enroll_voices, plan.enroll_duration_s);
    add(Split::kEnrollP2, plan.enroll_voices, plan.enroll_duration_s);
    add(Split::kTest, plan.test_utts, plan.test_duration_s);
    corpus.speakers.push_back(std::move(spk));
    ++profile_index;
  }

  for (int s = 0; s < plan.n_imposters; ++s) {
    const SpeakerProfile profile = sample_profile(plan.seed, profile_index);
    std::snprintf(buf, sizeof(buf), "imp%03d", s);
    Speaker spk{buf, {}};
    for (int u = 0; u < plan.imposter_utts; ++u)
      spk.utterances.push_back(
          {synth_utterance(profile, plan.imposter_duration_s,
                           Rng::derive(plan.seed,
                                       (static_cast<uint64_t>(profile_index)
                                        << 20) |
                                           static_cast<uint64_t>(u))),
           Split::kImposter});
    corpus.speakers.push_back(std::move(spk));
    ++profile_index;
  }
  return corpus;
}

// Diversity axes: width x pooling x scoring backend x seed. All members
// share the fbank front end; mixing feature kinds at this scale drives
// cross-model transfer of every attack to zero, which would make the
// benchmark comparisons vacuous.
std::vector<ModelSpec> default_zoo_specs() {
  std::vector<ModelSpec> specs(4);
  specs[0] = {FeatureKind::kFbank, 24, 16, PoolingKind::kMean,
              ScoringKind::kCosine, 101};
  specs[1] = {FeatureKind::kFbank, 40, 16, PoolingKind::kMeanStd,
              ScoringKind::kCosine, 202};
  specs[2] = {FeatureKind::kFbank, 32, 16, PoolingKind::kMean,
              ScoringKind::kAffineInner, 303};
  specs[3] = {FeatureKind::kFbank, 24, 16, PoolingKind::kMeanStd,
              ScoringKind::kAffineInner, 404};
  return specs;
}

TrialSet osi_trials(const SRSModel& model, const SpeakerCorpus& corpus) {
  TrialSet trials;
  for (int i = 0; i < model.n_enrolled(); ++i) {
    for (const Waveform* test :
         corpus.voices(model.enrolled_ids[static_cast<size_t>(i)],
                       Split::kTest))
      trials.genuine_scores.push_back(
          score(model, *test)[static_cast<size_t>(i)]);
  }
  for (const Speaker& spk : corpus.speakers) {
    for (const Utterance& u : spk.utterances) {
      if (u.split != Split::kImposter) continue;
      const std::vector<double> s = score(model, u.wave);
      trials.imposter_scores.push_back(*std::max_element(s.begin(), s.end()));
    }
  }
  return trials;
}

TrialSet sv_trials(const SRSModel& model, const SpeakerCorpus& corpus) {
  if (model.n_enrolled() != 1)
    throw ContractError("sv_trials: model must have exactly one enrollment");
  TrialSet trials;
  for (const Waveform* test :
       corpus.voices(model.enrolled_ids.front(), Split::kTest))
    trials.genuine_scores.push_back(score(model, *test)[0]);
  for (const Speaker& spk : corpus.speakers)
    for (const Utterance& u : spk.utterances)
      if (u.split == Split::kImposter)
        trials.imposter_scores.push_back(score(model, u.wave)[0]);
  return trials;
}

SRSModel enroll_and_tune(const SRSModel& background,
                         const SpeakerCorpus& corpus, Split enroll_split,
                         Task task) {
  SRSModel model = background;
  model.enrolled_ids.clear();
  model.enrolled = Tensor{};
  for (const Speaker& spk : corpus.speakers) {
    std::vector<const Waveform*> voices;
    for (const Utterance& u : spk.utterances)
      if (u.split == enroll_split) voices.push_back(&u.wave);
    if (!voices.empty()) enroll(model, spk.speaker_id, voices);
  }
  if (model.n_enrolled() == 0)
    throw StageError("enroll", "no speakers carry split " +
                                   std::string(split_name(enroll_split)));
  if (task == Task::kSV && model.n_enrolled() != 1)
    throw StageError("enroll", "SV enrollment needs exactly one speaker");
  model.threshold =
      tune_threshold_eer(task == Task::kSV ? sv_trials(model, corpus)
                                           : osi_trials(model, corpus))
          .threshold;
  return model;
}

BenchmarkModels build_benchmark_models(const SpeakerCorpus& corpus,
                                       const std::vector<ModelSpec>& specs,
                                       const FeatureConfig& cfg) {
  BenchmarkModels out;
  for (const ModelSpec& spec : specs) {
    const SRSModel background = train_background(corpus, spec, cfg);
    out.enrolled_p1.push_back(
        enroll_and_tune(background, corpus, Split::kEnrollP1, Task::kOSI));
    out.enrolled_p2.push_back(
        enroll_and_tune(background, corpus, Split::kEnrollP2, Task::kOSI));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transfer runs

std::vector<SeedVoice> filter_falsely_accepted(
    const std::vector<SeedVoice>& seeds, const SRSModel& target, Task task) {
  std::vector<SeedVoice> kept;
  for (const SeedVoice& s : seeds)
    if (!decide(target, score(target, *s.wave), task).accepted())
      kept.push_back(s);
  return kept;
}

namespace {

AttackResult craft(const SeedVoice& seed,
                   const std::vector<const SRSModel*>& surrogates,
                   const std::vector<SerialMod>& mods, AttackMethod method,
                   AttackConfig cfg) {
  cfg.target_speaker = seed.assigned_target >= 0 ? seed.assigned_target : 0;
  cfg.seed = Rng::derive(cfg.seed, 0x5eedULL * 31 +
                                       static_cast<uint64_t>(seed.seed_index));
  switch (method) {
    case AttackMethod::kQFA2SR:
      return qfa2sr(*seed.wave, surrogates, mods, cfg);
    case AttackMethod::kBIM:
      if (surrogates.size() != 1)
        throw ContractError("bim: exactly one surrogate");
      return bim(*seed.wave, *surrogates.front(), cfg);
    case AttackMethod::kPGD:
      if (surrogates.size() != 1)
        throw ContractError("pgd: exactly one surrogate");
      return pgd(*seed.wave, *surrogates.front(), cfg);
    case AttackMethod::kCW:
      if (surrogates.size() != 1)
        throw ContractError("cw: exactly one surrogate");
      return cw_margin(*seed.wave, *surrogates.front(), cfg);
    case AttackMethod::kTDI:
      throw ContractError("tdi is driven by run_transfer directly");
  }
  throw Error("craft: bad method");
}

}  // namespace

std::vector<TransferOutcome> run_transfer(
    const std::vector<SeedVoice>& seeds,
    const std::vector<const SRSModel*>& surrogates, const SRSModel& target,
    const std::vector<SerialMod>& mods, AttackMethod method,
    const AttackConfig& cfg, int jobs, const std::optional<Defense>& defense) {
  const Task task =
      cfg.scenario == Scenario::kTargetedSV ? Task::kSV : Task::kOSI;
  std::vector<TransferOutcome> out(seeds.size());
  const int n_threads = jobs > 0 ? jobs : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic) num_threads(n_threads)
  for (size_t i = 0; i < seeds.size(); ++i) {
    const SeedVoice& seed = seeds[i];
    TransferOutcome& row = out[i];
    row.seed_index = seed.seed_index;
    row.source_speaker = seed.speaker_id;
    row.assigned_target = seed.assigned_target;

    if (method == AttackMethod::kTDI) {
      // hidden voice: perturb while the surrogate keeps recognizing the goal
      const std::optional<Waveform> variant = tdi_hidden_voice(
          *seed.wave, *surrogates.front(), task,
          seed.assigned_target >= 0 ? seed.assigned_target : 0);
      row.adversarial = variant.value_or(*seed.wave);
      row.snr_db = variant ? snr_db(*seed.wave, row.adversarial)
                           : std::numeric_limits<double>::infinity();
    } else {
      AttackResult res = craft(seed, surrogates, mods, method, cfg);
      row.snr_db = res.snr_db;
      row.adversarial = std::move(res.adversarial);
    }
    row.lsd = log_spectral_distance(*seed.wave, row.adversarial);
    row.surrogate_decision = decide(
        *surrogates.front(), score(*surrogates.front(), row.adversarial),
        task);
    const Waveform* probe = &row.adversarial;
    Waveform defended;
    if (defense) {
      defended = apply_defense(*defense, row.adversarial);
      probe = &defended;
    }
    row.target_decision = decide(target, score(target, *probe), task);
    switch (cfg.scenario) {
      case Scenario::kTargetedOSI:
        row.success = row.target_decision.speaker_index ==
                      seed.assigned_target;
        break;
      case Scenario::kUntargetedOSI:
        row.success = row.target_decision.accepted();
        break;
      case Scenario::kTargetedSV:
        row.success = row.target_decision.accepted();
        break;
    }
  }
  return out;
}

double asr(const std::vector<TransferOutcome>& results, Scenario scenario) {
  if (results.empty()) throw ContractError("asr: empty result set");
  int ok = 0;
  for (const TransferOutcome& r : results) {
    switch (scenario) {
      case Scenario::kTargetedOSI:
        ok += r.target_decision.speaker_index == r.assigned_target ? 1 : 0;
        break;
      case Scenario::kUntargetedOSI:
      case Scenario::kTargetedSV:
        ok += r.target_decision.accepted() ? 1 : 0;
        break;
    }
  }
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

double asr_with_queries(const SelectionRanking& ranking,
                        const std::vector<Decision>& decisions,
                        int target_speaker_index, int gamma) {
  const int m = static_cast<int>(ranking.order.size());
  if (gamma > m)
    throw ContractError("asr_with_queries: gamma " + std::to_string(gamma) +
                        " exceeds candidate count " + std::to_string(m));
  for (int q = 0; q < gamma; ++q) {
    const int candidate = ranking.order[static_cast<size_t>(q)];
    if (decisions[static_cast<size_t>(candidate)].speaker_index ==
        target_speaker_index)
      return 1.0;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string plan_to_json(const ExperimentPlan& plan) {
  nlohmann::json j;
  j["scenario"] = scenario_name(plan.scenario);
  j["enrollment"] = enrollment_name(plan.enrollment);
  j["method"] = attack_method_name(plan.method);
  j["use_corrosion"] = plan.use_corrosion;
  j["target_index"] = plan.target_index;
  j["n_seeds"] = plan.n_seeds;
  j["master_seed"] = plan.master_seed;
  j["rir_count"] = plan.rir_count;
  j["corpus"] = {{"seed", plan.corpus.seed},
                 {"n_train_speakers", plan.corpus.n_train_speakers},
                 {"train_utts", plan.corpus.train_utts},
                 {"n_enrolled", plan.corpus.n_enrolled},
                 {"enroll_voices", plan.corpus.enroll_voices},
                 {"test_utts", plan.corpus.test_utts},
                 {"n_imposters", plan.corpus.n_imposters},
                 {"imposter_utts", plan.corpus.imposter_utts}};
  j["attack"] = {{"epsilon", plan.attack.epsilon},
                 {"alpha", plan.attack.alpha},
                 {"n_steps", plan.attack.n_steps},
                 {"beta", plan.attack.sampling_size},
                 {"loss", loss_kind_name(plan.attack.loss)},
                 {"rank_strategy",
                  rank_strategy_name(plan.attack.rank_strategy)},
                 {"weighting", plan.attack.weighting == WeightingMode::kDynamic
                                   ? "dynamic"
                                   : "uniform"}};
  if (plan.defense) j["defense"] = defense_kind_name(plan.defense->kind);
  if (plan.gamma) j["gamma"] = *plan.gamma;
  const std::vector<ModelSpec> zoo =
      plan.zoo.empty() ? default_zoo_specs() : plan.zoo;
  nlohmann::json jz = nlohmann::json::array();
  for (const ModelSpec& spec : zoo)
    jz.push_back({{"feature", feature_kind_name(spec.feature_kind)},
                  {"scoring", scoring_kind_name(spec.scoring)},
                  {"pooling", pooling_kind_name(spec.pooling)},
                  {"hidden", spec.hidden_dim},
                  {"embed", spec.embed_dim},
                  {"seed", spec.seed}});
  j["zoo"] = jz;
  return j.dump();
}

ExperimentReport run_experiment(const ExperimentPlan& plan) {
  ExperimentReport report;
  report.plan_echo_json = plan_to_json(plan);
  char run_id[32];
  std::snprintf(run_id, sizeof(run_id), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a(report.plan_echo_json) ^ plan.master_seed));
  report.run_id = run_id;

  SpeakerCorpus corpus;
  try {
    corpus = build_benchmark_corpus(plan.corpus);
  } catch (const Error& e) {
    throw StageError("synth-corpus", e.what());
  }

  const std::vector<ModelSpec> specs =
      plan.zoo.empty() ? default_zoo_specs() : plan.zoo;
  if (plan.target_index < 0 ||
      plan.target_index >= static_cast<int>(specs.size()))
    throw StageError("plan", "target_index out of range");

  BenchmarkModels models;
  try {
    models = build_benchmark_models(corpus, specs);
  } catch (const Error& e) {
    throw StageError("train", e.what());
  }

  const SRSModel& target =
      plan.enrollment == EnrollmentSetting::kSameEnroll
          ? models.enrolled_p1[static_cast<size_t>(plan.target_index)]
          : models.enrolled_p2[static_cast<size_t>(plan.target_index)];
  std::vector<const SRSModel*> surrogates;
  for (size_t i = 0; i < specs.size(); ++i)
    if (static_cast<int>(i) != plan.target_index)
      surrogates.push_back(&models.enrolled_p1[i]);
  if (plan.method != AttackMethod::kQFA2SR) surrogates.resize(1);

  // seed voices from the imposter pool, round-robin over speakers
  std::vector<SeedVoice> seeds;
  {
    std::vector<std::pair<std::string, const Waveform*>> pool;
    for (const Speaker& spk : corpus.speakers)
      for (const Utterance& u : spk.utterances)
        if (u.split == Split::kImposter)
          pool.emplace_back(spk.speaker_id, &u.wave);
    if (pool.empty()) throw StageError("seeds", "no imposter voices");
    Rng rng(Rng::derive(plan.master_seed, 0x5ee1));
    for (int i = 0; i < plan.n_seeds && i < static_cast<int>(pool.size());
         ++i) {
      SeedVoice sv;
      sv.wave = pool[static_cast<size_t>(i)].second;
      sv.speaker_id = pool[static_cast<size_t>(i)].first;
      sv.seed_index = i;
      sv.assigned_target =
          plan.scenario == Scenario::kTargetedOSI
              ? static_cast<int>(rng.uniform_int(0, target.n_enrolled() - 1))
              : (plan.scenario == Scenario::kTargetedSV ? 0 : -1);
      seeds.push_back(sv);
    }
  }
  const Task task =
      plan.scenario == Scenario::kTargetedSV ? Task::kSV : Task::kOSI;
  seeds = filter_falsely_accepted(seeds, target, task);
  if (seeds.empty())
    throw StageError("seeds", "every seed voice was already accepted");

  std::vector<SerialMod> mods;
  if (plan.use_corrosion && plan.method == AttackMethod::kQFA2SR) {
    auto rirs = std::make_shared<std::vector<Tensor>>(
        gen_rirs(plan.rir_count, RoomRanges{},
                 Rng::derive(plan.master_seed, 0x1127)));
    mods = default_parallel_mods(plan.scenario, std::move(rirs));
  }

  AttackConfig cfg = plan.attack;
  cfg.scenario = plan.scenario;
  cfg.seed = plan.master_seed;
  if (mods.empty()) cfg.sampling_size = 1;

  try {
    report.rows = run_transfer(seeds, surrogates, target, mods, plan.method,
                               cfg, plan.jobs, plan.defense);
  } catch (const Error& e) {
    throw StageError("attack", e.what());
  }

  report.asr = asr(report.rows, plan.scenario);
  double snr_sum = 0.0, lsd_sum = 0.0;
  int snr_count = 0;
  for (const TransferOutcome& row : report.rows) {
    if (std::isfinite(row.snr_db)) {
      snr_sum += row.snr_db;
      ++snr_count;
    }
    lsd_sum += row.lsd;
  }
  report.mean_snr_db = snr_count > 0 ? snr_sum / snr_count : 0.0;
  report.mean_lsd = report.rows.empty()
                        ? 0.0
                        : lsd_sum / static_cast<double>(report.rows.size());
  return report;
}

// ---------------------------------------------------------------------------
// Report files

void write_report(const ExperimentReport& report, const std::string& csv_path,
                  const std::string& json_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw FormatError("write_report: cannot open " + csv_path);
  csv << "seed_index,source_speaker,assigned_target,surrogate_decision,"
         "target_decision,success,snr_db,lsd\n";
  char buf[128];
  for (const TransferOutcome& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%d,%d,%d,%d,%.17g,%.17g\n",
                  row.seed_index, row.source_speaker.c_str(),
                  row.assigned_target, row.surrogate_decision.speaker_index,
                  row.target_decision.speaker_index, row.success ? 1 : 0,
                  row.snr_db, row.lsd);
    csv << buf;
  }

  nlohmann::json j;
  j["asr"] = report.asr;
  j["mean_snr_db"] = report.mean_snr_db;
  j["mean_lsd"] = report.mean_lsd;
  j["n_rows"] = report.rows.size();
  j["run_id"] = report.run_id;
  j["plan"] = nlohmann::json::parse(report.plan_echo_json);
  std::ofstream js(json_path);
  if (!js) throw FormatError("write_report: cannot open " + json_path);
  js << j.dump(2) << "\n";
}

double verify_report(const std::string& csv_path,
                     const std::string& json_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw FormatError("verify_report: cannot open " + csv_path);
  std::string line;
  std::getline(csv, line);  // header
  int total = 0, successes = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    // success flag is the 6th field
    std::stringstream ss(line);
    std::string field;
    for (int i = 0; i < 6 && std::getline(ss, field, ','); ++i) {
    }
    ++total;
    successes += field == "1" ? 1 : 0;
  }
  if (total == 0) throw FormatError("verify_report: no rows in " + csv_path);
  const double recomputed =
      static_cast<double>(successes) / static_cast<double>(total);

  std::ifstream js(json_path);
  if (!js) throw FormatError("verify_report: cannot open " + json_path);
  const nlohmann::json j = nlohmann::json::parse(js);
  const double stored = j.at("asr").get<double>();
  if (std::abs(stored - recomputed) > 1e-12)
    throw FormatError("verify_report: stored asr " + std::to_string(stored) +
                      " != recomputed " + std::to_string(recomputed));
  return recomputed;
}

}  // namespace qfta
