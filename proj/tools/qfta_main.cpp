// Command-line front end: corpus synthesis, model lifecycle, attacks, and
// evaluation, driven by a sectioned key-value config. Exit codes: 0 success,
// 2 config error, 3 runtime error; errors are emitted as JSON on stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "qfta/config.hpp"
#include "qfta/errors.hpp"

namespace fs = std::filesystem;
using namespace qfta;

namespace {

void emit_error(const std::string& stage, const std::string& message) {
  nlohmann::json j;
  j["stage"] = stage;
  j["message"] = message;
  std::cerr << j.dump() << "\n";
}

std::string output_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("QFTA_OUTPUT_ROOT")) return env;
  return ".";
}

int run_synth_corpus(const std::string& config_path, int speakers, int utts,
                     double duration, uint64_t seed, const std::string& out) {
  SpeakerCorpus corpus;
  if (!config_path.empty()) {
    const RunConfig cfg = parse_run_config(config_path);
    corpus = build_benchmark_corpus(plan_from_config(cfg).corpus);
  } else {
    corpus = synth_corpus(speakers, utts, duration, seed);
  }
  fs::create_directories(out);
  save_corpus(corpus, out);
  std::cout << "corpus: " << corpus.speakers.size() << " speakers -> " << out
            << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& corpus_dir,
              const std::string& out) {
  const RunConfig cfg = config_path.empty() ? RunConfig{}
                                            : parse_run_config(config_path);
  const ExperimentPlan plan = plan_from_config(cfg);
  const SpeakerCorpus corpus = load_corpus(corpus_dir);
  const std::vector<ModelSpec> specs =
      plan.zoo.empty() ? default_zoo_specs() : plan.zoo;
  fs::create_directories(out);
  for (size_t i = 0; i < specs.size(); ++i) {
    const SRSModel model = train_background(corpus, specs[i]);
    const std::string path =
        (fs::path(out) / ("bg_" + std::to_string(i) + ".qsrs")).string();
    save_model(model, path);
    std::cout << "model " << i << ": train_accuracy="
              << model.train_meta.train_accuracy << " -> " << path << "\n";
  }
  return 0;
}

int run_enroll(const std::string& model_path, const std::string& corpus_dir,
               const std::string& split, const std::string& out) {
  SRSModel model = load_model(model_path);
  const SpeakerCorpus corpus = load_corpus(corpus_dir);
  const Split sp = split_from_name(split);
  for (const Speaker& spk : corpus.speakers) {
    std::vector<const Waveform*> voices;
    for (const Utterance& u : spk.utterances)
      if (u.split == sp) voices.push_back(&u.wave);
    if (!voices.empty()) enroll(model, spk.speaker_id, voices);
  }
  save_model(model, out);
  std::cout << "enrolled " << model.n_enrolled() << " speakers -> " << out
            << "\n";
  return 0;
}

int run_tune(const std::string& model_path, const std::string& corpus_dir,
             const std::string& out) {
  SRSModel model = load_model(model_path);
  const SpeakerCorpus corpus = load_corpus(corpus_dir);
  const EerResult eer = tune_threshold_eer(osi_trials(model, corpus));
  model.threshold = eer.threshold;
  save_model(model, out.empty() ? model_path : out);
  nlohmann::json j;
  j["theta"] = eer.threshold;
  j["eer"] = eer.eer;
  j["far"] = eer.far;
  j["frr"] = eer.frr;
  std::cout << j.dump() << "\n";
  return 0;
}

int run_attack(const std::string& config_path, const std::string& baseline,
               const std::string& out_flag, int jobs) {
  const RunConfig cfg = parse_run_config(config_path);
  ExperimentPlan plan = plan_from_config(cfg);
  if (!baseline.empty()) plan.method = attack_method_from_name(baseline);
  if (jobs > 0) plan.jobs = jobs;
  const std::string out =
      (fs::path(output_root(out_flag)) / "attack").string();
  fs::create_directories(out);

  const ExperimentReport report = run_experiment(plan);
  if (cfg.get("output", "trace", "0") == "1" && !report.rows.empty()) {
    // one representative attack with tracing enabled for the loss log
    const SpeakerCorpus trace_corpus = build_benchmark_corpus(plan.corpus);
    const std::vector<ModelSpec> specs =
        plan.zoo.empty() ? default_zoo_specs() : plan.zoo;
    const BenchmarkModels models = build_benchmark_models(trace_corpus, specs);
    std::vector<const SRSModel*> surrogates;
    for (size_t i = 0; i < specs.size(); ++i)
      if (static_cast<int>(i) != plan.target_index)
        surrogates.push_back(&models.enrolled_p1[i]);
    const Waveform* seed_wave = nullptr;
    for (const Speaker& spk : trace_corpus.speakers)
      for (const Utterance& u : spk.utterances)
        if (u.split == Split::kImposter && !seed_wave) seed_wave = &u.wave;
    if (seed_wave) {
      AttackConfig acfg = plan.attack;
      acfg.scenario = plan.scenario;
      acfg.record_trace = true;
      acfg.seed = plan.master_seed;
      std::vector<SerialMod> mods;
      if (plan.use_corrosion && plan.method == AttackMethod::kQFA2SR) {
        auto rirs = std::make_shared<std::vector<Tensor>>(gen_rirs(
            plan.rir_count, RoomRanges{}, Rng::derive(plan.master_seed,
                                                      0x1127)));
        mods = default_parallel_mods(plan.scenario, std::move(rirs));
      }
      if (mods.empty()) acfg.sampling_size = 1;
      const AttackResult traced =
          plan.method == AttackMethod::kQFA2SR
              ? qfa2sr(*seed_wave, surrogates, mods, acfg)
              : bim(*seed_wave, *surrogates.front(), acfg);
      write_trace_csv((fs::path(out) / "trace_seed0.csv").string(),
                      traced.trace);
    }
  }
  for (const TransferOutcome& row : report.rows)
    write_wav((fs::path(out) /
               ("adv_" + std::to_string(row.seed_index) + ".wav"))
                  .string(),
              row.adversarial);
  write_report(report, (fs::path(out) / "report.csv").string(),
               (fs::path(out) / "report.json").string());
  std::cout << "asr=" << report.asr << " rows=" << report.rows.size()
            << " mean_snr_db=" << report.mean_snr_db << " -> " << out << "\n";
  return 0;
}

int run_select(const std::string& config_path, int target_speaker,
               const std::string& out_flag) {
  const RunConfig cfg = parse_run_config(config_path);
  ExperimentPlan plan = plan_from_config(cfg);
  if (plan.scenario == Scenario::kUntargetedOSI)
    throw ConfigError("select: targeted scenarios only");
  const std::string out =
      (fs::path(output_root(out_flag)) / "select").string();
  fs::create_directories(out);

  const SpeakerCorpus corpus = build_benchmark_corpus(plan.corpus);
  const std::vector<ModelSpec> specs =
      plan.zoo.empty() ? default_zoo_specs() : plan.zoo;
  const BenchmarkModels models = build_benchmark_models(corpus, specs);
  std::vector<const SRSModel*> surrogates;
  for (size_t i = 0; i < models.enrolled_p1.size(); ++i)
    if (static_cast<int>(i) != plan.target_index)
      surrogates.push_back(&models.enrolled_p1[i]);

  std::vector<const Waveform*> seeds;
  for (const Speaker& spk : corpus.speakers)
    for (const Utterance& u : spk.utterances)
      if (u.split == Split::kImposter &&
          static_cast<int>(seeds.size()) < plan.n_seeds)
        seeds.push_back(&u.wave);

  std::vector<SerialMod> mods;
  if (plan.use_corrosion) {
    auto rirs = std::make_shared<std::vector<Tensor>>(gen_rirs(
        plan.rir_count, RoomRanges{}, Rng::derive(plan.master_seed, 0x1127)));
    mods = default_parallel_mods(plan.scenario, std::move(rirs));
  }
  AttackConfig acfg = plan.attack;
  acfg.scenario = plan.scenario;
  acfg.seed = plan.master_seed;
  if (mods.empty()) acfg.sampling_size = 1;

  const GeneralizedResult result = generalized_qfa2sr(
      target_speaker, seeds, surrogates, mods, acfg);
  nlohmann::json j;
  j["target_speaker"] = target_speaker;
  j["order"] = result.ranking.order;
  j["lambda"] = result.ranking.aggregate;
  for (size_t i = 0; i < result.candidates.size(); ++i)
    write_wav((fs::path(out) / ("cand_" + std::to_string(i) + ".wav"))
                  .string(),
              result.candidates[i].adversarial);
  std::ofstream js(fs::path(out) / "selection.json");
  js << j.dump(2) << "\n";
  std::cout << j.dump() << "\n";
  return 0;
}

int run_evaluate(const std::string& adv_dir, const std::string& target_path,
                 const std::string& scenario_name_str) {
  SRSModel target;
  try {
    target = load_model(target_path);
  } catch (const Error& e) {
    throw StageError("load-target", e.what());
  }
  const Scenario scenario = scenario_from_name(scenario_name_str);
  const Task task =
      scenario == Scenario::kTargetedSV ? Task::kSV : Task::kOSI;

  std::ifstream csv(fs::path(adv_dir) / "report.csv");
  if (!csv)
    throw StageError("load-rows",
                     "missing report.csv in " + adv_dir);
  std::string line;
  std::getline(csv, line);
  int total = 0, ok = 0;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string seed_index, source, assigned;
    std::getline(ss, seed_index, ',');
    std::getline(ss, source, ',');
    std::getline(ss, assigned, ',');
    const std::string wav =
        (fs::path(adv_dir) / ("adv_" + seed_index + ".wav")).string();
    const Waveform adv = read_wav(wav);
    const Decision d = decide(target, score(target, adv), task);
    const int goal = std::stoi(assigned);
    ++total;
    if (scenario == Scenario::kTargetedOSI)
      ok += d.speaker_index == goal ? 1 : 0;
    else
      ok += d.accepted() ? 1 : 0;
  }
  if (total == 0) throw StageError("load-rows", "no rows to evaluate");
  nlohmann::json j;
  j["asr"] = static_cast<double>(ok) / total;
  j["rows"] = total;
  std::cout << j.dump() << "\n";
  return 0;
}

int run_defend(const std::string& config_path, const std::string& out_flag) {
  const RunConfig cfg = parse_run_config(config_path);
  ExperimentPlan plan = plan_from_config(cfg);
  const std::string out =
      (fs::path(output_root(out_flag)) / "defense").string();
  fs::create_directories(out);

  const SpeakerCorpus corpus = build_benchmark_corpus(plan.corpus);
  const std::vector<ModelSpec> specs =
      plan.zoo.empty() ? default_zoo_specs() : plan.zoo;
  const BenchmarkModels models = build_benchmark_models(corpus, specs);
  const SRSModel& target =
      plan.enrollment == EnrollmentSetting::kSameEnroll
          ? models.enrolled_p1[static_cast<size_t>(plan.target_index)]
          : models.enrolled_p2[static_cast<size_t>(plan.target_index)];

  // undefended attack rows provide the adversarial voices
  ExperimentPlan attack_plan = plan;
  attack_plan.defense.reset();
  const ExperimentReport base = run_experiment(attack_plan);

  std::vector<std::pair<const Waveform*, int>> enrolled_voices;
  for (int i = 0; i < target.n_enrolled(); ++i)
    for (const Waveform* w :
         corpus.voices(target.enrolled_ids[static_cast<size_t>(i)],
                       Split::kTest))
      enrolled_voices.emplace_back(w, i);
  std::vector<const Waveform*> imposter_voices;
  for (const Speaker& spk : corpus.speakers)
    for (const Utterance& u : spk.utterances)
      if (u.split == Split::kImposter) imposter_voices.push_back(&u.wave);
  std::vector<std::pair<const Waveform*, int>> adversarial;
  for (const TransferOutcome& row : base.rows)
    adversarial.emplace_back(&row.adversarial, row.assigned_target);

  std::vector<Defense> defenses;
  if (plan.defense) {
    defenses.push_back(*plan.defense);
  } else {
    defenses = {defense_qt(), defense_at(), defense_as(), defense_ms(),
                defense_ds(), defense_lpf(), defense_bpf()};
  }
  const Task task =
      plan.scenario == Scenario::kTargetedSV ? Task::kSV : Task::kOSI;
  nlohmann::json rows = nlohmann::json::array();
  for (const Defense& d : defenses) {
    const DefenseReport r = evaluate_defense(d, target, task, enrolled_voices,
                                             imposter_voices, adversarial);
    rows.push_back({{"defense", defense_kind_name(d.kind)},
                    {"acc_enrolled", r.acc_enrolled},
                    {"acc_imposter", r.acc_imposter},
                    {"acc_adversarial", r.acc_adversarial}});
    std::cout << defense_kind_name(d.kind)
              << ": enrolled=" << r.acc_enrolled
              << " imposter=" << r.acc_imposter
              << " adversarial=" << r.acc_adversarial << "\n";
  }
  std::ofstream js(fs::path(out) / "defense.json");
  js << rows.dump(2) << "\n";
  return 0;
}

int run_report(const std::string& csv_path, const std::string& json_path) {
  const double recomputed = verify_report(csv_path, json_path);
  nlohmann::json j;
  j["asr"] = recomputed;
  j["consistent"] = true;
  std::cout << j.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"query-free transfer attacks on mini speaker-recognition "
               "systems"};
  app.require_subcommand(1);

  std::string config_path, corpus_dir, model_path, split = "enroll-P1";
  std::string out, baseline, adv_dir, target_path;
  std::string scenario = "targeted-osi";
  std::string csv_path, json_path;
  int speakers = 10, utts = 5, jobs = 0, target_speaker = 0;
  double duration = 3.0;
  uint64_t seed = 7;

  CLI::App* synth = app.add_subcommand("synth-corpus",
                                       "generate a synthetic speaker corpus");
  synth->add_option("--config", config_path);
  synth->add_option("--speakers", speakers);
  synth->add_option("--utts", utts);
  synth->add_option("--duration", duration);
  synth->add_option("--seed", seed);
  synth->add_option("--out", out);

  CLI::App* train = app.add_subcommand("train", "train background models");
  train->add_option("--config", config_path);
  train->add_option("--corpus", corpus_dir)->required();
  train->add_option("--out", out)->required();

  CLI::App* enroll_cmd =
      app.add_subcommand("enroll", "enroll speakers into a model");
  enroll_cmd->add_option("--model", model_path)->required();
  enroll_cmd->add_option("--corpus", corpus_dir)->required();
  enroll_cmd->add_option("--split", split);
  enroll_cmd->add_option("--out", out)->required();

  CLI::App* tune =
      app.add_subcommand("tune-threshold", "tune the EER threshold");
  tune->add_option("--model", model_path)->required();
  tune->add_option("--corpus", corpus_dir)->required();
  tune->add_option("--out", out);

  CLI::App* attack = app.add_subcommand("attack", "run a transfer attack");
  attack->add_option("--config", config_path)->required();
  attack->add_option("--baseline", baseline)
      ->check(CLI::IsMember({"bim", "pgd", "cw", "tdi", "qfa2sr"}));
  attack->add_option("--out", out);
  attack->add_option("--jobs", jobs);

  CLI::App* select =
      app.add_subcommand("select", "rank candidates for few-query transfer");
  select->add_option("--config", config_path)->required();
  select->add_option("--target-speaker", target_speaker);
  select->add_option("--out", out);

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "evaluate adversarial voices");
  evaluate->add_option("--adv", adv_dir)->required();
  evaluate->add_option("--target", target_path)->required();
  evaluate->add_option("--scenario", scenario);

  CLI::App* defend = app.add_subcommand("defend", "defense trade-off table");
  defend->add_option("--config", config_path)->required();
  defend->add_option("--out", out);

  CLI::App* report = app.add_subcommand("report", "verify report aggregates");
  report->add_option("--csv", csv_path)->required();
  report->add_option("--json", json_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return run_synth_corpus(config_path, speakers, utts, duration, seed,
                              out.empty() ? "corpus" : out);
    if (train->parsed()) return run_train(config_path, corpus_dir, out);
    if (enroll_cmd->parsed())
      return run_enroll(model_path, corpus_dir, split, out);
    if (tune->parsed()) return run_tune(model_path, corpus_dir, out);
    if (attack->parsed()) return run_attack(config_path, baseline, out, jobs);
    if (select->parsed())
      return run_select(config_path, target_speaker, out);
    if (evaluate->parsed())
      return run_evaluate(adv_dir, target_path, scenario);
    if (defend->parsed()) return run_defend(config_path, out);
    if (report->parsed()) return run_report(csv_path, json_path);
  } catch (const ConfigError& e) {
    emit_error("config", e.what());
    return 2;
  } catch (const StageError& e) {
    emit_error(e.stage, e.what());
    return 3;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 3;
  }
  return 0;
}
