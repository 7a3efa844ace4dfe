#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "qfta/errors.hpp"
#include "qfta/eval.hpp"
#include "testutil.hpp"

using namespace qfta;

namespace {

TransferOutcome outcome(int decided, int assigned) {
  TransferOutcome o;
  o.target_decision = Decision{decided};
  o.assigned_target = assigned;
  return o;
}

}  // namespace

TEST_CASE("asr counts exact-target hits and any-accept separately") {
  std::vector<TransferOutcome> rows;
  // 10 voices, 4 decided as their target
  for (int i = 0; i < 10; ++i) rows.push_back(outcome(i < 4 ? 2 : 1, 2));
  CHECK(asr(rows, Scenario::kTargetedOSI) == doctest::Approx(0.4));

  std::vector<TransferOutcome> untargeted = {
      outcome(0, -1), outcome(3, -1), outcome(-1, -1), outcome(1, -1)};
  CHECK(asr(untargeted, Scenario::kUntargetedOSI) == doctest::Approx(0.75));

  CHECK_THROWS_AS(asr({}, Scenario::kTargetedOSI), ContractError);
}

TEST_CASE("targeted success implies untargeted success") {
  Rng rng(3);
  std::vector<TransferOutcome> rows;
  for (int i = 0; i < 50; ++i) {
    const int assigned = static_cast<int>(rng.uniform_int(0, 3));
    const int decided = static_cast<int>(rng.uniform_int(-1, 3));
    rows.push_back(outcome(decided, assigned));
  }
  CHECK(asr(rows, Scenario::kTargetedOSI) <=
        asr(rows, Scenario::kUntargetedOSI));
}

TEST_CASE("query-limited asr is monotone in gamma") {
  SelectionRanking ranking;
  ranking.aggregate = {5, 3, 9, 4};
  ranking.order = {1, 3, 0, 2};
  // candidate 0 hits the target, the rest miss
  const std::vector<Decision> decisions = {Decision{7}, Decision{-1},
                                           Decision{2}, Decision{-1}};
  CHECK(asr_with_queries(ranking, decisions, 7, 1) == 0.0);  // c1 misses
  CHECK(asr_with_queries(ranking, decisions, 7, 3) == 1.0);  // c0 in top 3
  double prev = 0.0;
  for (int gamma = 1; gamma <= 4; ++gamma) {
    const double v = asr_with_queries(ranking, decisions, 7, gamma);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK_THROWS_AS(asr_with_queries(ranking, decisions, 7, 5), ContractError);
}

TEST_CASE("benchmark corpus carries the split structure") {
  CorpusPlan plan;
  plan.n_train_speakers = 3;
  plan.train_utts = 2;
  plan.train_duration_s = 0.6;
  plan.n_enrolled = 2;
  plan.enroll_voices = 2;
  plan.enroll_duration_s = 0.6;
  plan.test_utts = 1;
  plan.test_duration_s = 0.6;
  plan.n_imposters = 2;
  plan.imposter_utts = 2;
  plan.imposter_duration_s = 0.6;
  const SpeakerCorpus corpus = build_benchmark_corpus(plan);
  CHECK(corpus.speakers.size() == 7);
  int train = 0, p1 = 0, p2 = 0, test = 0, imposter = 0;
  for (const Speaker& spk : corpus.speakers)
    for (const Utterance& u : spk.utterances) switch (u.split) {
        case Split::kTrain: ++train; break;
        case Split::kEnrollP1: ++p1; break;
        case Split::kEnrollP2: ++p2; break;
        case Split::kTest: ++test; break;
        case Split::kImposter: ++imposter; break;
      }
  CHECK(train == 6);
  CHECK(p1 == 4);
  CHECK(p2 == 4);
  CHECK(test == 2);
  CHECK(imposter == 4);

  // P1 and P2 voices of one speaker are disjoint
  const Speaker& enrolled = corpus.speakers[3];
  for (const Utterance& a : enrolled.utterances)
    for (const Utterance& b : enrolled.utterances)
      if (a.split == Split::kEnrollP1 && b.split == Split::kEnrollP2)
        CHECK(a.wave.samples != b.wave.samples);

  // determinism
  const SpeakerCorpus again = build_benchmark_corpus(plan);
  CHECK(again.speakers[3].utterances[0].wave.samples ==
        corpus.speakers[3].utterances[0].wave.samples);
}

TEST_CASE("falsely accepted seeds are discarded") {
  SpeakerCorpus corpus = synth_corpus(3, 2, 0.8, 11);
  TrainOptions opts;
  opts.epochs = 8;
  SRSModel m = train_background(
      corpus,
      ModelSpec{FeatureKind::kFbank, 12, 8, PoolingKind::kMean,
                ScoringKind::kCosine, 41},
      FeatureConfig{}, opts);
  enroll(m, "spk000", {&corpus.speakers[0].utterances[0].wave});
  m.threshold = -2.0;  // accepts everything

  std::vector<SeedVoice> seeds;
  SeedVoice sv;
  sv.wave = &corpus.speakers[1].utterances[0].wave;
  sv.speaker_id = "spk001";
  seeds.push_back(sv);
  CHECK(filter_falsely_accepted(seeds, m, Task::kOSI).empty());
  m.threshold = 2.0;  // rejects everything (cosine scores < 1)
  CHECK(filter_falsely_accepted(seeds, m, Task::kOSI).size() == 1);
}

TEST_CASE("sv threshold tuning uses scalar trials") {
  CorpusPlan plan;
  plan.n_train_speakers = 3;
  plan.train_utts = 2;
  plan.train_duration_s = 0.8;
  plan.n_enrolled = 2;
  plan.enroll_voices = 2;
  plan.enroll_duration_s = 0.8;
  plan.test_utts = 2;
  plan.test_duration_s = 0.8;
  plan.n_imposters = 2;
  plan.imposter_utts = 2;
  plan.imposter_duration_s = 0.8;
  plan.seed = 77;
  const SpeakerCorpus corpus = build_benchmark_corpus(plan);
  TrainOptions opts;
  opts.epochs = 8;
  const SRSModel bg = train_background(
      corpus,
      ModelSpec{FeatureKind::kFbank, 12, 8, PoolingKind::kMean,
                ScoringKind::kCosine, 61},
      FeatureConfig{}, opts);
  SRSModel sv = bg;
  // single-speaker enrollment for the SV task
  std::vector<const Waveform*> voices;
  for (const Speaker& spk : corpus.speakers) {
    if (spk.speaker_id != "spk000") continue;
    for (const Utterance& u : spk.utterances)
      if (u.split == Split::kEnrollP1) voices.push_back(&u.wave);
  }
  enroll(sv, "spk000", voices);
  const TrialSet trials = sv_trials(sv, corpus);
  CHECK(trials.genuine_scores.size() == 2);   // test utts of spk000
  CHECK(trials.imposter_scores.size() == 4);  // 2 imposters x 2 utts
  const EerResult eer = tune_threshold_eer(trials);
  CHECK(std::isfinite(eer.threshold));
  CHECK(eer.eer >= 0.0);
  CHECK(eer.eer <= 1.0);

  CHECK_THROWS_AS(sv_trials(bg, corpus), ContractError);
}

TEST_CASE("report write, verify, and re-aggregation") {
  namespace fs = std::filesystem;
  ExperimentReport report;
  for (int i = 0; i < 6; ++i) {
    TransferOutcome row = outcome(i % 2 == 0 ? 1 : -1, 1);
    row.seed_index = i;
    row.source_speaker = "imp000";
    row.success = i % 2 == 0;
    row.snr_db = 20.0 + i;
    row.lsd = 1.0;
    report.rows.push_back(row);
  }
  report.asr = 0.5;
  report.mean_snr_db = 22.5;
  report.mean_lsd = 1.0;
  report.run_id = "test";
  report.plan_echo_json = "{}";
  const std::string csv = (fs::temp_directory_path() / "qfta_rep.csv").string();
  const std::string json =
      (fs::temp_directory_path() / "qfta_rep.json").string();
  write_report(report, csv, json);
  CHECK(verify_report(csv, json) == doctest::Approx(0.5));

  // tampering with the stored aggregate is caught
  ExperimentReport bad = report;
  bad.asr = 0.9;
  write_report(bad, csv, json);
  CHECK_THROWS_AS(verify_report(csv, json), FormatError);
  fs::remove(csv);
  fs::remove(json);
}

TEST_CASE("run_transfer evaluates crafted voices against the target") {
  // tiny end-to-end shape check: 2 seeds, 1 surrogate, 1 target
  CorpusPlan plan;
  plan.n_train_speakers = 3;
  plan.train_utts = 2;
  plan.train_duration_s = 0.8;
  plan.n_enrolled = 2;
  plan.enroll_voices = 2;
  plan.enroll_duration_s = 0.8;
  plan.test_utts = 1;
  plan.test_duration_s = 0.8;
  plan.n_imposters = 2;
  plan.imposter_utts = 1;
  plan.imposter_duration_s = 0.8;
  plan.seed = 31;
  const SpeakerCorpus corpus = build_benchmark_corpus(plan);
  std::vector<ModelSpec> specs = {
      {FeatureKind::kFbank, 12, 8, PoolingKind::kMean, ScoringKind::kCosine,
       51},
      {FeatureKind::kMfcc, 12, 8, PoolingKind::kMean, ScoringKind::kCosine,
       52}};
  BenchmarkModels models;
  {
    // lighter epochs than the default pipeline for test speed
    for (const ModelSpec& spec : specs) {
      TrainOptions opts;
      opts.epochs = 8;
      const SRSModel bg = train_background(corpus, spec, FeatureConfig{},
                                           opts);
      models.enrolled_p1.push_back(
          enroll_and_tune(bg, corpus, Split::kEnrollP1, Task::kOSI));
      models.enrolled_p2.push_back(
          enroll_and_tune(bg, corpus, Split::kEnrollP2, Task::kOSI));
    }
  }

  std::vector<SeedVoice> seeds;
  int idx = 0;
  for (const Speaker& spk : corpus.speakers)
    for (const Utterance& u : spk.utterances) {
      if (u.split != Split::kImposter) continue;
      SeedVoice sv;
      sv.wave = &u.wave;
      sv.speaker_id = spk.speaker_id;
      sv.seed_index = idx++;
      sv.assigned_target = 0;
      seeds.push_back(sv);
    }
  REQUIRE(seeds.size() == 2);

  AttackConfig cfg = default_config(Scenario::kTargetedOSI);
  cfg.n_steps = 4;
  cfg.sampling_size = 1;
  cfg.seed = 13;
  const std::vector<TransferOutcome> rows =
      run_transfer(seeds, {&models.enrolled_p1[0]}, models.enrolled_p2[1], {},
                   AttackMethod::kBIM, cfg, 2);
  REQUIRE(rows.size() == 2);
  for (const TransferOutcome& row : rows) {
    CHECK(row.adversarial.size() == seeds[0].wave->size());
    CHECK(std::isfinite(row.lsd));
    // success flag consistent with the recorded decision
    CHECK(row.success == (row.target_decision.speaker_index == 0));
  }

  // deterministic across runs (and scheduling)
  const std::vector<TransferOutcome> again =
      run_transfer(seeds, {&models.enrolled_p1[0]}, models.enrolled_p2[1], {},
                   AttackMethod::kBIM, cfg, 1);
  for (size_t i = 0; i < rows.size(); ++i)
    CHECK(rows[i].adversarial.samples == again[i].adversarial.samples);
}
