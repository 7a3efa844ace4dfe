#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "qfta/errors.hpp"
#include "qfta/srs.hpp"
#include "testutil.hpp"

using namespace qfta;
using testutil::check_gradient;

namespace {

// One tiny corpus and one trained model per scoring backend, shared by all
// test cases (training is the slow part).
struct Fixture {
  SpeakerCorpus corpus;
  SRSModel cosine_model;
  SRSModel affine_model;

  Fixture() {
    corpus = synth_corpus(4, 4, 0.8, 91);
    ModelSpec cos_spec{FeatureKind::kFbank, 16, 8, PoolingKind::kMean,
                       ScoringKind::kCosine, 11};
    ModelSpec aff_spec{FeatureKind::kMfcc, 16, 8, PoolingKind::kMeanStd,
                       ScoringKind::kAffineInner, 12};
    TrainOptions opts;
    opts.epochs = 20;
    cosine_model = train_background(corpus, cos_spec, FeatureConfig{}, opts);
    affine_model = train_background(corpus, aff_spec, FeatureConfig{}, opts);
    auto enroll_all = [&](SRSModel& m) {
      for (const Speaker& spk : corpus.speakers) {
        std::vector<const Waveform*> voices;
        for (const Utterance& u : spk.utterances) voices.push_back(&u.wave);
        enroll(m, spk.speaker_id, voices);
      }
      m.threshold = 0.1;
    };
    enroll_all(cosine_model);
    enroll_all(affine_model);
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("training reaches 90 percent train accuracy and is seed-sensitive") {
  const Fixture& f = fixture();
  CHECK(f.cosine_model.train_meta.train_accuracy >= 0.9);
  CHECK(f.affine_model.train_meta.train_accuracy >= 0.9);

  ModelSpec spec{FeatureKind::kFbank, 16, 8, PoolingKind::kMean,
                 ScoringKind::kCosine, 99};
  TrainOptions opts;
  opts.epochs = 2;
  const SRSModel other = train_background(f.corpus, spec, FeatureConfig{},
                                          opts);
  CHECK(other.w1.data != f.cosine_model.w1.data);
}

TEST_CASE("training requires at least two speakers") {
  SpeakerCorpus c = synth_corpus(2, 2, 0.6, 5);
  c.speakers.pop_back();
  CHECK_THROWS_AS(train_background(c, ModelSpec{}), TrainingError);
}

TEST_CASE("enrollment semantics") {
  const Fixture& f = fixture();
  SRSModel m = f.cosine_model;
  m.enrolled_ids.clear();
  m.enrolled = Tensor{};

  const Speaker& spk = f.corpus.speakers.front();
  const Waveform& voice = spk.utterances.front().wave;

  // single-voice enrollment equals that voice's normalized embedding
  enroll(m, "solo", {&voice});
  Tensor e = embed(m, voice);
  double nrm = 0.0;
  for (double v : e.data) nrm += v * v;
  nrm = std::sqrt(nrm);
  for (size_t i = 0; i < e.data.size(); ++i)
    CHECK(m.enrolled.data[i] == doctest::Approx(e.data[i] / nrm));

  CHECK_THROWS(enroll(m, "solo", {&voice}));  // duplicate id

  // order-free mean over the same voices
  SRSModel a = f.cosine_model, b = f.cosine_model;
  a.enrolled_ids.clear();
  a.enrolled = Tensor{};
  b.enrolled_ids.clear();
  b.enrolled = Tensor{};
  std::vector<const Waveform*> voices;
  for (const Utterance& u : spk.utterances) voices.push_back(&u.wave);
  std::vector<const Waveform*> reversed(voices.rbegin(), voices.rend());
  enroll(a, "s", voices);
  enroll(b, "s", reversed);
  for (size_t i = 0; i < a.enrolled.data.size(); ++i)
    CHECK(a.enrolled.data[i] == doctest::Approx(b.enrolled.data[i]));
}

TEST_CASE("cosine self-score is 1 and all scores stay in [-1, 1]") {
  const Fixture& f = fixture();
  SRSModel m = f.cosine_model;
  m.enrolled_ids.clear();
  m.enrolled = Tensor{};
  const Waveform& voice = f.corpus.speakers[1].utterances[2].wave;
  enroll(m, "self", {&voice});
  const std::vector<double> s = score(m, voice);
  CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-9));

  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Waveform random_voice;
    random_voice.samples.resize(1600);
    for (double& v : random_voice.samples) v = 0.5 * rng.normal();
    for (double v : score(f.cosine_model, random_voice)) {
      CHECK(v <= 1.0 + 1e-12);
      CHECK(v >= -1.0 - 1e-12);
    }
  }
}

TEST_CASE("score gradient w.r.t. the waveform passes finite differences") {
  const Fixture& f = fixture();
  Rng rng(13);
  Waveform w;
  w.samples.resize(720);
  for (double& v : w.samples) v = 0.3 * rng.normal();
  const Tensor xt = Tensor::vec(w.samples);

  for (const SRSModel* m : {&f.cosine_model, &f.affine_model}) {
    Tape tape;
    Var x = tape.input(xt);
    Var s = score_on_tape(tape, *m, x);
    Var target_score = tape.index(s, 1);
    const Tensor g = tape.grad(target_score, x);
    auto probe = [&](const Tensor& t) {
      Tape tp;
      Var x2 = tp.input(t);
      return tp.scalar_value(tp.index(score_on_tape(tp, *m, x2), 1));
    };
    CHECK(check_gradient(probe, xt, g, rng, 12) <= 1e-4);
  }
}

TEST_CASE("decision rules with the declared tie-break") {
  const std::vector<double> accept = {0.7, 0.2};
  const std::vector<double> reject = {0.4, 0.2};
  CHECK(decide_with_threshold(accept, Task::kOSI, 0.5).speaker_index == 0);
  CHECK(decide_with_threshold(reject, Task::kOSI, 0.5).speaker_index == -1);
  CHECK(decide_with_threshold(reject, Task::kCSI, 0.5).speaker_index == 0);
  CHECK(decide_with_threshold({0.5, 0.5}, Task::kOSI, 0.1).speaker_index ==
        0);  // tie -> lowest index
  CHECK(decide_with_threshold({0.6}, Task::kSV, 0.5).accepted());
  CHECK(!decide_with_threshold({0.4}, Task::kSV, 0.5).accepted());
}

TEST_CASE("OSI decision is invariant to a shared shift of scores and theta") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(4);
    for (double& v : s) v = rng.uniform(-5.0, 5.0);
    const double theta = rng.uniform(-2.0, 2.0);
    const double shift = rng.uniform(0.0, 10.0);
    std::vector<double> shifted = s;
    for (double& v : shifted) v += shift;
    const Decision d1 = decide_with_threshold(s, Task::kOSI, theta);
    const Decision d2 =
        decide_with_threshold(shifted, Task::kOSI, theta + shift);
    CHECK(d1.speaker_index == d2.speaker_index);
  }
}

TEST_CASE("decide(OSI) equals decide(CSI) whenever the max clears theta") {
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(5);
    for (double& v : s) v = rng.uniform(-1.0, 1.0);
    const double theta = rng.uniform(-1.0, 1.0);
    const Decision osi = decide_with_threshold(s, Task::kOSI, theta);
    const Decision csi = decide_with_threshold(s, Task::kCSI, theta);
    if (*std::max_element(s.begin(), s.end()) >= theta)
      CHECK(osi.speaker_index == csi.speaker_index);
    else
      CHECK(!osi.accepted());
  }
}

TEST_CASE("enrollment-order permutation permutes the score vector") {
  const Fixture& f = fixture();
  const SpeakerCorpus& c = f.corpus;
  SRSModel fwd = f.cosine_model, rev = f.cosine_model;
  fwd.enrolled_ids.clear();
  fwd.enrolled = Tensor{};
  rev.enrolled_ids.clear();
  rev.enrolled = Tensor{};
  for (const Speaker& spk : c.speakers)
    enroll(fwd, spk.speaker_id, {&spk.utterances[0].wave});
  for (auto it = c.speakers.rbegin(); it != c.speakers.rend(); ++it)
    enroll(rev, it->speaker_id, {&it->utterances[0].wave});

  const Waveform& probe = c.speakers[2].utterances[1].wave;
  const std::vector<double> sf = score(fwd, probe);
  const std::vector<double> sr = score(rev, probe);
  const size_t n = sf.size();
  for (size_t i = 0; i < n; ++i)
    CHECK(sf[i] == doctest::Approx(sr[n - 1 - i]).epsilon(1e-12));
}

TEST_CASE("eer tuning matches the worked examples") {
  {
    const EerResult r =
        tune_threshold_eer({{0.9, 0.8, 0.7}, {0.1, 0.2, 0.3}});
    CHECK(r.eer == 0.0);
    CHECK(r.threshold == doctest::Approx(0.5));
    CHECK(r.far == 0.0);
    CHECK(r.frr == 0.0);
  }
  {
    const EerResult r = tune_threshold_eer({{0.6, 0.4}, {0.5, 0.3}});
    CHECK(r.threshold == doctest::Approx(0.45));
    CHECK(r.far == doctest::Approx(0.5));
    CHECK(r.frr == doctest::Approx(0.5));
    CHECK(r.eer == doctest::Approx(0.5));
  }
  {
    // perfectly interleaved identical lists are indistinguishable
    const EerResult r =
        tune_threshold_eer({{0.1, 0.2, 0.3}, {0.1, 0.2, 0.3}});
    CHECK(r.eer == doctest::Approx(0.5));
  }
  CHECK_THROWS_AS(tune_threshold_eer({{}, {0.1}}), ContractError);
}

TEST_CASE("serialization round-trips bit-identical scores") {
  namespace fs = std::filesystem;
  const Fixture& f = fixture();
  const std::string path =
      (fs::temp_directory_path() / "qfta_model.qsrs").string();
  for (const SRSModel* m : {&f.cosine_model, &f.affine_model}) {
    save_model(*m, path);
    const SRSModel back = load_model(path);
    CHECK(back.spec.feature_kind == m->spec.feature_kind);
    CHECK(back.spec.scoring == m->spec.scoring);
    CHECK(back.enrolled_ids == m->enrolled_ids);
    CHECK(back.threshold == m->threshold);
    const Waveform& probe = f.corpus.speakers[0].utterances[1].wave;
    CHECK(score(back, probe) == score(*m, probe));
  }
  fs::remove(path);

  CHECK_THROWS_AS(load_model("/nonexistent/model.qsrs"), FormatError);
}
