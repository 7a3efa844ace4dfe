#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "qfta/defense.hpp"
#include "qfta/errors.hpp"
#include "testutil.hpp"

using namespace qfta;

namespace {

Waveform random_wave(int64_t n, uint64_t seed, double amp = 0.5) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(static_cast<size_t>(n));
  for (double& v : w.samples) v = amp * (2.0 * rng.uniform() - 1.0);
  return w;
}

}  // namespace

TEST_CASE("quantization rounds to the nearest level") {
  Waveform x;
  x.samples = {0.00123};
  const Waveform y = apply_defense(defense_qt(512), x);
  CHECK(y.samples[0] == doctest::Approx(1.0 / 512.0));
}

TEST_CASE("quantization is idempotent") {
  const Waveform x = random_wave(2000, 1);
  const Defense qt = defense_qt();
  const Waveform once = apply_defense(qt, x);
  const Waveform twice = apply_defense(qt, once);
  CHECK(once.samples == twice.samples);
}

TEST_CASE("median smoothing kills an isolated spike") {
  Waveform x;
  x.samples = {0.0, 0.0, 1.0, 0.0, 0.0};
  const Waveform y = apply_defense(defense_ms(3), x);
  CHECK(y.samples == std::vector<double>{0.0, 0.0, 0.0, 0.0, 0.0});
}

TEST_CASE("average smoothing leaves a constant signal unchanged") {
  Waveform x;
  x.samples.assign(64, 0.37);
  const Waveform y = apply_defense(defense_as(5), x);
  for (double v : y.samples) CHECK(v == doctest::Approx(0.37));
}

TEST_CASE("all defenses preserve length and the [-1, 1] range") {
  const Waveform x = random_wave(4096, 2, 0.99);
  for (const Defense& d :
       {defense_qt(), defense_at(15.0, 3), defense_as(), defense_ms(),
        defense_ds(), defense_lpf(), defense_bpf()}) {
    const Waveform y = apply_defense(d, x);
    CHECK(y.size() == x.size());
    for (double v : y.samples) {
      CHECK(v <= 1.0);
      CHECK(v >= -1.0);
    }
  }
}

TEST_CASE("lpf attenuates a band-stopped tone but passes a low tone") {
  const int64_t n = 8000;
  auto tone = [&](double hz) {
    Waveform w;
    w.samples.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
      w.samples[static_cast<size_t>(i)] =
          0.5 * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / 16000.0);
    return w;
  };
  auto rms = [](const Waveform& w) {
    double acc = 0.0;
    for (double v : w.samples) acc += v * v;
    return std::sqrt(acc / static_cast<double>(w.samples.size()));
  };
  const Defense lpf = defense_lpf(4000.0);
  CHECK(rms(apply_defense(lpf, tone(1000.0))) >
        0.8 * rms(tone(1000.0)));
  CHECK(rms(apply_defense(lpf, tone(6000.0))) <
        0.1 * rms(tone(6000.0)));
}

TEST_CASE("defense evaluation limiting cases") {
  // one tiny SRS, enrolled with two speakers
  SpeakerCorpus corpus = synth_corpus(3, 3, 0.8, 901);
  TrainOptions opts;
  opts.epochs = 10;
  SRSModel m = train_background(
      corpus,
      ModelSpec{FeatureKind::kFbank, 12, 8, PoolingKind::kMean,
                ScoringKind::kCosine, 31},
      FeatureConfig{}, opts);
  for (int s = 0; s < 2; ++s)
    enroll(m, corpus.speakers[static_cast<size_t>(s)].speaker_id,
           {&corpus.speakers[static_cast<size_t>(s)].utterances[0].wave});
  m.threshold = 0.2;

  std::vector<std::pair<const Waveform*, int>> enrolled_voices;
  for (int s = 0; s < 2; ++s)
    enrolled_voices.emplace_back(
        &corpus.speakers[static_cast<size_t>(s)].utterances[1].wave, s);
  std::vector<const Waveform*> imposters = {
      &corpus.speakers[2].utterances[0].wave};

  // a do-nothing defense keeps the undefended accuracy
  const Defense qt_fine = defense_qt(1 << 20);
  const DefenseReport base =
      evaluate_defense(qt_fine, m, Task::kOSI, enrolled_voices, imposters, {});
  int plain_ok = 0;
  for (const auto& [w, s] : enrolled_voices)
    plain_ok += decide(m, score(m, *w), Task::kOSI).speaker_index == s ? 1 : 0;
  CHECK(base.acc_enrolled ==
        doctest::Approx(static_cast<double>(plain_ok) / 2.0));

  // a transform that zeroes its input rejects every enrolled voice once the
  // threshold clears the zero-signal score
  Waveform silent;
  silent.samples.assign(16000, 0.0);
  const std::vector<double> s0 = score(m, silent);
  SRSModel strict = m;
  strict.threshold = *std::max_element(s0.begin(), s0.end()) + 0.1;
  Waveform tiny = corpus.speakers[0].utterances[1].wave;
  for (double& v : tiny.samples) v *= 1e-6;  // quantizes to exactly zero
  const std::vector<std::pair<const Waveform*, int>> tiny_enrolled = {
      {&tiny, 0}};
  const DefenseReport zeroed = evaluate_defense(
      defense_qt(2), strict, Task::kOSI, tiny_enrolled, {}, {});
  CHECK(zeroed.acc_enrolled == 0.0);
}
