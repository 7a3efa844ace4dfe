#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qfta/config.hpp"
#include "qfta/errors.hpp"

using namespace qfta;

TEST_CASE("config parsing with sections, lists, and comments") {
  const RunConfig cfg = parse_run_config_text(R"(
# benchmark run
[corpus]
seed = 17
n_enrolled = 10

[zoo]
model = feature=spectrogram scoring=cosine pooling=mean hidden=24 embed=16 seed=101
model = feature=fbank scoring=affine pooling=mean+std hidden=32 embed=16 seed=202

[attack]
epsilon = 0.02
loss = f1
mods = default
)");
  CHECK(cfg.get_num("corpus", "seed", 0) == 17);
  CHECK(cfg.get_all("zoo", "model").size() == 2);
  CHECK(cfg.get("attack", "loss", "") == "f1");
  CHECK(cfg.get("attack", "alpha", "missing") == "missing");
}

TEST_CASE("unknown sections and keys are rejected") {
  CHECK_THROWS_AS(parse_run_config_text("[nonsense]\nfoo = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("[attack]\nunknown_key = 1\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("orphan = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("[attack]\nepsilon : 0.02\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config_text("[attack]\nepsilon = abc\n")
                      .get_num("attack", "epsilon", 0),
                  ConfigError);
}

TEST_CASE("plan inherits defaults and echoes overrides") {
  const RunConfig cfg = parse_run_config_text(R"(
[attack]
scenario = untargeted-osi
n_steps = 50
)");
  const ExperimentPlan plan = plan_from_config(cfg);
  CHECK(plan.scenario == Scenario::kUntargetedOSI);
  CHECK(plan.attack.loss == LossKind::kF3);  // scenario default
  CHECK(plan.attack.n_steps == 50);
  CHECK(plan.attack.epsilon == 0.02);             // module default
  CHECK(plan.attack.alpha == doctest::Approx(0.004));  // epsilon / 5
  CHECK(plan.corpus.n_enrolled == 10);
  CHECK(plan.zoo.empty());  // default zoo filled downstream

  const std::string echo = plan_to_json(plan);
  CHECK(echo.find("untargeted-osi") != std::string::npos);
  CHECK(echo.find("\"n_steps\":50") != std::string::npos);
}

TEST_CASE("model specs parse every field") {
  const ModelSpec spec = model_spec_from_string(
      "feature=mfcc scoring=affine pooling=mean+std hidden=20 embed=12 "
      "seed=77");
  CHECK(spec.feature_kind == FeatureKind::kMfcc);
  CHECK(spec.scoring == ScoringKind::kAffineInner);
  CHECK(spec.pooling == PoolingKind::kMeanStd);
  CHECK(spec.hidden_dim == 20);
  CHECK(spec.embed_dim == 12);
  CHECK(spec.seed == 77);
  CHECK_THROWS_AS(model_spec_from_string("feature=mfcc nonsense=1"),
                  ConfigError);
}

TEST_CASE("mods strings") {
  auto rirs = std::make_shared<const std::vector<Tensor>>(
      gen_rirs(1, RoomRanges{}, 1));
  CHECK(mods_from_string("none", Scenario::kTargetedOSI, rirs).empty());
  const auto def =
      mods_from_string("default", Scenario::kTargetedOSI, rirs);
  REQUIRE(def.size() == 3);
  CHECK(def[0].name() == "rd+nf");
  const auto custom =
      mods_from_string("nf, sa+fd", Scenario::kUntargetedOSI, rirs);
  REQUIRE(custom.size() == 2);
  CHECK(custom[0].name() == "nf");
  CHECK(custom[1].name() == "sa+fd");
  CHECK_THROWS_AS(mods_from_string("xx", Scenario::kTargetedOSI, rirs),
                  ConfigError);
}

TEST_CASE("defense section builds the configured defense") {
  const RunConfig cfg = parse_run_config_text(R"(
[defense]
kind = bpf
low_hz = 250
high_hz = 3500
)");
  const ExperimentPlan plan = plan_from_config(cfg);
  REQUIRE(plan.defense.has_value());
  CHECK(plan.defense->kind == DefenseKind::kBPF);
  CHECK(plan.defense->low_hz == 250.0);
  CHECK(plan.defense->high_hz == 3500.0);
}
