#include "qfta/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "qfta/errors.hpp"

namespace qfta {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"corpus",
       {"seed", "n_train_speakers", "train_utts", "train_duration_s",
        "n_enrolled", "enroll_voices", "enroll_duration_s", "test_utts",
        "test_duration_s", "n_imposters", "imposter_utts",
        "imposter_duration_s"}},
      {"zoo", {"model"}},
      {"enrollment", {"setting"}},
      {"attack",
       {"epsilon", "alpha", "n_steps", "beta", "loss", "rank_strategy",
        "weighting", "scenario", "mods", "method", "n_seeds", "target_index",
        "master_seed", "rir_count", "jobs"}},
      {"selection", {"gamma"}},
      {"defense",
       {"kind", "levels", "snr_db", "kernel", "factor", "cutoff_hz", "low_hz",
        "high_hz"}},
      {"output", {"dir", "trace"}},
  };
  return keys;
}

}  // namespace

bool RunConfig::has(const std::string& section, const std::string& key) const {
  auto it = sections.find(section);
  if (it == sections.end()) return false;
  for (const auto& [k, v] : it->second)
    if (k == key) return true;
  return false;
}

std::string RunConfig::get(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
  auto it = sections.find(section);
  if (it == sections.end()) return fallback;
  for (const auto& [k, v] : it->second)
    if (k == key) return v;
  return fallback;
}

std::vector<std::string> RunConfig::get_all(const std::string& section,
                                            const std::string& key) const {
  std::vector<std::string> out;
  auto it = sections.find(section);
  if (it == sections.end()) return out;
  for (const auto& [k, v] : it->second)
    if (k == key) out.push_back(v);
  return out;
}

double RunConfig::get_num(const std::string& section, const std::string& key,
                          double fallback) const {
  const std::string v = get(section, key, "");
  if (v.empty()) return fallback;
  try {
    size_t used = 0;
    const double parsed = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key +
                      " is not a number: \"" + v + "\"");
  }
}

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_keys().count(section))
        throw ConfigError("config: unknown section [" + section + "]");
      cfg.sections.try_emplace(section);
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!known_keys().at(section).count(key))
      throw ConfigError("config: unknown key \"" + key + "\" in [" + section +
                        "]");
    cfg.sections[section].emplace_back(key, value);
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config_text(ss.str());
}

ModelSpec model_spec_from_string(const std::string& text) {
  ModelSpec spec;
  std::istringstream in(text);
  std::string token;
  while (in >> token) {
    if (!token.empty() && token.back() == ',') token.pop_back();
    const size_t eq = token.find('=');
    if (eq == std::string::npos)
      throw ConfigError("model spec: expected key=value, got \"" + token +
                        "\"");
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "feature") spec.feature_kind = feature_kind_from_name(value);
    else if (key == "scoring") spec.scoring = scoring_kind_from_name(value);
    else if (key == "pooling") spec.pooling = pooling_kind_from_name(value);
    else if (key == "hidden") spec.hidden_dim = std::stoi(value);
    else if (key == "embed") spec.embed_dim = std::stoi(value);
    else if (key == "seed") spec.seed = std::stoull(value);
    else
      throw ConfigError("model spec: unknown field \"" + key + "\"");
  }
  return spec;
}

std::vector<SerialMod> mods_from_string(
    const std::string& text, Scenario scenario,
    std::shared_ptr<const std::vector<Tensor>> rirs) {
  const std::string t = trim(text);
  if (t == "none") return {};
  if (t.empty() || t == "default")
    return default_parallel_mods(scenario, std::move(rirs));

  std::vector<SerialMod> out;
  std::istringstream chains(t);
  std::string chain;
  while (std::getline(chains, chain, ',')) {
    chain = trim(chain);
    if (chain.empty()) continue;
    std::vector<ModFn> fns;
    std::istringstream parts(chain);
    std::string part;
    while (std::getline(parts, part, '+')) {
      part = trim(part);
      if (part == "rd") fns.push_back(rd_mod(rirs));
      else if (part == "nf") fns.push_back(nf_mod());
      else if (part == "sa") fns.push_back(sa_mod());
      else if (part == "cd")
        fns.push_back(scenario == Scenario::kTargetedOSI
                          ? cd_mod()
                          : cd_mod_untargeted());
      else if (part == "fd") fns.push_back(fd_mod());
      else if (part == "tw") fns.push_back(tw_mod());
      else if (part == "tm") fns.push_back(tm_mod());
      else if (part == "fm") fns.push_back(fm_mod());
      else
        throw ConfigError("mods: unknown function \"" + part + "\"");
    }
    out.push_back(compose_serial(std::move(fns)));
  }
  return out;
}

ExperimentPlan plan_from_config(const RunConfig& cfg) {
  ExperimentPlan plan;

  plan.corpus.seed = static_cast<uint64_t>(cfg.get_num("corpus", "seed", 7));
  plan.corpus.n_train_speakers =
      static_cast<int>(cfg.get_num("corpus", "n_train_speakers", 12));
  plan.corpus.train_utts =
      static_cast<int>(cfg.get_num("corpus", "train_utts", 6));
  plan.corpus.train_duration_s =
      cfg.get_num("corpus", "train_duration_s", 2.0);
  plan.corpus.n_enrolled =
      static_cast<int>(cfg.get_num("corpus", "n_enrolled", 10));
  plan.corpus.enroll_voices =
      static_cast<int>(cfg.get_num("corpus", "enroll_voices", 5));
  plan.corpus.enroll_duration_s =
      cfg.get_num("corpus", "enroll_duration_s", 1.5);
  plan.corpus.test_utts = static_cast<int>(cfg.get_num("corpus", "test_utts",
                                                       4));
  plan.corpus.test_duration_s = cfg.get_num("corpus", "test_duration_s", 1.0);
  plan.corpus.n_imposters =
      static_cast<int>(cfg.get_num("corpus", "n_imposters", 10));
  plan.corpus.imposter_utts =
      static_cast<int>(cfg.get_num("corpus", "imposter_utts", 10));
  plan.corpus.imposter_duration_s =
      cfg.get_num("corpus", "imposter_duration_s", 1.0);

  for (const std::string& m : cfg.get_all("zoo", "model"))
    plan.zoo.push_back(model_spec_from_string(m));

  plan.enrollment = enrollment_from_name(
      cfg.get("enrollment", "setting", "differ-enroll"));

  plan.scenario =
      scenario_from_name(cfg.get("attack", "scenario", "targeted-osi"));
  plan.attack = default_config(plan.scenario);
  plan.attack.epsilon = cfg.get_num("attack", "epsilon", 0.02);
  plan.attack.alpha =
      cfg.get_num("attack", "alpha", plan.attack.epsilon / 5.0);
  plan.attack.n_steps = static_cast<int>(cfg.get_num("attack", "n_steps",
                                                     300));
  plan.attack.sampling_size =
      static_cast<int>(cfg.get_num("attack", "beta", 5));
  if (cfg.has("attack", "loss"))
    plan.attack.loss = loss_kind_from_name(cfg.get("attack", "loss", ""));
  plan.attack.rank_strategy = rank_strategy_from_name(
      cfg.get("attack", "rank_strategy", "sum-global"));
  plan.attack.weighting =
      cfg.get("attack", "weighting", "dynamic") == "uniform"
          ? WeightingMode::kUniform
          : WeightingMode::kDynamic;
  plan.method =
      attack_method_from_name(cfg.get("attack", "method", "qfa2sr"));
  plan.use_corrosion = cfg.get("attack", "mods", "default") != "none";
  plan.n_seeds = static_cast<int>(cfg.get_num("attack", "n_seeds", 40));
  plan.target_index =
      static_cast<int>(cfg.get_num("attack", "target_index", 0));
  plan.master_seed =
      static_cast<uint64_t>(cfg.get_num("attack", "master_seed", 1));
  plan.rir_count = static_cast<int>(cfg.get_num("attack", "rir_count", 16));
  plan.jobs = static_cast<int>(cfg.get_num("attack", "jobs", 0));

  if (cfg.has("selection", "gamma"))
    plan.gamma = static_cast<int>(cfg.get_num("selection", "gamma", 1));

  if (cfg.has("defense", "kind")) {
    const std::string kind = cfg.get("defense", "kind", "");
    Defense d;
    switch (defense_kind_from_name(kind)) {
      case DefenseKind::kQT:
        d = defense_qt(static_cast<int>(cfg.get_num("defense", "levels",
                                                    512)));
        break;
      case DefenseKind::kAT:
        d = defense_at(cfg.get_num("defense", "snr_db", 15.0));
        break;
      case DefenseKind::kAS:
        d = defense_as(static_cast<int>(cfg.get_num("defense", "kernel", 5)));
        break;
      case DefenseKind::kMS:
        d = defense_ms(static_cast<int>(cfg.get_num("defense", "kernel", 5)));
        break;
      case DefenseKind::kDS:
        d = defense_ds(static_cast<int>(cfg.get_num("defense", "factor", 2)));
        break;
      case DefenseKind::kLPF:
        d = defense_lpf(cfg.get_num("defense", "cutoff_hz", 4000.0));
        break;
      case DefenseKind::kBPF:
        d = defense_bpf(cfg.get_num("defense", "low_hz", 300.0),
                        cfg.get_num("defense", "high_hz", 4000.0));
        break;
    }
    plan.defense = d;
  }
  return plan;
}

}  // namespace qfta
