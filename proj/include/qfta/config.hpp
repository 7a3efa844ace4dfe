#pragma once

#include <map>
#include <string>
#include <vector>

#include "qfta/eval.hpp"

namespace qfta {

// Flat sectioned key-value config: `[section]` headers, `key = value` lines,
// `#` comments. Repeated keys form lists. Unknown sections or keys are
// rejected; missing keys fall back to the module defaults and are echoed
// into every report through the plan.
struct RunConfig {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>>
      sections;

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  std::vector<std::string> get_all(const std::string& section,
                                   const std::string& key) const;
  double get_num(const std::string& section, const std::string& key,
                 double fallback) const;
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text);

// Builds the experiment plan from a parsed config (module defaults fill the
// gaps). The optional [defense] and [selection] sections map to the plan's
// defense / gamma fields.
ExperimentPlan plan_from_config(const RunConfig& cfg);

ModelSpec model_spec_from_string(const std::string& text);

// "default", "none", or a comma-separated list of serial chains like
// "rd+nf, sa+cd+fd, tw+tm+fm".
std::vector<SerialMod> mods_from_string(
    const std::string& text, Scenario scenario,
    std::shared_ptr<const std::vector<Tensor>> rirs);

}  // namespace qfta
