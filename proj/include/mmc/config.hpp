// JSON run configuration: preset problem plus overrides. Parsing is strict
// (unknown keys are rejected with their path); omitted keys fall back to the
// preset and parameter defaults. emit_config produces the canonical full
// form, which parses back to the identical configuration.
#pragma once

#include <string>

#include "mmc/driver.hpp"

namespace mmc {

struct RunConfig {
  std::string problem = "cantilever2d";
  ProblemDef def;
  RunParams params;
};

RunConfig default_config(const std::string& preset);
RunConfig parse_config(const std::string& json_text);
std::string emit_config(const RunConfig& cfg);

}  // namespace mmc
