#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "ski/scenarios.hpp"

namespace ski {

// Everything a run or benchmark needs. Parsed from JSON; every key is
// optional except "scenario", and unknown keys are rejected.
struct RunConfig {
  scenarios::ScenarioSettings scenario;
  scenarios::Method method = scenarios::Method::Ski;
  std::vector<scenarios::Method> methods = {scenarios::Method::Ski, scenarios::Method::Ukf,
                                            scenarios::Method::Ekf, scenarios::Method::Sindy};
  std::vector<std::uint64_t> seeds = {0};
  scenarios::IdentificationSettings identification;
  std::string output_dir;  // empty: SKI_OUT_DIR, then "out"
  bool trace_step_ms = false;  // add the per-step timing column to trace.csv
  int workers = 1;
};

// Scenario-specific defaults ("paper" presets).
RunConfig default_config(scenarios::ScenarioKind kind);

// Throws ConfigError with a message naming the offending key.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);

// Reads and validates a config file. Throws ConfigError if it is missing or
// malformed.
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json load_config_json(const std::filesystem::path& path);

// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON when
// possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

bool operator==(const RunConfig& a, const RunConfig& b);

// Resolution order: explicit path, config key, SKI_OUT_DIR, "out".
std::filesystem::path resolve_output_dir(const RunConfig& config,
                                         const std::string& explicit_dir = "");

}  // namespace ski
