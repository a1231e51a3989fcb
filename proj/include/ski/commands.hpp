#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ski/config.hpp"

namespace ski {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitFailure = 2 };

struct RunOptions {
  std::filesystem::path config_path;
  std::vector<std::string> overrides;  // key=value
  std::string output_dir;              // overrides config and SKI_OUT_DIR
};

// One (scenario, method, seed) cell. Writes trace.csv, timing.csv,
// metrics.json (plus coefficients.csv for sindy) into the output directory.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct BenchmarkOptions {
  RunOptions run;
  int workers = 0;  // 0: use the config value
};

// Method x seed grid. Writes table1.csv and cells.json.
int cmd_benchmark(const BenchmarkOptions& options, std::ostream& out, std::ostream& err);

// Writes relevance.csv next to the trace unless `output` is given.
int cmd_relevance_report(const std::filesystem::path& trace_path,
                         const std::filesystem::path& output, double threshold,
                         std::ostream& out, std::ostream& err);

// Prints the fully resolved config as JSON.
int cmd_print_config(const RunOptions& options, std::ostream& out, std::ostream& err);

// Loads the config file and applies overrides.
RunConfig resolve_config(const RunOptions& options);

}  // namespace ski
