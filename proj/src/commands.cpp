#include "ski/commands.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "ski/errors.hpp"
#include "ski/persistence.hpp"

namespace ski {

using scenarios::Method;

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Cell {
  Method method;
  std::uint64_t seed;
  scenarios::RunMetrics metrics;
  std::vector<std::string> labels;
  std::string error;
};

scenarios::RunResult execute(const RunConfig& config, Method method, std::uint64_t seed) {
  const scenarios::Prepared prep =
      scenarios::prepare(config.scenario, config.identification.filter, seed);
  return scenarios::run_identification(prep, method, config.identification);
}

}  // namespace

RunConfig resolve_config(const RunOptions& options) {
  nlohmann::json j = load_config_json(options.config_path);
  for (const auto& o : options.overrides) apply_override(j, o);
  return config_from_json(j);
}

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = resolve_config(options);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto dir = resolve_output_dir(config, options.output_dir);
  const std::uint64_t seed = config.seeds.front();
  scenarios::RunResult result;
  try {
    result = execute(config, config.method, seed);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "run failed: " << e.what() << '\n';
    return kExitFailure;
  }
  try {
    write_trace_csv(dir / "trace.csv", result.trace, config.trace_step_ms);
    write_timing_csv(dir / "timing.csv", result.trace);
    write_json(dir / "metrics.json", metrics_to_json(result.metrics, result.trace.labels));
    if (config.method == Method::Sindy) {
      write_coefficients_csv(dir / "coefficients.csv", result.trace.labels,
                             result.metrics.final_estimate);
    }
  } catch (const std::exception& e) {
    err << "cannot write outputs: " << e.what() << '\n';
    return kExitConfig;
  }
  if (result.metrics.failed) {
    err << "filter failure: " << result.metrics.failure << '\n';
    return kExitFailure;
  }
  out << scenarios::to_string(config.scenario.kind) << '/' << scenarios::to_string(config.method)
      << " seed " << seed << ": mean_l1_error " << format_number(result.metrics.mean_l1_error)
      << ", per_step_ms " << format_number(result.metrics.per_step_ms) << ", outputs in "
      << dir.string() << '\n';
  return kExitOk;
}

int cmd_benchmark(const BenchmarkOptions& options, std::ostream& out, std::ostream& err) {
  RunConfig config;
  try {
    config = resolve_config(options.run);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto dir = resolve_output_dir(config, options.run.output_dir);
  const int workers = std::max(1, options.workers > 0 ? options.workers : config.workers);

  std::vector<Cell> cells;
  for (Method m : config.methods) {
    for (std::uint64_t s : config.seeds) cells.push_back({m, s, {}, {}, {}});
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& c = cells[i];
      try {
        scenarios::RunResult r = execute(config, c.method, c.seed);
        c.metrics = std::move(r.metrics);
        c.labels = std::move(r.trace.labels);
        if (c.metrics.failed) c.error = c.metrics.failure;
      } catch (const std::exception& e) {
        c.metrics.failed = true;
        c.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int spawn = std::min<int>(workers, static_cast<int>(cells.size()));
  for (int i = 0; i < spawn; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::vector<Table1Row> table;
  bool every_method_ok = true;
  for (Method m : config.methods) {
    std::vector<double> errors;
    std::vector<double> times;
    for (const Cell& c : cells) {
      if (c.method != m || c.metrics.failed) continue;
      errors.push_back(c.metrics.mean_l1_error);
      times.push_back(c.metrics.per_step_ms);
    }
    if (errors.empty()) every_method_ok = false;
    table.push_back({scenarios::to_string(m), median(errors), median(times),
                     static_cast<int>(errors.size())});
  }
  try {
    write_table1_csv(dir / "table1.csv", table);
    auto cells_out = nlohmann::json::array();
    for (const Cell& c : cells) {
      nlohmann::json row = metrics_to_json(c.metrics, c.labels);
      row["method"] = scenarios::to_string(c.method);
      row["seed"] = c.seed;
      if (!c.error.empty()) row["failure"] = c.error;
      cells_out.push_back(row);
    }
    write_json(dir / "cells.json", cells_out);
  } catch (const std::exception& e) {
    err << "cannot write outputs: " << e.what() << '\n';
    return kExitConfig;
  }
  for (const Cell& c : cells) {
    if (c.metrics.failed) {
      err << scenarios::to_string(c.method) << " seed " << c.seed << " failed: " << c.error
          << '\n';
    }
  }
  out << "method,mean_l1_error_median,per_step_ms_median,seeds\n";
  for (const auto& r : table) {
    out << r.method << ',' << format_number(r.mean_l1_error_median) << ','
        << format_number(r.per_step_ms_median) << ',' << r.seeds << '\n';
  }
  return every_method_ok ? kExitOk : kExitFailure;
}

int cmd_relevance_report(const std::filesystem::path& trace_path,
                         const std::filesystem::path& output, double threshold,
                         std::ostream& out, std::ostream& err) {
  try {
    const TraceTable trace = read_trace_csv(trace_path);
    const auto rows = relevance_from_trace(trace, threshold);
    const auto target = output.empty() ? trace_path.parent_path() / "relevance.csv" : output;
    write_relevance_csv(target, rows);
    for (const auto& r : rows) {
      out << r.label << ' ' << format_number(r.variance) << (r.selected ? " *" : "") << '\n';
    }
  } catch (const ConfigError& e) {
    err << "relevance-report: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "relevance-report: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

int cmd_print_config(const RunOptions& options, std::ostream& out, std::ostream& err) {
  try {
    out << config_to_json(resolve_config(options)).dump(2) << '\n';
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace ski
