#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "ski/scenarios.hpp"

namespace ski {

// Numbers are written with "%.12g" so files are reproducible across runs.
std::string format_number(double value);

// Columns: t, <y names>, <u names>, est_<label>..., ci_<label>...,
// prior_<label>..., and step_ms when requested.
void write_trace_csv(const std::filesystem::path& path, const scenarios::RunTrace& trace,
                     bool include_step_ms);
// Columns: t, step_ms.
void write_timing_csv(const std::filesystem::path& path, const scenarios::RunTrace& trace);

nlohmann::json metrics_to_json(const scenarios::RunMetrics& metrics,
                               const std::vector<std::string>& labels);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

// Columns: label, coefficient.
void write_coefficients_csv(const std::filesystem::path& path,
                            const std::vector<std::string>& labels,
                            const Eigen::VectorXd& coefficients);

struct TraceTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

// Throws ConfigError on unreadable or malformed input.
TraceTable read_trace_csv(const std::filesystem::path& path);

struct RelevanceRow {
  std::string label;
  double variance = 0.0;
  bool selected = false;
};

// Final prior variances from the prior_<label> columns of a trace.
// Throws ConfigError if the trace is empty or has no prior columns.
std::vector<RelevanceRow> relevance_from_trace(const TraceTable& trace, double threshold);
void write_relevance_csv(const std::filesystem::path& path, const std::vector<RelevanceRow>& rows);

struct Table1Row {
  std::string method;
  double mean_l1_error_median = 0.0;
  double per_step_ms_median = 0.0;
  int seeds = 0;  // successful cells
};
void write_table1_csv(const std::filesystem::path& path, const std::vector<Table1Row>& rows);

}  // namespace ski
