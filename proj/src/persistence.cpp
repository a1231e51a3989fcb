#include "ski/persistence.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ski/errors.hpp"

namespace ski {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& text, std::size_t line) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("trace line " + std::to_string(line) + ": '" + text + "' is not a number");
  }
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

void write_trace_csv(const std::filesystem::path& path, const scenarios::RunTrace& trace,
                     bool include_step_ms) {
  auto out = open_out(path);
  out << "t";
  for (const auto& n : trace.y_names) out << ',' << n;
  for (const auto& n : trace.u_names) out << ',' << n;
  for (const auto& l : trace.labels) out << ",est_" << l;
  for (const auto& l : trace.labels) out << ",ci_" << l;
  for (const auto& l : trace.labels) out << ",prior_" << l;
  if (include_step_ms) out << ",step_ms";
  out << '\n';
  for (Index k = 0; k < trace.steps(); ++k) {
    out << format_number(trace.t(k));
    for (Index i = 0; i < trace.y.cols(); ++i) out << ',' << format_number(trace.y(k, i));
    for (Index i = 0; i < trace.u.cols(); ++i) out << ',' << format_number(trace.u(k, i));
    for (Index i = 0; i < trace.estimate.cols(); ++i) {
      out << ',' << format_number(trace.estimate(k, i));
    }
    for (Index i = 0; i < trace.half_width.cols(); ++i) {
      out << ',' << format_number(trace.half_width(k, i));
    }
    for (Index i = 0; i < trace.prior_var.cols(); ++i) {
      out << ',' << format_number(trace.prior_var(k, i));
    }
    if (include_step_ms) out << ',' << format_number(trace.step_ms[static_cast<std::size_t>(k)]);
    out << '\n';
  }
}

void write_timing_csv(const std::filesystem::path& path, const scenarios::RunTrace& trace) {
  auto out = open_out(path);
  out << "t,step_ms\n";
  for (Index k = 0; k < trace.steps(); ++k) {
    out << format_number(trace.t(k)) << ','
        << format_number(trace.step_ms[static_cast<std::size_t>(k)]) << '\n';
  }
}

nlohmann::json metrics_to_json(const scenarios::RunMetrics& m,
                               const std::vector<std::string>& labels) {
  nlohmann::json j;
  auto finite_or_null = [](double v) -> nlohmann::json {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  j["mean_l1_error"] = finite_or_null(m.mean_l1_error);
  j["l1_relative_error_L"] =
      m.l1_relative_error_L ? finite_or_null(*m.l1_relative_error_L) : nlohmann::json(nullptr);
  j["active_gain_relative_error"] = m.active_gain_relative_error
                                        ? finite_or_null(*m.active_gain_relative_error)
                                        : nlohmann::json(nullptr);
  j["per_step_ms"] = m.per_step_ms;
  nlohmann::json selected = nlohmann::json::array();
  nlohmann::json selected_labels = nlohmann::json::array();
  for (Index i : m.selected_basis) {
    selected.push_back(i);
    if (i < static_cast<Index>(labels.size())) selected_labels.push_back(labels[i]);
  }
  j["selected_basis"] = selected;
  j["selected_labels"] = selected_labels;
  j["failed"] = m.failed;
  j["failure"] = m.failure.empty() ? nlohmann::json(nullptr) : nlohmann::json(m.failure);
  nlohmann::json est = nlohmann::json::object();
  nlohmann::json prior = nlohmann::json::object();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto idx = static_cast<Index>(i);
    if (idx < m.final_estimate.size()) est[labels[i]] = finite_or_null(m.final_estimate(idx));
    if (idx < m.final_prior.size()) prior[labels[i]] = finite_or_null(m.final_prior(idx));
  }
  j["final_estimate"] = est;
  j["final_prior_variance"] = prior;
  j["center_fallbacks"] = m.center_fallbacks;
  j["refresh_repairs"] = m.refresh_repairs;
  j["ard_rejections"] = m.ard_rejections;
  return j;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_coefficients_csv(const std::filesystem::path& path,
                            const std::vector<std::string>& labels,
                            const Eigen::VectorXd& coefficients) {
  auto out = open_out(path);
  out << "label,coefficient\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << labels[i] << ',' << format_number(coefficients(static_cast<Index>(i))) << '\n';
  }
}

int TraceTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

TraceTable read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read trace '" + path.string() + "'");
  TraceTable table;
  std::string line;
  if (!std::getline(in, line) || line.empty()) {
    throw ConfigError("trace '" + path.string() + "' is empty");
  }
  table.header = split(line, ',');
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != table.header.size()) {
      throw ConfigError("trace line " + std::to_string(lineno) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(table.header.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_number(f, lineno));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::vector<RelevanceRow> relevance_from_trace(const TraceTable& trace, double threshold) {
  if (trace.rows.empty()) throw ConfigError("trace has no data rows");
  std::vector<RelevanceRow> rows;
  const auto& last = trace.rows.back();
  for (std::size_t i = 0; i < trace.header.size(); ++i) {
    const std::string& h = trace.header[i];
    if (h.rfind("prior_", 0) == 0) rows.push_back({h.substr(6), last[i], false});
  }
  if (rows.empty()) throw ConfigError("trace has no prior_* columns");
  Eigen::VectorXd v(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!(rows[i].variance >= 0.0)) {
      throw ConfigError("trace has an invalid prior variance for '" + rows[i].label + "'");
    }
    v(static_cast<Index>(i)) = rows[i].variance;
  }
  for (Index i : ard::selected_basis(v, threshold)) rows[static_cast<std::size_t>(i)].selected = true;
  return rows;
}

void write_relevance_csv(const std::filesystem::path& path,
                         const std::vector<RelevanceRow>& rows) {
  auto out = open_out(path);
  out << "label,variance,selected\n";
  for (const auto& r : rows) {
    out << r.label << ',' << format_number(r.variance) << ',' << (r.selected ? 1 : 0) << '\n';
  }
}

void write_table1_csv(const std::filesystem::path& path, const std::vector<Table1Row>& rows) {
  auto out = open_out(path);
  out << "method,mean_l1_error_median,per_step_ms_median,seeds\n";
  for (const auto& r : rows) {
    out << r.method << ',' << format_number(r.mean_l1_error_median) << ','
        << format_number(r.per_step_ms_median) << ',' << r.seeds << '\n';
  }
}

}  // namespace ski
