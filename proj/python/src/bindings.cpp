#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ski/config.hpp"
#include "ski/errors.hpp"
#include "ski/matkernels.hpp"
#include "ski/persistence.hpp"
#include "ski/scenarios.hpp"
#include "ski/sindy.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

// Configs cross the boundary as JSON text; the Python package converts to and
// from dicts so the C++ side keeps a single parser.
nlohmann::json parse_json(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ski::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

ski::RunConfig parse_config(const std::string& text) {
  return ski::config_from_json(parse_json(text));
}

py::dict run_cell(const std::string& config_text, const std::string& method_name,
                  std::uint64_t seed) {
  const ski::RunConfig config = parse_config(config_text);
  const auto method =
      method_name.empty() ? config.method : ski::scenarios::parse_method(method_name);
  ski::scenarios::RunResult result;
  {
    py::gil_scoped_release release;
    const auto prep = ski::scenarios::prepare(config.scenario, config.identification.filter, seed);
    result = ski::scenarios::run_identification(prep, method, config.identification);
  }
  const auto& tr = result.trace;
  const auto& m = result.metrics;
  py::dict metrics = py::cast<py::dict>(py::module_::import("json").attr("loads")(
      ski::metrics_to_json(m, tr.labels).dump()));
  return py::dict("labels"_a = tr.labels, "y_names"_a = tr.y_names, "u_names"_a = tr.u_names,
                  "t"_a = tr.t, "y"_a = tr.y, "u"_a = tr.u, "estimate"_a = tr.estimate,
                  "half_width"_a = tr.half_width, "prior_variance"_a = tr.prior_var,
                  "metrics"_a = metrics);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sparse Kalman identification: square-root UKF with online relevance learning";

  static py::exception<ski::Error> base_error(m, "SkiError", PyExc_RuntimeError);
  static py::exception<ski::ConfigError> config_error(m, "ConfigError", base_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ski::ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const ski::Error& e) {
      py::set_error(base_error, e.what());
    }
  });

  m.def(
      "default_config",
      [](const std::string& scenario) {
        return ski::config_to_json(ski::default_config(ski::scenarios::parse_scenario(scenario)))
            .dump();
      },
      "scenario"_a, "Preset config for a scenario, as JSON text.");

  m.def(
      "resolve_config",
      [](const std::string& config_text, const std::vector<std::string>& overrides) {
        nlohmann::json j = parse_json(config_text);
        for (const auto& o : overrides) ski::apply_override(j, o);
        return ski::config_to_json(ski::config_from_json(j)).dump();
      },
      "config"_a, "overrides"_a = std::vector<std::string>{},
      "Validate a JSON config, apply key=value overrides, return the full config.");

  m.def("load_config",
        [](const std::string& path) { return ski::config_to_json(ski::load_config(path)).dump(); },
        "path"_a);

  m.def("run", &run_cell, "config"_a, "method"_a = "", "seed"_a = 0,
        "Run one identification cell and return the trace and metrics.");

  m.def(
      "cholesky_factor",
      [](const Eigen::MatrixXd& a) { return ski::linalg::cholesky_factor(a).matrix(); }, "a"_a);
  m.def(
      "chol_rank_one",
      [](const Eigen::MatrixXd& l, const Eigen::VectorXd& x, double w) {
        return ski::linalg::chol_rank_one(ski::linalg::LowerTriangular(l), x, w).matrix();
      },
      "l"_a, "x"_a, "w"_a);
  m.def(
      "qr_r_factor", [](const Eigen::MatrixXd& a) { return ski::linalg::qr_r_factor(a).matrix(); },
      "a"_a);
  m.def(
      "solve_with_factor",
      [](const Eigen::MatrixXd& l, const Eigen::MatrixXd& b) {
        return ski::linalg::solve_with_factor(ski::linalg::LowerTriangular(l), b);
      },
      "l"_a, "b"_a);

  m.def(
      "sparse_regress",
      [](const Eigen::MatrixXd& psi, const Eigen::VectorXd& target, double lam, double tolerance,
         int max_sweeps) {
        ski::sindy::RegressOptions opt;
        opt.tolerance = tolerance;
        opt.max_sweeps = max_sweeps;
        const auto r = ski::sindy::sparse_regress(psi, target, lam, opt);
        return py::make_tuple(r.coef, r.converged, r.sweeps);
      },
      "psi"_a, "target"_a, "lam"_a, "tolerance"_a = ski::sindy::RegressOptions{}.tolerance,
      "max_sweeps"_a = ski::sindy::RegressOptions{}.max_sweeps,
      "Coordinate-descent LASSO. Returns (coef, converged, sweeps).");
}
