// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Scenario criteria go through the same benchmark/run commands as the CLI,
// using the preset files shipped in configs/.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "criteria.hpp"
#include "json.hpp"
#include "ski/commands.hpp"
#include "ski/persistence.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return std::nan("");
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path preset(const std::string& name) {
  return fs::path(SKI_SOURCE_DIR) / "configs" / (name + ".json");
}

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ski_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Grid {
  int exit_code = -1;
  double wall_s = 0.0;
  json cells;
  std::string err;

  std::vector<const json*> of(const std::string& method) const {
    std::vector<const json*> out;
    for (const auto& c : cells) {
      if (c["method"] == method) out.push_back(&c);
    }
    return out;
  }
  std::vector<double> values(const std::string& method, const std::string& key) const {
    std::vector<double> out;
    for (const json* c : of(method)) {
      if (!(*c)["failed"].get<bool>()) out.push_back((*c)[key].get<double>());
    }
    return out;
  }
};

Grid benchmark(const std::string& name, std::vector<std::string> overrides = {}) {
  ski::BenchmarkOptions opts;
  opts.run.config_path = preset(name);
  opts.run.output_dir = workdir(name).string();
  opts.run.overrides = std::move(overrides);
  opts.workers = 1;  // keep per-step timings single-threaded
  std::ostringstream out, err;
  Grid g;
  const auto start = Clock::now();
  g.exit_code = ski::cmd_benchmark(opts, out, err);
  g.wall_s = seconds_since(start);
  g.err = err.str();
  const fs::path cells = fs::path(opts.run.output_dir) / "cells.json";
  g.cells = fs::exists(cells) ? json::parse(slurp(cells)) : json::array();
  return g;
}

struct Line {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Line()>& check) {
  Line line;
  try {
    line = check();
  } catch (const std::exception& e) {
    line = {false, std::string("exception: ") + e.what()};
  }
  if (!line.pass) ++failures;
  std::cout << (line.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << title
            << "): " << line.detail << std::endl;
}

}  // namespace

int main() {
  const Grid wingrock = benchmark("paper-wingrock");

  report(1, "WingRock accuracy", [&] {
    const double ski = median(wingrock.values("ski", "mean_l1_error"));
    const double ukf = median(wingrock.values("ukf", "mean_l1_error"));
    const double ekf = median(wingrock.values("ekf", "mean_l1_error"));
    const double sindy = median(wingrock.values("sindy", "mean_l1_error"));
    const bool seeds_ok = wingrock.values("ski", "mean_l1_error").size() == 10 &&
                          wingrock.values("ukf", "mean_l1_error").size() == 10 &&
                          wingrock.values("ekf", "mean_l1_error").size() == 10;
    const bool pass = wingrock.exit_code == 0 && seeds_ok && ski <= 0.5 && ukf <= 2.0 &&
                      ski < ukf && ukf < ekf && wingrock.wall_s < 300.0;
    return Line{pass, "median l1 ski " + fmt(ski) + " ukf " + fmt(ukf) + " ekf " + fmt(ekf) +
                          " sindy " + fmt(sindy) + "; 4x10 grid " + fmt(wingrock.wall_s) + " s"};
  });

  report(2, "per-step cost", [&] {
    const double ski = median(wingrock.values("ski", "per_step_ms"));
    const double ukf = median(wingrock.values("ukf", "per_step_ms"));
    return Line{ski < 10.0 && ukf < ski,
                "median per-step ski " + fmt(ski) + " ms, ukf " + fmt(ukf) + " ms"};
  });

  report(3, "delay identification", [] {
    const Grid g = benchmark("paper-delay", {"methods=[\"ski\"]"});
    int hits = 0;
    std::vector<double> gain_err;
    for (const json* c : g.of("ski")) {
      if ((*c)["failed"].get<bool>()) continue;
      std::string best;
      double best_var = -1.0;
      for (const auto& [label, var] : (*c)["final_prior_variance"].items()) {
        if (var.is_number() && var.get<double>() > best_var) {
          best = label;
          best_var = var.get<double>();
        }
      }
      hits += best == "delay6";
      gain_err.push_back((*c)["active_gain_relative_error"].get<double>());
    }
    const double worst = gain_err.empty() ? std::nan("") :
                                            *std::max_element(gain_err.begin(), gain_err.end());
    return Line{hits >= 9 && gain_err.size() == 10 && worst <= 0.1,
                "argmax = delay6 on " + std::to_string(hits) +
                    "/10 seeds; active-gain relative error median " + fmt(median(gain_err)) +
                    ", worst " + fmt(worst)};
  });

  report(4, "quadrotor structure selection", [] {
    const Grid g = benchmark("paper-quad", {"methods=[\"ski\"]"});
    int correct = 0;
    double margin = std::numeric_limits<double>::infinity();
    for (const json* c : g.of("ski")) {
      if ((*c)["failed"].get<bool>()) continue;
      const json want = json::array({"1", "pwm", "|v|"});
      double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
      for (const auto& [label, var] : (*c)["final_prior_variance"].items()) {
        const double v = var.is_number() ? var.get<double>() : std::nan("");
        if (std::find(want.begin(), want.end(), label) != want.end()) {
          lo = std::min(lo, v);
        } else {
          hi = std::max(hi, v);
        }
      }
      const bool chosen = (*c)["selected_labels"] == want;
      correct += chosen && lo >= 10.0 * hi;
      margin = std::min(margin, lo / hi);
    }
    return Line{correct == 10, "selected {1, pwm, |v|} with >= 10x margin on " +
                                   std::to_string(correct) + "/10 seeds; smallest margin " +
                                   fmt(margin) + "x"};
  });

  report(5, "ARD gradient oracle", [] {
    const auto start = Clock::now();
    const auto r = ski::oracle::run_ard_gradient_suite(100, 2024);
    const double t = seconds_since(start);
    return Line{r.ok() && t < 5.0, std::to_string(r.cases) + " instances, " +
                                       std::to_string(r.failures) + " outside rtol 1e-5, " +
                                       fmt(t) + " s" + (r.detail.empty() ? "" : "; " + r.detail)};
  });

  report(6, "posterior-refresh oracle", [] {
    const auto r = ski::oracle::run_refresh_suite(100, 2025);
    return Line{r.ok(), std::to_string(r.cases) + " beliefs, worst error " +
                            fmt(r.worst * 1e-8) + " (tol 1e-8)" +
                            (r.detail.empty() ? "" : "; " + r.detail)};
  });

  report(7, "filter exactness", [] {
    const auto lin = ski::oracle::run_linear_exactness(200, 2026);
    const auto eq = ski::oracle::run_wingrock_dense_equivalence(100, 0);
    const bool pass = lin.ukf_mean.ok() && lin.ukf_cov.ok() && lin.ekf_mean.ok() &&
                      lin.ekf_cov.ok() && eq.mean.ok() && eq.cov.ok();
    auto worst = [](const ski::oracle::SuiteResult& r, double tol) { return fmt(r.worst * tol); };
    return Line{pass, "linear 200 steps: ukf mean " + worst(lin.ukf_mean, 1e-8) + " cov " +
                          worst(lin.ukf_cov, 1e-6) + ", ekf mean " + worst(lin.ekf_mean, 1e-8) +
                          " cov " + worst(lin.ekf_cov, 1e-6) + "; sr vs dense ukf on WingRock " +
                          "100 steps: mean " + worst(eq.mean, 1e-7) + " cov " +
                          worst(eq.cov, 1e-6)};
  });

  report(8, "kernel properties", [] {
    const auto start = Clock::now();
    const auto k = ski::oracle::run_kernel_suite(1000, 2027);
    const double t = seconds_since(start);
    const bool pass = k.cholesky.ok() && k.rank_one.ok() && k.qr.ok() && k.solve.ok() && t < 10.0;
    const int bad = k.cholesky.failures + k.rank_one.failures + k.qr.failures + k.solve.failures;
    std::string first;
    for (const auto* r : {&k.cholesky, &k.rank_one, &k.qr, &k.solve}) {
      if (first.empty()) first = r->detail;
    }
    return Line{pass, "1000 random cases n <= 20, " + std::to_string(bad) + " violations, " +
                          fmt(t) + " s" + (first.empty() ? "" : "; first: " + first)};
  });

  report(9, "determinism", [] {
    std::string detail;
    bool pass = true;
    for (const char* method : {"ski", "ukf", "ekf", "sindy"}) {
      std::string traces[2];
      for (int rep = 0; rep < 2; ++rep) {
        ski::RunOptions opts;
        opts.config_path = preset("paper-wingrock");
        opts.overrides = {std::string("method=") + method, "seed=7"};
        opts.output_dir = workdir(std::string("det_") + method + std::to_string(rep)).string();
        std::ostringstream out, err;
        if (ski::cmd_run(opts, out, err) != 0) pass = false;
        traces[rep] = slurp(fs::path(opts.output_dir) / "trace.csv");
      }
      const bool same = !traces[0].empty() && traces[0] == traces[1];
      pass = pass && same;
      detail += std::string(detail.empty() ? "" : ", ") + method + (same ? " identical" : " DIFFER");
    }
    return Line{pass, "trace.csv twice per method: " + detail};
  });

  return failures == 0 ? 0 : 1;
}
