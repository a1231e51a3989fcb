#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "ski/commands.hpp"
#include "ski/persistence.hpp"

using namespace ski;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ski_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the installed CLI binary through the shell and captures both streams.
Outcome cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const fs::path dir = scratch("capture" + std::to_string(counter++));
  const std::string cmd = env + " '" + std::string(SKI_CLI_PATH) + "' " + args + " >'" +
                          (dir / "out").string() + "' 2>'" + (dir / "err").string() + "'";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = slurp(dir / "out");
  o.err = slurp(dir / "err");
  return o;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << body;
  return p;
}

std::string preset(const std::string& name) {
  return (fs::path(SKI_SOURCE_DIR) / "configs" / (name + ".json")).string();
}

}  // namespace

TEST(CliRun, MissingConfigExitsOneAndNamesPath) {
  const Outcome o = cli("run /no/such/config.json -o /tmp/ski_never");
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("/no/such/config.json"), std::string::npos) << o.err;
}

TEST(CliRun, UnknownKeyExitsOne) {
  const fs::path dir = scratch("unknown_key");
  const fs::path cfg = write_config(dir, R"({"scenario":"wingrock","gain_schedule":true})");
  const Outcome o = cli("run " + cfg.string() + " -o " + (dir / "out").string());
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("gain_schedule"), std::string::npos) << o.err;
  EXPECT_FALSE(fs::exists(dir / "out" / "trace.csv"));
}

TEST(CliRun, OverrideIntoScalarKeyExitsOne) {
  const Outcome o = cli("run " + preset("paper-wingrock") + " --set scenario.meas_noise_std=0");
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("scenario.meas_noise_std"), std::string::npos) << o.err;
}

TEST(CliRun, BadFlagExitsOne) {
  EXPECT_EQ(cli("run").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
}

TEST(CliRun, WingRockSkiWritesOutputs) {
  const fs::path dir = scratch("wingrock_ski");
  const Outcome o = cli("run " + preset("paper-wingrock") + " -o " + dir.string());
  ASSERT_EQ(o.code, 0) << o.err;
  const auto metrics = nlohmann::json::parse(slurp(dir / "metrics.json"));
  EXPECT_TRUE(metrics.contains("mean_l1_error"));
  EXPECT_TRUE(metrics.contains("per_step_ms"));
  EXPECT_TRUE(metrics.contains("selected_basis"));
  EXPECT_TRUE(metrics["l1_relative_error_L"].is_null());
  EXPECT_EQ(metrics["failed"], false);
  EXPECT_TRUE(fs::exists(dir / "trace.csv"));
  EXPECT_TRUE(fs::exists(dir / "timing.csv"));
}

TEST(CliRun, SameSeedGivesByteIdenticalTrace) {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  for (const char* method : {"ski", "ekf", "sindy"}) {
    const std::string set = std::string(" --set method=") + method + " --set seed=3";
    ASSERT_EQ(cli("run " + preset("paper-wingrock") + set + " -o " + a.string()).code, 0);
    ASSERT_EQ(cli("run " + preset("paper-wingrock") + set + " -o " + b.string()).code, 0);
    const std::string ta = slurp(a / "trace.csv");
    EXPECT_FALSE(ta.empty());
    EXPECT_EQ(ta, slurp(b / "trace.csv")) << method;
  }
}

TEST(CliRun, DifferentSeedsDiffer) {
  const fs::path a = scratch("seed_a"), b = scratch("seed_b");
  ASSERT_EQ(cli("run " + preset("paper-wingrock") + " --set seed=1 -o " + a.string()).code, 0);
  ASSERT_EQ(cli("run " + preset("paper-wingrock") + " --set seed=2 -o " + b.string()).code, 0);
  EXPECT_NE(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
}

TEST(CliRun, FilterFailureExitsTwo) {
  // A huge initial covariance spreads the sigma points far enough that the
  // cubic basis overflows, which the run reports as a failure.
  const fs::path dir = scratch("failure");
  const Outcome o = cli("run " + preset("paper-wingrock") +
                        " --set filter.p0=1e300 -o " + dir.string());
  EXPECT_EQ(o.code, 2) << o.out << o.err;
  EXPECT_FALSE(o.err.empty());
}

TEST(CliRun, DoesNotModifyConfigFile) {
  const fs::path dir = scratch("immutable");
  const fs::path cfg = write_config(dir, R"({"scenario":"wingrock", "method":"ukf"})");
  const std::string before = slurp(cfg);
  const auto stamp = fs::last_write_time(cfg);
  ASSERT_EQ(cli("run " + cfg.string() + " --set seed=4 -o " + (dir / "o").string()).code, 0);
  EXPECT_EQ(slurp(cfg), before);
  EXPECT_EQ(fs::last_write_time(cfg), stamp);
}

TEST(CliRun, OutputDirFromEnvironment) {
  const fs::path dir = scratch("env_out");
  const fs::path cfg = write_config(dir, R"({"scenario":"wingrock", "method":"ekf"})");
  const Outcome o = cli("run " + cfg.string(), "SKI_OUT_DIR='" + (dir / "env").string() + "'");
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(fs::exists(dir / "env" / "metrics.json"));
}

TEST(CliRun, SindyWritesCoefficientTable) {
  const fs::path dir = scratch("sindy");
  ASSERT_EQ(cli("run " + preset("paper-wingrock") + " --set method=sindy -o " + dir.string()).code,
            0);
  const std::string coef = slurp(dir / "coefficients.csv");
  EXPECT_EQ(coef.rfind("label,coefficient\n1,", 0), 0u) << coef;
}

TEST(CliBenchmark, FourRowTable) {
  const fs::path dir = scratch("bench");
  const Outcome o =
      cli("benchmark " + preset("paper-wingrock") + " --set seeds=[0,1,2] -j 2 -o " + dir.string());
  ASSERT_EQ(o.code, 0) << o.err;
  std::istringstream in(slurp(dir / "table1.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "method,mean_l1_error_median,per_step_ms_median,seeds");
  std::vector<std::string> methods;
  while (std::getline(in, line)) {
    methods.push_back(line.substr(0, line.find(',')));
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "3");
  }
  EXPECT_EQ(methods, (std::vector<std::string>{"ski", "ukf", "ekf", "sindy"}));
  const auto cells = nlohmann::json::parse(slurp(dir / "cells.json"));
  EXPECT_EQ(cells.size(), 12u);
}

TEST(CliBenchmark, WorkerCountDoesNotChangeResults) {
  const fs::path a = scratch("bench_j1"), b = scratch("bench_j4");
  const std::string base = "benchmark " + preset("paper-wingrock") + " --set seeds=[0,1] ";
  ASSERT_EQ(cli(base + "-j 1 -o " + a.string()).code, 0);
  ASSERT_EQ(cli(base + "-j 4 -o " + b.string()).code, 0);
  auto strip_timing = [](nlohmann::json cells) {
    for (auto& c : cells) c.erase("per_step_ms");
    return cells;
  };
  EXPECT_EQ(strip_timing(nlohmann::json::parse(slurp(a / "cells.json"))),
            strip_timing(nlohmann::json::parse(slurp(b / "cells.json"))));
}

TEST(CliRelevance, DelayTraceHasOneSelectedLag) {
  const fs::path dir = scratch("rel_delay");
  ASSERT_EQ(cli("run " + preset("paper-delay") + " -o " + dir.string()).code, 0);
  const Outcome o = cli("relevance-report " + (dir / "trace.csv").string());
  ASSERT_EQ(o.code, 0) << o.err;
  const TraceTable rel = [&] {
    // relevance.csv has a text column, so parse it by hand.
    TraceTable t;
    std::istringstream in(slurp(dir / "relevance.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      t.header.push_back(line.substr(0, line.find(',')));
      t.rows.push_back({line.back() == '1' ? 1.0 : 0.0});
    }
    return t;
  }();
  ASSERT_EQ(rel.header.size(), 8u);
  int selected = 0;
  for (std::size_t i = 0; i < rel.rows.size(); ++i) {
    if (rel.rows[i][0] == 1.0) {
      ++selected;
      EXPECT_EQ(rel.header[i], "delay6");
    }
  }
  EXPECT_EQ(selected, 1);
}

TEST(CliRelevance, QuadrotorSelectsConstantPwmAndDrag) {
  const fs::path dir = scratch("rel_quad");
  ASSERT_EQ(cli("run " + preset("paper-quad") + " -o " + dir.string()).code, 0);
  const fs::path out = dir / "custom.csv";
  const Outcome o = cli("relevance-report " + (dir / "trace.csv").string() + " -o " + out.string());
  ASSERT_EQ(o.code, 0) << o.err;
  std::istringstream in(slurp(out));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "label,variance,selected");
  std::vector<std::string> chosen;
  while (std::getline(in, line)) {
    if (line.back() == '1') chosen.push_back(line.substr(0, line.find(',')));
  }
  EXPECT_EQ(chosen, (std::vector<std::string>{"1", "pwm", "|v|"}));
}

TEST(CliRelevance, EmptyOrMissingTraceExitsOne) {
  const fs::path dir = scratch("rel_empty");
  std::ofstream(dir / "trace.csv") << "";
  EXPECT_EQ(cli("relevance-report " + (dir / "trace.csv").string()).code, 1);
  EXPECT_EQ(cli("relevance-report " + (dir / "missing.csv").string()).code, 1);
  std::ofstream(dir / "junk.csv") << "t,prior_a\n0,abc\n";
  EXPECT_EQ(cli("relevance-report " + (dir / "junk.csv").string()).code, 1);
}

TEST(CliPrintConfig, EchoReparsesToSameConfig) {
  const fs::path dir = scratch("print");
  const Outcome first = cli("print-config " + preset("paper-delay") + " --set ard.n_hp=3");
  ASSERT_EQ(first.code, 0) << first.err;
  const fs::path echoed = dir / "echo.json";
  std::ofstream(echoed) << first.out;
  const Outcome second = cli("print-config " + echoed.string());
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_EQ(first.out, second.out);
  EXPECT_EQ(load_config(echoed).identification.ard.n_hp, 3);
}

TEST(Commands, InProcessRunMatchesExitContract) {
  std::ostringstream out, err;
  RunOptions opts;
  opts.config_path = "/definitely/missing.json";
  EXPECT_EQ(cmd_run(opts, out, err), kExitConfig);
  EXPECT_NE(err.str().find("missing.json"), std::string::npos);
}
