#include <iostream>

#include "CLI11.hpp"
#include "ski/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Sparse Kalman identification: runs, benchmarks and relevance reports"};
  app.require_subcommand(1);

  ski::RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Run one scenario/method/seed cell");
  run->add_option("config", run_opts.config_path, "JSON config file")->required();
  run->add_option("--set", run_opts.overrides, "Override a config key, e.g. --set filter.alpha=0.5");
  run->add_option("-o,--output-dir", run_opts.output_dir, "Output directory");

  ski::BenchmarkOptions bench_opts;
  auto* bench = app.add_subcommand("benchmark", "Run the method x seed grid and write table1.csv");
  bench->add_option("config", bench_opts.run.config_path, "JSON config file")->required();
  bench->add_option("--set", bench_opts.run.overrides, "Override a config key");
  bench->add_option("-o,--output-dir", bench_opts.run.output_dir, "Output directory");
  bench->add_option("-j,--workers", bench_opts.workers, "Parallel cells")
      ->check(CLI::NonNegativeNumber);

  std::string trace_path;
  std::string relevance_out;
  double threshold = 1e-4;
  auto* rel = app.add_subcommand("relevance-report", "Final prior variances from a trace");
  rel->add_option("trace", trace_path, "trace.csv from a run")->required();
  rel->add_option("-o,--output", relevance_out, "Output CSV (default: next to the trace)");
  rel->add_option("--threshold", threshold, "Selection threshold relative to the largest variance");

  ski::RunOptions print_opts;
  auto* print = app.add_subcommand("print-config", "Print the resolved config as JSON");
  print->add_option("config", print_opts.config_path, "JSON config file")->required();
  print->add_option("--set", print_opts.overrides, "Override a config key");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ski::kExitConfig;
  }

  try {
    if (*run) return ski::cmd_run(run_opts, std::cout, std::cerr);
    if (*bench) return ski::cmd_benchmark(bench_opts, std::cout, std::cerr);
    if (*rel) {
      return ski::cmd_relevance_report(trace_path, relevance_out, threshold, std::cout, std::cerr);
    }
    if (*print) return ski::cmd_print_config(print_opts, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return ski::kExitFailure;
  }
  return ski::kExitConfig;
}
