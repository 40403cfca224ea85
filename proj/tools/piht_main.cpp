#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "piht/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& output_dir, int jobs,
            bool quiet) {
  piht::ExperimentConfig config;
  try {
    config = piht::parse_experiment_config_file(config_path);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  const piht::ValidationReport validation = piht::validate_config(config);
  if (!validation.ok()) {
    for (const std::string& v : validation.violations) std::cerr << "violation: " << v << '\n';
    return 1;
  }
  if (!quiet) {
    for (const std::string& n : validation.notices) std::cout << "notice: " << n << '\n';
  }
  piht::RunOptions options;
  options.output_dir_override = output_dir;
  options.jobs = jobs;
  options.quiet = quiet;
  try {
    return piht::run_experiment(config, options).exit_code;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
}

int cmd_validate(const std::string& config_path) {
  piht::ExperimentConfig config;
  try {
    config = piht::parse_experiment_config_file(config_path);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  const piht::ValidationReport report = piht::validate_config(config);
  for (const std::string& v : report.violations) std::cout << "violation: " << v << '\n';
  for (const std::string& n : report.notices) std::cout << "notice: " << n << '\n';
  if (report.ok()) {
    std::cout << "config ok (" << report.notices.size() << " notice(s))\n";
    return 0;
  }
  return 1;
}

int cmd_report(const std::string& trace_path) {
  try {
    const auto rows = piht::load_trace(trace_path);
    const piht::TraceReport report = piht::summarize_trace(rows);
    char buffer[64];
    std::cout << "iterations: " << report.iterations << '\n'
              << "accepted: " << report.accepted << '\n';
    auto print_double = [&buffer](const char* name, double value) {
      std::snprintf(buffer, sizeof(buffer), "%.17g", value);
      std::cout << name << ": " << buffer << '\n';
    };
    print_double("delta_square_sum", report.delta_square_sum);
    print_double("first_delta", report.first_delta);
    print_double("last_delta", report.last_delta);
    print_double("last_restricted_grad_norm", report.last_restricted_grad_norm);
    print_double("max_descent_margin", report.max_descent_margin);
    return 0;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic iterative hard thresholding experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string trace_path;
  std::string output_dir;
  int jobs = 1;
  bool quiet = false;

  CLI::App* run = app.add_subcommand("run", "run all experiment cells from a config file");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--output-dir", output_dir, "override the config's output directory");
  run->add_option("--jobs", jobs, "number of cells to run in parallel")
      ->check(CLI::PositiveNumber);
  run->add_flag("--quiet", quiet, "suppress progress output");

  CLI::App* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", config_path, "experiment config (JSON)")->required();

  CLI::App* report = app.add_subcommand("report", "recompute a summary from a trace file");
  report->add_option("trace", trace_path, "trace file emitted by 'run'")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  if (run->parsed()) return cmd_run(config_path, output_dir, jobs, quiet);
  if (validate->parsed()) return cmd_validate(config_path);
  return cmd_report(trace_path);
}
