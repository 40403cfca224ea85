#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "piht/experiment.hpp"

using namespace piht;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("piht-exp-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

ExperimentConfig small_ls_config() {
  ExperimentConfig config;
  config.problem.kind = ProblemKind::SparseLs;
  config.problem.dim = 10;
  config.problem.samples = 40;
  config.problem.true_sparsity = 2;
  config.problem.noise_std = 0.0;
  config.problem.seed = 3;
  config.solver.k = 2;
  config.solver.mode = SolverMode::FullBatch;
  config.solver.max_iterations = 300;
  config.solver.stationarity_tol = 1e-10;
  config.solver.seed = 11;
  config.runs_per_setting = 2;
  return config;
}

RunOptions quiet_options(const std::string& out_dir) {
  RunOptions options;
  options.output_dir_override = out_dir;
  options.quiet = true;
  return options;
}

}  // namespace

TEST_CASE("config json round trip") {
  const ExperimentConfig config = small_ls_config();
  const std::string text = experiment_config_to_json(config);
  const ExperimentConfig parsed = parse_experiment_config_text(text, "inline");
  CHECK(parsed.problem.kind == ProblemKind::SparseLs);
  CHECK(parsed.problem.dim == 10);
  CHECK(parsed.solver.k == 2);
  CHECK(parsed.solver.mode == SolverMode::FullBatch);
  CHECK(parsed.runs_per_setting == 2);
  CHECK(experiment_config_to_json(parsed) == text);
}

TEST_CASE("parse errors carry the origin and the offending key") {
  CHECK_THROWS_AS(parse_experiment_config_text("{", "broken.json"), ParseError);
  CHECK_THROWS_AS(parse_experiment_config_text(R"({"problem": {}})", "x"), ParseError);
  CHECK_THROWS_AS(
      parse_experiment_config_text(
          R"({"problem": {"class": "sparse-ls", "n": 4, "N": 5, "k_star": 1},
              "solver": {"K": 1}, "typo": true})",
          "x"),
      ParseError);
  CHECK_THROWS_AS(
      parse_experiment_config_text(
          R"({"problem": {"class": "mystery"}, "solver": {"K": 1}})", "x"),
      ParseError);
}

TEST_CASE("validation flags range violations") {
  ExperimentConfig config = small_ls_config();
  config.solver.gamma = 0.5;
  ValidationReport report = validate_config(config);
  REQUIRE_FALSE(report.ok());
  CHECK(report.violations.front().find("gamma") != std::string::npos);

  config = small_ls_config();
  config.solver.delta0 = 20.0;
  CHECK_FALSE(validate_config(config).ok());

  config = small_ls_config();
  config.sweep = {2, 11};  // 11 > n
  CHECK_FALSE(validate_config(config).ok());

  config = small_ls_config();
  config.problem.kind = ProblemKind::GgmFile;
  config.problem.data_file = "/nonexistent/file.csv";
  CHECK_FALSE(validate_config(config).ok());
}

TEST_CASE("the default hyperparameters validate cleanly") {
  // eta1 = eta2 = 1e-4, delta0 = 1, delta_max = 10, gamma = 2
  const ExperimentConfig config = small_ls_config();
  const ValidationReport report = validate_config(config);
  CHECK(report.ok());
  // the eta2 >= 3*kappa_f*alpha coupling is reported as a notice, not a violation
  CHECK(!report.notices.empty());
}

TEST_CASE("run_experiment writes traces and summaries") {
  TempDir dir("run");
  ExperimentConfig config = small_ls_config();
  config.sweep = {2, 4};
  config.runs_per_setting = 3;

  const ExperimentResult result = run_experiment(config, quiet_options(dir.file("out")));
  CHECK(result.exit_code == 0);
  CHECK(result.cells.size() == 6);
  for (const CellResult& cell : result.cells) {
    CHECK(cell.ok);
    CHECK(std::filesystem::exists(cell.trace_path));
  }
  CHECK(std::filesystem::exists(result.summary_csv_path));
  CHECK(std::filesystem::exists(result.summary_json_path));

  const std::string csv = read_file(result.summary_csv_path);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);  // header + 6 rows
}

TEST_CASE("rerunning a config reproduces every byte") {
  TempDir dir("repro");
  ExperimentConfig config = small_ls_config();
  config.solver.mode = SolverMode::Stochastic;
  config.solver.max_iterations = 120;
  config.problem.noise_std = 0.3;

  const ExperimentResult first = run_experiment(config, quiet_options(dir.file("a")));
  const ExperimentResult second = run_experiment(config, quiet_options(dir.file("b")));
  REQUIRE(first.cells.size() == second.cells.size());
  for (std::size_t i = 0; i < first.cells.size(); ++i) {
    CHECK(read_file(first.cells[i].trace_path) == read_file(second.cells[i].trace_path));
  }
  CHECK(read_file(first.summary_csv_path) == read_file(second.summary_csv_path));
}

TEST_CASE("per-run isolation: cells do not depend on the rest of the sweep") {
  TempDir dir("isolation");
  ExperimentConfig both = small_ls_config();
  both.sweep = {2, 4};
  both.runs_per_setting = 2;
  ExperimentConfig only4 = both;
  only4.sweep = {4};

  run_experiment(both, quiet_options(dir.file("both")));
  run_experiment(only4, quiet_options(dir.file("only4")));

  for (int run = 0; run < 2; ++run) {
    const std::string name = "K4_run" + std::to_string(run) + ".trace.csv";
    CHECK(read_file(dir.file("both") + "/" + name) ==
          read_file(dir.file("only4") + "/" + name));
  }
}

TEST_CASE("parallel cells produce identical outputs") {
  TempDir dir("jobs");
  ExperimentConfig config = small_ls_config();
  config.sweep = {1, 2, 3};
  config.runs_per_setting = 2;

  RunOptions serial = quiet_options(dir.file("serial"));
  RunOptions parallel = quiet_options(dir.file("parallel"));
  parallel.jobs = 4;

  const ExperimentResult a = run_experiment(config, serial);
  const ExperimentResult b = run_experiment(config, parallel);
  CHECK(read_file(a.summary_csv_path) == read_file(b.summary_csv_path));
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(read_file(a.cells[i].trace_path) == read_file(b.cells[i].trace_path));
  }
}

TEST_CASE("trace round trip preserves the delta series") {
  TempDir dir("trace");
  ExperimentConfig config = small_ls_config();
  config.solver.mode = SolverMode::Stochastic;
  config.solver.max_iterations = 200;
  config.problem.noise_std = 0.2;
  config.runs_per_setting = 1;

  const ExperimentResult result = run_experiment(config, quiet_options(dir.file("out")));
  REQUIRE(result.cells.size() == 1);
  const CellResult& cell = result.cells.front();

  const auto rows = load_trace(cell.trace_path);
  REQUIRE(static_cast<int>(rows.size()) == static_cast<int>(cell.solver.trace.size()));
  const TraceReport report = summarize_trace(rows);
  CHECK(std::abs(report.delta_square_sum - cell.solver.delta_square_sum) <= 1e-9);
  CHECK(report.iterations == static_cast<int>(cell.solver.trace.size()));

  // support indices survive the 1-based file encoding
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].support == cell.solver.trace[i].support.indices());
  }
}

TEST_CASE("empty traces emit a header-only file") {
  TempDir dir("empty");
  SolverResult empty;
  const std::string path = dir.file("empty.trace.csv");
  emit_trace(empty, path);
  const std::string content = read_file(path);
  CHECK(std::count(content.begin(), content.end(), '\n') == 1);
  CHECK(load_trace(path).empty());
}

TEST_CASE("ggm experiment derives the free prefix from the problem") {
  TempDir dir("ggm");
  ExperimentConfig config;
  config.problem.kind = ProblemKind::GgmSynthetic;
  config.problem.dim = 5;
  config.problem.samples = 15;
  config.problem.true_pairs = 3;
  config.problem.seed = 2;
  config.solver.k = 3;
  config.solver.mode = SolverMode::FullBatch;
  config.solver.max_iterations = 80;
  config.solver.alpha = 0.5;
  config.runs_per_setting = 1;
  config.start = StartMode::RandomFeasible;

  const ExperimentResult result = run_experiment(config, quiet_options(dir.file("out")));
  REQUIRE(result.cells.size() == 1);
  CHECK(result.cells.front().ok);
  CHECK(result.cells.front().final_support.size() <= 3);
  // final point keeps a positive diagonal block
  for (int i = 0; i < 5; ++i) CHECK(result.cells.front().solver.final_point[i] > 0.0);
}
