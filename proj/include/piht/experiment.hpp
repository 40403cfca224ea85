#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "piht/problems.hpp"
#include "piht/solver.hpp"
#include "piht/stationarity.hpp"

namespace piht {

enum class ProblemKind { SparseLs, Logistic, GgmSynthetic, GgmFile };
enum class StartMode { Zeros, RandomFeasible };

struct ProblemSpec {
  ProblemKind kind = ProblemKind::SparseLs;
  int dim = 0;           // n (sparse-ls, logistic) or p (ggm-synthetic)
  int samples = 0;       // N
  int true_sparsity = 0; // planted nonzeros (sparse-ls, logistic)
  int true_pairs = 0;    // planted off-diagonal pairs (ggm-synthetic)
  double noise_std = 0.0;
  double flip_prob = 0.0;
  std::uint64_t seed = 0;
  std::string data_file; // ggm-file
};

/// One experiment: a problem, a solver configuration, an optional K sweep
/// and a number of repeated runs per sweep value. Each (K, run) cell derives
/// its own seed as base_seed*10^6 + K*10^3 + run, so removing a sweep value
/// from the config leaves every other cell's output byte-identical.
struct ExperimentConfig {
  ProblemSpec problem;
  SolverConfig solver;
  std::vector<int> sweep;  // empty means {solver.k}
  int runs_per_setting = 10;
  StartMode start = StartMode::Zeros;
  std::string output_dir = "piht-out";
};

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> notices;
  bool ok() const { return violations.empty(); }
};

ExperimentConfig parse_experiment_config_text(const std::string& text, const std::string& origin);
ExperimentConfig parse_experiment_config_file(const std::string& path);
std::string experiment_config_to_json(const ExperimentConfig& config);

/// Range and existence checks plus non-fatal notices for the theory
/// couplings between eta2, eps_f, kappa_f and alpha.
ValidationReport validate_config(const ExperimentConfig& config);

/// The problem actually solved: the objective plus the constrained-block
/// geometry (the graphical model keeps its diagonal prefix unconstrained).
struct BuiltProblem {
  std::unique_ptr<FiniteSumObjective> objective;
  int free_prefix = 0;
  int constrained_dim = 0;
};
BuiltProblem build_problem(const ProblemSpec& spec);

/// Starting point for one run: all-zero (diagonal block set to one for the
/// graphical model) or a random K-sparse feasible point.
DenseVector make_start_point(const BuiltProblem& built, StartMode mode, int k,
                             std::uint64_t seed);

struct CellResult {
  int sweep_k = 0;
  int run_index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  SolverResult solver;
  double wall_seconds = 0.0;
  double final_objective = 0.0;       // full-batch value at the final point
  double restricted_grad_norm = 0.0;  // full-batch gradient on the final support
  double free_grad_norm = 0.0;        // inf-norm over the free prefix
  StationarityReport stationarity;    // constrained block
  SupportSet final_support;           // constrained-block support (0-based)
  std::string trace_path;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::string summary_csv_path;
  std::string summary_json_path;
  int exit_code = 0;  // 0 ok, 2 when any cell failed at runtime
};

struct RunOptions {
  std::string output_dir_override;
  int jobs = 1;
  bool quiet = false;
};

/// Runs every (K, run) cell, writes one trace file per cell plus
/// summary.csv (fixed-precision, byte-reproducible) and summary.json
/// (adds wall times and stationarity reports). Cells run independently;
/// `jobs` > 1 executes them on a thread pool without changing any output.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options);

/// One row per iteration with a fixed column order; doubles are written
/// with enough digits to round-trip.
void emit_trace(const SolverResult& result, const std::string& path);

struct TraceRow {
  int k = 0;
  double delta = 0.0;
  bool accepted = false;
  double rho = 0.0;
  double restricted_grad_norm = 0.0;
  double f0_estimate = 0.0;
  double fs_estimate = 0.0;
  int grad_batch = 0;
  int value_batch = 0;
  double step_norm = 0.0;
  double descent_margin = 0.0;
  std::vector<int> support;  // 0-based
};
std::vector<TraceRow> load_trace(const std::string& path);

struct TraceReport {
  int iterations = 0;
  int accepted = 0;
  double delta_square_sum = 0.0;
  double first_delta = 0.0;
  double last_delta = 0.0;
  double last_restricted_grad_norm = 0.0;
  double max_descent_margin = 0.0;
};
TraceReport summarize_trace(const std::vector<TraceRow>& rows);

}  // namespace piht
