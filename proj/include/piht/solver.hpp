#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "piht/oracles.hpp"
#include "piht/types.hpp"

namespace piht {

enum class SolverMode { FullBatch, Stochastic };

enum class StopReason { MaxIterations, DeltaFloor, StationarityReached };

/// Iterative hard thresholding driven by probabilistically accurate
/// estimates. Acceptance compares the estimated decrease against
/// eta1 * ||[g]_I|| * delta and requires ||[g]_I|| >= eta2 * delta; delta
/// expands by gamma (capped at delta_max) on success and shrinks by 1/gamma
/// otherwise.
struct SolverConfig {
  int k = 1;                    // cardinality budget
  double alpha = 1.0;           // base step length
  double eta1 = 1e-4;
  double eta2 = 1e-4;
  double gamma = 2.0;           // expansion factor, > 1
  double delta0 = 1.0;
  double delta_max = 10.0;
  int max_iterations = 1000;
  std::uint64_t seed = 0;
  double stationarity_tol = 1e-6;  // full-batch stop tolerance
  double delta_stop = 1e-14;       // stop when delta falls below this
  AccuracyParams accuracy;
  SolverMode mode = SolverMode::Stochastic;

  /// Leading coordinates exempt from the cardinality constraint; they are
  /// always retained by the thresholding step (the graphical-model
  /// objective keeps its diagonal block here). Zero for plain problems.
  int free_prefix = 0;

  void validate(int dim) const;
};

struct IterationRecord {
  int k = 0;                         // iteration index
  double delta = 0.0;                // delta_k before the update
  bool accepted = false;
  double rho = 0.0;                  // NaN when the restricted norm is zero
  double restricted_grad_norm = 0.0; // ||[g_k]_{I_k}||
  double f0_estimate = 0.0;
  double fs_estimate = 0.0;
  int grad_batch = 0;
  int value_batch = 0;
  SupportSet support;                // I_k
  double step_norm = 0.0;            // ||x_hat - x||
  // g.(x_hat - x) + (1/alpha)||x_hat - x||^2; the descent-model bound
  double descent_margin = 0.0;
  // g.(x_hat - x) + (1/(2t))||x_hat - x||^2 with t the executed step
  // scale; guaranteed nonpositive by projection optimality whenever the
  // candidate was not clamped back into the objective domain
  double descent_margin_tight = 0.0;
  bool domain_clamped = false;       // candidate moved by clamp_to_domain
};

struct SolverResult {
  DenseVector final_point;
  std::vector<IterationRecord> trace;
  StopReason stop_reason = StopReason::MaxIterations;
  double delta_square_sum = 0.0;
  double final_delta = 0.0;
  std::vector<std::string> warnings;
};

/// Acceptance test of one iteration: estimated decrease ratio at least
/// eta1 and restricted gradient norm at least eta2 * delta. A zero
/// restricted norm always rejects.
bool acceptance_test(double f0, double fs, double restricted_grad_norm,
                     double delta, double eta1, double eta2);

/// min(gamma * delta, delta_max) on success, delta / gamma on failure.
double update_delta(double delta, bool accepted, double gamma, double delta_max);

struct IterationOutcome {
  DenseVector x_next;
  double delta_next = 0.0;
  IterationRecord record;
};

/// One full iteration: gradient estimate, clipped step, index selection,
/// thresholded candidate, value estimates, acceptance and delta update.
IterationOutcome piht_iteration(const FiniteSumObjective& obj, const DenseVector& x,
                                double delta, const SolverConfig& config,
                                StochasticOracle& oracle);

/// Runs the full loop from x0 (projected onto the feasible set with a
/// warning when infeasible) until max_iterations, delta < delta_stop, or, in
/// full-batch mode, restricted gradient norm and the L-stationarity residual
/// at the minimal stationary L both fall below stationarity_tol.
SolverResult piht_run(const FiniteSumObjective& obj, const DenseVector& x0,
                      const SolverConfig& config);

}  // namespace piht
