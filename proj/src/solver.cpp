#include "piht/solver.hpp"

#include <cmath>
#include <limits>

#include "piht/sparsity.hpp"
#include "piht/stationarity.hpp"

namespace piht {

void SolverConfig::validate(int dim) const {
  if (free_prefix < 0 || free_prefix >= dim) {
    throw InvalidInputError("SolverConfig: free_prefix out of range");
  }
  if (k < 1 || k > dim - free_prefix) {
    throw InvalidInputError("SolverConfig: K out of range for the constrained block");
  }
  if (!(alpha > 0.0)) throw InvalidInputError("SolverConfig: alpha must be positive");
  if (!(eta1 > 0.0)) throw InvalidInputError("SolverConfig: eta1 must be positive");
  if (!(eta2 > 0.0)) throw InvalidInputError("SolverConfig: eta2 must be positive");
  if (!(gamma > 1.0)) throw InvalidInputError("SolverConfig: gamma must exceed 1");
  if (!(delta0 > 0.0) || !(delta0 <= delta_max)) {
    throw InvalidInputError("SolverConfig: delta0 must lie in (0, delta_max]");
  }
  if (max_iterations < 0) throw InvalidInputError("SolverConfig: negative iteration budget");
  if (!(stationarity_tol > 0.0)) {
    throw InvalidInputError("SolverConfig: stationarity_tol must be positive");
  }
  if (!(delta_stop > 0.0)) throw InvalidInputError("SolverConfig: delta_stop must be positive");
  accuracy.validate();
}

bool acceptance_test(double f0, double fs, double restricted_grad_norm,
                     double delta, double eta1, double eta2) {
  if (!(delta > 0.0)) throw InvalidInputError("acceptance_test: delta must be positive");
  if (!(restricted_grad_norm > 0.0)) return false;  // the ratio is undefined; reject
  if (restricted_grad_norm < eta2 * delta) return false;
  return (f0 - fs) / (restricted_grad_norm * delta) >= eta1;
}

double update_delta(double delta, bool accepted, double gamma, double delta_max) {
  if (!(delta > 0.0)) throw InvalidInputError("update_delta: delta must be positive");
  if (!(gamma > 1.0)) throw InvalidInputError("update_delta: gamma must exceed 1");
  return accepted ? std::min(gamma * delta, delta_max) : delta / gamma;
}

namespace {

int constrained_nonzeros(const DenseVector& x, int free_prefix) {
  int count = 0;
  for (Eigen::Index i = free_prefix; i < x.size(); ++i) {
    if (x[i] != 0.0) ++count;
  }
  return count;
}

bool is_feasible(const DenseVector& x, const SolverConfig& config) {
  return constrained_nonzeros(x, config.free_prefix) <= config.k;
}

/// Top-K index set over the constrained block, with the free prefix always
/// retained.
SupportSet select_support(const DenseVector& v, const SolverConfig& config) {
  const int n = static_cast<int>(v.size());
  if (config.free_prefix == 0) return top_k_support(v, config.k);
  const SupportSet tail = top_k_support(v.tail(n - config.free_prefix), config.k);
  std::vector<int> kept;
  kept.reserve(config.free_prefix + tail.size());
  for (int i = 0; i < config.free_prefix; ++i) kept.push_back(i);
  for (int idx : tail.indices()) kept.push_back(idx + config.free_prefix);
  return SupportSet(std::move(kept), n);
}

DenseVector project_feasible(const DenseVector& x, const SolverConfig& config) {
  const int n = static_cast<int>(x.size());
  if (config.free_prefix == 0) return hard_threshold(x, config.k);
  DenseVector out = x;
  out.tail(n - config.free_prefix) = hard_threshold(x.tail(n - config.free_prefix), config.k);
  return out;
}

struct StepProposal {
  DenseVector gradient;
  int grad_batch = 0;
  DenseVector x_hat;
  SupportSet support;
  double restricted_norm = 0.0;
  double step_norm = 0.0;
  double descent_margin = 0.0;
  double descent_margin_tight = 0.0;
  bool domain_clamped = false;
};

StepProposal propose_step(const FiniteSumObjective& obj, const DenseVector& x,
                          double delta, const SolverConfig& config,
                          DenseVector gradient, int grad_batch) {
  StepProposal prop;
  prop.gradient = std::move(gradient);
  prop.grad_batch = grad_batch;
  const DenseVector shifted = clipped_step(x, prop.gradient, config.alpha, delta);
  prop.support = select_support(shifted, config);
  const DenseVector projected = pseudo_hard_threshold(shifted, prop.support);
  prop.x_hat = obj.clamp_to_domain(projected);
  prop.domain_clamped = (prop.x_hat - projected).cwiseAbs().maxCoeff() != 0.0;

  double restricted_sq = 0.0;
  for (int idx : prop.support.indices()) restricted_sq += prop.gradient[idx] * prop.gradient[idx];
  prop.restricted_norm = std::sqrt(restricted_sq);

  const double gnorm = prop.gradient.norm();
  const double scale =
      gnorm > 0.0 ? config.alpha * std::min(1.0, delta / (config.alpha * gnorm)) : config.alpha;

  const DenseVector step = prop.x_hat - x;
  prop.step_norm = step.norm();
  const double directional = prop.gradient.dot(step);
  prop.descent_margin = directional + step.squaredNorm() / config.alpha;
  prop.descent_margin_tight = directional + step.squaredNorm() / (2.0 * scale);
  return prop;
}

DenseVector compute_gradient(const FiniteSumObjective& obj, const DenseVector& x,
                             double delta, const SolverConfig& config,
                             StochasticOracle& oracle, int& batch_out) {
  if (config.mode == SolverMode::FullBatch) {
    batch_out = obj.sample_count();
    return obj.full_gradient(x);
  }
  GradientEstimate est = oracle.estimate_gradient(x, delta);
  batch_out = est.batch_size;
  return std::move(est.value);
}

IterationOutcome finish_iteration(const FiniteSumObjective& obj, const DenseVector& x,
                                  double delta, const SolverConfig& config,
                                  StochasticOracle& oracle, StepProposal prop, int k) {
  double f0, fs;
  int value_batch;
  if (config.mode == SolverMode::FullBatch) {
    f0 = obj.full_value(x);
    fs = obj.full_value(prop.x_hat);
    value_batch = obj.sample_count();
  } else {
    auto [e0, es] = oracle.estimate_function_pair(x, prop.x_hat, delta);
    f0 = e0.value;
    fs = es.value;
    value_batch = e0.batch_size;
  }

  if (!std::isfinite(f0) || !std::isfinite(fs) || !prop.gradient.allFinite()) {
    throw SolverAbortError("piht: non-finite estimate at iteration " + std::to_string(k) +
                           " (delta=" + std::to_string(delta) + ", f0=" + std::to_string(f0) +
                           ", fs=" + std::to_string(fs) + ")");
  }

  const bool accepted =
      acceptance_test(f0, fs, prop.restricted_norm, delta, config.eta1, config.eta2);

  IterationOutcome out;
  out.record.k = k;
  out.record.delta = delta;
  out.record.accepted = accepted;
  out.record.rho = prop.restricted_norm > 0.0
                       ? (f0 - fs) / (prop.restricted_norm * delta)
                       : std::numeric_limits<double>::quiet_NaN();
  out.record.restricted_grad_norm = prop.restricted_norm;
  out.record.f0_estimate = f0;
  out.record.fs_estimate = fs;
  out.record.grad_batch = prop.grad_batch;
  out.record.value_batch = value_batch;
  out.record.support = prop.support;
  out.record.step_norm = prop.step_norm;
  out.record.descent_margin = prop.descent_margin;
  out.delta_next = update_delta(delta, accepted, config.gamma, config.delta_max);
  out.x_next = accepted ? std::move(prop.x_hat) : x;
  return out;
}

/// Full-batch stationarity stop: restricted gradient norm at tolerance and
/// the constrained block L-stationary at the minimal stationary L (with the
/// free-prefix gradient also at tolerance).
bool stationarity_reached(const DenseVector& x, const StepProposal& prop,
                          const SolverConfig& config) {
  const double tol = config.stationarity_tol;
  if (prop.restricted_norm > tol) return false;
  const int n = static_cast<int>(x.size());
  if (config.free_prefix > 0 &&
      prop.gradient.head(config.free_prefix).cwiseAbs().maxCoeff() > tol) {
    return false;
  }
  const DenseVector xc = x.tail(n - config.free_prefix);
  const DenseVector gc = prop.gradient.tail(n - config.free_prefix);
  const StationarityReport report = diagnose_stationarity(xc, gc, config.k, tol);
  return std::isfinite(report.minimal_l) && report.l_residual <= tol;
}

}  // namespace

IterationOutcome piht_iteration(const FiniteSumObjective& obj, const DenseVector& x,
                                double delta, const SolverConfig& config,
                                StochasticOracle& oracle) {
  config.validate(obj.dim());
  require_finite(x, "piht_iteration");
  if (x.size() != obj.dim()) throw InvalidInputError("piht_iteration: dimension mismatch");
  if (!is_feasible(x, config)) throw InfeasiblePointError("piht_iteration: infeasible iterate");
  if (!(delta > 0.0) || delta > config.delta_max) {
    throw InvalidInputError("piht_iteration: delta must lie in (0, delta_max]");
  }
  int grad_batch = 0;
  DenseVector g = compute_gradient(obj, x, delta, config, oracle, grad_batch);
  StepProposal prop = propose_step(obj, x, delta, config, std::move(g), grad_batch);
  return finish_iteration(obj, x, delta, config, oracle, std::move(prop), 0);
}

SolverResult piht_run(const FiniteSumObjective& obj, const DenseVector& x0,
                      const SolverConfig& config) {
  config.validate(obj.dim());
  require_finite(x0, "piht_run");
  if (x0.size() != obj.dim()) throw InvalidInputError("piht_run: dimension mismatch");

  SolverResult result;
  DenseVector x = obj.clamp_to_domain(x0);
  if (!is_feasible(x, config)) {
    x = project_feasible(x, config);
    result.warnings.push_back("initial point was infeasible; projected onto the sparsity set");
  }

  StochasticOracle oracle(obj, config.accuracy, SeededSampler(config.seed), x);

  double delta = config.delta0;
  result.stop_reason = StopReason::MaxIterations;
  result.trace.reserve(std::min(config.max_iterations, 4096));

  for (int k = 0; k < config.max_iterations; ++k) {
    if (delta < config.delta_stop) {
      result.stop_reason = StopReason::DeltaFloor;
      break;
    }
    int grad_batch = 0;
    DenseVector g = compute_gradient(obj, x, delta, config, oracle, grad_batch);
    StepProposal prop = propose_step(obj, x, delta, config, std::move(g), grad_batch);

    if (config.mode == SolverMode::FullBatch && stationarity_reached(x, prop, config)) {
      result.stop_reason = StopReason::StationarityReached;
      break;
    }

    IterationOutcome outcome =
        finish_iteration(obj, x, delta, config, oracle, std::move(prop), k);
    result.delta_square_sum += delta * delta;
    result.trace.push_back(std::move(outcome.record));
    x = std::move(outcome.x_next);
    delta = outcome.delta_next;
  }

  result.final_point = std::move(x);
  result.final_delta = delta;
  return result;
}

}  // namespace piht
