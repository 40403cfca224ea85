#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "piht/rng.hpp"
#include "piht/types.hpp"

namespace piht {

/// Finite-sum objective f(x) = (1/N) * sum_i F(x, i) with per-sample value
/// and gradient oracles. Implementations must be pure with respect to x.
class FiniteSumObjective {
 public:
  virtual ~FiniteSumObjective() = default;

  virtual int sample_count() const = 0;
  virtual int dim() const = 0;
  virtual double sample_value(const DenseVector& x, int i) const = 0;
  virtual DenseVector sample_gradient(const DenseVector& x, int i) const = 0;

  /// Clamp a candidate iterate back into the objective's domain; identity
  /// for objectives defined on all of R^n.
  virtual DenseVector clamp_to_domain(DenseVector x) const { return x; }

  /// Mean of all per-sample values, accumulated in ascending sample order.
  double full_value(const DenseVector& x) const;
  /// Mean of all per-sample gradients, accumulated in ascending sample order.
  DenseVector full_gradient(const DenseVector& x) const;
};

/// Constants of the estimate-accuracy model plus the batch-schedule knobs
/// derived from them.
struct AccuracyParams {
  double eps_f = 1.0;    // function estimates within eps_f * delta^2
  double kappa_g = 1.0;  // gradient estimates within kappa_g * delta
  double kappa_f = 1.0;  // linearization error bound; diagnostics only
  int pilot_size = 32;
  int min_batch = 1;

  void validate() const {
    if (!(eps_f > 0.0)) throw InvalidInputError("AccuracyParams: eps_f must be positive");
    if (!(kappa_g > 0.0)) throw InvalidInputError("AccuracyParams: kappa_g must be positive");
    if (!(kappa_f > 0.0)) throw InvalidInputError("AccuracyParams: kappa_f must be positive");
    if (pilot_size < 1) throw InvalidInputError("AccuracyParams: pilot_size must be positive");
    if (min_batch < 1) throw InvalidInputError("AccuracyParams: min_batch must be positive");
  }
};

struct ValueEstimate {
  double value = 0.0;
  int batch_size = 0;
  std::vector<int> sample_indices;
};

struct GradientEstimate {
  DenseVector value;
  int batch_size = 0;
  std::vector<int> sample_indices;
};

/// Seeded sample-index source. One solver run owns one sampler; a given
/// (seed, position) pair reproduces the draw stream exactly.
class SeededSampler {
 public:
  explicit SeededSampler(std::uint64_t seed) : rng_(seed) {}
  SeededSampler(std::uint64_t seed, std::uint64_t position) : rng_(seed, position) {}

  std::uint64_t seed() const { return rng_.seed(); }
  std::uint64_t position() const { return rng_.position(); }

  /// `count` distinct indices from [0, population), sorted ascending.
  std::vector<int> draw_without_replacement(int population, int count);

  Rng& rng() { return rng_; }

 private:
  Rng rng_;
};

/// Unbiased sample variances of the per-sample values and of the
/// per-sample gradient norms over a without-replacement pilot draw.
/// A pilot of size one yields zero variances.
struct PilotVariance {
  double value_variance = 0.0;
  double gradient_variance = 0.0;
};
PilotVariance pilot_variance(const FiniteSumObjective& obj, const DenseVector& x,
                             SeededSampler& sampler, int pilot_size);

/// min(N, max(min_batch, ceil(gradient_variance / (kappa_g^2 * delta^2)))).
int batch_size_for_gradient(double delta, const AccuracyParams& params,
                            double gradient_variance, int sample_count);

/// min(N, max(min_batch, ceil(value_variance / (eps_f^2 * delta^4)))).
int batch_size_for_function(double delta, const AccuracyParams& params,
                            double value_variance, int sample_count);

GradientEstimate estimate_gradient(const FiniteSumObjective& obj, const DenseVector& x,
                                   double delta, const AccuracyParams& params,
                                   double gradient_variance, SeededSampler& sampler);

ValueEstimate estimate_function(const FiniteSumObjective& obj, const DenseVector& x,
                                double delta, const AccuracyParams& params,
                                double value_variance, SeededSampler& sampler);

/// Batch-mean value over a fixed index set; reduction in ascending order.
ValueEstimate evaluate_value_on(const FiniteSumObjective& obj, const DenseVector& x,
                                std::vector<int> indices);
GradientEstimate evaluate_gradient_on(const FiniteSumObjective& obj, const DenseVector& x,
                                      std::vector<int> indices);

/// Stochastic estimate source bound to one objective, one accuracy
/// configuration and one sampler. Pilot variances are measured once at the
/// anchor point given to the constructor and reused for every schedule
/// decision; refresh_variance() re-measures at another point.
class StochasticOracle {
 public:
  StochasticOracle(const FiniteSumObjective& obj, AccuracyParams params,
                   SeededSampler sampler, const DenseVector& pilot_point);

  GradientEstimate estimate_gradient(const DenseVector& x, double delta);
  ValueEstimate estimate_function(const DenseVector& x, double delta);

  /// f0 at `x0` and fs at `xs` from one shared batch, so the difference the
  /// acceptance ratio uses sees correlated noise.
  std::pair<ValueEstimate, ValueEstimate> estimate_function_pair(
      const DenseVector& x0, const DenseVector& xs, double delta);

  void refresh_variance(const DenseVector& x);

  const PilotVariance& variance() const { return variance_; }
  const AccuracyParams& params() const { return params_; }
  SeededSampler& sampler() { return sampler_; }

 private:
  const FiniteSumObjective& obj_;
  AccuracyParams params_;
  SeededSampler sampler_;
  PilotVariance variance_;
};

}  // namespace piht
