#include "piht/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace piht {

double FiniteSumObjective::full_value(const DenseVector& x) const {
  const int n = sample_count();
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_value(x, i);
  return sum / n;
}

DenseVector FiniteSumObjective::full_gradient(const DenseVector& x) const {
  const int n = sample_count();
  DenseVector sum = DenseVector::Zero(dim());
  for (int i = 0; i < n; ++i) sum += sample_gradient(x, i);
  return sum / n;
}

std::vector<int> SeededSampler::draw_without_replacement(int population, int count) {
  if (count < 0 || count > population) {
    throw InvalidInputError("draw_without_replacement: count out of range");
  }
  // Floyd's algorithm: count draws regardless of population size.
  std::unordered_set<int> chosen;
  chosen.reserve(count);
  for (int j = population - count; j < population; ++j) {
    const int t = static_cast<int>(rng_.next_bounded(static_cast<std::uint64_t>(j) + 1));
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<int> out(chosen.begin(), chosen.end());
  std::sort(out.begin(), out.end());
  return out;
}

PilotVariance pilot_variance(const FiniteSumObjective& obj, const DenseVector& x,
                             SeededSampler& sampler, int pilot_size) {
  const int n = obj.sample_count();
  if (pilot_size < 1) throw InvalidInputError("pilot_variance: pilot_size must be positive");
  if (pilot_size > n) throw InvalidInputError("pilot_variance: pilot_size exceeds sample count");
  const std::vector<int> indices = sampler.draw_without_replacement(n, pilot_size);

  std::vector<double> values(indices.size());
  std::vector<double> norms(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    values[j] = obj.sample_value(x, indices[j]);
    norms[j] = obj.sample_gradient(x, indices[j]).norm();
  }

  auto unbiased_variance = [](const std::vector<double>& data) {
    const std::size_t m = data.size();
    if (m < 2) return 0.0;
    double mean = 0.0;
    for (double d : data) mean += d;
    mean /= static_cast<double>(m);
    double ss = 0.0;
    for (double d : data) ss += (d - mean) * (d - mean);
    return ss / static_cast<double>(m - 1);
  };

  return PilotVariance{unbiased_variance(values), unbiased_variance(norms)};
}

namespace {

int clamp_batch(double raw, int min_batch, int sample_count) {
  double size = std::ceil(raw);
  if (!(size >= static_cast<double>(min_batch))) size = static_cast<double>(min_batch);
  if (size > static_cast<double>(sample_count)) size = static_cast<double>(sample_count);
  return static_cast<int>(size);
}

}  // namespace

int batch_size_for_gradient(double delta, const AccuracyParams& params,
                            double gradient_variance, int sample_count) {
  if (!(delta > 0.0)) throw InvalidInputError("batch_size_for_gradient: delta must be positive");
  if (gradient_variance < 0.0) {
    throw InvalidInputError("batch_size_for_gradient: negative variance");
  }
  params.validate();
  const double raw = gradient_variance / (params.kappa_g * params.kappa_g * delta * delta);
  return clamp_batch(raw, params.min_batch, sample_count);
}

int batch_size_for_function(double delta, const AccuracyParams& params,
                            double value_variance, int sample_count) {
  if (!(delta > 0.0)) throw InvalidInputError("batch_size_for_function: delta must be positive");
  if (value_variance < 0.0) {
    throw InvalidInputError("batch_size_for_function: negative variance");
  }
  params.validate();
  const double d2 = delta * delta;
  const double raw = value_variance / (params.eps_f * params.eps_f * d2 * d2);
  return clamp_batch(raw, params.min_batch, sample_count);
}

ValueEstimate evaluate_value_on(const FiniteSumObjective& obj, const DenseVector& x,
                                std::vector<int> indices) {
  double sum = 0.0;
  for (int i : indices) sum += obj.sample_value(x, i);
  ValueEstimate est;
  est.value = sum / static_cast<double>(indices.size());
  est.batch_size = static_cast<int>(indices.size());
  est.sample_indices = std::move(indices);
  return est;
}

GradientEstimate evaluate_gradient_on(const FiniteSumObjective& obj, const DenseVector& x,
                                      std::vector<int> indices) {
  DenseVector sum = DenseVector::Zero(obj.dim());
  for (int i : indices) sum += obj.sample_gradient(x, i);
  GradientEstimate est;
  est.value = sum / static_cast<double>(indices.size());
  est.batch_size = static_cast<int>(indices.size());
  est.sample_indices = std::move(indices);
  return est;
}

GradientEstimate estimate_gradient(const FiniteSumObjective& obj, const DenseVector& x,
                                   double delta, const AccuracyParams& params,
                                   double gradient_variance, SeededSampler& sampler) {
  require_finite(x, "estimate_gradient");
  const int n = obj.sample_count();
  const int batch = batch_size_for_gradient(delta, params, gradient_variance, n);
  return evaluate_gradient_on(obj, x, sampler.draw_without_replacement(n, batch));
}

ValueEstimate estimate_function(const FiniteSumObjective& obj, const DenseVector& x,
                                double delta, const AccuracyParams& params,
                                double value_variance, SeededSampler& sampler) {
  require_finite(x, "estimate_function");
  const int n = obj.sample_count();
  const int batch = batch_size_for_function(delta, params, value_variance, n);
  return evaluate_value_on(obj, x, sampler.draw_without_replacement(n, batch));
}

StochasticOracle::StochasticOracle(const FiniteSumObjective& obj, AccuracyParams params,
                                   SeededSampler sampler, const DenseVector& pilot_point)
    : obj_(obj), params_(params), sampler_(sampler) {
  params_.validate();
  const int pilot = std::min(params_.pilot_size, obj_.sample_count());
  variance_ = pilot_variance(obj_, pilot_point, sampler_, pilot);
}

GradientEstimate StochasticOracle::estimate_gradient(const DenseVector& x, double delta) {
  return piht::estimate_gradient(obj_, x, delta, params_, variance_.gradient_variance, sampler_);
}

ValueEstimate StochasticOracle::estimate_function(const DenseVector& x, double delta) {
  return piht::estimate_function(obj_, x, delta, params_, variance_.value_variance, sampler_);
}

std::pair<ValueEstimate, ValueEstimate> StochasticOracle::estimate_function_pair(
    const DenseVector& x0, const DenseVector& xs, double delta) {
  const int n = obj_.sample_count();
  const int batch = batch_size_for_function(delta, params_, variance_.value_variance, n);
  std::vector<int> indices = sampler_.draw_without_replacement(n, batch);
  ValueEstimate f0 = evaluate_value_on(obj_, x0, indices);
  ValueEstimate fs = evaluate_value_on(obj_, xs, std::move(indices));
  return {std::move(f0), std::move(fs)};
}

void StochasticOracle::refresh_variance(const DenseVector& x) {
  const int pilot = std::min(params_.pilot_size, obj_.sample_count());
  variance_ = pilot_variance(obj_, x, sampler_, pilot);
}

}  // namespace piht
