#include "piht/problems.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>

namespace piht {

// ---------------------------------------------------------------------------
// Least squares

LeastSquaresProblem::LeastSquaresProblem(Eigen::MatrixXd design, DenseVector targets)
    : design_(std::move(design)), targets_(std::move(targets)) {
  if (design_.rows() != targets_.size()) {
    throw InvalidInputError("LeastSquaresProblem: row count does not match target count");
  }
  if (design_.rows() < 1 || design_.cols() < 1) {
    throw InvalidInputError("LeastSquaresProblem: empty design matrix");
  }
  if (!design_.allFinite() || !targets_.allFinite()) {
    throw InvalidInputError("LeastSquaresProblem: non-finite data");
  }
}

void LeastSquaresProblem::check_index(int i) const {
  if (i < 0 || i >= sample_count()) {
    throw InvalidInputError("LeastSquaresProblem: sample index out of range");
  }
}

double LeastSquaresProblem::sample_value(const DenseVector& x, int i) const {
  check_index(i);
  const double r = design_.row(i).dot(x) - targets_[i];
  return 0.5 * r * r;
}

DenseVector LeastSquaresProblem::sample_gradient(const DenseVector& x, int i) const {
  check_index(i);
  const double r = design_.row(i).dot(x) - targets_[i];
  return r * design_.row(i).transpose();
}

// ---------------------------------------------------------------------------
// Logistic

LogisticProblem::LogisticProblem(Eigen::MatrixXd design, std::vector<int> labels)
    : design_(std::move(design)), labels_(std::move(labels)) {
  if (design_.rows() != static_cast<Eigen::Index>(labels_.size())) {
    throw InvalidInputError("LogisticProblem: row count does not match label count");
  }
  if (design_.rows() < 1 || design_.cols() < 1) {
    throw InvalidInputError("LogisticProblem: empty design matrix");
  }
  if (!design_.allFinite()) throw InvalidInputError("LogisticProblem: non-finite data");
  for (int y : labels_) {
    if (y != -1 && y != 1) throw InvalidInputError("LogisticProblem: labels must be -1 or +1");
  }
}

void LogisticProblem::check_index(int i) const {
  if (i < 0 || i >= sample_count()) {
    throw InvalidInputError("LogisticProblem: sample index out of range");
  }
}

double LogisticProblem::sample_value(const DenseVector& x, int i) const {
  check_index(i);
  const double margin = labels_[i] * design_.row(i).dot(x);
  // log(1 + exp(-margin)) without overflow on either tail
  if (margin >= 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

DenseVector LogisticProblem::sample_gradient(const DenseVector& x, int i) const {
  check_index(i);
  const double margin = labels_[i] * design_.row(i).dot(x);
  // sigma(-margin) = 1 / (1 + exp(margin))
  double sig;
  if (margin >= 0.0) {
    const double e = std::exp(-margin);
    sig = e / (1.0 + e);
  } else {
    sig = 1.0 / (1.0 + std::exp(margin));
  }
  return (-labels_[i] * sig) * design_.row(i).transpose();
}

// ---------------------------------------------------------------------------
// Gaussian graphical model

GgmProblem::GgmProblem(Eigen::MatrixXd scaled, double lambda2)
    : scaled_(std::move(scaled)), num_measures_(static_cast<int>(scaled_.cols())),
      lambda2_(lambda2) {
  if (scaled_.rows() < 1 || scaled_.cols() < 2) {
    throw InvalidInputError("GgmProblem: need at least one sample and two measures");
  }
  if (!scaled_.allFinite()) throw InvalidInputError("GgmProblem: non-finite data");
  if (lambda2_ < 0.0) throw InvalidInputError("GgmProblem: lambda2 must be nonnegative");
}

GgmProblem GgmProblem::from_samples(const Eigen::MatrixXd& raw, double lambda2) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(raw.rows()));
  return GgmProblem(scale * raw, lambda2);
}

int GgmProblem::pair_index(int i, int j) const {
  return i * num_measures_ - i * (i + 1) / 2 + (j - i - 1);
}

void GgmProblem::check_params(const DenseVector& params) const {
  if (params.size() != dim()) throw InvalidInputError("GgmProblem: parameter length mismatch");
  require_finite(params, "GgmProblem");
  for (int i = 0; i < num_measures_; ++i) {
    if (!(params[i] > 0.0)) {
      throw ObjectiveDomainError("GgmProblem: diagonal entry " + std::to_string(i + 1) +
                                 " is not positive");
    }
  }
}

Eigen::MatrixXd GgmProblem::decode(const DenseVector& params) const {
  if (params.size() != dim()) throw InvalidInputError("GgmProblem: parameter length mismatch");
  const int p = num_measures_;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) w(i, i) = params[i];
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      const double v = params[p + pair_index(i, j)];
      w(i, j) = v;
      w(j, i) = v;
    }
  }
  return w;
}

DenseVector GgmProblem::encode(const Eigen::MatrixXd& w) const {
  const int p = num_measures_;
  if (w.rows() != p || w.cols() != p) throw InvalidInputError("GgmProblem: matrix size mismatch");
  if (!w.isApprox(w.transpose(), 0.0)) {
    throw InvalidInputError("GgmProblem: matrix must be symmetric");
  }
  DenseVector params(dim());
  for (int i = 0; i < p; ++i) params[i] = w(i, i);
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) params[p + pair_index(i, j)] = w(i, j);
  }
  return params;
}

double GgmProblem::sample_value(const DenseVector& params, int i) const {
  check_params(params);
  if (i < 0 || i >= sample_count()) throw InvalidInputError("GgmProblem: sample index out of range");
  const int p = num_measures_;
  const double n = static_cast<double>(sample_count());
  const Eigen::MatrixXd w = decode(params);
  const DenseVector z = w * scaled_.row(i).transpose();  // z_r = w_r . xs_i
  double value = 0.0;
  for (int r = 0; r < p; ++r) {
    value += -std::log(params[r]) + (n / params[r]) * z[r] * z[r];
  }
  if (lambda2_ > 0.0) value += lambda2_ * w.squaredNorm();
  return value;
}

DenseVector GgmProblem::sample_gradient(const DenseVector& params, int i) const {
  check_params(params);
  if (i < 0 || i >= sample_count()) throw InvalidInputError("GgmProblem: sample index out of range");
  const int p = num_measures_;
  const double n = static_cast<double>(sample_count());
  const Eigen::MatrixXd w = decode(params);
  const DenseVector row = scaled_.row(i).transpose();
  const DenseVector z = w * row;

  DenseVector grad = DenseVector::Zero(dim());
  for (int r = 0; r < p; ++r) {
    grad[r] = -1.0 / params[r] - (n / (params[r] * params[r])) * z[r] * z[r] +
              (2.0 * n / params[r]) * z[r] * row[r];
    if (lambda2_ > 0.0) grad[r] += 2.0 * lambda2_ * params[r];
  }
  for (int r = 0; r < p; ++r) {
    for (int c = r + 1; c < p; ++c) {
      double g = (2.0 * n / params[r]) * z[r] * row[c] + (2.0 * n / params[c]) * z[c] * row[r];
      if (lambda2_ > 0.0) g += 4.0 * lambda2_ * params[p + pair_index(r, c)];
      grad[p + pair_index(r, c)] = g;
    }
  }
  return grad;
}

DenseVector GgmProblem::clamp_to_domain(DenseVector params) const {
  for (int i = 0; i < num_measures_; ++i) {
    if (params[i] < 1e-8) params[i] = 1e-8;
  }
  return params;
}

double GgmProblem::value(const DenseVector& params) const {
  check_params(params);
  const int p = num_measures_;
  const Eigen::MatrixXd w = decode(params);
  const Eigen::MatrixXd prod = scaled_ * w;  // column r is Xs * w_r
  double value = 0.0;
  for (int r = 0; r < p; ++r) {
    value += -std::log(params[r]) + prod.col(r).squaredNorm() / params[r];
  }
  if (lambda2_ > 0.0) value += lambda2_ * w.squaredNorm();
  return value;
}

DenseVector GgmProblem::gradient(const DenseVector& params) const {
  check_params(params);
  const int p = num_measures_;
  const Eigen::MatrixXd w = decode(params);
  const Eigen::MatrixXd q = scaled_.transpose() * scaled_;
  const Eigen::MatrixXd qw = q * w;  // column r is Q * w_r
  DenseVector grad = DenseVector::Zero(dim());
  for (int r = 0; r < p; ++r) {
    const double s = w.col(r).dot(qw.col(r));
    grad[r] = -1.0 / params[r] - s / (params[r] * params[r]) + 2.0 * qw(r, r) / params[r];
    if (lambda2_ > 0.0) grad[r] += 2.0 * lambda2_ * params[r];
  }
  for (int r = 0; r < p; ++r) {
    for (int c = r + 1; c < p; ++c) {
      double g = 2.0 * qw(c, r) / params[r] + 2.0 * qw(r, c) / params[c];
      if (lambda2_ > 0.0) g += 4.0 * lambda2_ * params[p + pair_index(r, c)];
      grad[p + pair_index(r, c)] = g;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Instance generators

namespace {

DenseVector planted_truth(int dim, int true_sparsity, SeededSampler& sampler) {
  if (true_sparsity < 1 || true_sparsity > dim) {
    throw InvalidInputError("generator: true sparsity out of range");
  }
  const std::vector<int> support = sampler.draw_without_replacement(dim, true_sparsity);
  DenseVector truth = DenseVector::Zero(dim);
  for (int idx : support) truth[idx] = sampler.rng().next_bounded(2) == 0 ? 1.0 : -1.0;
  return truth;
}

Eigen::MatrixXd gaussian_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.next_gaussian();
  }
  return m;
}

}  // namespace

SparseLsInstance generate_sparse_ls(int dim, int samples, int true_sparsity,
                                    double noise_std, std::uint64_t seed) {
  if (dim < 1 || samples < 1) throw InvalidInputError("generate_sparse_ls: bad dimensions");
  if (noise_std < 0.0) throw InvalidInputError("generate_sparse_ls: negative noise");
  SeededSampler sampler(seed);
  Eigen::MatrixXd design = gaussian_matrix(samples, dim, sampler.rng());
  DenseVector truth = planted_truth(dim, true_sparsity, sampler);
  DenseVector targets = design * truth;
  if (noise_std > 0.0) {
    for (int i = 0; i < samples; ++i) targets[i] += noise_std * sampler.rng().next_gaussian();
  }
  return SparseLsInstance{LeastSquaresProblem(std::move(design), std::move(targets)),
                          std::move(truth)};
}

SparseLogisticInstance generate_sparse_logistic(int dim, int samples, int true_sparsity,
                                                double flip_prob, std::uint64_t seed) {
  if (dim < 1 || samples < 1) throw InvalidInputError("generate_sparse_logistic: bad dimensions");
  if (flip_prob < 0.0 || flip_prob >= 1.0) {
    throw InvalidInputError("generate_sparse_logistic: flip probability out of [0,1)");
  }
  SeededSampler sampler(seed);
  Eigen::MatrixXd design = gaussian_matrix(samples, dim, sampler.rng());
  DenseVector truth = planted_truth(dim, true_sparsity, sampler);
  std::vector<int> labels(samples);
  for (int i = 0; i < samples; ++i) {
    int y = design.row(i).dot(truth) >= 0.0 ? 1 : -1;
    if (sampler.rng().next_uniform() < flip_prob) y = -y;
    labels[i] = y;
  }
  return SparseLogisticInstance{LogisticProblem(std::move(design), std::move(labels)),
                                std::move(truth)};
}

SparseGgmInstance generate_sparse_ggm(int measures, int samples, int true_pairs,
                                      std::uint64_t seed) {
  const int p = measures;
  const int max_pairs = p * (p - 1) / 2;
  if (p < 2 || samples < 1) throw InvalidInputError("generate_sparse_ggm: bad dimensions");
  if (true_pairs < 0 || true_pairs > max_pairs) {
    throw InvalidInputError("generate_sparse_ggm: pair count out of range");
  }
  SeededSampler sampler(seed);

  // Planted precision matrix: selected off-diagonal pairs get magnitudes in
  // [0.2, 0.5] with random signs, diagonal dominance keeps it PD.
  const std::vector<int> pair_ids = sampler.draw_without_replacement(max_pairs, true_pairs);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(pair_ids.size());
  {
    std::vector<std::pair<int, int>> all;
    all.reserve(max_pairs);
    for (int i = 0; i < p; ++i) {
      for (int j = i + 1; j < p; ++j) all.emplace_back(i, j);
    }
    for (int id : pair_ids) pairs.push_back(all[id]);
  }

  Eigen::MatrixXd precision = Eigen::MatrixXd::Zero(p, p);
  for (const auto& [i, j] : pairs) {
    const double magnitude = 0.2 + 0.3 * sampler.rng().next_uniform();
    const double value = sampler.rng().next_bounded(2) == 0 ? magnitude : -magnitude;
    precision(i, j) = value;
    precision(j, i) = value;
  }
  for (int i = 0; i < p; ++i) {
    precision(i, i) = 1.0 + precision.row(i).cwiseAbs().sum();
  }

  // x ~ N(0, precision^{-1}) via x = U^{-1} z with precision = U'U.
  const Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw InvalidInputError("generate_sparse_ggm: precision matrix not positive definite");
  }
  Eigen::MatrixXd data(samples, p);
  DenseVector z(p);
  for (int m = 0; m < samples; ++m) {
    for (int r = 0; r < p; ++r) z[r] = sampler.rng().next_gaussian();
    data.row(m) = llt.matrixU().solve(z).transpose();
  }

  return SparseGgmInstance{GgmProblem::from_samples(data), std::move(pairs)};
}

// ---------------------------------------------------------------------------
// Verification oracles

DenseVector finite_difference_gradient(const std::function<double(const DenseVector&)>& value_fn,
                                       const DenseVector& x, double step) {
  if (!(step > 0.0)) throw InvalidInputError("finite_difference_gradient: step must be positive");
  DenseVector grad(x.size());
  DenseVector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + step;
    const double up = value_fn(probe);
    probe[i] = x[i] - step;
    const double down = value_fn(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

namespace {

double combination_count(int n, int k) {
  double count = 1.0;
  for (int i = 0; i < k; ++i) {
    count *= static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (count > 2e6) return count;  // enough to trip the guard
  }
  return count;
}

}  // namespace

BruteForceResult brute_force_sparse_minimizer(const LeastSquaresProblem& problem, int k) {
  const int n = problem.dim();
  const int samples = problem.sample_count();
  if (k < 1 || k > n) throw InvalidInputError("brute_force_sparse_minimizer: K out of range");
  if (n > 25 || combination_count(n, k) > 1e6) {
    throw BudgetExceededError("brute_force_sparse_minimizer: combinatorial budget exceeded");
  }

  const Eigen::MatrixXd& design = problem.design();
  const DenseVector& targets = problem.targets();

  std::vector<int> support(k);
  for (int i = 0; i < k; ++i) support[i] = i;

  BruteForceResult best;
  best.value = std::numeric_limits<double>::infinity();

  Eigen::MatrixXd columns(samples, k);
  while (true) {
    for (int c = 0; c < k; ++c) columns.col(c) = design.col(support[c]);
    const Eigen::MatrixXd gram = columns.transpose() * columns;
    const DenseVector rhs = columns.transpose() * targets;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    DenseVector coef;
    if (lu.isInvertible()) {
      coef = lu.solve(rhs);
    } else {
      coef = (gram + 1e-12 * Eigen::MatrixXd::Identity(k, k)).ldlt().solve(rhs);
    }
    const double value = (columns * coef - targets).squaredNorm() / (2.0 * samples);
    // strict improvement keeps the lexicographically smallest support on ties
    if (value < best.value) {
      best.value = value;
      best.support = SupportSet(support, n);
      best.minimizer = DenseVector::Zero(n);
      for (int c = 0; c < k; ++c) best.minimizer[support[c]] = coef[c];
    }

    // next combination in lexicographic order
    int pos = k - 1;
    while (pos >= 0 && support[pos] == n - k + pos) --pos;
    if (pos < 0) break;
    ++support[pos];
    for (int c = pos + 1; c < k; ++c) support[c] = support[c - 1] + 1;
  }
  return best;
}

}  // namespace piht
