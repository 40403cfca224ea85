#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "piht/oracles.hpp"
#include "piht/types.hpp"

namespace piht {

/// Least squares over rows of a design matrix: per-sample value
/// (1/2)(a_i'x - b_i)^2, full objective (1/(2N)) ||Ax - b||^2.
class LeastSquaresProblem : public FiniteSumObjective {
 public:
  LeastSquaresProblem(Eigen::MatrixXd design, DenseVector targets);

  int sample_count() const override { return static_cast<int>(design_.rows()); }
  int dim() const override { return static_cast<int>(design_.cols()); }
  double sample_value(const DenseVector& x, int i) const override;
  DenseVector sample_gradient(const DenseVector& x, int i) const override;

  const Eigen::MatrixXd& design() const { return design_; }
  const DenseVector& targets() const { return targets_; }

 private:
  void check_index(int i) const;
  Eigen::MatrixXd design_;
  DenseVector targets_;
};

/// Binary logistic loss with labels in {-1, +1}: per-sample value
/// log(1 + exp(-y_i a_i'x)), evaluated overflow-safe.
class LogisticProblem : public FiniteSumObjective {
 public:
  LogisticProblem(Eigen::MatrixXd design, std::vector<int> labels);

  int sample_count() const override { return static_cast<int>(design_.rows()); }
  int dim() const override { return static_cast<int>(design_.cols()); }
  double sample_value(const DenseVector& x, int i) const override;
  DenseVector sample_gradient(const DenseVector& x, int i) const override;

  const Eigen::MatrixXd& design() const { return design_; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  void check_index(int i) const;
  Eigen::MatrixXd design_;
  std::vector<int> labels_;  // each -1 or +1
};

/// Pseudo-likelihood objective for a sparse Gaussian graphical model:
///   sum_i ( -log w_ii + (1/w_ii) ||Xs * w_i||^2 )
/// over a symmetric weight matrix W, with Xs the sample matrix prescaled
/// by 1/sqrt(N). Parameters are packed as the p diagonal entries followed
/// by the p(p-1)/2 upper-triangle off-diagonal entries (row-major); the
/// cardinality budget applies to the off-diagonal block only, so solver
/// runs keep the first p coordinates unconstrained. An optional quadratic
/// penalty lambda2*||W||_F^2 is available and off by default.
class GgmProblem : public FiniteSumObjective {
 public:
  /// `scaled` is the N x p matrix already divided by sqrt(N).
  explicit GgmProblem(Eigen::MatrixXd scaled, double lambda2 = 0.0);

  /// Build from raw samples (rows) by applying the 1/sqrt(N) scaling.
  static GgmProblem from_samples(const Eigen::MatrixXd& raw, double lambda2 = 0.0);

  int sample_count() const override { return static_cast<int>(scaled_.rows()); }
  int dim() const override { return num_measures_ + num_measures_ * (num_measures_ - 1) / 2; }
  double sample_value(const DenseVector& params, int i) const override;
  DenseVector sample_gradient(const DenseVector& params, int i) const override;

  /// Floors the diagonal block at 1e-8 to keep the log terms defined.
  DenseVector clamp_to_domain(DenseVector params) const override;

  int num_measures() const { return num_measures_; }
  int num_pairs() const { return num_measures_ * (num_measures_ - 1) / 2; }
  /// Length of the unconstrained diagonal prefix in the packed layout.
  int free_prefix() const { return num_measures_; }

  Eigen::MatrixXd decode(const DenseVector& params) const;
  DenseVector encode(const Eigen::MatrixXd& w) const;

  /// Objective value at the packed parameters (equals the sample mean of
  /// per-sample values by construction; computed directly).
  double value(const DenseVector& params) const;
  DenseVector gradient(const DenseVector& params) const;

  const Eigen::MatrixXd& scaled_data() const { return scaled_; }

 private:
  void check_params(const DenseVector& params) const;
  int pair_index(int i, int j) const;  // i < j

  Eigen::MatrixXd scaled_;  // N x p, prescaled by 1/sqrt(N)
  int num_measures_ = 0;
  double lambda2_ = 0.0;
};

/// Gaussian design, k_star-sparse +/-1 ground truth on a random support,
/// targets A x* plus optional Gaussian noise.
struct SparseLsInstance {
  LeastSquaresProblem problem;
  DenseVector ground_truth;
};
SparseLsInstance generate_sparse_ls(int dim, int samples, int true_sparsity,
                                    double noise_std, std::uint64_t seed);

/// Gaussian design, k_star-sparse +/-1 ground truth, labels sign(a_i'x*)
/// flipped independently with probability flip_prob.
struct SparseLogisticInstance {
  LogisticProblem problem;
  DenseVector ground_truth;
};
SparseLogisticInstance generate_sparse_logistic(int dim, int samples, int true_sparsity,
                                                double flip_prob, std::uint64_t seed);

/// Planted sparse precision matrix (unit diagonal scaling, `true_pairs`
/// symmetric off-diagonal entries, diagonally dominated to stay positive
/// definite); samples drawn from the implied Gaussian.
struct SparseGgmInstance {
  GgmProblem problem;
  std::vector<std::pair<int, int>> true_pairs;
};
SparseGgmInstance generate_sparse_ggm(int measures, int samples, int true_pairs,
                                      std::uint64_t seed);

/// Central finite differences (f(x + h e_i) - f(x - h e_i)) / (2h).
DenseVector finite_difference_gradient(const std::function<double(const DenseVector&)>& value_fn,
                                       const DenseVector& x, double step);

/// Global minimizer of the least-squares objective over ||x||_0 <= K by
/// exhaustive support enumeration; each restricted subproblem is solved by
/// normal equations (ridge 1e-12 when singular). Ties between supports of
/// equal value resolve to the lexicographically smallest support. Guarded:
/// refuses n > 25 or more than 1e6 candidate supports.
struct BruteForceResult {
  DenseVector minimizer;
  SupportSet support;
  double value = 0.0;
};
BruteForceResult brute_force_sparse_minimizer(const LeastSquaresProblem& problem, int k);

}  // namespace piht
