#include "piht/stationarity.hpp"

#include <limits>

#include "piht/sparsity.hpp"

namespace piht {

namespace {

void check_feasible(const DenseVector& x, const DenseVector& grad, int k, const char* what) {
  require_finite(x, what);
  require_finite(grad, what);
  if (x.size() != grad.size()) throw InvalidInputError(std::string(what) + ": dimension mismatch");
  if (k < 1 || k > static_cast<int>(x.size())) {
    throw InvalidInputError(std::string(what) + ": K out of range");
  }
  if (count_nonzeros(x) > k) {
    throw InfeasiblePointError(std::string(what) + ": point has more than K nonzeros");
  }
}

double max_abs_on_support(const DenseVector& grad, const DenseVector& x) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) worst = std::max(worst, std::abs(grad[i]));
  }
  return worst;
}

double max_abs_off_support(const DenseVector& grad, const DenseVector& x) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) worst = std::max(worst, std::abs(grad[i]));
  }
  return worst;
}

}  // namespace

double basic_feasibility_residual(const DenseVector& x, const DenseVector& grad, int k) {
  check_feasible(x, grad, k, "basic_feasibility_residual");
  if (count_nonzeros(x) < k) return grad.cwiseAbs().maxCoeff();
  return max_abs_on_support(grad, x);
}

double l_stationarity_residual(const DenseVector& x, const DenseVector& grad,
                               int k, double big_l) {
  check_feasible(x, grad, k, "l_stationarity_residual");
  if (!(big_l > 0.0)) throw InvalidInputError("l_stationarity_residual: L must be positive");
  const double threshold = big_l * m_k(x, k);
  double active_violation = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] == 0.0) {
      active_violation = std::max(active_violation, std::abs(grad[i]) - threshold);
    }
  }
  active_violation = std::max(active_violation, 0.0);
  return std::max(active_violation, max_abs_on_support(grad, x));
}

std::optional<double> minimal_stationary_L(const DenseVector& x, const DenseVector& grad,
                                           int k, double support_zero_tol) {
  check_feasible(x, grad, k, "minimal_stationary_L");
  if (max_abs_on_support(grad, x) > support_zero_tol) return std::nullopt;
  const double worst_active = max_abs_off_support(grad, x);
  if (worst_active == 0.0) return 0.0;
  const double mk = m_k(x, k);
  if (mk == 0.0) return std::nullopt;
  return worst_active / mk;
}

StationarityReport diagnose_stationarity(const DenseVector& x, const DenseVector& grad,
                                         int k, double support_zero_tol) {
  StationarityReport report;
  report.bf_residual = basic_feasibility_residual(x, grad, k);
  report.support_full = count_nonzeros(x) == k;
  report.inactive_set = nonzero_support(x);
  report.active_set = report.inactive_set.complement();
  const auto minimal = minimal_stationary_L(x, grad, k, support_zero_tol);
  if (minimal.has_value()) {
    report.minimal_l = *minimal;
    report.l_residual = l_stationarity_residual(x, grad, k, *minimal > 0.0 ? *minimal : 1.0);
  } else {
    report.minimal_l = std::numeric_limits<double>::infinity();
    report.l_residual = max_abs_on_support(grad, x);
  }
  return report;
}

}  // namespace piht
