#pragma once

#include <optional>

#include "piht/types.hpp"

namespace piht {

/// Diagnostics for one feasible point. `active_set` holds the zero
/// components, `inactive_set` the nonzero ones; the two partition {0..n-1}.
/// `minimal_l` is +infinity when no finite L makes the point stationary.
struct StationarityReport {
  double bf_residual = 0.0;
  double l_residual = 0.0;
  double minimal_l = 0.0;
  bool support_full = false;
  SupportSet active_set;
  SupportSet inactive_set;
};

/// Distance from the first-order Basic Feasibility condition. With a
/// non-full support (||x||_0 < K) the whole gradient must vanish, so the
/// residual is ||grad||_inf; with a full support only the components on
/// the support count. Zero exactly when the condition holds.
double basic_feasibility_residual(const DenseVector& x, const DenseVector& grad, int k);

/// Violation of the analytic characterization of L-stationarity:
/// max over zero components of (|grad_i| - L*M_K(x))^+ combined with the
/// largest |grad_i| over the nonzero components.
double l_stationarity_residual(const DenseVector& x, const DenseVector& grad,
                               int k, double big_l);

/// Smallest L for which the point is L-stationary. Defined only when the
/// gradient vanishes on the support (components with |grad_i| <=
/// support_zero_tol count as vanished); nullopt when no L works, i.e. the
/// support gradient is nonzero or M_K(x) = 0 with a nonzero gradient on
/// the zero components.
std::optional<double> minimal_stationary_L(const DenseVector& x, const DenseVector& grad,
                                           int k, double support_zero_tol = 0.0);

/// Full report: BF residual, minimal L (+infinity when undefined) and the
/// L-residual evaluated at that L (at L = 1 when the minimal L is zero,
/// where the gradient vanishes identically and any L works).
StationarityReport diagnose_stationarity(const DenseVector& x, const DenseVector& grad,
                                         int k, double support_zero_tol = 0.0);

}  // namespace piht
