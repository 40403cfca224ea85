#include "piht/sparsity.hpp"

#include <algorithm>
#include <numeric>

namespace piht {

SortPermutation magnitude_rank(const DenseVector& v) {
  require_finite(v, "magnitude_rank");
  const int n = static_cast<int>(v.size());
  if (n < 1) throw InvalidInputError("magnitude_rank: empty vector");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  // stable sort keeps equal magnitudes in ascending-index order
  std::stable_sort(order.begin(), order.end(),
                   [&v](int a, int b) { return std::abs(v[a]) > std::abs(v[b]); });
  return SortPermutation(std::move(order), n);
}

static void check_sparsity_level(int k, int n, const char* what) {
  if (k < 1) throw InvalidInputError(std::string(what) + ": K must be at least 1");
  if (k > n) throw InvalidInputError(std::string(what) + ": K exceeds the vector dimension");
}

SupportSet top_k_support(const DenseVector& v, int k) {
  check_sparsity_level(k, static_cast<int>(v.size()), "top_k_support");
  const SortPermutation rank = magnitude_rank(v);
  std::vector<int> kept(rank.order().begin(), rank.order().begin() + k);
  return SupportSet::from_unsorted(std::move(kept), static_cast<int>(v.size()));
}

DenseVector hard_threshold(const DenseVector& v, int k) {
  return pseudo_hard_threshold(v, top_k_support(v, k));
}

DenseVector pseudo_hard_threshold(const DenseVector& v, const SupportSet& support) {
  require_finite(v, "pseudo_hard_threshold");
  if (support.ambient_dim() != static_cast<int>(v.size())) {
    throw InvalidInputError("pseudo_hard_threshold: support dimension mismatch");
  }
  DenseVector out = DenseVector::Zero(v.size());
  for (int idx : support.indices()) out[idx] = v[idx];
  return out;
}

double m_k(const DenseVector& x, int k) {
  check_sparsity_level(k, static_cast<int>(x.size()), "m_k");
  const SortPermutation rank = magnitude_rank(x);
  return std::abs(x[rank.order()[k - 1]]);
}

DenseVector clipped_step(const DenseVector& x, const DenseVector& g,
                         double alpha, double delta) {
  require_finite(x, "clipped_step");
  require_finite(g, "clipped_step");
  if (x.size() != g.size()) throw InvalidInputError("clipped_step: dimension mismatch");
  if (!(alpha > 0.0)) throw InvalidInputError("clipped_step: alpha must be positive");
  if (!(delta > 0.0)) throw InvalidInputError("clipped_step: delta must be positive");
  const double gnorm = g.norm();
  if (gnorm == 0.0) return x;  // scale factor is alpha by convention; step is zero
  const double t = alpha * std::min(1.0, delta / (alpha * gnorm));
  return x - t * g;
}

}  // namespace piht
