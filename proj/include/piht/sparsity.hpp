#pragma once

#include "piht/types.hpp"

namespace piht {

/// Permutation ranking the components of v by descending absolute value.
/// Ties are broken by ascending index, which makes every downstream
/// selection deterministic.
SortPermutation magnitude_rank(const DenseVector& v);

/// Indices (ascending) of the K largest-magnitude components of v.
SupportSet top_k_support(const DenseVector& v, int k);

/// Euclidean projection of v onto {w : ||w||_0 <= K}: keep the K
/// largest-magnitude components, zero the rest.
DenseVector hard_threshold(const DenseVector& v, int k);

/// Projection of v onto the subspace of vectors supported in `support`:
/// components outside the set are zeroed, the rest pass through.
DenseVector pseudo_hard_threshold(const DenseVector& v, const SupportSet& support);

/// K-th largest absolute value among the components of x.
double m_k(const DenseVector& x, int k);

/// x - t*g with t = alpha * min{1, delta / (alpha*||g||)}. The displacement
/// norm never exceeds delta. For g = 0 the step is zero and x is returned.
DenseVector clipped_step(const DenseVector& x, const DenseVector& g,
                         double alpha, double delta);

}  // namespace piht
