#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace piht {

/// Dense real coordinate vector; decision variables, gradients and steps
/// all live here. Indices are 0-based throughout the C++ API; file formats
/// emitted by the experiment runner use 1-based indices.
using DenseVector = Eigen::VectorXd;

struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InfeasiblePointError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Objective evaluated outside its domain (e.g. nonpositive diagonal in a
/// log-determinant style term).
struct ObjectiveDomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct BudgetExceededError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverAbortError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_finite(const DenseVector& v, const char* what) {
  if (!v.allFinite()) {
    throw InvalidInputError(std::string(what) + ": non-finite component");
  }
}

inline int count_nonzeros(const DenseVector& v) {
  int count = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) ++count;
  }
  return count;
}

/// Strictly increasing set of component indices within an ambient dimension.
class SupportSet {
 public:
  SupportSet() = default;

  SupportSet(std::vector<int> indices, int ambient_dim)
      : indices_(std::move(indices)), ambient_dim_(ambient_dim) {
    if (ambient_dim_ < 0) throw InvalidInputError("SupportSet: negative ambient dimension");
    int prev = -1;
    for (int idx : indices_) {
      if (idx < 0 || idx >= ambient_dim_) throw InvalidInputError("SupportSet: index out of range");
      if (idx <= prev) throw InvalidInputError("SupportSet: indices must be strictly increasing");
      prev = idx;
    }
  }

  static SupportSet from_unsorted(std::vector<int> indices, int ambient_dim) {
    std::sort(indices.begin(), indices.end());
    return SupportSet(std::move(indices), ambient_dim);
  }

  const std::vector<int>& indices() const { return indices_; }
  int ambient_dim() const { return ambient_dim_; }
  int size() const { return static_cast<int>(indices_.size()); }
  bool empty() const { return indices_.empty(); }

  bool contains(int idx) const {
    return std::binary_search(indices_.begin(), indices_.end(), idx);
  }

  SupportSet complement() const {
    std::vector<int> rest;
    rest.reserve(ambient_dim_ - size());
    auto it = indices_.begin();
    for (int i = 0; i < ambient_dim_; ++i) {
      if (it != indices_.end() && *it == i) {
        ++it;
      } else {
        rest.push_back(i);
      }
    }
    return SupportSet(std::move(rest), ambient_dim_);
  }

  friend bool operator==(const SupportSet& a, const SupportSet& b) {
    return a.ambient_dim_ == b.ambient_dim_ && a.indices_ == b.indices_;
  }

 private:
  std::vector<int> indices_;
  int ambient_dim_ = 0;
};

/// Support of a vector: the indices of its (exactly) nonzero components.
inline SupportSet nonzero_support(const DenseVector& v) {
  std::vector<int> idx;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) idx.push_back(static_cast<int>(i));
  }
  return SupportSet(std::move(idx), static_cast<int>(v.size()));
}

/// Bijection of {0..n-1}; position i holds the index ranked i-th.
class SortPermutation {
 public:
  SortPermutation() = default;

  SortPermutation(std::vector<int> order, int ambient_dim)
      : order_(std::move(order)), ambient_dim_(ambient_dim) {
    if (static_cast<int>(order_.size()) != ambient_dim_) {
      throw InvalidInputError("SortPermutation: order length must equal ambient dimension");
    }
    std::vector<char> seen(ambient_dim_, 0);
    for (int idx : order_) {
      if (idx < 0 || idx >= ambient_dim_ || seen[idx]) {
        throw InvalidInputError("SortPermutation: order is not a bijection");
      }
      seen[idx] = 1;
    }
  }

  const std::vector<int>& order() const { return order_; }
  int ambient_dim() const { return ambient_dim_; }

  friend bool operator==(const SortPermutation& a, const SortPermutation& b) {
    return a.ambient_dim_ == b.ambient_dim_ && a.order_ == b.order_;
  }

 private:
  std::vector<int> order_;
  int ambient_dim_ = 0;
};

}  // namespace piht
