#include <cmath>

#include "doctest.h"
#include "piht/sparsity.hpp"
#include "piht/stationarity.hpp"
#include "test_helpers.hpp"

using namespace piht;
using piht::testing::all_supports;
using piht::testing::keep_support;
using piht::testing::make_vector;
using piht::testing::random_vector;

TEST_CASE("basic feasibility residual") {
  // full support: only the gradient on the support counts
  CHECK(basic_feasibility_residual(make_vector({0, 1}), make_vector({-4, 0}), 1) == 0.0);
  CHECK(basic_feasibility_residual(make_vector({0, 1}), make_vector({-4, 3}), 1) == 3.0);
  // support not full: the whole gradient must vanish
  CHECK(basic_feasibility_residual(make_vector({0, 0.5}), make_vector({-4, 0}), 2) == 4.0);

  CHECK_THROWS_AS(basic_feasibility_residual(make_vector({1, 1}), make_vector({0, 0}), 1),
                  InfeasiblePointError);
}

TEST_CASE("l-stationarity residual") {
  const DenseVector x = make_vector({0, 1});
  const DenseVector g = make_vector({-4, 0});
  CHECK(l_stationarity_residual(x, g, 1, 2.0) == 2.0);
  CHECK(l_stationarity_residual(x, g, 1, 4.0) == 0.0);

  // zero gradient is stationary for every L
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseVector point = hard_threshold(random_vector(5, rng), 2);
    const DenseVector zero = DenseVector::Zero(5);
    CHECK(l_stationarity_residual(point, zero, 2, 0.5 + rng.next_uniform() * 10) == 0.0);
  }

  CHECK_THROWS_AS(l_stationarity_residual(x, g, 1, 0.0), InvalidInputError);
  CHECK_THROWS_AS(l_stationarity_residual(make_vector({1, 1}), g, 1, 1.0),
                  InfeasiblePointError);
}

TEST_CASE("l-stationarity residual is nonincreasing in L") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_bounded(7));
    const int k = 1 + static_cast<int>(rng.next_bounded(n));
    const DenseVector x = hard_threshold(random_vector(n, rng), k);
    const DenseVector g = random_vector(n, rng, 2.0);
    double previous = l_stationarity_residual(x, g, k, 0.1);
    for (double big_l : {0.5, 1.0, 2.0, 5.0, 20.0}) {
      const double current = l_stationarity_residual(x, g, k, big_l);
      CHECK(current <= previous + 1e-15);
      previous = current;
    }
  }
}

TEST_CASE("l-stationarity implies basic feasibility on full supports") {
  Rng rng(33);
  int hits = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_bounded(7));
    const int k = 1 + static_cast<int>(rng.next_bounded(n));
    DenseVector x = DenseVector::Zero(n);
    // force a full support
    for (int i = 0; i < k; ++i) x[i] = 1.0 + rng.next_uniform();
    // gradient satisfying Lemma-1: zero on the support, bounded off it
    DenseVector g = DenseVector::Zero(n);
    const double big_l = 0.5 + rng.next_uniform() * 4.0;
    const double mk = m_k(x, k);
    for (int i = k; i < n; ++i) g[i] = (rng.next_uniform() * 2 - 1) * big_l * mk;
    if (l_stationarity_residual(x, g, k, big_l) == 0.0) {
      ++hits;
      CHECK(basic_feasibility_residual(x, g, k) == 0.0);
    }
  }
  CHECK(hits > 100);  // the construction should satisfy the condition
}

TEST_CASE("minimal stationary L") {
  CHECK(minimal_stationary_L(make_vector({0, 1}), make_vector({-4, 0}), 1) == 4.0);
  CHECK(minimal_stationary_L(make_vector({2, 0}), make_vector({0, 0}), 1) == 0.0);
  CHECK_FALSE(minimal_stationary_L(make_vector({0, 1}), make_vector({-4, 1}), 1).has_value());
  // zero point with a nonzero gradient: M_K = 0, no finite L works
  CHECK_FALSE(minimal_stationary_L(make_vector({0, 0}), make_vector({1, 0}), 1).has_value());
  // tolerance admits tiny support gradients
  CHECK(minimal_stationary_L(make_vector({0, 1}), make_vector({-4, 1e-12}), 1, 1e-9) == 4.0);
}

TEST_CASE("residual vanishes at the minimal stationary L") {
  Rng rng(55);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_bounded(7));
    const int k = 1 + static_cast<int>(rng.next_bounded(n));
    DenseVector x = hard_threshold(random_vector(n, rng), k);
    DenseVector g = random_vector(n, rng, 3.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x[i] != 0.0) g[i] = 0.0;  // make a stationary candidate
    }
    const auto minimal = minimal_stationary_L(x, g, k);
    if (!minimal.has_value()) continue;
    if (*minimal == 0.0) {
      CHECK(l_stationarity_residual(x, g, k, 1.0) == 0.0);
    } else {
      const double residual = l_stationarity_residual(x, g, k, *minimal);
      CHECK(residual <= 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("zero residual certifies the fixed-point inclusion") {
  // x must reappear among the hard-thresholding projections of
  // x - (1/L) grad, over every admissible tie-break.
  Rng rng(91);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_bounded(7));
    const int k = 1 + static_cast<int>(rng.next_bounded(n));
    DenseVector x = hard_threshold(random_vector(n, rng), k);
    if (count_nonzeros(x) != k) continue;  // full-support case only
    DenseVector g = random_vector(n, rng, 2.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (x[i] != 0.0) g[i] = 0.0;
    }
    const double big_l = 1.0 + rng.next_uniform() * 5.0;
    if (l_stationarity_residual(x, g, k, big_l) != 0.0) continue;
    ++checked;

    const DenseVector shifted = x - g / big_l;
    const double threshold = m_k(shifted, k);
    bool found = false;
    for (const auto& support : all_supports(n, k)) {
      // valid tie-break supports keep only magnitudes >= the k-th largest
      bool admissible = true;
      for (int i = 0; i < n; ++i) {
        const bool inside =
            std::find(support.begin(), support.end(), i) != support.end();
        if (inside && std::abs(shifted[i]) < threshold) admissible = false;
        if (!inside && std::abs(shifted[i]) > threshold) admissible = false;
      }
      if (!admissible) continue;
      if (piht::testing::exactly_equal(keep_support(shifted, support), x)) {
        found = true;
        break;
      }
    }
    CHECK(found);
  }
  CHECK(checked > 50);
}

TEST_CASE("stationarity report") {
  const StationarityReport report =
      diagnose_stationarity(make_vector({0, 1}), make_vector({-4, 0}), 1);
  CHECK(report.bf_residual == 0.0);
  CHECK(report.minimal_l == 4.0);
  CHECK(report.l_residual == 0.0);
  CHECK(report.support_full);
  CHECK(report.active_set.indices() == std::vector<int>{0});
  CHECK(report.inactive_set.indices() == std::vector<int>{1});

  const StationarityReport undefined =
      diagnose_stationarity(make_vector({0, 1}), make_vector({-4, 1}), 1);
  CHECK(std::isinf(undefined.minimal_l));
  CHECK(undefined.l_residual == 1.0);
}
