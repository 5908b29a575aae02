#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "attnbound/error.hpp"
#include "attnbound/geometry.hpp"
#include "attnbound/kernels.hpp"
#include "attnbound/synthetic.hpp"
#include "test_util.hpp"

using namespace attnbound;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::contract;
}

WeightVector random_weights(std::size_t L, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> l(L);
  for (double& x : l) x = u(gen);
  return normalize(l, NormalizerConfig::softmax(1.0));
}

}  // namespace

TEST(ProjectToSphere, Examples) {
  const Matrix unit = project_to_sphere(Matrix(1, 2, {3, 4}), 1.0);
  EXPECT_NEAR(unit(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(unit(0, 1), 0.8, 1e-15);

  std::mt19937_64 gen(31);
  const Matrix x = testutil::random_matrix(40, 7, gen, -5, 5);
  const Matrix p = project_to_sphere(x, 2.0);
  for (std::size_t i = 0; i < p.rows(); ++i) EXPECT_NEAR(std::sqrt(kernels::squared_norm(p.row(i))), 2.0, 1e-12);
  const Matrix again = project_to_sphere(p, 2.0);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(again.data()[i], p.data()[i], 1e-12);

  EXPECT_EQ(kind_of([] { project_to_sphere(Matrix(2, 2, {1, 0, 0, 0}), 1.0); }), ErrorKind::degenerate_embedding);
}

TEST(MinPairwiseSeparation, Examples) {
  EXPECT_EQ(min_pairwise_separation(Matrix(2, 2, {1, 2, 1, 2})), 0.0);
  EXPECT_EQ(min_pairwise_separation(Matrix(3, 2, {0, 0, 3, 4, 6, 8})), 5.0);

  kernels::ScopedBackend pin(kernels::Backend::scalar);
  std::mt19937_64 gen(32);
  const Matrix x = testutil::random_matrix(30, 5, gen);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 30; ++i) {
    for (std::size_t j = 0; j < 30; ++j) {
      if (i == j) continue;
      double sq = 0.0;
      for (std::size_t c = 0; c < 5; ++c) sq += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      best = std::min(best, std::sqrt(sq));
    }
  }
  EXPECT_EQ(min_pairwise_separation(x), best);
}

TEST(SeparationRadius, Examples) {
  const Matrix x(2, 2, {1, 0, 0, 1});
  const WeightVector w({0.6, 0.4});
  EXPECT_NEAR(separation_radius(x, w, SelectionSet({0}, 2)), 0.72111, 1e-5);

  // Zero-weight complement collapses the radius to ||s||.
  const Matrix y(3, 2, {1, 0, 0, 1, 0, 0});
  const WeightVector v({0.5, 0.5, 0.0});
  EXPECT_NEAR(separation_radius(y, v, SelectionSet({0, 1}, 3)), std::sqrt(0.5), 1e-15);

  EXPECT_EQ(kind_of([&] { separation_radius(x, w, SelectionSet({0, 1}, 2)); }), ErrorKind::no_complement);
}

TEST(SeparationRadius, MatchesNaiveScan) {
  kernels::ScopedBackend pin(kernels::Backend::scalar);
  std::mt19937_64 gen(33);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t L = 3 + gen() % 20;
    const Matrix x = testutil::random_matrix(L, 4, gen);
    const auto w = random_weights(L, gen);
    const auto sel = select_top_n(w, 1 + gen() % (L - 1));
    const auto s = context_vector(x, w, sel);
    double best = std::numeric_limits<double>::infinity();
    std::size_t ns = 0;
    const double r = separation_radius(x, w, sel);
    for (std::size_t i = 0; i < L; ++i) {
      double sq = 0.0;
      for (std::size_t c = 0; c < 4; ++c) {
        const double d = w[i] * x(i, c) - s[c];
        sq += d * d;
      }
      if (sel.contains(i)) {
        ns += std::sqrt(sq) <= r ? 1 : 0;
      } else {
        best = std::min(best, std::sqrt(sq));
      }
    }
    EXPECT_EQ(r, best);
    EXPECT_EQ(distinguishable_count(x, w, sel, r), ns);
  }
}

TEST(DistinguishableCount, SingletonEmptyBallAndMonotone) {
  std::mt19937_64 gen(34);
  const Matrix x = project_to_sphere(testutil::random_matrix(12, 5, gen), 1.0);
  const auto w = random_weights(12, gen);
  for (double r : {0.0, 0.1, 2.0}) EXPECT_EQ(distinguishable_count(x, w, select_top_n(w, 1), r), 1u);
  EXPECT_EQ(distinguishable_count(x, w, select_top_n(w, 4), 0.0), 0u);
  const auto sel = select_top_n(w, 6);
  std::size_t prev = 0;
  for (double r = 0.0; r < 1.5; r += 0.01) {
    const std::size_t n = distinguishable_count(x, w, sel, r);
    EXPECT_GE(n, prev);
    prev = n;
  }
  EXPECT_EQ(prev, 6u);
}

TEST(XiSpread, Examples) {
  const WeightVector two({0.5, 0.5});
  for (double delta : {0.0, 0.7, std::sqrt(2.0)}) {
    const auto xi = xi_spread(two, SelectionSet({0, 1}, 2), {1.0, delta});
    EXPECT_DOUBLE_EQ(xi[0], 0.5);
    EXPECT_DOUBLE_EQ(xi[1], 0.5);
  }
  std::mt19937_64 gen(35);
  const auto w = random_weights(5, gen);
  EXPECT_EQ(xi_spread(w, select_top_n(w, 1), {1.0, 0.3}), std::vector<double>{0.0});

  const WeightVector three({1.0 / 3, 1.0 / 3, 1.0 / 3});
  const auto xi3 = xi_spread(three, SelectionSet({0, 1, 2}, 3), {1.0, std::sqrt(2.0)});
  for (double x : xi3) EXPECT_NEAR(x, std::sqrt(2.0 / 9.0), 1e-12);
  EXPECT_NEAR(xi3[0], 0.4714, 1e-4);
}

TEST(XiSpread, PairReadingsDiffer) {
  const WeightVector w({0.25, 0.25, 0.25, 0.25});
  const SelectionSet all({0, 1, 2, 3}, 4);
  const auto ordered = xi_spread(w, all, {1.0, 0.0}, PairSumReading::ordered);
  const auto unordered = xi_spread(w, all, {1.0, 0.0}, PairSumReading::unordered);
  // three others: sum of squares 3/16, ordered pairs 6/16, unordered 3/16
  EXPECT_NEAR(ordered[0], std::sqrt(9.0 / 16.0), 1e-15);
  EXPECT_NEAR(unordered[0], std::sqrt(6.0 / 16.0), 1e-15);
}

TEST(XiSpread, NegativeRadicandIsAnAssumptionViolation) {
  // delta = 2M is allowed by the sphere geometry but makes the pair weight M^2 - 2M^2 negative.
  const WeightVector w({0.25, 0.25, 0.25, 0.25});
  EXPECT_EQ(kind_of([&] { xi_spread(w, SelectionSet({0, 1, 2, 3}, 4), {1.0, 2.0}); }), ErrorKind::assumption_violation);
}

TEST(SeparabilityBounds, Examples) {
  const std::vector<double> zero{0.0, 0.0, 0.0};
  const auto b0 = separability_bounds(zero, 0.8, 3, 1.0);
  EXPECT_EQ(b0.lower_raw, 1.0);
  EXPECT_NEAR(b0.upper, std::exp(-0.64 / 16), 1e-15);

  const std::vector<double> at_r{0.6, 0.6};
  const auto b1 = separability_bounds(at_r, 0.6, 2, 1.0);
  EXPECT_NEAR(b1.lower_raw, 0.0, 1e-15);
  EXPECT_EQ(b1.upper, 1.0);

  const std::vector<double> half{0.5, 0.5};
  const auto b2 = separability_bounds(half, 1.0, 2, 1.0);
  EXPECT_DOUBLE_EQ(b2.lower, 0.5);
  EXPECT_NEAR(b2.upper, 0.98450, 1e-5);

  const std::vector<double> wide{3.0, 3.0};
  const auto b3 = separability_bounds(wide, 1.0, 2, 1.0);
  EXPECT_LT(b3.lower_raw, 0.0);
  EXPECT_EQ(b3.lower, 0.0);

  EXPECT_THROW(separability_bounds(half, 0.0, 2, 1.0), Error);
}

TEST(AnalyzeGeometry, SingletonRatioIsOne) {
  std::mt19937_64 gen(36);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = testutil::random_matrix(16, 4, gen);
    const auto g = analyze_geometry(x, random_weights(16, gen), 1, {});
    EXPECT_EQ(g.ratio, 1.0);
    EXPECT_EQ(g.n_s, 1u);
  }
}

TEST(AnalyzeGeometry, InvariantsHold) {
  std::mt19937_64 gen(37);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t L = 4 + gen() % 40;
    const Matrix x = testutil::random_matrix(L, 6, gen);
    const std::size_t n = 1 + gen() % (L - 1);
    const auto g = analyze_geometry(x, random_weights(L, gen), n, {});
    EXPECT_LE(g.n_s, n);
    EXPECT_GE(g.ratio, 0.0);
    EXPECT_LE(g.ratio, 1.0);
    EXPECT_EQ(g.xi.size(), n);
    for (double v : g.xi) EXPECT_GE(v, 0.0);
    EXPECT_LE(g.upper_bound, 1.0);
    EXPECT_GE(g.upper_bound, 0.0);
    EXPECT_LE(g.lower_bound, 1.0);
    EXPECT_GT(g.delta, 0.0);
  }
}

TEST(MonteCarloSeparability, SandwichOnSmallGrid) {
  SyntheticConfig cfg;
  cfg.seq_len = 64;
  cfg.dim = 8;
  cfg.delta_min = 0.05;
  for (std::size_t n : {4u, 8u}) {
    std::vector<double> w(64, 0.0);
    for (std::size_t j = 0; j < n; ++j) w[j] = 1.0 / static_cast<double>(n);
    auto sampler = [cfg](std::uint64_t k) mutable {
      cfg.seed = 1000 + k;
      return sample_sphere(cfg);
    };
    GeometryOptions opt;
    opt.delta = cfg.delta_min;
    const auto est = monte_carlo_separability(sampler, WeightVector(w), n, opt, 400);
    EXPECT_TRUE(est.within_bounds()) << "N=" << n << " ratio=" << est.mean_ratio << " [" << est.mean_lower << ", "
                                     << est.mean_upper << "]";
  }
}
