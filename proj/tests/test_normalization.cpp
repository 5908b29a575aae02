#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "attnbound/error.hpp"
#include "attnbound/kernels.hpp"
#include "attnbound/normalization.hpp"
#include "test_util.hpp"

using namespace attnbound;

namespace {

std::vector<double> values(const WeightVector& w) { return {w.values().begin(), w.values().end()}; }

std::vector<double> uniform_logits(std::size_t L, double a, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-a, a);
  std::vector<double> l(L);
  for (double& x : l) x = u(gen);
  return l;
}

}  // namespace

TEST(ComputeLogits, IdentityRows) {
  const Matrix id = Matrix::identity(2);
  const auto l = compute_logits(id, id);
  EXPECT_EQ(l.values, Matrix::identity(2));
  EXPECT_EQ(l.bound, 1.0);
}

TEST(ComputeLogits, ZeroQueries) {
  std::mt19937_64 gen(2);
  const auto l = compute_logits(Matrix(3, 4), testutil::random_matrix(3, 4, gen));
  for (double v : l.values.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(l.bound, 0.0);
}

TEST(ComputeLogits, MatchesTripleLoop) {
  kernels::ScopedBackend pin(kernels::Backend::scalar);
  std::mt19937_64 gen(3);
  const Matrix q = testutil::random_matrix(4, 3, gen), k = testutil::random_matrix(4, 3, gen);
  const auto l = compute_logits(q, k);
  double bound = 0.0;
  for (std::size_t m = 0; m < 4; ++m) {
    for (std::size_t n = 0; n < 4; ++n) {
      double s = 0.0;
      for (std::size_t c = 0; c < 3; ++c) s += q(m, c) * k(n, c);
      EXPECT_EQ(l.values(m, n), s);
      bound = std::max(bound, std::fabs(s));
    }
  }
  EXPECT_EQ(l.bound, bound);
}

TEST(ComputeLogits, ShapeMismatch) { EXPECT_THROW(compute_logits(Matrix(2, 3), Matrix(3, 3)), Error); }

TEST(Softmax, KnownValues) {
  const auto sym = normalize(std::vector<double>{0, 0}, NormalizerConfig::softmax(1.0));
  EXPECT_EQ(values(sym), (std::vector<double>{0.5, 0.5}));

  const auto w = normalize(std::vector<double>{1, 0}, NormalizerConfig::softmax(1.0));
  EXPECT_NEAR(w[0], 0.73106, 1e-5);
  EXPECT_NEAR(w[1], 0.26894, 1e-5);

  for (double c : {-300.0, 0.0, 7.5, 900.0}) {
    for (double t : {0.01, 1.0, 50.0}) {
      const auto u = normalize(std::vector<double>(4, c), NormalizerConfig::softmax(t));
      for (double x : u.values()) EXPECT_EQ(x, 0.25);
    }
  }
}

TEST(Softmax, FourLogitExampleSitsInsideWeightBounds) {
  const auto w = normalize(std::vector<double>{1, -1, 0, 0}, NormalizerConfig::softmax(1.0));
  const double expected[] = {0.5345, 0.0723, 0.1966, 0.1966};
  const auto b = weight_bounds(1.0, NormalizerConfig::softmax(1.0), 4);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(w[i], expected[i], 1e-4);
    EXPECT_GE(w[i], b.low);
    EXPECT_LE(w[i], b.high);
  }
}

TEST(Softmax, SimplexAndShiftInvariance) {
  std::mt19937_64 gen(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto l = uniform_logits(1 + gen() % 300, 5.0, gen);
    const auto cfg = NormalizerConfig::softmax(0.05 + (gen() % 100) / 10.0);
    const auto w = normalize(l, cfg);
    const double sum = std::accumulate(w.values().begin(), w.values().end(), 0.0);
    EXPECT_NEAR(sum, 1.0, 1e-12);
    auto shifted = l;
    for (double& x : shifted) x += 3.25;
    const auto w2 = normalize(shifted, cfg);
    for (std::size_t i = 0; i < l.size(); ++i) {
      EXPECT_GE(w[i], 0.0);
      EXPECT_NEAR(w2[i], w[i], 1e-12);
    }
  }
}

TEST(Softmax, LowTemperatureDoesNotOverflow) {
  const auto w = normalize(std::vector<double>{1000.0, 999.0, -1000.0}, NormalizerConfig::softmax(1e-3));
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[2], 0.0);
}

TEST(WeightBounds, Examples) {
  const auto uniform = weight_bounds(0.0, NormalizerConfig::softmax(0.3), 8);
  EXPECT_DOUBLE_EQ(uniform.low, 1.0 / 8);
  EXPECT_DOUBLE_EQ(uniform.high, 1.0 / 8);

  const auto b = weight_bounds(1.0, NormalizerConfig::softmax(1.0), 4);
  EXPECT_NEAR(b.low, 0.033834, 1e-6);
  EXPECT_EQ(b.high, 1.0);
}

TEST(WeightBounds, SandwichExact) {
  std::mt19937_64 gen(5);
  for (double a : {0.5, 1.0, 2.0}) {
    for (double t : {0.1, 1.0, 8.0}) {
      for (std::size_t L : {4u, 64u, 1024u}) {
        const auto cfg = NormalizerConfig::softmax(t);
        const auto b = weight_bounds(a, cfg, L);
        std::size_t violations = 0;
        for (int draw = 0; draw < 200; ++draw) {
          const auto weights = normalize(uniform_logits(L, a, gen), cfg);
          for (double w : weights.values()) {
            violations += (w < b.low || w > b.high) ? 1 : 0;
          }
        }
        EXPECT_EQ(violations, 0u) << "a=" << a << " T=" << t << " L=" << L;
      }
    }
  }
}

TEST(WeightBounds, HighBoundVanishesWithL) {
  const auto cfg = NormalizerConfig::softmax(1.0);
  double prev = 2.0;
  for (std::size_t L = 32; L <= 16384; L *= 2) {
    const double high = weight_bounds(1.0, cfg, L).high;
    EXPECT_LE(high, prev);
    prev = high;
  }
  EXPECT_NEAR(prev, std::exp(2.0) / 16384, 1e-15);
}

TEST(WeightBounds, GenericNormalizer) {
  const auto cfg = NormalizerConfig::generic("exp", {1.0});
  const auto b = weight_bounds(1.0, cfg, 4);
  // Grid endpoints hit +-a exactly, so the exp normalizer reproduces softmax at T=1.
  EXPECT_NEAR(b.c1, std::exp(-2.0), 1e-15);
  std::mt19937_64 gen(6);
  for (const auto& name : {"softplus", "sigmoid", "exp"}) {
    const auto g = NormalizerConfig::generic(name, {1.0});
    const auto gb = weight_bounds(2.0, g, 16);
    for (int d = 0; d < 100; ++d) {
      const auto weights = normalize(uniform_logits(16, 2.0, gen), g);
      for (double w : weights.values()) {
        EXPECT_GE(w, gb.low * (1 - 1e-12));
        EXPECT_LE(w, gb.high * (1 + 1e-12));
      }
    }
  }
}

TEST(WeightBounds, NonPositiveGenericFIsAContractError) {
  NormalizerRegistry::global().add("test_bad", {[](double l, std::span<const double>) { return l; },
                                                [](double, std::span<const double>) { return 1.0; }});
  const auto cfg = NormalizerConfig::generic("test_bad", {});
  try {
    normalize(std::vector<double>{-1.0, 2.0}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::contract);
  }
}

TEST(WeightVector, RejectsNonSimplex) {
  EXPECT_THROW(WeightVector({0.5, 0.6}), Error);
  EXPECT_THROW(WeightVector({1.5, -0.5}), Error);
  EXPECT_THROW(WeightVector(std::vector<double>{}), Error);
  EXPECT_NO_THROW(WeightVector({0.25, 0.75}));
}

TEST(LogitBoundDelta, GlobalAndPairwise) {
  const Matrix q(2, 2, {3, 4, 1, 0});
  const Matrix k(2, 2, {0, 2, 1, 1});
  const auto pair = logit_bound_delta(q, k, DeltaMode::pairwise);
  EXPECT_DOUBLE_EQ(pair[0], 10.0);
  EXPECT_DOUBLE_EQ(pair[1], 2.0);
  const auto glob = logit_bound_delta(q, k, DeltaMode::global);
  EXPECT_DOUBLE_EQ(glob[0], 10.0);
  EXPECT_DOUBLE_EQ(glob[1], 10.0);
}
