#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "attnbound/error.hpp"
#include "attnbound/gradient.hpp"
#include "attnbound/synthetic.hpp"

using namespace attnbound;

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(SoftmaxJacobian, UniformPair) {
  const auto j = softmax_jacobian(WeightVector({0.5, 0.5}), 1.0);
  EXPECT_DOUBLE_EQ(j.jacobian(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(j.jacobian(0, 1), -0.25);
  EXPECT_DOUBLE_EQ(j.max_entry_norm, 0.25);
  EXPECT_NEAR(j.spectral_norm_estimate, 0.5, 1e-9);
  EXPECT_NEAR(j.fro_norm, 0.5, 1e-15);
}

TEST(SoftmaxJacobian, OneHotIsZeroAndScalesWithT) {
  const auto z = softmax_jacobian(WeightVector({0.0, 1.0, 0.0}), 1.0);
  EXPECT_EQ(z.max_entry_norm, 0.0);
  EXPECT_EQ(z.spectral_norm_estimate, 0.0);

  const WeightVector w({0.2, 0.3, 0.5});
  const auto a = softmax_jacobian(w, 1.0);
  const auto b = softmax_jacobian(w, 0.25);
  for (std::size_t i = 0; i < 3; ++i) {
    double row = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_NEAR(b.jacobian(i, k), 4.0 * a.jacobian(i, k), 1e-15);
      row += a.jacobian(i, k);
    }
    EXPECT_NEAR(row, 0.0, 1e-15);
  }
  EXPECT_LE(a.max_entry_norm, 0.25);
}

TEST(SoftmaxJacobian, FiniteDifferenceMatchesJvp) {
  std::mt19937_64 gen(41);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> l(10);
    for (double& x : l) x = n01(gen);
    std::vector<double> d(10);
    for (double& x : d) x = n01(gen);
    const double dn = norm(d);
    for (double& x : d) x /= dn;
    const double T = 0.5 + trial * 0.1;
    const auto w = normalize(l, NormalizerConfig::softmax(T));
    const double analytic = norm(softmax_jvp(w, T, d));
    const double fd = fd_directional(l, T, 1e-6, d);
    EXPECT_LE(std::fabs(fd - analytic), 1e-4 * analytic);
  }
}

TEST(GradientBounds, Examples) {
  EXPECT_DOUBLE_EQ(softmax_grad_bound(1.0), 0.25);
  EXPECT_DOUBLE_EQ(softmax_grad_bound(0.01), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(general_jacobian_bound(1.0, 0.0, 1.0, 10), 0.0);
  EXPECT_DOUBLE_EQ(general_jacobian_bound(1.0, 1.0, 1.0, 1), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(general_jacobian_bound(1.0, 100.0, 1e-3, 2), std::sqrt(2.0));
  EXPECT_NEAR(general_jacobian_bound(1.0, 1.0, 1.0, 4), 0.25 + 1.0 / 16.0, 1e-15);
}

TEST(FdSensitivity, UniformPairAlongDifference) {
  const std::vector<double> l{0.0, 0.0};
  const std::vector<double> d{1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)};
  EXPECT_NEAR(fd_directional(l, 1.0, 1e-6, d), 0.5, 1e-6);
}

TEST(FdSensitivity, SaturatedLogitsAreFlat) {
  const std::vector<double> l{0.0, 0.0, 50.0};
  EXPECT_LT(fd_sensitivity(l, 1.0, 1e-6, 16, 1).g, 1e-6);
}

TEST(FdSensitivity, InverseTemperatureScaling) {
  const auto l = sample_near_tie_logits(64, 1.0, 0.0, 7);
  for (double T : {0.01, 0.05}) {
    const auto a = fd_sensitivity(l, T, 1e-7, 32, 9);
    const auto b = fd_sensitivity(l, 2.0 * T, 1e-7, 32, 9);
    EXPECT_NEAR(a.g / b.g, 2.0, 0.05) << "T=" << T;
    // The softmax Jacobian has spectral norm at most 1/(2T).
    EXPECT_LE(a.g, 0.5 / T * (1.0 + 1e-4));
    EXPECT_GE(a.g_swap, 0.0);
    EXPECT_EQ(a.directions_probed, 33u);
  }
  const auto flat = fd_sensitivity(l, 100.0, 0.1, 16, 3);
  EXPECT_LE(flat.g, flat.theoretical_bound * 1.01);
}

TEST(FdSensitivity, Deterministic) {
  const auto l = sample_logits(32, 1.0, 5);
  const auto a = fd_sensitivity(l, 0.3, 1e-3, 16, 11);
  const auto b = fd_sensitivity(l, 0.3, 1e-3, 16, 11);
  EXPECT_EQ(a.g, b.g);
  EXPECT_EQ(a.analytic, b.analytic);
}

TEST(SwapExample, MeasuredAgainstReference) {
  const auto s = swap_example(2, 0.0, 1e-4, 1.0);
  EXPECT_NEAR(s.logit_distance, std::sqrt(5.0) * 1e-4, 1e-15);
  EXPECT_NEAR(s.reference, std::sqrt(2.0) * 1e-4, 1e-18);
  // Both logit gaps are eps, so alpha moves by sqrt(2) * 3 eps / (4T) to first order.
  EXPECT_NEAR(s.measured / s.reference, 0.75, 1e-4);
  EXPECT_NEAR(s.first_order / s.reference, 0.75, 1e-4);
  EXPECT_THROW(swap_example(1, 0.0, 1e-4, 1.0), Error);
}
