#include "attnbound/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "attnbound/error.hpp"
#include "attnbound/kernels.hpp"
#include "attnbound/rng.hpp"

namespace attnbound {
namespace {

void require_positive_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) fail(ErrorKind::range, "temperature must be positive");
}

double norm(std::span<const double> v) { return std::sqrt(kernels::squared_norm(v)); }

}  // namespace

JacobianResult softmax_jacobian(const WeightVector& weights, double temperature) {
  require_positive_temperature(temperature);
  const std::size_t L = weights.size();
  JacobianResult out;
  out.jacobian = Matrix(L, L);
  double fro = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const double delta = i == j ? 1.0 : 0.0;
      const double v = weights[i] * (delta - weights[j]) / temperature;
      out.jacobian(i, j) = v;
      fro += v * v;
      out.max_entry_norm = std::max(out.max_entry_norm, std::fabs(v));
    }
  }
  out.fro_norm = std::sqrt(fro);

  // J is symmetric positive semidefinite, so its spectral norm is the top
  // eigenvalue. The start vector is pseudo-random: the all-ones vector spans
  // the null space.
  std::vector<double> v(L), w(L);
  auto rng = SplitMix64(0x5eedULL);
  for (double& x : v) x = standard_normal(rng);
  double vn = norm(v);
  double rayleigh = 0.0;
  if (vn > 0.0) {
    for (double& x : v) x /= vn;
    for (int it = 0; it < 200; ++it) {
      for (std::size_t i = 0; i < L; ++i) w[i] = kernels::dot(out.jacobian.row(i), v);
      const double next = kernels::dot(v, w);
      const double wn = norm(w);
      if (wn == 0.0) {
        rayleigh = 0.0;
        break;
      }
      for (std::size_t i = 0; i < L; ++i) v[i] = w[i] / wn;
      const bool converged = std::fabs(next - rayleigh) <= 1e-12 * std::fabs(next);
      rayleigh = next;
      if (converged) break;
    }
  }
  // The Rayleigh quotient approaches lambda_max from below, and for a PSD
  // matrix lambda_max is at least the largest diagonal entry.
  out.spectral_norm_estimate = std::min(std::max(rayleigh, out.max_entry_norm), out.fro_norm);
  return out;
}

std::vector<double> softmax_jvp(const WeightVector& weights, double temperature, std::span<const double> v) {
  require_positive_temperature(temperature);
  if (v.size() != weights.size()) fail(ErrorKind::dimension, "direction length differs from L");
  const double mean = kernels::dot(weights.values(), v);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = weights[i] * (v[i] - mean) / temperature;
  return out;
}

double general_jacobian_bound(double f_max, double fprime_max, double f_min, std::size_t length) {
  if (!(f_min > 0.0)) fail(ErrorKind::contract, "min F must be positive");
  if (f_max < 0.0 || fprime_max < 0.0) fail(ErrorKind::contract, "max F and max |F'| must be non-negative");
  if (length == 0) fail(ErrorKind::range, "L must be at least 1");
  const double L = static_cast<double>(length);
  const double value = fprime_max * (1.0 / (L * f_min) + f_max / (L * L * f_min * f_min));
  return std::min(value, std::numbers::sqrt2);
}

double softmax_grad_bound(double temperature) {
  require_positive_temperature(temperature);
  return std::min(1.0 / (4.0 * temperature), std::numbers::sqrt2);
}

double fd_directional(std::span<const double> logits, double temperature, double epsilon,
                      std::span<const double> direction) {
  if (!(epsilon > 0.0)) fail(ErrorKind::range, "epsilon must be positive");
  if (direction.size() != logits.size()) fail(ErrorKind::dimension, "direction length differs from L");
  const auto cfg = NormalizerConfig::softmax(temperature);
  const auto base = normalize(logits, cfg);
  std::vector<double> moved(logits.begin(), logits.end());
  for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += epsilon * direction[i];
  const auto shifted = normalize(moved, cfg);
  return std::sqrt(kernels::squared_distance(shifted.values(), base.values())) / epsilon;
}

SensitivityResult fd_sensitivity(std::span<const double> logits, double temperature, double epsilon,
                                 std::size_t num_directions, std::uint64_t seed) {
  require_positive_temperature(temperature);
  if (!(epsilon > 0.0)) fail(ErrorKind::range, "epsilon must be positive");
  if (num_directions < 1) fail(ErrorKind::range, "need at least one probe direction");
  const std::size_t L = logits.size();
  const auto cfg = NormalizerConfig::softmax(temperature);
  const auto base = normalize(logits, cfg);

  SensitivityResult out;
  out.temperature = temperature;
  out.epsilon = epsilon;
  out.theoretical_bound = softmax_grad_bound(temperature);

  std::vector<double> dir(L), moved(L);
  auto probe = [&](std::span<const double> d) {
    for (std::size_t i = 0; i < L; ++i) moved[i] = logits[i] + epsilon * d[i];
    const auto shifted = normalize(moved, cfg);
    const double g = std::sqrt(kernels::squared_distance(shifted.values(), base.values())) / epsilon;
    out.g = std::max(out.g, g);
    out.analytic = std::max(out.analytic, norm(softmax_jvp(base, temperature, d)));
    ++out.directions_probed;
    return g;
  };

  for (std::size_t k = 0; k < num_directions; ++k) {
    auto rng = substream(seed, k);
    double n2 = 0.0;
    do {
      for (double& x : dir) x = standard_normal(rng);
      n2 = kernels::squared_norm(dir);
    } while (n2 == 0.0);
    const double n = std::sqrt(n2);
    for (double& x : dir) x /= n;
    probe(dir);
  }

  if (L >= 2) {
    std::size_t top = 0;
    for (std::size_t i = 1; i < L; ++i) {
      if (logits[i] > logits[top]) top = i;
    }
    std::size_t second = top == 0 ? 1 : 0;
    for (std::size_t i = 0; i < L; ++i) {
      if (i != top && logits[i] > logits[second]) second = i;
    }
    std::fill(dir.begin(), dir.end(), 0.0);
    dir[second] = 2.0 / std::sqrt(5.0);
    dir[top] = -1.0 / std::sqrt(5.0);
    out.g_swap = probe(dir);
  }
  return out;
}

SwapExample swap_example(std::size_t length, double a, double epsilon, double temperature) {
  require_positive_temperature(temperature);
  if (length < 2) fail(ErrorKind::range, "the swap construction needs L >= 2");
  if (!(epsilon > 0.0)) fail(ErrorKind::range, "epsilon must be positive");
  std::vector<double> l1(length, 0.0), l2(length, 0.0);
  l1[length - 2] = a;
  l1[length - 1] = a + epsilon;
  l2[length - 2] = a + 2.0 * epsilon;
  l2[length - 1] = a;

  const auto cfg = NormalizerConfig::softmax(temperature);
  const auto a1 = normalize(l1, cfg);
  const auto a2 = normalize(l2, cfg);
  std::vector<double> diff(length);
  for (std::size_t i = 0; i < length; ++i) diff[i] = l1[i] - l2[i];

  SwapExample ex;
  ex.measured = std::sqrt(kernels::squared_distance(a1.values(), a2.values()));
  ex.reference = std::numbers::sqrt2 * epsilon / temperature;
  ex.first_order = norm(softmax_jvp(a1, temperature, diff));
  ex.logit_distance = norm(diff);
  return ex;
}

}  // namespace attnbound
