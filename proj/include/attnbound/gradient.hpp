#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "attnbound/matrix.hpp"
#include "attnbound/normalization.hpp"

namespace attnbound {

struct JacobianResult {
  Matrix jacobian;                      // d alpha_i / d l_j
  double max_entry_norm = 0.0;          // max |J_ij|
  double spectral_norm_estimate = 0.0;  // power iteration
  double fro_norm = 0.0;
};

/// J = (diag(alpha) - alpha alpha^T) / T, with its entry, spectral and
/// Frobenius norms. The spectral estimate runs power iteration for at most
/// 200 steps or until the Rayleigh quotient moves by < 1e-12 relative.
JacobianResult softmax_jacobian(const WeightVector& weights, double temperature);

/// J * v without forming J.
std::vector<double> softmax_jvp(const WeightVector& weights, double temperature, std::span<const double> v);

/// min{ F'max (1/(L Fmin) + Fmax/(L^2 Fmin^2)), sqrt(2) } for a generic normalizer.
double general_jacobian_bound(double f_max, double fprime_max, double f_min, std::size_t length);

/// min{ 1/(4T), sqrt(2) }
double softmax_grad_bound(double temperature);

struct SensitivityResult {
  double temperature = 0.0;
  double epsilon = 0.0;
  double g = 0.0;  // max over probed directions of ||alpha(l + eps d) - alpha(l)|| / eps
  double g_swap = 0.0;  // the top-two swap direction alone (0 when L < 2)
  double analytic = 0.0;  // max ||J d|| over the same directions
  std::size_t directions_probed = 0;
  double theoretical_bound = 0.0;  // min{1/(4T), sqrt(2)}
};

/// Finite-difference probe of the softmax map along `num_directions` unit
/// directions drawn uniformly on the sphere from `seed`, plus the swap
/// direction (+2 on the runner-up logit, -1 on the top logit, normalized).
SensitivityResult fd_sensitivity(std::span<const double> logits, double temperature, double epsilon,
                                 std::size_t num_directions, std::uint64_t seed);

/// ||alpha(l + eps d) - alpha(l)|| / eps for one unit direction.
double fd_directional(std::span<const double> logits, double temperature, double epsilon, std::span<const double> direction);

struct SwapExample {
  double measured = 0.0;        // ||alpha(l1) - alpha(l2)||
  double reference = 0.0;       // sqrt(2) eps / T
  double first_order = 0.0;     // ||J(l1) (l1 - l2)||
  double logit_distance = 0.0;  // ||l1 - l2|| = sqrt(5) eps
};

/// l1 = (0, ..., 0, a, a + eps), l2 = (0, ..., 0, a + 2 eps, a): the two
/// largest logits trade places under an O(eps) perturbation. Needs L >= 2.
SwapExample swap_example(std::size_t length, double a, double epsilon, double temperature);

}  // namespace attnbound
