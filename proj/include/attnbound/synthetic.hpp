#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "attnbound/matrix.hpp"

namespace attnbound {

struct SyntheticConfig {
  std::size_t seq_len = 64;  // L
  std::size_t dim = 16;      // d
  double radius = 1.0;       // M
  double delta_min = 0.0;
  double logit_bound = 1.0;  // a
  // When positive, logits follow the near-tie model below instead of plain
  // uniform draws.
  double tie_gap = 0.0;
  std::uint64_t seed = 0;
  std::size_t max_retries = 1000;  // per row

  /// L >= 1, d >= 2, M > 0, 0 <= delta_min < 2M, a >= 0, tie_gap >= 0.
  void validate() const;
};

/// Reads a JSON object with keys L, d, M, delta_min, a, seed, max_retries
/// tie_gap (all optional, defaults as above). Unknown keys are ignored so the same
/// file can carry experiment settings.
SyntheticConfig load_synthetic_config(const std::filesystem::path& path);

/// L rows uniform on the radius-M sphere in R^d (normalized isotropic
/// Gaussians). A candidate closer than delta_min to an accepted row is
/// redrawn, at most max_retries times per row, after which a packing error
/// reports how many rows were placed.
Matrix sample_sphere(const SyntheticConfig& cfg);

/// L logits i.i.d. uniform on [-a, a].
std::vector<double> sample_logits(std::size_t length, double a, std::uint64_t seed);

/// Two leading logits a and a - gap*u (u uniform on [0,1)) at random
/// positions, the rest uniform on [-a, 0]. This is the regime where the
/// softmax Jacobian norm approaches its 1/T scaling. Requires L >= 2.
std::vector<double> sample_near_tie_logits(std::size_t length, double a, double gap, std::uint64_t seed);

/// sample_logits or sample_near_tie_logits according to cfg.tie_gap.
std::vector<double> sample_config_logits(const SyntheticConfig& cfg, std::size_t length, std::uint64_t seed);

}  // namespace attnbound
