#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "attnbound/distance.hpp"
#include "attnbound/matrix.hpp"
#include "attnbound/normalization.hpp"

namespace attnbound {

struct SphereConfig {
  double radius = 1.0;  // M
  double delta = 0.0;   // minimum pairwise separation

  /// M > 0 and 0 <= delta <= 2M.
  void validate() const;
};

/// Rescales every row to norm `radius`. Zero rows raise degenerate-embedding.
Matrix project_to_sphere(const Matrix& x, double radius);

/// min_{i != j} ||x_i - x_j||, exact O(L^2) scan. Needs L >= 2.
double min_pairwise_separation(const Matrix& x);

/// r = min over unselected i of ||s - alpha_i x_i||: the largest ball around
/// s that keeps every unselected scaled embedding outside or on its boundary.
double separation_radius(const Matrix& x, const WeightVector& weights, const SelectionSet& sel);

/// N_s = #{ i in I_N : ||alpha_i x_i - s|| <= r }.
std::size_t distinguishable_count(const Matrix& x, const WeightVector& weights, const SelectionSet& sel, double r);

/// How the j != k != i pair sum in xi_i^2 is counted: every ordered pair
/// (the literal reading) or each unordered pair once.
enum class PairSumReading { ordered, unordered };

/// xi_i^2 = M^2 sum_{j != i} alpha_j^2 + (M^2 - delta^2 / 2) sum_{j != k, both != i} alpha_j alpha_k,
/// all sums over the selection. One entry per selected index, in index order.
std::vector<double> xi_spread(const WeightVector& weights, const SelectionSet& sel, const SphereConfig& cfg,
                              PairSumReading reading = PairSumReading::ordered);

struct SeparabilityBounds {
  double lower_raw = 0.0;  // 1 - sum(xi) / (rN), may be negative
  double lower = 0.0;      // clamped to [0, 1]
  double upper = 0.0;      // (1/N) sum exp(-(r - xi_i)^2 / (16 M^2))
};

SeparabilityBounds separability_bounds(std::span<const double> xi, double r, std::size_t n, double radius);

struct GeometryOptions {
  double radius = 1.0;
  /// Separation used in xi; empirical minimum after projection when unset.
  std::optional<double> delta;
  /// Fixed tolerance radius; nearest-unselected rule when unset.
  std::optional<double> fixed_r;
  PairSumReading reading = PairSumReading::ordered;
};

struct GeometryResult {
  std::size_t seq_len = 0;
  std::size_t top_n = 0;
  double r = 0.0;
  bool r_from_rule = true;
  std::size_t n_s = 0;
  double ratio = 0.0;
  std::vector<double> xi;
  double lower_raw = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 0.0;
  double radius = 1.0;
  double delta = 0.0;
};

/// Projects x to the sphere, selects the top N and evaluates N_s/N together
/// with both separability bounds.
GeometryResult analyze_geometry(const Matrix& x, const WeightVector& weights, std::size_t n,
                                const GeometryOptions& options);

struct SeparabilityEstimate {
  std::size_t draws = 0;
  double mean_ratio = 0.0;
  double stderr_ = 0.0;
  double mean_lower = 0.0;  // clamped
  double mean_lower_raw = 0.0;
  double mean_upper = 0.0;

  /// mean_lower - k sigma <= mean_ratio <= mean_upper + k sigma
  bool within_bounds(double sigmas = 3.0) const noexcept;
};

/// Monte-Carlo E[N_s]/N over embedding draws with the weights and selection
/// held fixed. Draw k uses sample_embeddings(k); bounds are averaged over the
/// same draws because r follows each draw when no fixed r is given.
SeparabilityEstimate monte_carlo_separability(const std::function<Matrix(std::uint64_t)>& sample_embeddings,
                                              const WeightVector& weights, std::size_t n,
                                              const GeometryOptions& options, std::size_t draws);

}  // namespace attnbound
