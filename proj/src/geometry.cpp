#include "attnbound/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "attnbound/error.hpp"
#include "attnbound/kernels.hpp"

namespace attnbound {

void SphereConfig::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) fail(ErrorKind::range, "sphere radius must be positive");
  if (!(delta >= 0.0) || delta > 2.0 * radius) {
    fail(ErrorKind::range, "delta must lie in [0, 2M], got " + std::to_string(delta));
  }
}

Matrix project_to_sphere(const Matrix& x, double radius) {
  if (!(radius > 0.0)) fail(ErrorKind::range, "sphere radius must be positive");
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    const double n = std::sqrt(kernels::squared_norm(row));
    if (n == 0.0) fail(ErrorKind::degenerate_embedding, "row " + std::to_string(i) + " has zero norm");
    const double scale = radius / n;
    for (double& v : row) v *= scale;
  }
  return out;
}

double min_pairwise_separation(const Matrix& x) {
  if (x.rows() < 2) fail(ErrorKind::range, "pairwise separation needs at least two rows");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i + 1; j < x.rows(); ++j) best = std::min(best, kernels::squared_distance(x.row(i), x.row(j)));
  }
  return std::sqrt(best);
}

double separation_radius(const Matrix& x, const WeightVector& weights, const SelectionSet& sel) {
  if (sel.size() == weights.size()) fail(ErrorKind::no_complement, "every token is selected; r is undefined");
  const auto s = context_vector(x, weights, sel);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!sel.contains(i)) best = std::min(best, kernels::scaled_squared_distance(weights[i], x.row(i), s));
  }
  return std::sqrt(best);
}

std::size_t distinguishable_count(const Matrix& x, const WeightVector& weights, const SelectionSet& sel, double r) {
  if (!(r >= 0.0)) fail(ErrorKind::range, "tolerance radius must be non-negative");
  const auto s = context_vector(x, weights, sel);
  std::size_t count = 0;
  for (std::size_t i : sel.indices()) {
    if (std::sqrt(kernels::scaled_squared_distance(weights[i], x.row(i), s)) <= r) ++count;
  }
  return count;
}

std::vector<double> xi_spread(const WeightVector& weights, const SelectionSet& sel, const SphereConfig& cfg,
                              PairSumReading reading) {
  cfg.validate();
  if (sel.universe() != weights.size()) fail(ErrorKind::dimension, "selection was built for a different L");
  double total = 0.0;
  double total_sq = 0.0;
  for (std::size_t j : sel.indices()) {
    total += weights[j];
    total_sq += weights[j] * weights[j];
  }
  const double m2 = cfg.radius * cfg.radius;
  const double pair_coeff = m2 - 0.5 * cfg.delta * cfg.delta;

  std::vector<double> xi;
  xi.reserve(sel.size());
  for (std::size_t i : sel.indices()) {
    const double others = total - weights[i];
    const double others_sq = std::max(0.0, total_sq - weights[i] * weights[i]);
    // (sum a)^2 - sum a^2 counts each ordered pair j != k once.
    double pairs = std::max(0.0, others * others - others_sq);
    if (reading == PairSumReading::unordered) pairs *= 0.5;
    const double radicand = m2 * others_sq + pair_coeff * pairs;
    if (radicand < 0.0) {
      fail(ErrorKind::assumption_violation, "xi^2 is negative for index " + std::to_string(i) +
                                                "; delta^2 > 2M^2 is incompatible with the spread formula");
    }
    xi.push_back(std::sqrt(radicand));
  }
  return xi;
}

SeparabilityBounds separability_bounds(std::span<const double> xi, double r, std::size_t n, double radius) {
  if (!(r > 0.0)) fail(ErrorKind::range, "separability bounds need r > 0");
  if (n == 0 || xi.size() != n) fail(ErrorKind::dimension, "need one xi per selected token");
  if (!(radius > 0.0)) fail(ErrorKind::range, "sphere radius must be positive");
  const double nd = static_cast<double>(n);
  const double spread = std::accumulate(xi.begin(), xi.end(), 0.0);
  double upper = 0.0;
  for (double x : xi) upper += std::exp(-(r - x) * (r - x) / (16.0 * radius * radius));

  SeparabilityBounds b;
  b.lower_raw = 1.0 - spread / (r * nd);
  b.lower = std::clamp(b.lower_raw, 0.0, 1.0);
  b.upper = upper / nd;
  return b;
}

GeometryResult analyze_geometry(const Matrix& x, const WeightVector& weights, std::size_t n,
                                const GeometryOptions& options) {
  if (x.rows() != weights.size()) fail(ErrorKind::dimension, "embeddings and weights disagree on L");
  const Matrix projected = project_to_sphere(x, options.radius);
  const auto sel = select_top_n(weights, n);

  GeometryResult g;
  g.seq_len = weights.size();
  g.top_n = n;
  g.radius = options.radius;
  g.delta = options.delta ? *options.delta : min_pairwise_separation(projected);
  g.r_from_rule = !options.fixed_r.has_value();
  g.r = options.fixed_r ? *options.fixed_r : separation_radius(projected, weights, sel);
  g.n_s = distinguishable_count(projected, weights, sel, g.r);
  g.ratio = static_cast<double>(g.n_s) / static_cast<double>(n);
  g.xi = xi_spread(weights, sel, SphereConfig{options.radius, g.delta}, options.reading);
  if (g.r > 0.0) {
    const auto b = separability_bounds(g.xi, g.r, n, options.radius);
    g.lower_raw = b.lower_raw;
    g.lower_bound = b.lower;
    g.upper_bound = b.upper;
  } else {
    // A zero radius admits no bound; report the trivial interval.
    g.lower_raw = -std::numeric_limits<double>::infinity();
    g.lower_bound = 0.0;
    g.upper_bound = 1.0;
  }
  return g;
}

bool SeparabilityEstimate::within_bounds(double sigmas) const noexcept {
  return mean_ratio >= mean_lower - sigmas * stderr_ && mean_ratio <= mean_upper + sigmas * stderr_;
}

SeparabilityEstimate monte_carlo_separability(const std::function<Matrix(std::uint64_t)>& sample_embeddings,
                                              const WeightVector& weights, std::size_t n,
                                              const GeometryOptions& options, std::size_t draws) {
  if (draws < 2) fail(ErrorKind::range, "Monte-Carlo separability needs at least two draws");
  std::vector<double> ratios(draws);
  SeparabilityEstimate est;
  est.draws = draws;
  for (std::size_t k = 0; k < draws; ++k) {
    const auto g = analyze_geometry(sample_embeddings(k), weights, n, options);
    ratios[k] = g.ratio;
    est.mean_lower += g.lower_bound;
    est.mean_lower_raw += g.lower_raw;
    est.mean_upper += g.upper_bound;
  }
  const double dd = static_cast<double>(draws);
  est.mean_ratio = std::accumulate(ratios.begin(), ratios.end(), 0.0) / dd;
  double ss = 0.0;
  for (double v : ratios) ss += (v - est.mean_ratio) * (v - est.mean_ratio);
  est.stderr_ = std::sqrt(ss / (dd - 1.0)) / std::sqrt(dd);
  est.mean_lower /= dd;
  est.mean_lower_raw /= dd;
  est.mean_upper /= dd;
  return est;
}

}  // namespace attnbound
