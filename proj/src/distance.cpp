#include "attnbound/distance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "attnbound/error.hpp"
#include "attnbound/kernels.hpp"
#include "attnbound/rng.hpp"

namespace attnbound {
namespace {

void check_shapes(const Matrix& x, const WeightVector& weights) {
  if (x.rows() != weights.size()) {
    fail(ErrorKind::dimension, "embeddings have " + std::to_string(x.rows()) + " rows but there are " +
                                   std::to_string(weights.size()) + " weights");
  }
}

double norm(std::span<const double> v) { return std::sqrt(kernels::squared_norm(v)); }

// d~ for a selection given as a membership mask; shared by the oracles so the
// enumeration does not rebuild SelectionSet objects.
double distance_for_mask(const Matrix& x, std::span<const double> alpha, std::span<const unsigned char> mask,
                         std::vector<double>& s) {
  std::fill(s.begin(), s.end(), 0.0);
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (mask[i]) kernels::axpy(alpha[i], x.row(i), s);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (!mask[i]) total += std::sqrt(kernels::scaled_squared_distance(alpha[i], x.row(i), s));
  }
  return total;
}

}  // namespace

SelectionSet::SelectionSet(std::vector<std::size_t> indices, std::size_t length, SelectionOrigin origin)
    : indices_(std::move(indices)), mask_(length, 0), length_(length), origin_(origin) {
  if (indices_.empty()) fail(ErrorKind::range, "selection must hold at least one index");
  std::sort(indices_.begin(), indices_.end());
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    if (indices_[i] >= length_) {
      fail(ErrorKind::range, "index " + std::to_string(indices_[i]) + " outside [0, " + std::to_string(length_) + ")");
    }
    if (i > 0 && indices_[i] == indices_[i - 1]) {
      fail(ErrorKind::range, "duplicate index " + std::to_string(indices_[i]));
    }
    mask_[indices_[i]] = 1;
  }
}

std::vector<std::size_t> SelectionSet::complement() const {
  std::vector<std::size_t> out;
  out.reserve(length_ - indices_.size());
  for (std::size_t i = 0; i < length_; ++i) {
    if (!mask_[i]) out.push_back(i);
  }
  return out;
}

std::string_view to_string(FormulaVariant v) noexcept {
  return v == FormulaVariant::as_printed ? "as-printed" : "derived";
}

std::string_view to_string(OracleMode m) noexcept { return m == OracleMode::exact ? "exact" : "monte-carlo"; }

SelectionSet select_top_n(const WeightVector& weights, std::size_t n) {
  if (n < 1 || n > weights.size()) {
    fail(ErrorKind::range, "top-N needs 1 <= N <= L, got N=" + std::to_string(n) + ", L=" + std::to_string(weights.size()));
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return weights[a] > weights[b] || (weights[a] == weights[b] && a < b);
                    });
  order.resize(n);
  return SelectionSet(std::move(order), weights.size(), SelectionOrigin::top_n);
}

std::vector<double> context_vector(const Matrix& x, const WeightVector& weights, const SelectionSet& sel) {
  check_shapes(x, weights);
  if (sel.universe() != weights.size()) fail(ErrorKind::dimension, "selection was built for a different L");
  std::vector<double> s(x.cols(), 0.0);
  for (std::size_t i : sel.indices()) kernels::axpy(weights[i], x.row(i), s);
  return s;
}

double representation_distance(const Matrix& x, const WeightVector& weights, const SelectionSet& sel) {
  const auto s = context_vector(x, weights, sel);
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!sel.contains(i)) total += std::sqrt(kernels::scaled_squared_distance(weights[i], x.row(i), s));
  }
  return total;
}

double fixed_set_bound(const Matrix& x, const WeightVector& weights, const SelectionSet& sel) {
  check_shapes(x, weights);
  const std::size_t L = weights.size();
  const std::size_t N = sel.size();
  if (N == L) return 0.0;

  double abar = 0.0;
  double max_selected_norm = 0.0;
  for (std::size_t j : sel.indices()) {
    abar += weights[j];
    max_selected_norm = std::max(max_selected_norm, norm(x.row(j)));
  }
  double d1_sq = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    if (sel.contains(i)) continue;
    for (std::size_t j : sel.indices()) d1_sq = std::max(d1_sq, kernels::squared_distance(x.row(i), x.row(j)));
  }
  const double bracket = abar * static_cast<double>(L - N) - (1.0 - abar);
  return (1.0 - abar) * std::sqrt(d1_sq) + max_selected_norm * bracket;
}

ClosedForm expected_distance_closed_form(const Matrix& x, const WeightVector& weights, std::size_t n,
                                         FormulaVariant variant) {
  check_shapes(x, weights);
  const std::size_t L = weights.size();
  if (n < 1 || n >= L) {
    fail(ErrorKind::range, "closed form needs 1 <= N < L, got N=" + std::to_string(n) + ", L=" + std::to_string(L));
  }
  const double c = static_cast<double>(n) / static_cast<double>(L - 1);
  const double keep = static_cast<double>(L - n) / static_cast<double>(L);
  const std::size_t d = x.cols();

  std::vector<double> xbar(d, 0.0);
  for (std::size_t i = 0; i < L; ++i) kernels::axpy(weights[i], x.row(i), xbar);

  // sum_j alpha_j^2 ||x_j||^2 over all j; per-i terms subtract their own share.
  std::vector<double> weighted_sq(L);
  double weighted_sq_total = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    weighted_sq[i] = weights[i] * weights[i] * kernels::squared_norm(x.row(i));
    weighted_sq_total += weighted_sq[i];
  }

  ClosedForm out;
  std::vector<double> term(d);
  double sum = 0.0;
  double eps_sum = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    const auto xi = x.row(i);
    const double a = weights[i];
    if (variant == FormulaVariant::as_printed) {
      for (std::size_t t = 0; t < d; ++t) term[t] = (a + c) * xi[t] - xbar[t];
    } else {
      for (std::size_t t = 0; t < d; ++t) term[t] = a * (1.0 + c) * xi[t] - c * xbar[t];
    }
    sum += norm(term);

    // alpha_i x_i - c * sum_{j != i} alpha_j x_j, with the inner sum = xbar - alpha_i x_i.
    for (std::size_t t = 0; t < d; ++t) term[t] = a * xi[t] - c * (xbar[t] - a * xi[t]);
    const double denom = norm(term);
    if (denom == 0.0) {
      ++out.degenerate_terms;
      continue;
    }
    eps_sum += c * std::max(0.0, weighted_sq_total - weighted_sq[i]) / denom;
  }
  out.e_closed = keep * sum;
  out.eps_bound = 0.5 * (1.0 - static_cast<double>(n) / static_cast<double>(L)) * eps_sum;
  return out;
}

double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

OracleEstimate expected_distance_oracle(const Matrix& x, const WeightVector& weights, std::size_t n, OracleMode mode,
                                        std::size_t samples, std::uint64_t seed) {
  check_shapes(x, weights);
  const std::size_t L = weights.size();
  if (n < 1 || n > L) fail(ErrorKind::range, "oracle needs 1 <= N <= L");
  OracleEstimate out;
  out.mode = mode;
  if (n == L) return out;

  std::vector<double> s(x.cols());
  std::vector<unsigned char> mask(L, 0);
  const auto alpha = weights.values();

  if (mode == OracleMode::exact) {
    const double count = binomial(L, n);
    if (count > kExactEnumerationCap) {
      fail(ErrorKind::capacity, "C(" + std::to_string(L) + ", " + std::to_string(n) + ") = " +
                                    std::to_string(count) + " subsets exceeds the exact cap; use monte_carlo");
    }
    // Lexicographic walk over index combinations.
    std::vector<std::size_t> comb(n);
    std::iota(comb.begin(), comb.end(), 0);
    double total = 0.0;
    std::size_t visited = 0;
    while (true) {
      std::fill(mask.begin(), mask.end(), 0);
      for (std::size_t i : comb) mask[i] = 1;
      total += distance_for_mask(x, alpha, mask, s);
      ++visited;
      std::size_t pos = n;
      while (pos > 0 && comb[pos - 1] == L - n + pos - 1) --pos;
      if (pos == 0) break;
      ++comb[pos - 1];
      for (std::size_t j = pos; j < n; ++j) comb[j] = comb[j - 1] + 1;
    }
    out.e = total / static_cast<double>(visited);
    out.evaluations = visited;
    return out;
  }

  if (samples < 1) fail(ErrorKind::range, "monte_carlo needs at least one sample");
  std::vector<std::size_t> pool(L);
  std::vector<double> values(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    auto rng = substream(seed, k);
    std::iota(pool.begin(), pool.end(), 0);
    std::fill(mask.begin(), mask.end(), 0);
    // Partial Fisher-Yates: the first n slots form a uniform n-subset.
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t pick = j + static_cast<std::size_t>(uniform_index(rng, L - j));
      std::swap(pool[j], pool[pick]);
      mask[pool[j]] = 1;
    }
    values[k] = distance_for_mask(x, alpha, mask, s);
  }
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(samples);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = samples > 1 ? std::sqrt(ss / static_cast<double>(samples - 1)) : 0.0;
  out.e = mean;
  out.stderr_ = sd / std::sqrt(static_cast<double>(samples));
  out.evaluations = samples;
  return out;
}

double small_n_approx(const Matrix& x, const WeightVector& weights) {
  check_shapes(x, weights);
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) total += weights[i] * norm(x.row(i));
  return total;
}

DistanceResult analyze_distance(const Matrix& x, const WeightVector& weights, std::size_t n,
                                const DistanceOptions& options) {
  check_shapes(x, weights);
  const std::size_t L = weights.size();
  DistanceResult r;
  r.seq_len = L;
  r.top_n = n;
  r.formula_variant = options.variant;
  r.oracle_mode = options.oracle_mode;

  const auto sel = select_top_n(weights, n);
  r.d_tilde = representation_distance(x, weights, sel);
  r.fixed_bound = fixed_set_bound(x, weights, sel);
  r.small_n_approx = small_n_approx(x, weights);

  double abar = 0.0;
  for (std::size_t j : sel.indices()) abar += weights[j];
  r.bound_bracket_nonnegative = abar * static_cast<double>(L - n) >= 1.0 - abar;

  if (n < L) {
    const auto other = options.variant == FormulaVariant::derived ? FormulaVariant::as_printed : FormulaVariant::derived;
    const auto main = expected_distance_closed_form(x, weights, n, options.variant);
    r.e_closed = main.e_closed;
    r.eps_bound = main.eps_bound;
    r.degenerate_terms = main.degenerate_terms;
    r.e_closed_alternate = expected_distance_closed_form(x, weights, n, other).e_closed;
    const auto oracle = expected_distance_oracle(x, weights, n, options.oracle_mode, options.samples, options.seed);
    r.e_oracle = oracle.e;
    r.oracle_stderr = oracle.stderr_;
  }
  return r;
}

}  // namespace attnbound
