#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "attnbound/matrix.hpp"
#include "attnbound/normalization.hpp"

namespace attnbound {

enum class SelectionOrigin { top_n, random, explicit_set };

/// Sorted, duplicate-free token indices I_N.
class SelectionSet {
 public:
  /// Throws range error if empty, out of [0, length), or duplicated.
  SelectionSet(std::vector<std::size_t> indices, std::size_t length, SelectionOrigin origin = SelectionOrigin::explicit_set);

  std::size_t size() const noexcept { return indices_.size(); }
  std::size_t universe() const noexcept { return length_; }
  SelectionOrigin origin() const noexcept { return origin_; }
  const std::vector<std::size_t>& indices() const noexcept { return indices_; }
  bool contains(std::size_t i) const noexcept { return mask_[i] != 0; }
  /// Indices not in the set, ascending.
  std::vector<std::size_t> complement() const;

 private:
  std::vector<std::size_t> indices_;
  std::vector<unsigned char> mask_;
  std::size_t length_;
  SelectionOrigin origin_;
};

enum class FormulaVariant { as_printed, derived };
enum class OracleMode { exact, monte_carlo };

std::string_view to_string(FormulaVariant v) noexcept;
std::string_view to_string(OracleMode m) noexcept;

/// N largest weights, ties to the lower index.
SelectionSet select_top_n(const WeightVector& weights, std::size_t n);

/// s = sum_{i in I_N} alpha_i x_i
std::vector<double> context_vector(const Matrix& x, const WeightVector& weights, const SelectionSet& sel);

/// d~ = sum_{i not in I_N} ||alpha_i x_i - s||_2
double representation_distance(const Matrix& x, const WeightVector& weights, const SelectionSet& sel);

/// Fixed-set upper bound on d~; zero when the selection covers every token.
double fixed_set_bound(const Matrix& x, const WeightVector& weights, const SelectionSet& sel);

struct ClosedForm {
  double e_closed = 0.0;
  double eps_bound = 0.0;
  std::size_t degenerate_terms = 0;  // eps terms skipped for a zero denominator
};

/// Closed-form expectation of d~ under a uniformly random N-subset.
///   as_printed: ((L-N)/L) sum_i ||(alpha_i + N/(L-1)) x_i - xbar||
///   derived:    ((L-N)/L) sum_i ||alpha_i (1 + N/(L-1)) x_i - (N/(L-1)) xbar||
/// with xbar = sum_i alpha_i x_i. eps_bound is the residual bound evaluated
/// term by term, independent of the variant. Requires 1 <= N < L.
ClosedForm expected_distance_closed_form(const Matrix& x, const WeightVector& weights, std::size_t n,
                                         FormulaVariant variant);

struct OracleEstimate {
  double e = 0.0;
  double stderr_ = 0.0;
  OracleMode mode = OracleMode::exact;
  std::size_t evaluations = 0;
};

inline constexpr double kExactEnumerationCap = 2.0e6;

/// binom(n, k) in floating point.
double binomial(std::size_t n, std::size_t k);

/// E over uniformly random N-subsets, by full enumeration (C(L,N) <= 2e6,
/// else capacity error) or by Monte Carlo with per-sample substreams of `seed`.
OracleEstimate expected_distance_oracle(const Matrix& x, const WeightVector& weights, std::size_t n,
                                        OracleMode mode, std::size_t samples, std::uint64_t seed);

/// sum_i ||alpha_i x_i||_2, the small-N approximation of E.
double small_n_approx(const Matrix& x, const WeightVector& weights);

struct DistanceResult {
  std::size_t seq_len = 0;
  std::size_t top_n = 0;
  double d_tilde = 0.0;
  double fixed_bound = 0.0;
  double e_closed = 0.0;           // selected variant
  double e_closed_alternate = 0.0;  // the other variant, for side-by-side reporting
  FormulaVariant formula_variant = FormulaVariant::derived;
  double eps_bound = 0.0;
  std::size_t degenerate_terms = 0;
  double e_oracle = 0.0;
  OracleMode oracle_mode = OracleMode::exact;
  double oracle_stderr = 0.0;
  double small_n_approx = 0.0;
  /// Whether abar_N (L - N) >= 1 - abar_N, the regime where the fixed bound's
  /// second bracket is non-negative.
  bool bound_bracket_nonnegative = true;
};

struct DistanceOptions {
  FormulaVariant variant = FormulaVariant::derived;
  OracleMode oracle_mode = OracleMode::monte_carlo;
  std::size_t samples = 2000;
  std::uint64_t seed = 0;
};

/// Everything above for one (X, alpha, N): top-N selection, d~, the fixed
/// bound, both closed forms, eps and the oracle. N = L gives all zeros.
DistanceResult analyze_distance(const Matrix& x, const WeightVector& weights, std::size_t n,
                                const DistanceOptions& options);

}  // namespace attnbound
