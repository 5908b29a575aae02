#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "attnbound/matrix.hpp"

namespace attnbound {

/// A positive smooth scalar function F(l, theta) usable as a normalizer.
struct GenericFunction {
  std::function<double(double logit, std::span<const double> theta)> value;
  std::function<double(double logit, std::span<const double> theta)> derivative;
};

/// Process-wide registry of generic normalizers, keyed by the identifier the
/// CLI accepts after --normalizer. Built-ins:
///   exp       F = exp(l / theta0)            (softmax at T = theta0)
///   softplus  F = log(1 + exp(l / theta0))
///   sigmoid   F = 1 / (1 + exp(-l / theta0))
class NormalizerRegistry {
 public:
  static NormalizerRegistry& global();

  void add(const std::string& name, GenericFunction fn);
  bool contains(const std::string& name) const;
  /// Throws range error for unknown names.
  GenericFunction find(const std::string& name) const;
  std::vector<std::string> names() const;

 private:
  NormalizerRegistry();
  mutable std::mutex mutex_;
  std::map<std::string, GenericFunction> functions_;
};

enum class NormalizerKind { softmax, generic };

struct NormalizerConfig {
  NormalizerKind kind = NormalizerKind::softmax;
  double temperature = 1.0;
  std::string generic_fn;     // registry key, generic kind only
  std::vector<double> theta;  // F's parameters, generic kind only
  std::size_t grid_points = 4096;

  static NormalizerConfig softmax(double temperature);
  static NormalizerConfig generic(std::string name, std::vector<double> theta);

  /// Throws range error on T <= 0 or an unregistered generic function.
  void validate() const;
};

struct LogitMatrix {
  Matrix values;
  double bound = 0.0;  // a: smallest value with |l_mn| <= a
};

/// A row of attention weights: non-negative and summing to one.
class WeightVector {
 public:
  WeightVector() = default;
  /// Throws contract error if any weight is negative or the sum is off by more than `tolerance`.
  explicit WeightVector(std::vector<double> weights, double tolerance = 1e-12);

  static WeightVector uniform(std::size_t length);

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> values() const noexcept { return w_; }

 private:
  std::vector<double> w_;
};

struct WeightBounds {
  double low = 0.0;
  double high = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

/// values[m][n] = <q_m, k_n>.
LogitMatrix compute_logits(const Matrix& q, const Matrix& k);

/// Softmax with max subtraction, or F(l)/sum F(l) for a generic normalizer.
WeightVector normalize(std::span<const double> logits, const NormalizerConfig& cfg);

/// Weight sandwich for logits bounded by `a`:
///   softmax: low = exp(-2a/T)/L, high = min(1, exp(2a/T)/L)
///   generic: C1 = min F / max F and C2 = max F / min F over a grid on [-a, a].
WeightBounds weight_bounds(double a, const NormalizerConfig& cfg, std::size_t length);

enum class DeltaMode { global, pairwise };

/// Delta bounding the logits |q . k|. `global` gives one value repeated per row,
/// max_m ||q_m|| * max_n ||k_n||; `pairwise` gives ||q_m|| * max_n ||k_n||.
/// Both bound |l_mn| by Cauchy-Schwarz.
std::vector<double> logit_bound_delta(const Matrix& q, const Matrix& k, DeltaMode mode);

}  // namespace attnbound
