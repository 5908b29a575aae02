#include "attnbound/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "attnbound/error.hpp"
#include "attnbound/kernels.hpp"

namespace attnbound {
namespace {

double scale_of(std::span<const double> theta) { return theta.empty() ? 1.0 : theta[0]; }

}  // namespace

NormalizerRegistry::NormalizerRegistry() {
  functions_["exp"] = {
      [](double l, std::span<const double> th) { return std::exp(l / scale_of(th)); },
      [](double l, std::span<const double> th) { return std::exp(l / scale_of(th)) / scale_of(th); },
  };
  functions_["softplus"] = {
      [](double l, std::span<const double> th) {
        const double x = l / scale_of(th);
        return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      },
      [](double l, std::span<const double> th) {
        return 1.0 / (1.0 + std::exp(-l / scale_of(th))) / scale_of(th);
      },
  };
  functions_["sigmoid"] = {
      [](double l, std::span<const double> th) { return 1.0 / (1.0 + std::exp(-l / scale_of(th))); },
      [](double l, std::span<const double> th) {
        const double s = 1.0 / (1.0 + std::exp(-l / scale_of(th)));
        return s * (1.0 - s) / scale_of(th);
      },
  };
}

NormalizerRegistry& NormalizerRegistry::global() {
  static NormalizerRegistry registry;
  return registry;
}

void NormalizerRegistry::add(const std::string& name, GenericFunction fn) {
  std::lock_guard lock(mutex_);
  functions_[name] = std::move(fn);
}

bool NormalizerRegistry::contains(const std::string& name) const {
  std::lock_guard lock(mutex_);
  return functions_.count(name) != 0;
}

GenericFunction NormalizerRegistry::find(const std::string& name) const {
  std::lock_guard lock(mutex_);
  auto it = functions_.find(name);
  if (it == functions_.end()) fail(ErrorKind::range, "unknown normalizer '" + name + "'");
  return it->second;
}

std::vector<std::string> NormalizerRegistry::names() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, fn] : functions_) out.push_back(name);
  return out;
}

NormalizerConfig NormalizerConfig::softmax(double temperature) {
  NormalizerConfig cfg;
  cfg.temperature = temperature;
  return cfg;
}

NormalizerConfig NormalizerConfig::generic(std::string name, std::vector<double> theta) {
  NormalizerConfig cfg;
  cfg.kind = NormalizerKind::generic;
  cfg.generic_fn = std::move(name);
  cfg.theta = std::move(theta);
  return cfg;
}

void NormalizerConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) fail(ErrorKind::range, "temperature must be positive");
  if (kind == NormalizerKind::generic && !NormalizerRegistry::global().contains(generic_fn)) {
    fail(ErrorKind::range, "unknown normalizer '" + generic_fn + "'");
  }
  if (grid_points < 2) fail(ErrorKind::range, "grid_points must be at least 2");
}

WeightVector::WeightVector(std::vector<double> weights, double tolerance) : w_(std::move(weights)) {
  if (w_.empty()) fail(ErrorKind::contract, "weight vector is empty");
  double sum = 0.0;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    if (!(w_[i] >= 0.0) || !std::isfinite(w_[i])) {
      fail(ErrorKind::contract, "weight " + std::to_string(i) + " is negative or not finite");
    }
    sum += w_[i];
  }
  if (std::fabs(sum - 1.0) > tolerance) {
    fail(ErrorKind::contract, "weights sum to " + std::to_string(sum) + ", not 1");
  }
}

WeightVector WeightVector::uniform(std::size_t length) {
  if (length == 0) fail(ErrorKind::range, "uniform weights need L >= 1");
  return WeightVector(std::vector<double>(length, 1.0 / static_cast<double>(length)));
}

LogitMatrix compute_logits(const Matrix& q, const Matrix& k) {
  if (q.rows() != k.rows() || q.cols() != k.cols()) {
    fail(ErrorKind::dimension, "Q is " + std::to_string(q.rows()) + "x" + std::to_string(q.cols()) + " but K is " +
                                   std::to_string(k.rows()) + "x" + std::to_string(k.cols()));
  }
  const std::size_t L = q.rows();
  LogitMatrix out{Matrix(L, L), 0.0};
  for (std::size_t m = 0; m < L; ++m) {
    for (std::size_t n = 0; n < L; ++n) out.values(m, n) = kernels::dot(q.row(m), k.row(n));
    out.bound = std::max(out.bound, kernels::max_abs(out.values.row(m)));
  }
  return out;
}

WeightVector normalize(std::span<const double> logits, const NormalizerConfig& cfg) {
  cfg.validate();
  if (logits.empty()) fail(ErrorKind::range, "cannot normalize an empty logit vector");
  for (double l : logits) {
    if (!std::isfinite(l)) fail(ErrorKind::data, "logits must be finite");
  }

  std::vector<double> w(logits.size());
  if (cfg.kind == NormalizerKind::softmax) {
    const double peak = *std::max_element(logits.begin(), logits.end());
    for (std::size_t i = 0; i < logits.size(); ++i) w[i] = std::exp((logits[i] - peak) / cfg.temperature);
  } else {
    const auto fn = NormalizerRegistry::global().find(cfg.generic_fn);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      w[i] = fn.value(logits[i], cfg.theta);
      if (!(w[i] > 0.0) || !std::isfinite(w[i])) {
        fail(ErrorKind::contract, "normalizer '" + cfg.generic_fn + "' returned " + std::to_string(w[i]) +
                                      " at logit " + std::to_string(logits[i]));
      }
    }
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return WeightVector(std::move(w));
}

WeightBounds weight_bounds(double a, const NormalizerConfig& cfg, std::size_t length) {
  cfg.validate();
  if (!(a >= 0.0) || !std::isfinite(a)) fail(ErrorKind::range, "logit bound a must be non-negative");
  if (length == 0) fail(ErrorKind::range, "L must be at least 1");
  const double L = static_cast<double>(length);

  WeightBounds b;
  if (cfg.kind == NormalizerKind::softmax) {
    b.c1 = std::exp(-2.0 * a / cfg.temperature);
    b.c2 = std::exp(2.0 * a / cfg.temperature);
  } else {
    const auto fn = NormalizerRegistry::global().find(cfg.generic_fn);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t g = 0; g < cfg.grid_points; ++g) {
      const double t = static_cast<double>(g) / static_cast<double>(cfg.grid_points - 1);
      const double f = fn.value(-a + 2.0 * a * t, cfg.theta);
      if (!(f > 0.0) || !std::isfinite(f)) fail(ErrorKind::contract, "normalizer is not positive on [-a, a]");
      lo = std::min(lo, f);
      hi = std::max(hi, f);
    }
    b.c1 = lo / hi;
    b.c2 = hi / lo;
  }
  b.low = std::min(b.c1 / L, 1.0 / L);
  b.high = std::max(std::min(1.0, b.c2 / L), 1.0 / L);
  return b;
}

std::vector<double> logit_bound_delta(const Matrix& q, const Matrix& k, DeltaMode mode) {
  if (q.cols() != k.cols()) fail(ErrorKind::dimension, "Q and K disagree on head dimension");
  double k_max = 0.0;
  for (std::size_t n = 0; n < k.rows(); ++n) k_max = std::max(k_max, std::sqrt(kernels::squared_norm(k.row(n))));
  std::vector<double> out(q.rows());
  for (std::size_t m = 0; m < q.rows(); ++m) out[m] = std::sqrt(kernels::squared_norm(q.row(m))) * k_max;
  if (mode == DeltaMode::global && !out.empty()) {
    const double g = *std::max_element(out.begin(), out.end());
    std::fill(out.begin(), out.end(), g);
  }
  return out;
}

}  // namespace attnbound
