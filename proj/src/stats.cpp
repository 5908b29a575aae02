#include "attnbound/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "attnbound/error.hpp"

namespace attnbound {

double kolmogorov_sf(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  // The alternating series converges slowly for small lambda, where the
  // Jacobi-theta form 1 - sqrt(2 pi)/lambda sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))
  // converges fast. Both express the same function.
  if (lambda < 1.18) {
    const double c = -std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int k = 1; k < 100; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(c * odd * odd);
      sum += term;
      if (term < 1e-10 * sum || term == 0.0) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-10) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> s1, std::span<const double> s2) {
  if (s1.empty() || s2.empty()) fail(ErrorKind::range, "KS test needs two non-empty samples");
  std::vector<double> a(s1.begin(), s1.end()), b(s2.begin(), s2.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());

  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    // Step over every copy of x in both samples before comparing the CDFs.
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
  }

  KsResult r;
  r.d = d;
  r.n1 = a.size();
  r.n2 = b.size();
  const double ne = n1 * n2 / (n1 + n2);
  const double root = std::sqrt(ne);
  r.p_value = kolmogorov_sf((root + 0.12 + 0.11 / root) * d);
  return r;
}

CriticalNResult critical_top_n(const SamplesByN& empirical, const SamplesByN& expected,
                               std::span<const std::size_t> grid, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::range, "alpha must lie in (0, 1)");
  if (grid.empty()) fail(ErrorKind::input, "N grid is empty");
  CriticalNResult out;
  out.alpha = alpha;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const std::size_t n = grid[k];
    if (k > 0 && n <= grid[k - 1]) fail(ErrorKind::input, "N grid must be strictly ascending");
    const auto e = empirical.find(n);
    const auto x = expected.find(n);
    if (e == empirical.end() || x == expected.end() || e->second.size() < 8 || x->second.size() < 8) {
      fail(ErrorKind::input, "fewer than 8 samples on one side for N=" + std::to_string(n));
    }
    const auto ks = ks_two_sample(e->second, x->second);
    out.tested_grid.push_back(n);
    out.p_per_n.push_back(ks.p_value);
    out.d_per_n.push_back(ks.d);
    if (!out.n_crit && ks.p_value >= alpha) out.n_crit = n;
  }
  return out;
}

namespace {

double quantile_sorted(const std::vector<double>& v, double q) {
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + (v[hi] - v[lo]) * frac;
}

}  // namespace

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.median = quantile_sorted(v, 0.5);
  s.q1 = quantile_sorted(v, 0.25);
  s.q3 = quantile_sorted(v, 0.75);
  s.min = v.front();
  s.max = v.back();
  return s;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorKind::range, "Pearson correlation needs two equal series of length >= 2");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double linear_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorKind::range, "slope needs two equal series of length >= 2");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) fail(ErrorKind::range, "slope is undefined for constant x");
  return sxy / sxx;
}

}  // namespace attnbound
