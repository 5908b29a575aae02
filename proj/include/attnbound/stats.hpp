#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace attnbound {

struct KsResult {
  double d = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

/// Kolmogorov survival function Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_sf(double lambda);

/// Two-sample Kolmogorov-Smirnov test. D comes from an exact merged sweep
/// over the sorted samples; the p-value is asymptotic with
/// lambda = (sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) D, ne = n1 n2 / (n1 + n2).
KsResult ks_two_sample(std::span<const double> s1, std::span<const double> s2);

struct CriticalNResult {
  std::optional<std::size_t> n_crit;
  std::vector<std::size_t> tested_grid;
  std::vector<double> p_per_n;
  std::vector<double> d_per_n;
  double alpha = 0.01;
};

using SamplesByN = std::map<std::size_t, std::vector<double>>;

/// Smallest N in `grid` whose empirical and expected samples are not
/// rejected as different at level alpha (p >= alpha). Every grid point needs
/// at least 8 samples on both sides.
CriticalNResult critical_top_n(const SamplesByN& empirical, const SamplesByN& expected,
                               std::span<const std::size_t> grid, double alpha);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Quartiles by linear interpolation between order statistics.
Summary summarize(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

/// Least-squares slope of y on x.
double linear_slope(std::span<const double> x, std::span<const double> y);

}  // namespace attnbound
