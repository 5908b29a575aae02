#include "attnbound/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "attnbound/error.hpp"
#include "attnbound/kernels.hpp"
#include "attnbound/rng.hpp"
#include "json.hpp"

namespace attnbound {

void SyntheticConfig::validate() const {
  if (seq_len < 1) fail(ErrorKind::range, "synthetic L must be at least 1");
  if (dim < 2) fail(ErrorKind::range, "synthetic d must be at least 2");
  if (!(radius > 0.0) || !std::isfinite(radius)) fail(ErrorKind::range, "synthetic M must be positive");
  if (!(delta_min >= 0.0) || !(delta_min < 2.0 * radius)) fail(ErrorKind::range, "delta_min must lie in [0, 2M)");
  if (!(logit_bound >= 0.0) || !std::isfinite(logit_bound)) fail(ErrorKind::range, "logit bound a must be non-negative");
  if (!(tie_gap >= 0.0) || !std::isfinite(tie_gap)) fail(ErrorKind::range, "tie_gap must be non-negative");
}

SyntheticConfig load_synthetic_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open synthetic config '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::input, path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::input, "synthetic config must be a JSON object");
  SyntheticConfig cfg;
  try {
    cfg.seq_len = doc.value("L", cfg.seq_len);
    cfg.dim = doc.value("d", cfg.dim);
    cfg.radius = doc.value("M", cfg.radius);
    cfg.delta_min = doc.value("delta_min", cfg.delta_min);
    cfg.logit_bound = doc.value("a", cfg.logit_bound);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.max_retries = doc.value("max_retries", cfg.max_retries);
    cfg.tie_gap = doc.value("tie_gap", cfg.tie_gap);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::input, "synthetic config field has the wrong type: " + std::string(e.what()));
  }
  cfg.validate();
  return cfg;
}

Matrix sample_sphere(const SyntheticConfig& cfg) {
  cfg.validate();
  Matrix out(cfg.seq_len, cfg.dim);
  SplitMix64 rng(substream_seed(cfg.seed, 0));
  const double min_sq = cfg.delta_min * cfg.delta_min;
  std::vector<double> candidate(cfg.dim);

  for (std::size_t row = 0; row < cfg.seq_len; ++row) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt <= cfg.max_retries && !placed; ++attempt) {
      double n2 = 0.0;
      do {
        for (double& x : candidate) x = standard_normal(rng);
        n2 = kernels::squared_norm(candidate);
      } while (n2 == 0.0);
      const double scale = cfg.radius / std::sqrt(n2);
      for (double& x : candidate) x *= scale;

      placed = true;
      if (min_sq > 0.0) {
        for (std::size_t prev = 0; prev < row; ++prev) {
          if (kernels::squared_distance(candidate, out.row(prev)) < min_sq) {
            placed = false;
            break;
          }
        }
      }
    }
    if (!placed) {
      fail(ErrorKind::packing, "placed " + std::to_string(row) + " of " + std::to_string(cfg.seq_len) +
                                   " rows with separation " + std::to_string(cfg.delta_min) + " in d=" +
                                   std::to_string(cfg.dim) + " before exhausting retries");
    }
    std::copy(candidate.begin(), candidate.end(), out.row(row).begin());
  }
  return out;
}

std::vector<double> sample_logits(std::size_t length, double a, std::uint64_t seed) {
  if (!(a >= 0.0) || !std::isfinite(a)) fail(ErrorKind::range, "logit bound a must be non-negative");
  SplitMix64 rng(substream_seed(seed, 1));
  std::vector<double> out(length);
  for (double& l : out) l = std::clamp(-a + 2.0 * a * uniform01(rng), -a, a);
  return out;
}

std::vector<double> sample_near_tie_logits(std::size_t length, double a, double gap, std::uint64_t seed) {
  if (!(a >= 0.0) || !std::isfinite(a)) fail(ErrorKind::range, "logit bound a must be non-negative");
  if (!(gap >= 0.0) || !std::isfinite(gap)) fail(ErrorKind::range, "tie gap must be non-negative");
  if (length < 2) fail(ErrorKind::range, "near-tie logits need at least two tokens");
  SplitMix64 rng(substream_seed(seed, 2));
  std::vector<double> out(length);
  for (double& l : out) l = std::clamp(-a * uniform01(rng), -a, 0.0);
  const std::size_t first = uniform_index(rng, length);
  std::size_t second = uniform_index(rng, length - 1);
  if (second >= first) ++second;
  out[first] = a;
  out[second] = std::max(-a, a - gap * uniform01(rng));
  return out;
}

std::vector<double> sample_config_logits(const SyntheticConfig& cfg, std::size_t length, std::uint64_t seed) {
  if (cfg.tie_gap > 0.0) return sample_near_tie_logits(length, cfg.logit_bound, cfg.tie_gap, seed);
  return sample_logits(length, cfg.logit_bound, seed);
}

}  // namespace attnbound
