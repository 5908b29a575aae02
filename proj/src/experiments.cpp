#include "attnbound/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "attnbound/error.hpp"
#include "attnbound/kernels.hpp"
#include "attnbound/rng.hpp"
#include "attnbound/tensor_store.hpp"

namespace attnbound {

std::string_view to_string(ExperimentKind k) noexcept {
  switch (k) {
    case ExperimentKind::distance: return "distance";
    case ExperimentKind::geometry: return "geometry";
    case ExperimentKind::gradient: return "gradient";
    case ExperimentKind::critical_n: return "critical-n";
  }
  return "unknown";
}

std::string_view to_string(ExpectedSource s) noexcept {
  return s == ExpectedSource::closed_form ? "closed-form" : "oracle";
}

std::string_view to_string(PairSumReading r) noexcept {
  return r == PairSumReading::ordered ? "ordered" : "unordered";
}

std::vector<double> ExperimentConfig::default_temperatures() {
  std::vector<double> t;
  for (int k = -12; k <= 4; ++k) t.push_back(std::pow(10.0, k / 4.0));
  return t;
}

void ExperimentConfig::validate() const {
  if (dump.has_value() == synthetic.has_value()) {
    fail(ErrorKind::input, "exactly one of a dump directory or a synthetic config is required");
  }
  if (synthetic) {
    synthetic->validate();
    if (synthetic_heads == 0) fail(ErrorKind::input, "synthetic head count must be at least 1");
  }
  if (seq_lens.empty()) fail(ErrorKind::input, "sequence-length list is empty");
  for (std::size_t L : seq_lens) {
    if (L < 2) fail(ErrorKind::input, "sequence lengths must be at least 2");
  }
  if (experiment != ExperimentKind::gradient) {
    if (top_ns.empty()) fail(ErrorKind::input, "top-N list is empty");
    for (std::size_t n : top_ns) {
      if (n < 1) fail(ErrorKind::input, "top-N values must be at least 1");
    }
  }
  if (experiment == ExperimentKind::critical_n) {
    if (!std::is_sorted(top_ns.begin(), top_ns.end()) ||
        std::adjacent_find(top_ns.begin(), top_ns.end()) != top_ns.end()) {
      fail(ErrorKind::input, "the critical-N grid must be strictly ascending");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorKind::input, "KS level must lie in (0, 1)");
  }
  if (experiment == ExperimentKind::gradient) {
    if (epsilons.empty()) fail(ErrorKind::input, "epsilon list is empty");
    for (double e : epsilons) {
      if (!(e > 0.0) || !std::isfinite(e)) fail(ErrorKind::input, "epsilon values must be positive");
    }
    for (double t : temperatures) {
      if (!(t > 0.0) || !std::isfinite(t)) fail(ErrorKind::input, "temperatures must be positive");
    }
    if (directions == 0) fail(ErrorKind::input, "at least one probe direction is required");
  }
  if (temperature && (!(*temperature > 0.0) || !std::isfinite(*temperature))) {
    fail(ErrorKind::input, "temperature must be positive");
  }
  if (normalizer != "softmax" && !NormalizerRegistry::global().contains(normalizer)) {
    fail(ErrorKind::input, "unknown normalizer '" + normalizer + "'");
  }
  if (samples < 2) fail(ErrorKind::input, "oracle sample count must be at least 2");
  if (fixed_r && !(*fixed_r > 0.0)) fail(ErrorKind::input, "fixed r must be positive");
  if (jobs == 0) fail(ErrorKind::input, "--jobs must be at least 1");
}

double head_coverage(double p, std::size_t heads) {
  if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::range, "coverage probability must lie in [0, 1]");
  if (heads < 1) fail(ErrorKind::range, "head count must be at least 1");
  return 1.0 - std::pow(1.0 - p, static_cast<double>(heads));
}

namespace {

std::uint64_t key_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = seed;
  for (std::uint64_t p : parts) s = substream_seed(s, p);
  return s;
}

// Runs f(i) for i in [0, n) on up to `jobs` threads. Results are written by
// index, so output order never depends on scheduling. The lowest-index
// exception is rethrown.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(jobs, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// One attention head's inputs, materialized at the longest swept length.
struct HeadInput {
  int layer = 0;
  int head = 0;
  Matrix x;                     // embeddings, or V when the dump has none
  std::optional<Matrix> q, k;   // dumps only
  std::vector<double> logits;   // synthetic only
  double temperature = 1.0;
};

class HeadSource {
 public:
  explicit HeadSource(const ExperimentConfig& cfg) : cfg_(cfg) {
    max_len_ = *std::max_element(cfg.seq_lens.begin(), cfg.seq_lens.end());
    if (cfg.dump) {
      index_ = read_manifest(*cfg.dump);
      if (max_len_ > index_.seq_len) {
        fail(ErrorKind::input, "sequence length " + std::to_string(max_len_) + " exceeds the dump's " +
                                   std::to_string(index_.seq_len) + " tokens");
      }
      for (const auto& e : index_.entries) {
        if (cfg.heads.empty() ||
            std::find(cfg.heads.begin(), cfg.heads.end(), std::pair{e.layer, e.head}) != cfg.heads.end()) {
          entries_.push_back(e);
        }
      }
      std::sort(entries_.begin(), entries_.end(),
                [](const DumpEntry& a, const DumpEntry& b) { return std::pair{a.layer, a.head} < std::pair{b.layer, b.head}; });
      if (entries_.empty()) fail(ErrorKind::input, "no dump entries match the head filter");
      embeddings_ = load_embeddings(index_);
      if (embeddings_ && embeddings_->rows() < max_len_) {
        fail(ErrorKind::input, "embedding table is shorter than the swept sequence length");
      }
    }
  }

  std::size_t size() const { return cfg_.dump ? entries_.size() : cfg_.synthetic_heads; }
  std::size_t max_len() const { return max_len_; }

  HeadInput load(std::size_t i) const {
    HeadInput h;
    if (cfg_.dump) {
      const auto& e = entries_[i];
      HeadDump d = load_head(index_, e, std::nullopt);
      h.layer = e.layer;
      h.head = e.head;
      h.x = embeddings_ ? embeddings_->top_rows(max_len_) : d.v.top_rows(max_len_);
      h.q = d.q.top_rows(max_len_);
      h.k = d.k.top_rows(max_len_);
      h.temperature = cfg_.temperature.value_or(d.temperature);
    } else {
      SyntheticConfig sc = *cfg_.synthetic;
      sc.seq_len = max_len_;
      sc.seed = key_seed(cfg_.synthetic->seed, {0x5e9, i});
      h.layer = 0;
      h.head = static_cast<int>(i);
      h.x = sample_sphere(sc);
      h.logits = sample_config_logits(sc, max_len_, sc.seed);
      h.temperature = cfg_.temperature.value_or(1.0);
    }
    return h;
  }

  std::string describe() const {
    if (cfg_.dump) {
      return "dump " + index_.model_id + " (" + std::to_string(entries_.size()) + " heads, " +
             (embeddings_ ? "token embeddings" : "value vectors") + ")";
    }
    const auto& s = *cfg_.synthetic;
    return "synthetic sphere d=" + std::to_string(s.dim) + " heads=" + std::to_string(cfg_.synthetic_heads) +
           (s.tie_gap > 0.0 ? " near-tie logits" : " uniform logits");
  }

 private:
  const ExperimentConfig& cfg_;
  std::size_t max_len_ = 0;
  DumpIndex index_;
  std::vector<DumpEntry> entries_;
  std::optional<Matrix> embeddings_;
};

// Raw logits of the last query of an L-token prefix.
std::vector<double> prefix_logits(const HeadInput& h, std::size_t L) {
  if (!h.q) return {h.logits.begin(), h.logits.begin() + static_cast<std::ptrdiff_t>(L)};
  std::vector<double> out(L);
  const auto query = h.q->row(L - 1);
  for (std::size_t j = 0; j < L; ++j) out[j] = kernels::dot(query, h.k->row(j));
  return out;
}

NormalizerConfig weight_config(const ExperimentConfig& cfg, const HeadInput& h) {
  if (cfg.normalizer == "softmax") return NormalizerConfig::softmax(h.temperature);
  return NormalizerConfig::generic(cfg.normalizer, cfg.theta);
}

WeightVector prefix_weights(const ExperimentConfig& cfg, const HeadInput& h, std::size_t L) {
  return normalize(prefix_logits(h, L), weight_config(cfg, h));
}

std::vector<std::size_t> usable_top_ns(const ExperimentConfig& cfg, std::size_t L, bool allow_full) {
  std::vector<std::size_t> out;
  for (std::size_t n : cfg.top_ns) {
    if (n < L || (allow_full && n == L)) out.push_back(n);
  }
  return out;
}

AnalysisReport start_report(const ExperimentConfig& cfg, const HeadSource& src) {
  cfg.validate();
  AnalysisReport rep;
  rep.config = cfg;
  rep.backend = std::string(kernels::to_string(kernels::active_backend()));
  rep.input_description = src.describe();
  return rep;
}

template <class Records, class Proj>
std::vector<double> collect(const Records& records, std::size_t L, std::size_t n, Proj proj) {
  std::vector<double> v;
  for (const auto& r : records) {
    if (r.key.seq_len == L && r.key.top_n == n) v.push_back(proj(r.result));
  }
  return v;
}

double mean_of(const std::vector<double>& v) { return v.empty() ? 0.0 : summarize(v).mean; }

std::string n_label(std::size_t n) { return "N" + std::to_string(n); }
std::string l_label(std::size_t L) { return "L" + std::to_string(L); }

std::string eps_label(double e) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "eps%g", e);
  return buf;
}

std::vector<DistanceRecord> distance_records(const ExperimentConfig& cfg, const HeadSource& src) {
  std::vector<std::vector<DistanceRecord>> per_head(src.size());
  parallel_for(src.size(), cfg.jobs, [&](std::size_t i) {
    const HeadInput h = src.load(i);
    for (std::size_t L : cfg.seq_lens) {
      const Matrix x = h.x.top_rows(L);
      const WeightVector w = prefix_weights(cfg, h, L);
      for (std::size_t n : usable_top_ns(cfg, L, true)) {
        DistanceOptions opt;
        opt.variant = cfg.variant;
        opt.oracle_mode = cfg.oracle_mode;
        opt.samples = cfg.samples;
        opt.seed = key_seed(cfg.seed, {static_cast<std::uint64_t>(h.layer), static_cast<std::uint64_t>(h.head), L, n});
        RecordKey key{h.layer, h.head, L, n, h.temperature, 0.0};
        per_head[i].push_back({key, analyze_distance(x, w, n, opt)});
      }
    }
  });
  std::vector<DistanceRecord> out;
  for (auto& v : per_head) out.insert(out.end(), v.begin(), v.end());
  return out;
}

}  // namespace

AnalysisReport run_distance_experiment(const ExperimentConfig& cfg) {
  const HeadSource src(cfg);
  AnalysisReport rep = start_report(cfg, src);
  rep.distance = distance_records(cfg, src);

  std::vector<std::size_t> ns;
  for (const auto& r : rep.distance) {
    if (std::find(ns.begin(), ns.end(), r.key.top_n) == ns.end()) ns.push_back(r.key.top_n);
  }
  std::sort(ns.begin(), ns.end());

  auto add_point = [&](Series& s, double x, std::size_t L, std::size_t n) {
    const auto dt = summarize(collect(rep.distance, L, n, [](const DistanceResult& r) { return r.d_tilde; }));
    const double values[] = {
        dt.mean, dt.median, dt.q1, dt.q3,
        mean_of(collect(rep.distance, L, n, [](const DistanceResult& r) { return r.e_oracle; })),
        mean_of(collect(rep.distance, L, n, [](const DistanceResult& r) { return r.e_closed; })),
        mean_of(collect(rep.distance, L, n, [](const DistanceResult& r) { return r.e_closed_alternate; })),
        mean_of(collect(rep.distance, L, n, [](const DistanceResult& r) { return r.fixed_bound; })),
    };
    if (s.y.empty()) {
      for (const char* label : {"d_tilde_mean", "d_tilde_median", "d_tilde_q1", "d_tilde_q3", "e_oracle_mean",
                                "e_closed_mean", "e_closed_alternate_mean", "fixed_bound_mean"}) {
        s.y.push_back({label, {}});
      }
    }
    s.x.push_back(x);
    for (std::size_t k = 0; k < s.y.size(); ++k) s.y[k].second.push_back(values[k]);
  };

  for (std::size_t n : ns) {
    Series s{"distance_vs_L_" + n_label(n), "L", {}, {}};
    for (std::size_t L : cfg.seq_lens) {
      if (n <= L) add_point(s, static_cast<double>(L), L, n);
    }
    rep.series.push_back(std::move(s));
  }
  const std::size_t lmax = src.max_len();
  {
    Series s{"distance_vs_N_" + l_label(lmax), "N", {}, {}};
    for (std::size_t n : ns) {
      if (n <= lmax) add_point(s, static_cast<double>(n), lmax, n);
    }
    rep.series.push_back(std::move(s));
  }

  for (std::size_t L : cfg.seq_lens) {
    for (std::size_t n : usable_top_ns(cfg, L, true)) {
      const std::string suffix = "_" + l_label(L) + "_" + n_label(n);
      rep.aggregates.push_back(
          {"d_tilde" + suffix, summarize(collect(rep.distance, L, n, [](const DistanceResult& r) { return r.d_tilde; }))});
      rep.aggregates.push_back(
          {"e_oracle" + suffix, summarize(collect(rep.distance, L, n, [](const DistanceResult& r) { return r.e_oracle; }))});
    }
  }

  // Linear growth in L, tested on each quantity the report carries.
  for (const auto& s : rep.series) {
    if (s.x_label != "L" || s.x.size() < 3) continue;
    for (const auto& [label, ys] : s.y) {
      if (label != "d_tilde_mean" && label != "e_oracle_mean" && label != "e_closed_mean") continue;
      const double r = pearson(s.x, ys);
      rep.checks.push_back({"pearson_" + label + "_vs_L_" + s.name.substr(s.name.rfind('_') + 1), r, r >= 0.95});
    }
  }

  // Closed form against the oracle, widened by 3 standard errors under MC.
  std::size_t violations = 0;
  std::size_t tested = 0;
  for (const auto& r : rep.distance) {
    if (r.key.top_n >= r.key.seq_len) continue;
    ++tested;
    const double gap = std::fabs(r.result.e_closed - r.result.e_oracle);
    if (gap > r.result.eps_bound + 3.0 * r.result.oracle_stderr) ++violations;
  }
  if (tested > 0) {
    rep.checks.push_back({std::string("closed_form_") + std::string(to_string(cfg.variant)) + "_eps_violations",
                          static_cast<double>(violations), violations == 0});
  }
  std::size_t nonzero_full = 0;
  for (const auto& r : rep.distance) {
    if (r.key.top_n == r.key.seq_len && r.result.d_tilde != 0.0) ++nonzero_full;
  }
  rep.checks.push_back({"full_selection_nonzero_d_tilde", static_cast<double>(nonzero_full), nonzero_full == 0});
  rep.notes.push_back("top-N values larger than L are skipped for that L");
  return rep;
}

AnalysisReport run_geometry_experiment(const ExperimentConfig& cfg) {
  const HeadSource src(cfg);
  AnalysisReport rep = start_report(cfg, src);
  const double radius = cfg.synthetic ? cfg.synthetic->radius : 1.0;

  GeometryOptions opt;
  opt.radius = radius;
  if (cfg.synthetic) opt.delta = cfg.synthetic->delta_min;
  opt.fixed_r = cfg.fixed_r;
  opt.reading = cfg.reading;

  std::vector<std::vector<GeometryRecord>> per_head(src.size());
  parallel_for(src.size(), cfg.jobs, [&](std::size_t i) {
    const HeadInput h = src.load(i);
    for (std::size_t L : cfg.seq_lens) {
      const Matrix x = h.x.top_rows(L);
      const WeightVector w = prefix_weights(cfg, h, L);
      for (std::size_t n : usable_top_ns(cfg, L, false)) {
        RecordKey key{h.layer, h.head, L, n, h.temperature, 0.0};
        per_head[i].push_back({key, analyze_geometry(x, w, n, opt)});
      }
    }
  });
  for (auto& v : per_head) rep.geometry.insert(rep.geometry.end(), v.begin(), v.end());

  for (std::size_t L : cfg.seq_lens) {
    Series s{"ratio_vs_N_" + l_label(L), "N", {}, {}};
    for (const char* label : {"ratio_mean", "ratio_median", "ratio_q1", "ratio_q3", "lower_mean", "upper_mean"}) {
      s.y.push_back({label, {}});
    }
    for (std::size_t n : usable_top_ns(cfg, L, false)) {
      const auto ratio = collect(rep.geometry, L, n, [](const GeometryResult& g) { return g.ratio; });
      const auto sr = summarize(ratio);
      const double values[] = {
          sr.mean, sr.median, sr.q1, sr.q3,
          mean_of(collect(rep.geometry, L, n, [](const GeometryResult& g) { return g.lower_bound; })),
          mean_of(collect(rep.geometry, L, n, [](const GeometryResult& g) { return g.upper_bound; })),
      };
      s.x.push_back(static_cast<double>(n));
      for (std::size_t k = 0; k < s.y.size(); ++k) s.y[k].second.push_back(values[k]);
      rep.aggregates.push_back({"ratio_" + l_label(L) + "_" + n_label(n), sr});
    }
    if (!s.x.empty()) rep.series.push_back(std::move(s));
  }

  std::size_t singleton_failures = 0;
  for (const auto& g : rep.geometry) {
    if (g.key.top_n == 1 && g.result.ratio != 1.0) ++singleton_failures;
  }
  rep.checks.push_back({"singleton_ratio_not_one", static_cast<double>(singleton_failures), singleton_failures == 0});

  if (cfg.synthetic) {
    // Separability sandwich under the sampling model itself: fresh sphere draws,
    // uniform weight 1/N on the first N tokens and zero elsewhere.
    struct Point {
      std::size_t L, n;
    };
    std::vector<Point> points;
    for (std::size_t L : cfg.seq_lens) {
      for (std::size_t n : usable_top_ns(cfg, L, false)) points.push_back({L, n});
    }
    rep.separability.resize(points.size());
    parallel_for(points.size(), cfg.jobs, [&](std::size_t p) {
      const auto [L, n] = points[p];
      std::vector<double> w(L, 0.0);
      for (std::size_t j = 0; j < n; ++j) w[j] = 1.0 / static_cast<double>(n);
      SyntheticConfig sc = *cfg.synthetic;
      sc.seq_len = L;
      const std::uint64_t base = key_seed(cfg.synthetic->seed, {0x3c, L, n});
      auto sampler = [sc, base](std::uint64_t k) mutable {
        sc.seed = substream_seed(base, k);
        return sample_sphere(sc);
      };
      GeometryOptions mc = opt;
      mc.fixed_r.reset();
      SeparabilityRecord rec{L, sc.dim, n, monte_carlo_separability(sampler, WeightVector(w), n, mc, cfg.mc_draws), false};
      rec.within_bounds = rec.estimate.within_bounds(3.0);
      rep.separability[p] = rec;
    });
    std::size_t outside = 0;
    for (const auto& r : rep.separability) outside += r.within_bounds ? 0 : 1;
    rep.checks.push_back({"separability_sandwich_outside", static_cast<double>(outside), outside == 0});
  }
  rep.notes.push_back(cfg.fixed_r ? "r fixed by the caller" : "r = min over non-selected tokens of ||s - alpha_i x_i||");
  rep.notes.push_back(cfg.synthetic ? "delta = generator minimum separation"
                                    : "delta = empirical minimum pairwise distance after projection");
  return rep;
}

AnalysisReport run_gradient_experiment(const ExperimentConfig& cfg) {
  const HeadSource src(cfg);
  AnalysisReport rep = start_report(cfg, src);
  const std::vector<double> temps = cfg.temperatures.empty() ? ExperimentConfig::default_temperatures() : cfg.temperatures;
  rep.config.temperatures = temps;

  std::vector<std::vector<GradientRecord>> per_head(src.size());
  parallel_for(src.size(), cfg.jobs, [&](std::size_t i) {
    const HeadInput h = src.load(i);
    for (std::size_t L : cfg.seq_lens) {
      const auto logits = prefix_logits(h, L);
      for (double t : temps) {
        const auto w = normalize(logits, NormalizerConfig::softmax(t));
        // max |J_ij| = max(max_i a_i(1 - a_i), product of the two largest weights) / T
        double diag = 0.0;
        double top1 = 0.0;
        double top2 = 0.0;
        for (double a : w.values()) {
          diag = std::max(diag, a * (1.0 - a));
          if (a > top1) {
            top2 = top1;
            top1 = a;
          } else if (a > top2) {
            top2 = a;
          }
        }
        const double max_entry = std::max(diag, top1 * top2) / t;
        for (double eps : cfg.epsilons) {
          GradientRecord rec;
          rec.key = {h.layer, h.head, L, 0, t, eps};
          const std::uint64_t seed = key_seed(cfg.seed, {static_cast<std::uint64_t>(h.layer),
                                                         static_cast<std::uint64_t>(h.head), L});
          rec.result = fd_sensitivity(logits, t, eps, cfg.directions, seed);
          rec.max_entry_norm = max_entry;
          rec.max_entry_within_bound = max_entry <= 1.0 / (4.0 * t);
          per_head[i].push_back(rec);
        }
      }
    }
  });
  for (auto& v : per_head) rep.gradient.insert(rep.gradient.end(), v.begin(), v.end());

  std::size_t entry_violations = 0;
  for (const auto& r : rep.gradient) entry_violations += r.max_entry_within_bound ? 0 : 1;
  rep.checks.push_back({"max_entry_bound_violations", static_cast<double>(entry_violations), entry_violations == 0});

  for (std::size_t L : cfg.seq_lens) {
    for (double eps : cfg.epsilons) {
      Series s{"gradient_vs_T_" + l_label(L) + "_" + eps_label(eps), "T", {}, {}};
      for (const char* label : {"max_g_mean", "max_g_max", "g_swap_mean", "analytic_mean", "reference"}) {
        s.y.push_back({label, {}});
      }
      std::vector<double> fit_x, fit_y;
      for (double t : temps) {
        std::vector<double> g, swap, analytic;
        for (const auto& r : rep.gradient) {
          if (r.key.seq_len == L && r.key.epsilon == eps && r.key.temperature == t) {
            g.push_back(r.result.g);
            swap.push_back(r.result.g_swap);
            analytic.push_back(r.result.analytic);
          }
        }
        const auto sg = summarize(g);
        s.x.push_back(t);
        const double values[] = {sg.mean, sg.max, mean_of(swap), mean_of(analytic), softmax_grad_bound(t)};
        for (std::size_t k = 0; k < s.y.size(); ++k) s.y[k].second.push_back(values[k]);
        if (t >= 1e-3 * (1 - 1e-9) && t <= 1e-1 * (1 + 1e-9) && sg.mean > 0.0) {
          fit_x.push_back(std::log(t));
          fit_y.push_back(std::log(sg.mean));
        }
      }
      if (fit_x.size() >= 2) {
        const double slope = linear_slope(fit_x, fit_y);
        rep.checks.push_back({"loglog_slope_" + l_label(L) + "_" + eps_label(eps), slope,
                              std::fabs(slope + 1.0) <= 0.1});
      }
      rep.series.push_back(std::move(s));
    }
  }
  rep.notes.push_back("Jacobian bound 1/(4T) is asserted on the max-entry norm; g is compared to min{1/(4T), sqrt(2)} as a reference only");
  rep.notes.push_back("slopes are fitted on mean max-g over heads for T in [1e-3, 1e-1]");
  return rep;
}

AnalysisReport run_critical_n(const ExperimentConfig& cfg) {
  const HeadSource src(cfg);
  AnalysisReport rep = start_report(cfg, src);
  rep.distance = distance_records(cfg, src);

  Series s{"critical_fraction_vs_L", "L", {}, {{"n_crit_over_L", {}}}};
  for (std::size_t L : cfg.seq_lens) {
    const auto grid = usable_top_ns(cfg, L, true);
    if (grid.empty()) continue;
    SamplesByN empirical, expected;
    for (const auto& r : rep.distance) {
      if (r.key.seq_len != L) continue;
      empirical[r.key.top_n].push_back(r.result.d_tilde);
      expected[r.key.top_n].push_back(cfg.expected_source == ExpectedSource::oracle ? r.result.e_oracle : r.result.e_closed);
    }
    CriticalNRecord rec{L, critical_top_n(empirical, expected, grid, cfg.alpha)};
    s.x.push_back(static_cast<double>(L));
    s.y[0].second.push_back(rec.result.n_crit ? static_cast<double>(*rec.result.n_crit) / static_cast<double>(L)
                                              : std::nan(""));
    rep.critical_n.push_back(std::move(rec));
  }

  bool nonincreasing = true;
  double prev = std::numeric_limits<double>::infinity();
  std::size_t defined = 0;
  for (double f : s.y[0].second) {
    if (std::isnan(f)) continue;
    ++defined;
    if (f > prev) nonincreasing = false;
    prev = f;
  }
  rep.checks.push_back({"n_crit_fraction_nonincreasing", static_cast<double>(defined), nonincreasing && defined > 0});
  rep.series.push_back(std::move(s));
  rep.notes.push_back(std::string("expected distribution source: ") + std::string(to_string(cfg.expected_source)));
  rep.notes.push_back("indistinguishable means the KS test fails to reject at the configured level");
  return rep;
}

AnalysisReport run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.experiment) {
    case ExperimentKind::distance: return run_distance_experiment(cfg);
    case ExperimentKind::geometry: return run_geometry_experiment(cfg);
    case ExperimentKind::gradient: return run_gradient_experiment(cfg);
    case ExperimentKind::critical_n: return run_critical_n(cfg);
  }
  fail(ErrorKind::contract, "unknown experiment kind");
}

void write_synthetic_dump(const SyntheticConfig& cfg, std::size_t layers, std::size_t heads, std::size_t head_dim,
                          const std::filesystem::path& out) {
  cfg.validate();
  if (layers == 0 || heads == 0 || head_dim == 0) fail(ErrorKind::input, "layers, heads and head_dim must be positive");
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) fail(ErrorKind::io, "cannot create '" + out.string() + "': " + ec.message());

  DumpIndex index;
  index.root = out;
  index.model_id = "synthetic";
  index.d_model = cfg.dim;
  index.n_layers = layers;
  index.n_heads = heads;
  index.seq_len = cfg.seq_len;
  index.causal = false;
  index.embeddings = "embeddings.npy";
  write_tensor(sample_sphere(cfg), out / *index.embeddings);

  const std::size_t L = cfg.seq_len;
  const double t = std::sqrt(static_cast<double>(head_dim));
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t h = 0; h < heads; ++h) {
      SplitMix64 rng = substream(cfg.seed, 1000 + l * heads + h);
      auto gaussian = [&] {
        Matrix m(L, head_dim);
        for (double& v : m.data()) v = standard_normal(rng);
        return m;
      };
      const Matrix q = gaussian();
      const Matrix k = gaussian();
      const Matrix v = gaussian();
      Matrix attn(L, L);
      std::vector<double> row(L);
      for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = 0; j < L; ++j) row[j] = kernels::dot(q.row(i), k.row(j));
        const auto w = normalize(row, NormalizerConfig::softmax(t));
        std::copy(w.values().begin(), w.values().end(), attn.row(i).begin());
      }
      const std::string stem = "L" + std::to_string(l) + "_H" + std::to_string(h);
      DumpEntry e;
      e.layer = static_cast<int>(l);
      e.head = static_cast<int>(h);
      e.q = stem + "_q.npy";
      e.k = stem + "_k.npy";
      e.v = stem + "_v.npy";
      e.attention = stem + "_attn.npy";
      write_tensor(q, out / e.q);
      write_tensor(k, out / e.k);
      write_tensor(v, out / e.v);
      write_tensor(attn, out / *e.attention);
      index.entries.push_back(std::move(e));
    }
  }
  write_manifest(index);
}

}  // namespace attnbound
