#include <cmath>
#include <cstdio>
#include <fstream>

#include "attnbound/error.hpp"
#include "attnbound/experiments.hpp"
#include "attnbound/rng.hpp"
#include "json.hpp"

namespace attnbound {

namespace {

using json = nlohmann::ordered_json;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

json key_json(const RecordKey& k, ExperimentKind kind) {
  json j{{"layer", k.layer}, {"head", k.head}, {"L", k.seq_len}};
  if (kind == ExperimentKind::gradient) {
    j["T"] = k.temperature;
    j["epsilon"] = k.epsilon;
  } else {
    j["N"] = k.top_n;
    j["T"] = k.temperature;
  }
  return j;
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  if (c.dump) {
    j["input"] = {{"dump", c.dump->generic_string()}};
  } else {
    const auto& s = *c.synthetic;
    j["input"] = {{"synthetic",
                   {{"L", s.seq_len}, {"d", s.dim}, {"M", s.radius}, {"delta_min", s.delta_min},
                    {"a", s.logit_bound}, {"tie_gap", s.tie_gap}, {"seed", s.seed}, {"max_retries", s.max_retries}}},
                  {"heads", c.synthetic_heads}};
  }
  j["seq_lens"] = c.seq_lens;
  j["top_ns"] = c.top_ns;
  j["temperatures"] = c.temperatures;
  j["epsilons"] = c.epsilons;
  j["normalizer"] = {{"name", c.normalizer},
                     {"temperature", c.temperature ? json(*c.temperature) : json(nullptr)},
                     {"theta", c.theta}};
  j["oracle"] = {{"mode", to_string(c.oracle_mode)}, {"samples", c.samples}, {"seed", c.seed}};
  j["formula_variant"] = to_string(c.variant);
  j["directions"] = c.directions;
  j["alpha"] = c.alpha;
  j["expected_source"] = to_string(c.expected_source);
  j["fixed_r"] = c.fixed_r ? json(*c.fixed_r) : json(nullptr);
  j["pair_sum_reading"] = to_string(c.reading);
  j["mc_draws"] = c.mc_draws;
  json heads = json::array();
  for (const auto& [l, h] : c.heads) heads.push_back({l, h});
  j["heads"] = heads;
  // jobs and the output directory do not affect results and are left out so
  // reports stay byte-identical across them.
  return j;
}

json summary_json(const Summary& s) {
  return {{"count", s.count}, {"mean", number(s.mean)}, {"median", number(s.median)}, {"q1", number(s.q1)},
          {"q3", number(s.q3)}, {"min", number(s.min)}, {"max", number(s.max)}};
}

}  // namespace

std::string report_json(const AnalysisReport& r) {
  const auto kind = r.config.experiment;
  json doc;
  doc["tool"] = "attnbound";
  doc["config"] = config_json(r.config);
  doc["rng"] = kRngAlgorithm;
  doc["backend"] = r.backend;
  doc["input"] = r.input_description;

  json records = json::array();
  for (const auto& d : r.distance) {
    const auto& x = d.result;
    json j = key_json(d.key, kind);
    j["d_tilde"] = x.d_tilde;
    j["fixed_bound"] = x.fixed_bound;
    j["e_closed"] = {{to_string(x.formula_variant), x.e_closed},
                     {to_string(x.formula_variant == FormulaVariant::derived ? FormulaVariant::as_printed
                                                                             : FormulaVariant::derived),
                      x.e_closed_alternate}};
    j["eps_bound"] = x.eps_bound;
    j["degenerate_terms"] = x.degenerate_terms;
    j["e_oracle"] = x.e_oracle;
    j["oracle_mode"] = to_string(x.oracle_mode);
    j["oracle_stderr"] = x.oracle_stderr;
    j["small_n_approx"] = x.small_n_approx;
    j["bound_bracket_nonnegative"] = x.bound_bracket_nonnegative;
    records.push_back(std::move(j));
  }
  for (const auto& g : r.geometry) {
    const auto& x = g.result;
    json j = key_json(g.key, kind);
    j["r"] = x.r;
    j["r_from_rule"] = x.r_from_rule;
    j["n_s"] = x.n_s;
    j["ratio"] = x.ratio;
    j["xi"] = numbers(x.xi);
    j["lower_raw"] = x.lower_raw;
    j["lower"] = x.lower_bound;
    j["upper"] = x.upper_bound;
    j["M"] = x.radius;
    j["delta"] = x.delta;
    records.push_back(std::move(j));
  }
  for (const auto& g : r.gradient) {
    const auto& x = g.result;
    json j = key_json(g.key, kind);
    j["max_g"] = number(x.g);
    j["g_swap"] = number(x.g_swap);
    j["analytic"] = number(x.analytic);
    j["directions"] = x.directions_probed;
    j["reference"] = x.theoretical_bound;
    j["max_entry_norm"] = g.max_entry_norm;
    j["max_entry_within_bound"] = g.max_entry_within_bound;
    records.push_back(std::move(j));
  }
  doc["records"] = std::move(records);

  if (!r.critical_n.empty()) {
    json crit = json::array();
    for (const auto& c : r.critical_n) {
      crit.push_back({{"L", c.seq_len},
                      {"n_crit", c.result.n_crit ? json(*c.result.n_crit) : json(nullptr)},
                      {"grid", c.result.tested_grid},
                      {"p", numbers(c.result.p_per_n)},
                      {"D", numbers(c.result.d_per_n)},
                      {"alpha", c.result.alpha}});
    }
    doc["critical_n"] = std::move(crit);
  }
  if (!r.separability.empty()) {
    json mc = json::array();
    for (const auto& s : r.separability) {
      const auto& e = s.estimate;
      mc.push_back({{"L", s.seq_len}, {"d", s.dim}, {"N", s.top_n}, {"draws", e.draws},
                    {"mean_ratio", e.mean_ratio}, {"stderr", e.stderr_}, {"mean_lower", e.mean_lower},
                    {"mean_lower_raw", e.mean_lower_raw}, {"mean_upper", e.mean_upper},
                    {"within_bounds", s.within_bounds}});
    }
    doc["separability_monte_carlo"] = std::move(mc);
  }

  json aggregates = json::object();
  for (const auto& a : r.aggregates) aggregates[a.name] = summary_json(a.summary);
  doc["aggregates"] = std::move(aggregates);

  json series = json::array();
  for (const auto& s : r.series) {
    json ys = json::object();
    for (const auto& [label, v] : s.y) ys[label] = numbers(v);
    series.push_back({{"name", s.name}, {"x_label", s.x_label}, {"x", numbers(s.x)}, {"y", std::move(ys)}});
  }
  doc["series"] = std::move(series);

  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"value", number(c.value)}, {"pass", c.pass}});
  doc["checks"] = std::move(checks);
  doc["notes"] = r.notes;
  return doc.dump(2) + "\n";
}

std::string series_csv(const Series& s) {
  auto cell = [](double v) {
    if (!std::isfinite(v)) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string out = s.x_label;
  for (const auto& [label, v] : s.y) out += "," + label;
  out += "\n";
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    out += cell(s.x[i]);
    for (const auto& [label, v] : s.y) out += "," + cell(v[i]);
    out += "\n";
  }
  return out;
}

std::vector<std::filesystem::path> write_report(const AnalysisReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!(f << text)) fail(ErrorKind::io, "cannot write '" + p.string() + "'");
    written.push_back(p);
  };
  put(dir / "report.json", report_json(report));
  for (const auto& s : report.series) put(dir / (s.name + ".csv"), series_csv(s));
  return written;
}

}  // namespace attnbound
