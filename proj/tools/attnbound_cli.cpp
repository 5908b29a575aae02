// attnbound command-line entry point.
//
//   attnbound analyze distance   --synthetic cfg.json --seq-len 32,64,128 --top-n 5 --out runs/dist
//   attnbound analyze gradient   --dump dumps/gpt2 --epsilon 1e-3,0.1,10
//   attnbound synth generate     --synthetic cfg.json --layers 2 --heads 4 --head-dim 16 --out dumps/synth
//   attnbound coverage -p 0.8 -H 3
//
// Exit status: 0 success, 1 input error, 2 internal assertion failure.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "attnbound/error.hpp"
#include "attnbound/experiments.hpp"
#include "attnbound/kernels.hpp"

namespace {

using namespace attnbound;

struct AnalyzeFlags {
  std::string dump;
  std::string synthetic;
  std::size_t synthetic_heads = 16;
  std::string normalizer = "softmax";
  double temperature = 0.0;
  std::vector<double> theta{1.0};
  std::vector<std::size_t> top_n;
  std::vector<std::size_t> seq_len;
  std::vector<double> epsilon;
  std::vector<double> temperatures;
  std::string oracle = "mc";
  std::size_t samples = 2000;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string out;
  std::string variant = "derived";
  std::size_t directions = 64;
  double alpha = 0.01;
  std::string expected_source = "oracle";
  double fixed_r = 0.0;
  std::string reading = "ordered";
  std::size_t mc_draws = 2000;
  std::vector<std::string> heads;
};

void add_analyze_flags(CLI::App* cmd, AnalyzeFlags& f) {
  auto* input = cmd->add_option_group("input");
  input->add_option("--dump", f.dump, "Dump directory or manifest.json")->check(CLI::ExistingPath);
  input->add_option("--synthetic", f.synthetic, "Synthetic config file (JSON)")->check(CLI::ExistingFile);
  input->require_option(1);
  cmd->add_option("--synthetic-heads", f.synthetic_heads, "Independent synthetic replicates")->capture_default_str();
  cmd->add_option("--normalizer", f.normalizer, "softmax or a registered generic F")->capture_default_str();
  cmd->add_option("--temperature", f.temperature, "Softmax temperature (dumps default to the manifest's)");
  cmd->add_option("--theta", f.theta, "Parameters of a generic F")->delimiter(',');
  cmd->add_option("--top-n", f.top_n, "Top-N list")->delimiter(',');
  cmd->add_option("--seq-len", f.seq_len, "Sequence-length list")->delimiter(',');
  cmd->add_option("--epsilon", f.epsilon, "Finite-difference step list")->delimiter(',');
  cmd->add_option("--temperatures", f.temperatures, "Gradient temperature sweep")->delimiter(',');
  cmd->add_option("--oracle", f.oracle, "Expected-distance oracle")
      ->check(CLI::IsMember({"exact", "mc"}))
      ->capture_default_str();
  cmd->add_option("--samples", f.samples, "Monte-Carlo oracle samples")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Master seed")->capture_default_str();
  cmd->add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--out", f.out, "Output directory (report.json plus CSV series); stdout when omitted");
  cmd->add_option("--formula-variant", f.variant, "Closed-form variant")
      ->check(CLI::IsMember({"as-printed", "derived"}))
      ->capture_default_str();
  cmd->add_option("--directions", f.directions, "Random probe directions per gradient record")->capture_default_str();
  cmd->add_option("--alpha", f.alpha, "KS significance level")->capture_default_str();
  cmd->add_option("--expected-source", f.expected_source, "Expected distances for the KS test")
      ->check(CLI::IsMember({"oracle", "closed-form"}))
      ->capture_default_str();
  cmd->add_option("--radius", f.fixed_r, "Fixed tolerance radius r instead of the selection rule");
  cmd->add_option("--pair-sum", f.reading, "Reading of the pair sum in xi")
      ->check(CLI::IsMember({"ordered", "unordered"}))
      ->capture_default_str();
  cmd->add_option("--mc-draws", f.mc_draws, "Embedding draws for the synthetic separability check")
      ->capture_default_str();
  cmd->add_option("--heads", f.heads, "Dump head filter as layer:head pairs")->delimiter(',');
}

ExperimentConfig to_config(ExperimentKind kind, const AnalyzeFlags& f) {
  ExperimentConfig c;
  c.experiment = kind;
  if (!f.dump.empty()) c.dump = f.dump;
  if (!f.synthetic.empty()) c.synthetic = load_synthetic_config(f.synthetic);
  c.synthetic_heads = f.synthetic_heads;
  c.normalizer = f.normalizer;
  if (f.temperature != 0.0) c.temperature = f.temperature;
  c.theta = f.theta;
  if (!f.top_n.empty()) c.top_ns = f.top_n;
  if (!f.seq_len.empty()) c.seq_lens = f.seq_len;
  if (!f.epsilon.empty()) c.epsilons = f.epsilon;
  c.temperatures = f.temperatures;
  c.oracle_mode = f.oracle == "exact" ? OracleMode::exact : OracleMode::monte_carlo;
  c.samples = f.samples;
  c.seed = f.seed;
  c.jobs = f.jobs;
  if (!f.out.empty()) c.out = f.out;
  c.variant = f.variant == "as-printed" ? FormulaVariant::as_printed : FormulaVariant::derived;
  c.directions = f.directions;
  c.alpha = f.alpha;
  c.expected_source = f.expected_source == "closed-form" ? ExpectedSource::closed_form : ExpectedSource::oracle;
  if (f.fixed_r != 0.0) c.fixed_r = f.fixed_r;
  c.reading = f.reading == "unordered" ? PairSumReading::unordered : PairSumReading::ordered;
  c.mc_draws = f.mc_draws;
  for (const auto& h : f.heads) {
    const auto colon = h.find(':');
    if (colon == std::string::npos) fail(ErrorKind::input, "head filter '" + h + "' is not layer:head");
    try {
      c.heads.emplace_back(std::stoi(h.substr(0, colon)), std::stoi(h.substr(colon + 1)));
    } catch (const std::exception&) {
      fail(ErrorKind::input, "head filter '" + h + "' is not layer:head");
    }
  }
  c.validate();
  return c;
}

int run_analyze(ExperimentKind kind, const AnalyzeFlags& flags) {
  const ExperimentConfig cfg = to_config(kind, flags);
  const AnalysisReport report = run_experiment(cfg);
  if (cfg.out) {
    for (const auto& p : write_report(report, *cfg.out)) std::cerr << "wrote " << p.string() << "\n";
  } else {
    std::cout << report_json(report);
  }
  for (const auto& c : report.checks) {
    std::cerr << (c.pass ? "ok   " : "FAIL ") << c.name << " = " << c.value << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention bounds toolkit: representation distance, separability and gradient sensitivity"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file supplying any flag");
  std::string backend;
  app.add_option("--backend", backend, "Kernel backend (scalar or avx2); default picks the fastest supported")
      ->check(CLI::IsMember({"scalar", "avx2"}));

  auto* analyze = app.add_subcommand("analyze", "Run an experiment and emit a report");
  analyze->require_subcommand(1);
  std::map<std::string, ExperimentKind> kinds{{"distance", ExperimentKind::distance},
                                              {"geometry", ExperimentKind::geometry},
                                              {"gradient", ExperimentKind::gradient},
                                              {"critical-n", ExperimentKind::critical_n}};
  std::map<std::string, AnalyzeFlags> flags;
  for (const auto& [name, kind] : kinds) add_analyze_flags(analyze->add_subcommand(name), flags[name]);

  auto* synth = app.add_subcommand("synth", "Synthetic data utilities");
  synth->require_subcommand(1);
  auto* generate = synth->add_subcommand("generate", "Write a synthetic dump directory");
  std::string synth_cfg, synth_out;
  std::size_t layers = 1, heads = 4, head_dim = 16;
  std::size_t synth_len = 0;
  std::uint64_t synth_seed = 0;
  bool seed_given = false;
  generate->add_option("--synthetic", synth_cfg, "Synthetic config file (JSON)")->check(CLI::ExistingFile);
  generate->add_option("--layers", layers)->capture_default_str();
  generate->add_option("--heads", heads)->capture_default_str();
  generate->add_option("--head-dim", head_dim)->capture_default_str();
  generate->add_option("--seq-len", synth_len, "Override L");
  generate->add_option("--seed", synth_seed, "Override the seed")->each([&](const std::string&) { seed_given = true; });
  generate->add_option("--out", synth_out, "Output directory")->required();

  auto* coverage = app.add_subcommand("coverage", "Head coverage 1 - (1 - p)^H");
  double p = 0.0;
  std::size_t h = 1;
  coverage->add_option("-p,--fraction", p, "Fraction of top-N tokens one head separates")->required();
  coverage->add_option("-H,--num-heads", h, "Independent heads")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (!backend.empty()) {
      kernels::set_backend(backend == "avx2" ? kernels::Backend::avx2 : kernels::Backend::scalar);
    }
    if (*analyze) {
      for (const auto& [name, kind] : kinds) {
        if (analyze->got_subcommand(name)) return run_analyze(kind, flags[name]);
      }
    }
    if (*generate) {
      SyntheticConfig cfg = synth_cfg.empty() ? SyntheticConfig{} : load_synthetic_config(synth_cfg);
      if (synth_len != 0) cfg.seq_len = synth_len;
      if (seed_given) cfg.seed = synth_seed;
      write_synthetic_dump(cfg, layers, heads, head_dim, synth_out);
      std::cerr << "wrote " << synth_out << "/manifest.json\n";
      return 0;
    }
    if (*coverage) {
      std::printf("%.12g\n", head_coverage(p, h));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "attnbound: " << e.what() << "\n";
    return e.kind() == ErrorKind::contract ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "attnbound: internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
