#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "attnbound/distance.hpp"
#include "attnbound/geometry.hpp"
#include "attnbound/gradient.hpp"
#include "attnbound/normalization.hpp"
#include "attnbound/stats.hpp"
#include "attnbound/synthetic.hpp"

namespace attnbound {

enum class ExperimentKind { distance, geometry, gradient, critical_n };

// Which sample family stands in for the "expected" distance distribution in
// the critical-N search.
enum class ExpectedSource { closed_form, oracle };

std::string_view to_string(ExperimentKind k) noexcept;
std::string_view to_string(ExpectedSource s) noexcept;
std::string_view to_string(PairSumReading r) noexcept;

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::distance;

  // Exactly one input source.
  std::optional<std::filesystem::path> dump;
  std::optional<SyntheticConfig> synthetic;
  std::size_t synthetic_heads = 16;  // independent replicates, reported as layer 0

  std::vector<std::size_t> seq_lens{32, 64, 128, 256, 512, 1024};
  std::vector<std::size_t> top_ns{1, 5, 10, 20, 100};
  std::vector<double> temperatures;  // gradient sweep; empty means the default log grid
  std::vector<double> epsilons{1e-3, 1e-1, 10.0};

  // Weights for distance/geometry/critical-N. For dumps an unset temperature
  // means the manifest's (or sqrt(d)).
  std::string normalizer = "softmax";
  std::optional<double> temperature;
  std::vector<double> theta{1.0};

  OracleMode oracle_mode = OracleMode::monte_carlo;
  std::size_t samples = 2000;
  std::uint64_t seed = 0;
  FormulaVariant variant = FormulaVariant::derived;

  std::size_t directions = 64;  // random finite-difference directions per record
  double alpha = 0.01;          // KS level
  ExpectedSource expected_source = ExpectedSource::oracle;
  std::optional<double> fixed_r;
  PairSumReading reading = PairSumReading::ordered;
  std::size_t mc_draws = 2000;  // synthetic separability Monte Carlo
  std::vector<std::pair<int, int>> heads;  // dump filter; empty means all

  std::size_t jobs = 1;
  std::optional<std::filesystem::path> out;

  static std::vector<double> default_temperatures();  // 1e-3 .. 1e1, four points per decade
  void validate() const;
};

struct RecordKey {
  int layer = 0;
  int head = 0;
  std::size_t seq_len = 0;
  std::size_t top_n = 0;
  double temperature = 0.0;
  double epsilon = 0.0;
};

struct DistanceRecord {
  RecordKey key;
  DistanceResult result;
};

struct GeometryRecord {
  RecordKey key;
  GeometryResult result;
};

struct GradientRecord {
  RecordKey key;
  SensitivityResult result;
  double max_entry_norm = 0.0;  // max |J_ij| at the unperturbed logits
  bool max_entry_within_bound = true;
};

struct CriticalNRecord {
  std::size_t seq_len = 0;
  CriticalNResult result;
};

struct SeparabilityRecord {
  std::size_t seq_len = 0;
  std::size_t dim = 0;
  std::size_t top_n = 0;
  SeparabilityEstimate estimate;
  bool within_bounds = false;
};

struct Series {
  std::string name;
  std::string x_label;
  std::vector<double> x;
  std::vector<std::pair<std::string, std::vector<double>>> y;
};

struct Aggregate {
  std::string name;
  Summary summary;
};

struct Check {
  std::string name;
  double value = 0.0;
  bool pass = false;
};

struct AnalysisReport {
  ExperimentConfig config;
  std::string backend;
  std::string input_description;
  std::vector<DistanceRecord> distance;
  std::vector<GeometryRecord> geometry;
  std::vector<GradientRecord> gradient;
  std::vector<CriticalNRecord> critical_n;
  std::vector<SeparabilityRecord> separability;
  std::vector<Aggregate> aggregates;
  std::vector<Series> series;
  std::vector<Check> checks;
  std::vector<std::string> notes;
};

AnalysisReport run_distance_experiment(const ExperimentConfig& cfg);
AnalysisReport run_geometry_experiment(const ExperimentConfig& cfg);
AnalysisReport run_gradient_experiment(const ExperimentConfig& cfg);
AnalysisReport run_critical_n(const ExperimentConfig& cfg);
AnalysisReport run_experiment(const ExperimentConfig& cfg);

/// 1 - (1 - p)^H.
double head_coverage(double p, std::size_t heads);

/// Writes a dump directory (manifest plus NPY tensors) with random Q, K, V
/// of shape L x head_dim per head and sphere-sampled embeddings, so the dump
/// path of the toolkit can be exercised without a model.
void write_synthetic_dump(const SyntheticConfig& cfg, std::size_t layers, std::size_t heads, std::size_t head_dim,
                          const std::filesystem::path& out);

// Report emission.
std::string report_json(const AnalysisReport& report);
std::string series_csv(const Series& series);
/// Writes report.json and one CSV per series into dir; returns the paths written.
std::vector<std::filesystem::path> write_report(const AnalysisReport& report, const std::filesystem::path& dir);

}  // namespace attnbound
