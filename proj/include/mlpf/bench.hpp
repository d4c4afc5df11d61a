#pragma once

#include "mlpf/filters.hpp"
#include "mlpf/model.hpp"
#include "mlpf/multilevel.hpp"
#include "mlpf/path_data.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mlpf {

struct EstimatorConfig {
  std::string id;
  AllocationRule rule = AllocationRule::kSinglePf;
  CouplingKind coupling = CouplingKind::kMaximal;
  int min_level = 3;
  int max_level = 7;
  double base = 100.0;
  ResamplePolicy policy = ResamplePolicy::kEssBelowHalf;
  bool trigger_on_both = false;
};

struct TruthConfig {
  int ref_level = -1;  ///< -1: use L_data
  std::size_t ref_particles = 51200;
  int replicates = 5;
};

struct BenchmarkConfig {
  std::string model_name;
  ParamMap model_params;
  int horizon = 10;
  int data_level = 9;
  GenerationMode data_mode = GenerationMode::kPBar;
  std::uint64_t data_seed = 1;
  std::vector<EstimatorConfig> estimators;
  /// The first functional is scored against the truth at time T.
  std::vector<std::string> functionals{"x"};
  int repeats = 20;
  std::uint64_t master_seed = 1;
  std::string output_dir = "bench_out";
  TruthConfig truth;
  /// Number of independent data paths; each has its own truth.
  int paths = 1;
  int workers = 1;
  /// When false, wall_seconds is written as 0 so outputs are byte-reproducible.
  bool record_wall_time = true;
  std::vector<std::string> formats{"csv", "json", "svg"};
};

/// Parses and validates a config document; unknown keys are rejected.
/// Throws ConfigError naming the offending field.
BenchmarkConfig parse_config(const std::string& json_text);
BenchmarkConfig load_config(const std::filesystem::path& file);

struct BenchmarkRecord {
  std::string estimator;
  int level = 0;
  int repeat = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> counts;
  std::uint64_t cost_units = 0;
  double wall_seconds = 0.0;
  double estimate = 0.0;
  double truth = 0.0;
  double squared_error = 0.0;
};

struct SummaryRow {
  std::string estimator;
  int level = 0;
  double mean_cost = 0.0;
  double mse = 0.0;
  int n_repeats = 0;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

struct BenchmarkResult {
  std::vector<BenchmarkRecord> records;
  std::vector<SummaryRow> summary;
};

/// Runs every estimator at every L on the same observation path(s). Records
/// come back in canonical order (estimator, L, repeat). `on_record`, if set, is
/// called as each record completes.
BenchmarkResult run_benchmark(const BenchmarkConfig& config,
                              const std::function<void(const BenchmarkRecord&)>& on_record = {});

std::vector<SummaryRow> summarize(std::span<const BenchmarkRecord> records);

/// Least squares of log10(cost) on log10(mse); points are (cost, mse).
SlopeFit fit_slope(std::span<const std::pair<double, double>> points);

/// Slope of each estimator's summary rows, in first-appearance order.
std::vector<std::pair<std::string, SlopeFit>> fit_slopes(std::span<const SummaryRow> summary);

/// Writes records.csv, summary.csv, results.json and cost_mse.svg as selected by `formats`.
void emit_outputs(const BenchmarkResult& result, const std::filesystem::path& directory,
                  const std::vector<std::string>& formats);

std::string records_csv(std::span<const BenchmarkRecord> records);
std::string summary_csv(std::span<const SummaryRow> summary);
std::string cost_mse_svg(std::span<const SummaryRow> summary);
std::string format_double(double value);
std::string csv_record_line(const BenchmarkRecord& record);

std::vector<SummaryRow> parse_summary_csv(const std::string& text);
std::vector<BenchmarkRecord> parse_records_csv(const std::string& text);

}  // namespace mlpf
