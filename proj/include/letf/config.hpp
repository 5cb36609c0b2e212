#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "letf/bootstrap_data.hpp"
#include "letf/closed_form.hpp"
#include "letf/lump_sum.hpp"
#include "letf/nn_solver.hpp"

namespace letf {

// One trained strategy: which ETF the investor holds, its leverage cap and
// borrowing premium.
struct TrainScenario {
  EtfKind kind = EtfKind::letf;
  double p_max = 1.0;
  double b = 0.0;

  std::string name() const;  // e.g. letf_p1_b0, vetf_p1.5_b0.03
};

// Parses "letf:1:0, vetf:1.5:0.03".
std::vector<TrainScenario> parse_train_scenarios(const std::string& text);

struct ScenarioConfig {
  // [run]
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  std::optional<std::size_t> paths;  // overrides every path count when set

  // [model]
  bool gbm = false;
  KouParams model = KouParams::calibrated_kou();

  // [etf]
  EtfSpec letf{2.0, 0.0089};
  EtfSpec vetf{1.0, 0.0006};

  // [benchmark]
  std::vector<double> fraction_starts{0.0};  // index fraction schedule, continuous case
  std::vector<double> fraction_values{0.7};
  double weight_t30 = 0.15;  // discrete case
  double weight_b10 = 0.15;
  double weight_market = 0.70;

  // [invest]
  InvestmentParams invest;  // q is per year here
  double rebalance_interval = 0.25;

  // [moments]
  std::size_t moment_samples = 1'000'000;

  // [lumpsum]
  double lumpsum_dt = 0.25;
  double lumpsum_b = 0.03;
  std::vector<double> lumpsum_gammas{20.0, 50.0};
  double lumpsum_grid_step = 0.001;
  double lumpsum_grid_max = 2.0;
  std::size_t lumpsum_paths = 200'000;
  int lumpsum_scatter_draws = 1;

  // [closedform]
  std::size_t cf_paths = 10'000;
  int cf_steps_per_year = 252;
  int cf_record_every = 63;
  double cf_x_min = -100.0;
  double cf_x_step = 5.0;
  double cf_t_step = 0.25;

  // [data]
  std::string data_source = "synthetic";  // or "files"
  std::string index_daily_file, t30_file, b10_file, inflation_file;
  SyntheticConfig synthetic;
  double expected_block_size = 3.0;
  std::size_t bootstrap_paths = 10'000;

  // [nn]
  NetworkConfig network;  // n_assets and scales are filled in per run
  OptimizerConfig optimizer;
  std::vector<TrainScenario> train_scenarios;
  double train_fraction = 0.8;
  std::string compare_a = "letf_p1_b0";
  std::string compare_b = "vetf_p1.5_b0.03";
  double dominance_floor = 0.02;

  ScenarioConfig();

  // Assumptions on leverage, premiums and benchmark weights, plus ranges.
  void validate() const;

  BenchmarkPolicy benchmark_policy() const;
  std::vector<double> benchmark_weights() const { return {weight_t30, weight_b10, weight_market}; }
  std::size_t effective(std::size_t n) const { return paths ? *paths : n; }
};

// Line-oriented INI text. Unknown sections or keys are errors.
ScenarioConfig parse_config(std::istream& in, const std::string& source);
ScenarioConfig load_config(const std::filesystem::path& path);

// Every effective setting as sorted `section.key = value` lines (thread count excluded).
std::string canonical_text(const ScenarioConfig& cfg);
std::string config_hash(const ScenarioConfig& cfg);

}  // namespace letf
