#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "letf/config.hpp"

namespace letf {

// Each command writes CSV artifacts and a manifest.json into `out` and returns
// the process exit code. Errors are thrown as letf::Error subclasses.

// Jump moment table with a Monte Carlo cross-check; returns 2 if any moment
// is more than 3 standard errors off.
int cmd_moments(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log);

// Payoff curves and grid-search optima; `gammas` replaces the configured list.
int cmd_lumpsum(const ScenarioConfig& cfg, const std::optional<std::vector<double>>& gammas,
                const std::filesystem::path& out, std::ostream& log);

// Closed-form heatmaps, ratio grid, ensemble percentiles and terminal CDFs.
int cmd_closedform(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log);

// Source panel and bootstrap resample.
int cmd_bootstrap(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log);

// Trains every configured scenario on the training split.
int cmd_train(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log);

// Evaluates the checkpoints in `out` on the held-out split.
int cmd_evaluate(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log);

// Replays the checkpoints in `out` over the historical windows.
int cmd_replay(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log);

// Shared pieces, exposed for tests.
AlignedSource build_source(const ScenarioConfig& cfg);
ReturnsPanel build_panel(const ScenarioConfig& cfg, const AlignedSource& source);
std::string panel_hash(const ReturnsPanel& panel);

struct PanelSplit {
  ReturnsPanel train;
  ReturnsPanel test;
  std::size_t boundary = 0;  // first held-out path id
};
PanelSplit split_panel(const ReturnsPanel& panel, double train_fraction);

// Investor assets T30, B10 and the scenario's ETF; benchmark T30/B10/Market.
RolloutScenario rollout_scenario(const ScenarioConfig& cfg, const TrainScenario& t,
                                 const ReturnsPanel& panel);

}  // namespace letf
