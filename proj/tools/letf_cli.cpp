// Command-line front end. Every flag can also be set through an environment
// variable with the LETF_ prefix (LETF_CONFIG, LETF_SEED, ...); flags win.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "letf/artifacts.hpp"
#include "letf/commands.hpp"
#include "letf/config.hpp"
#include "letf/error.hpp"
#include "letf/rng.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> paths;
  std::optional<unsigned> threads;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "scenario INI file (defaults if omitted)")
      ->envname("LETF_CONFIG")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "master seed")->envname("LETF_SEED");
  sub->add_option("--out", c.out, "artifact directory")->envname("LETF_OUT");
  sub->add_option("--paths", c.paths, "override every path count")
      ->envname("LETF_PATHS")
      ->check(CLI::PositiveNumber);
  sub->add_option("--threads", c.threads, "worker threads, 0 for all cores")
      ->envname("LETF_THREADS");
}

letf::ScenarioConfig resolve(const Common& c) {
  letf::ScenarioConfig cfg = c.config.empty() ? letf::ScenarioConfig{} : letf::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.paths) cfg.paths = *c.paths;
  if (c.threads) cfg.threads = *c.threads;
  cfg.validate();
  letf::set_thread_count(cfg.threads);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leveraged ETF benchmark-outperformance experiments"};
  app.set_version_flag("--version", letf::version_string());
  app.require_subcommand(1);

  Common common;
  std::vector<double> gammas;
  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"moments", "jump moment table with a Monte Carlo cross-check"},
      {"lumpsum", "lump-sum payoff curves and grid-search optima"},
      {"closedform", "closed-form control heatmaps, percentiles and CDFs"},
      {"bootstrap", "source panel and stationary block bootstrap resample"},
      {"train", "train the network policy for every configured scenario"},
      {"evaluate", "evaluate trained checkpoints on the held-out split"},
      {"replay", "replay trained checkpoints over historical windows"},
  };
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, common);
    if (std::string(s.name) == "lumpsum")
      sub->add_option("--gammas", gammas, "gamma values, replaces lumpsum.gammas")
          ->delimiter(',')
          ->expected(1, -1);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(letf::ExitCode::validation);
  }

  try {
    const letf::ScenarioConfig cfg = resolve(common);
    const std::filesystem::path out = common.out;
    const std::string cmd = app.get_subcommands().front()->get_name();
    std::ostream& log = std::cout;
    if (cmd == "moments") return letf::cmd_moments(cfg, out, log);
    if (cmd == "lumpsum") {
      CLI::App* sub = app.get_subcommand("lumpsum");
      std::optional<std::vector<double>> g;
      if (sub->count("--gammas") > 0) g = gammas;
      return letf::cmd_lumpsum(cfg, g, out, log);
    }
    if (cmd == "closedform") return letf::cmd_closedform(cfg, out, log);
    if (cmd == "bootstrap") return letf::cmd_bootstrap(cfg, out, log);
    if (cmd == "train") return letf::cmd_train(cfg, out, log);
    if (cmd == "evaluate") return letf::cmd_evaluate(cfg, out, log);
    if (cmd == "replay") return letf::cmd_replay(cfg, out, log);
  } catch (const letf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(letf::ExitCode::validation);
  }
  return static_cast<int>(letf::ExitCode::validation);
}
