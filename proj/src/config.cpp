#include "letf/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/algorithm/string/split.hpp>
#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "letf/artifacts.hpp"
#include "letf/error.hpp"

namespace letf {

namespace {

double to_double(const std::string& s, const std::string& key) {
  const std::string t = boost::algorithm::trim_copy(s);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size() || !std::isfinite(v))
    throw ConfigError(key + ": expected a finite number, got '" + s + "'");
  return v;
}

std::uint64_t to_uint(const std::string& s, const std::string& key) {
  const std::string t = boost::algorithm::trim_copy(s);
  std::uint64_t v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
    throw ConfigError(key + ": expected a nonnegative integer, got '" + s + "'");
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  const std::string t = boost::algorithm::trim_copy(s);
  if (t.empty()) return parts;
  boost::algorithm::split(parts, t, [](char c) { return c == ','; });
  for (auto& p : parts) boost::algorithm::trim(p);
  return parts;
}

std::vector<double> to_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  for (const auto& p : split_list(s)) out.push_back(to_double(p, key));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += std::string(i ? "," : "") + format_number(v[i]);
  return s;
}

struct Key {
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, const std::string&, const std::string&)> set;
};

template <class T>
Key number(T ScenarioConfig::*field) {
  return {[field](const ScenarioConfig& c) { return format_number(static_cast<double>(c.*field)); },
          [field](ScenarioConfig& c, const std::string& v, const std::string& k) {
            if constexpr (std::is_floating_point_v<T>)
              c.*field = to_double(v, k);
            else
              c.*field = static_cast<T>(to_uint(v, k));
          }};
}

// Accessor-based variant for nested members.
template <class Get>
Key real(Get ref) {
  return {[ref](const ScenarioConfig& c) {
            return format_number(static_cast<double>(ref(const_cast<ScenarioConfig&>(c))));
          },
          [ref](ScenarioConfig& c, const std::string& v, const std::string& k) {
            auto& f = ref(c);
            using T = std::remove_reference_t<decltype(f)>;
            if constexpr (std::is_floating_point_v<T>)
              f = to_double(v, k);
            else
              f = static_cast<T>(to_uint(v, k));
          }};
}

Key text(std::string ScenarioConfig::*field) {
  return {[field](const ScenarioConfig& c) { return c.*field; },
          [field](ScenarioConfig& c, const std::string& v, const std::string&) {
            c.*field = boost::algorithm::trim_copy(v);
          }};
}

Key list(std::vector<double> ScenarioConfig::*field) {
  return {[field](const ScenarioConfig& c) { return join(c.*field); },
          [field](ScenarioConfig& c, const std::string& v, const std::string& k) {
            c.*field = to_list(v, k);
          }};
}

const std::map<std::string, Key>& schema() {
  using C = ScenarioConfig;
  static const std::map<std::string, Key> keys = {
      {"run.seed", number(&C::seed)},
      {"run.threads", number(&C::threads)},
      {"run.paths",
       {[](const C& c) { return c.paths ? std::to_string(*c.paths) : std::string("default"); },
        [](C& c, const std::string& v, const std::string& k) {
          if (boost::algorithm::trim_copy(v) == "default")
            c.paths.reset();
          else
            c.paths = static_cast<std::size_t>(to_uint(v, k));
        }}},
      {"model.kind",
       {[](const C& c) { return std::string(c.gbm ? "gbm" : "kou"); },
        [](C&, const std::string&, const std::string&) {}}},  // applied first, see parse
      {"model.r", real([](C& c) -> double& { return c.model.r; })},
      {"model.mu", real([](C& c) -> double& { return c.model.mu; })},
      {"model.sigma", real([](C& c) -> double& { return c.model.sigma; })},
      {"model.lambda", real([](C& c) -> double& { return c.model.lambda; })},
      {"model.p_up", real([](C& c) -> double& { return c.model.p_up; })},
      {"model.eta1", real([](C& c) -> double& { return c.model.eta1; })},
      {"model.eta2", real([](C& c) -> double& { return c.model.eta2; })},
      {"etf.letf_beta", real([](C& c) -> double& { return c.letf.beta; })},
      {"etf.letf_expense", real([](C& c) -> double& { return c.letf.expense_ratio; })},
      {"etf.vetf_expense", real([](C& c) -> double& { return c.vetf.expense_ratio; })},
      {"benchmark.fraction_starts", list(&C::fraction_starts)},
      {"benchmark.fraction", list(&C::fraction_values)},
      {"benchmark.t30", number(&C::weight_t30)},
      {"benchmark.b10", number(&C::weight_b10)},
      {"benchmark.market", number(&C::weight_market)},
      {"invest.T", real([](C& c) -> double& { return c.invest.T; })},
      {"invest.w0", real([](C& c) -> double& { return c.invest.w0; })},
      {"invest.q", real([](C& c) -> double& { return c.invest.q; })},
      {"invest.gamma", real([](C& c) -> double& { return c.invest.gamma; })},
      {"invest.b", real([](C& c) -> double& { return c.invest.b; })},
      {"invest.p_max", real([](C& c) -> double& { return c.invest.p_max; })},
      {"invest.rebalance", number(&C::rebalance_interval)},
      {"moments.samples", number(&C::moment_samples)},
      {"lumpsum.dt", number(&C::lumpsum_dt)},
      {"lumpsum.b", number(&C::lumpsum_b)},
      {"lumpsum.gammas", list(&C::lumpsum_gammas)},
      {"lumpsum.grid_step", number(&C::lumpsum_grid_step)},
      {"lumpsum.grid_max", number(&C::lumpsum_grid_max)},
      {"lumpsum.paths", number(&C::lumpsum_paths)},
      {"lumpsum.scatter_draws", number(&C::lumpsum_scatter_draws)},
      {"closedform.paths", number(&C::cf_paths)},
      {"closedform.steps_per_year", number(&C::cf_steps_per_year)},
      {"closedform.record_every", number(&C::cf_record_every)},
      {"closedform.x_min", number(&C::cf_x_min)},
      {"closedform.x_step", number(&C::cf_x_step)},
      {"closedform.t_step", number(&C::cf_t_step)},
      {"data.source", text(&C::data_source)},
      {"data.index_daily", text(&C::index_daily_file)},
      {"data.t30", text(&C::t30_file)},
      {"data.b10", text(&C::b10_file)},
      {"data.inflation", text(&C::inflation_file)},
      {"data.block_size", number(&C::expected_block_size)},
      {"data.paths", number(&C::bootstrap_paths)},
      {"data.synthetic_years", real([](C& c) -> int& { return c.synthetic.years; })},
      {"data.synthetic_start_year", real([](C& c) -> int& { return c.synthetic.start_year; })},
      {"data.synthetic_t30_noise", real([](C& c) -> double& { return c.synthetic.t30_noise_sd; })},
      {"data.synthetic_t30_ar", real([](C& c) -> double& { return c.synthetic.t30_ar; })},
      {"data.synthetic_b10_premium",
       real([](C& c) -> double& { return c.synthetic.b10_term_premium; })},
      {"data.synthetic_b10_noise", real([](C& c) -> double& { return c.synthetic.b10_noise_sd; })},
      {"data.synthetic_inflation", real([](C& c) -> double& { return c.synthetic.inflation; })},
      {"nn.hidden_layers", real([](C& c) -> std::size_t& { return c.network.hidden_layers; })},
      {"nn.hidden_width", real([](C& c) -> std::size_t& { return c.network.hidden_width; })},
      {"nn.steps", real([](C& c) -> std::size_t& { return c.optimizer.steps; })},
      {"nn.batch", real([](C& c) -> std::size_t& { return c.optimizer.batch; })},
      {"nn.learning_rate", real([](C& c) -> double& { return c.optimizer.learning_rate; })},
      {"nn.first_decay", real([](C& c) -> double& { return c.optimizer.first_decay; })},
      {"nn.second_decay", real([](C& c) -> double& { return c.optimizer.second_decay; })},
      {"nn.decay_factor", real([](C& c) -> double& { return c.optimizer.decay_factor; })},
      {"nn.scenarios",
       {[](const C& c) {
          std::string s;
          for (std::size_t i = 0; i < c.train_scenarios.size(); ++i) {
            const auto& t = c.train_scenarios[i];
            s += std::string(i ? "," : "") + to_string(t.kind) + ":" + format_number(t.p_max) + ":" +
                 format_number(t.b);
          }
          return s;
        },
        [](C& c, const std::string& v, const std::string&) {
          c.train_scenarios = parse_train_scenarios(v);
        }}},
      {"nn.train_fraction", number(&C::train_fraction)},
      {"nn.compare_a", text(&C::compare_a)},
      {"nn.compare_b", text(&C::compare_b)},
      {"nn.dominance_floor", number(&C::dominance_floor)},
  };
  return keys;
}

}  // namespace

std::string TrainScenario::name() const {
  return std::string(to_string(kind)) + "_p" + format_number(p_max) + "_b" + format_number(b);
}

std::vector<TrainScenario> parse_train_scenarios(const std::string& text) {
  std::vector<TrainScenario> out;
  for (const auto& item : split_list(text)) {
    std::vector<std::string> f;
    boost::algorithm::split(f, item, [](char c) { return c == ':'; });
    if (f.size() != 3)
      throw ConfigError("nn.scenarios: '" + item + "' is not kind:p_max:b");
    TrainScenario t;
    boost::algorithm::trim(f[0]);
    if (f[0] == "letf")
      t.kind = EtfKind::letf;
    else if (f[0] == "vetf")
      t.kind = EtfKind::vetf;
    else
      throw ConfigError("nn.scenarios: unknown ETF kind '" + f[0] + "'");
    t.p_max = to_double(f[1], "nn.scenarios");
    t.b = to_double(f[2], "nn.scenarios");
    out.push_back(t);
  }
  return out;
}

ScenarioConfig::ScenarioConfig() {
  train_scenarios = parse_train_scenarios(
      "letf:1:0, vetf:1:0, vetf:1.2:0, vetf:1.2:0.03, vetf:1.5:0, vetf:1.5:0.03, vetf:2:0, "
      "vetf:2:0.03");
  network.n_assets = 3;
}

BenchmarkPolicy ScenarioConfig::benchmark_policy() const {
  if (fraction_values.size() == 1 && fraction_starts.size() <= 1)
    return BenchmarkPolicy::constant(fraction_values[0]);
  return BenchmarkPolicy::piecewise(fraction_starts, fraction_values);
}

void ScenarioConfig::validate() const {
  model.validate();
  letf.validate();
  vetf.validate();
  if (!(letf.beta > 1.0)) throw ConfigError("etf.letf_beta must exceed 1");
  if (vetf.beta != 1.0) throw ConfigError("the vanilla ETF has beta 1");
  invest.validate();
  if (fraction_values.empty()) throw ConfigError("benchmark.fraction is empty");
  for (double f : fraction_values)
    if (!(f >= 0.0 && f <= 1.0))
      throw ConfigError("benchmark.fraction values must lie in [0, 1] (no benchmark leverage)");
  benchmark_policy();  // schedule consistency
  for (double w : benchmark_weights())
    if (!(w >= 0.0)) throw ConfigError("benchmark weights must be nonnegative");
  if (std::abs(weight_t30 + weight_b10 + weight_market - 1.0) > 1e-9)
    throw ConfigError("benchmark weights must sum to 1");
  const double steps = invest.T / rebalance_interval;
  if (!(rebalance_interval > 0.0) || std::abs(steps - std::round(steps)) > 1e-9)
    throw ConfigError("invest.rebalance must divide invest.T");
  BootstrapConfig bc;
  bc.expected_block_size = expected_block_size;
  bc.n_paths = effective(bootstrap_paths);
  bc.horizon = invest.T;
  bc.rebalance_interval = rebalance_interval;
  bc.validate();
  if (moment_samples < 2) throw ConfigError("moments.samples must be at least 2");
  if (lumpsum_gammas.empty()) throw ConfigError("lumpsum.gammas is empty");
  for (double g : lumpsum_gammas)
    if (!(g > 0.0)) throw ConfigError("lumpsum.gammas must be positive");
  if (!(lumpsum_b >= 0.0)) throw ConfigError("lumpsum.b must be nonnegative");
  if (!(lumpsum_grid_step > 0.0 && lumpsum_grid_max > 0.0))
    throw ConfigError("lumpsum grid step and max must be positive");
  if (lumpsum_scatter_draws < 1) throw ConfigError("lumpsum.scatter_draws must be >= 1");
  if (effective(lumpsum_paths) == 0 || effective(cf_paths) == 0)
    throw ConfigError("path counts must be positive");
  if (cf_steps_per_year < 1 || cf_record_every < 1)
    throw ConfigError("closedform steps and record interval must be positive");
  if (!(cf_x_step > 0.0 && cf_t_step > 0.0)) throw ConfigError("heatmap steps must be positive");
  if (!(cf_x_min < invest.gamma)) throw ConfigError("closedform.x_min must be below gamma");
  if (data_source != "synthetic" && data_source != "files")
    throw ConfigError("data.source must be synthetic or files");
  if (data_source == "files" &&
      (index_daily_file.empty() || t30_file.empty() || b10_file.empty() || inflation_file.empty()))
    throw ConfigError("data.source = files needs index_daily, t30, b10 and inflation paths");
  if (synthetic.years < 1) throw ConfigError("data.synthetic_years must be positive");
  NetworkConfig nc = network;
  nc.n_assets = 3;
  nc.validate();
  optimizer.validate();
  if (train_scenarios.empty()) throw ConfigError("nn.scenarios is empty");
  for (const auto& t : train_scenarios) {
    if (!(t.p_max >= 1.0)) throw ConfigError("nn.scenarios: p_max must be >= 1");
    if (!(t.b >= 0.0)) throw ConfigError("nn.scenarios: borrowing premium must be nonnegative");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("nn.train_fraction must be in (0, 1)");
  if (!(dominance_floor >= 0.0 && dominance_floor < 1.0))
    throw ConfigError("nn.dominance_floor must be in [0, 1)");
}

ScenarioConfig parse_config(std::istream& in, const std::string& source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(source, e.line(), e.message());
  }
  ScenarioConfig cfg;
  const auto& keys = schema();
  // model.kind picks the defaults the other model keys override.
  if (auto model = tree.get_child_optional("model"))
    if (auto kind = model->get_optional<std::string>("kind")) {
      const std::string k = boost::algorithm::trim_copy(*kind);
      if (k == "gbm") {
        cfg.gbm = true;
        cfg.model = KouParams::calibrated_gbm();
      } else if (k != "kou") {
        throw ConfigError(source + ": model.kind must be kou or gbm");
      }
    }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(source + ": key '" + section + "' outside any section");
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const auto& kv) {
      return kv.first.compare(0, section.size() + 1, section + ".") == 0;
    });
    if (!known) throw ConfigError(source + ": unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      const auto it = keys.find(full);
      if (it == keys.end()) throw ConfigError(source + ": unknown key [" + section + "] " + key);
      it->second.set(cfg, value.data(), source + ": " + full);
    }
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, path.string());
}

std::string canonical_text(const ScenarioConfig& cfg) {
  std::string out;
  for (const auto& [name, key] : schema())
    if (name != "run.threads") out += name + " = " + key.get(cfg) + "\n";  // no effect on results
  return out;
}

std::string config_hash(const ScenarioConfig& cfg) { return sha256_hex(canonical_text(cfg)); }

}  // namespace letf
