#include "letf/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "letf/artifacts.hpp"
#include "letf/error.hpp"
#include "letf/evaluation.hpp"
#include "letf/lump_sum.hpp"
#include "letf/market_models.hpp"
#include "letf/rng.hpp"

namespace letf {

namespace {

std::string fixed(double x, int prec = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

// Inclusive arithmetic grid lo, lo + step, ..., hi.
std::vector<double> grid(double lo, double hi, double step) {
  std::vector<double> g;
  const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long i = 0; i <= n; ++i) g.push_back(lo + static_cast<double>(i) * step);
  return g;
}

ArtifactWriter writer(const ScenarioConfig& cfg, const std::filesystem::path& out,
                      const std::string& command) {
  ArtifactWriter w(out, command, config_hash(cfg), cfg.seed);
  w.write("config.ini", canonical_text(cfg));
  return w;
}

std::string cdf_text(const EmpiricalCdf& c) {
  std::ostringstream s;
  write_cdf_csv(s, c);
  return s.str();
}

InvestmentParams discrete_invest(const ScenarioConfig& cfg, const TrainScenario& t) {
  InvestmentParams inv = cfg.invest;
  inv.q = cfg.invest.q * cfg.rebalance_interval;
  inv.p_max = t.p_max;
  inv.b = t.b;
  return inv;
}

struct LoadedPolicy {
  TrainScenario scenario;
  Checkpoint checkpoint;
};

std::vector<LoadedPolicy> load_policies(const ScenarioConfig& cfg, const std::filesystem::path& out,
                                        const std::string& expected_hash) {
  std::vector<LoadedPolicy> v;
  for (const auto& t : cfg.train_scenarios) {
    const auto path = out / ("policy_" + t.name() + ".txt");
    std::ifstream in(path);
    if (!in) throw ConfigError("missing checkpoint " + path.string() + " (run train first)");
    Checkpoint ck = load_checkpoint(in);
    if (ck.panel_hash != expected_hash)
      throw ConfigError("checkpoint " + path.string() + " was trained on a different panel");
    v.push_back({t, std::move(ck)});
  }
  return v;
}

}  // namespace

AlignedSource build_source(const ScenarioConfig& cfg) {
  if (cfg.data_source == "files") {
    const ReturnSeries idx = load_series(cfg.index_daily_file, Frequency::daily, "Market");
    const ReturnSeries t30 = load_series(cfg.t30_file, Frequency::monthly, "T30");
    const ReturnSeries b10 = load_series(cfg.b10_file, Frequency::monthly, "B10");
    const ReturnSeries infl = load_series(cfg.inflation_file, Frequency::monthly, "CPI");
    return build_source_panel(idx, t30, b10, infl, cfg.vetf, cfg.letf);
  }
  SyntheticConfig sc = cfg.synthetic;
  sc.model = cfg.model;
  const SyntheticSource s = synthetic_source(sc, cfg.seed);
  return build_source_panel(s.index_daily, s.t30, s.b10, s.inflation, cfg.vetf, cfg.letf);
}

ReturnsPanel build_panel(const ScenarioConfig& cfg, const AlignedSource& source) {
  BootstrapConfig bc;
  bc.expected_block_size = cfg.expected_block_size;
  bc.n_paths = cfg.effective(cfg.bootstrap_paths);
  bc.horizon = cfg.invest.T;
  bc.rebalance_interval = cfg.rebalance_interval;
  bc.seed = cfg.seed;
  return stationary_block_bootstrap(source, bc);
}

std::string panel_hash(const ReturnsPanel& panel) {
  std::ostringstream s;
  write_panel(s, panel);
  return sha256_hex(s.str());
}

PanelSplit split_panel(const ReturnsPanel& panel, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must be in (0, 1)");
  const auto cut = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(panel.n_paths)));
  if (cut == 0 || cut >= panel.n_paths)
    throw ConfigError("panel too small to split into training and held-out paths");
  return {panel.slice_paths(0, cut), panel.slice_paths(cut, panel.n_paths), cut};
}

RolloutScenario rollout_scenario(const ScenarioConfig& cfg, const TrainScenario& t,
                                 const ReturnsPanel& panel) {
  RolloutScenario sc;
  sc.inv = discrete_invest(cfg, t);
  sc.investor_assets = {panel.asset_index("T30"), panel.asset_index("B10"),
                        panel.asset_index(t.kind == EtfKind::letf ? "LETF" : "VETF")};
  sc.benchmark_assets = {panel.asset_index("T30"), panel.asset_index("B10"),
                         panel.asset_index("Market")};
  sc.benchmark_weights = cfg.benchmark_weights();
  sc.validate(panel);
  return sc;
}

int cmd_moments(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  cfg.validate();
  const double beta = cfg.letf.beta;
  const JumpMoments m = letf_jump_moments(cfg.model, beta);
  const char* names[5] = {"kappa1_s", "kappa2_s", "kappa1_l", "kappa2_l", "kappa_chi"};
  const double cf[5] = {m.kappa1_s, m.kappa2_s, m.kappa1_l, m.kappa2_l, m.kappa_chi};
  ArtifactWriter w = writer(cfg, out, "moments");
  std::ostringstream csv;
  csv << "quantity,closed_form,monte_carlo,se,z\n";
  log << "jump moments, beta = " << format_number(beta) << "\n";
  log << "quantity    closed_form   monte_carlo   std_err      z\n";
  int code = 0;
  if (!cfg.model.has_jumps()) {
    for (int k = 0; k < 5; ++k) {
      log << names[k] << std::string(12 - std::string(names[k]).size(), ' ') << fixed(0.0)
          << "      absent\n";
      csv << names[k] << ",0,absent,absent,absent\n";
    }
  } else {
    const MomentEstimate e =
        monte_carlo_jump_moments(cfg.model, beta, cfg.effective(cfg.moment_samples), cfg.seed);
    const double mc[5] = {e.mean.kappa1_s, e.mean.kappa2_s, e.mean.kappa1_l, e.mean.kappa2_l,
                          e.mean.kappa_chi};
    const double se[5] = {e.se.kappa1_s, e.se.kappa2_s, e.se.kappa1_l, e.se.kappa2_l,
                          e.se.kappa_chi};
    for (int k = 0; k < 5; ++k) {
      const double z = (mc[k] - cf[k]) / se[k];
      if (!(std::abs(z) <= 3.0)) code = static_cast<int>(ExitCode::numeric_precondition);
      log << names[k] << std::string(12 - std::string(names[k]).size(), ' ') << fixed(cf[k])
          << "    " << fixed(mc[k]) << "    " << fixed(se[k], 7) << "   " << fixed(z, 2) << "\n";
      csv << names[k] << ',' << format_number(cf[k]) << ',' << format_number(mc[k]) << ','
          << format_number(se[k]) << ',' << format_number(z) << '\n';
    }
    if (code != 0) log << "Monte Carlo cross-check failed: a moment is more than 3 SE off\n";
  }
  if (beta > 1.0 || cfg.model.has_jumps()) {
    const double K = k_beta(cfg.model, cfg.letf, m);
    log << "K_beta      " << fixed(K, 10) << "\n";
    csv << "K_beta," << format_number(K) << ",,,\n";
  }
  w.write("moments.csv", csv.str());
  w.finish();
  return code;
}

int cmd_lumpsum(const ScenarioConfig& cfg, const std::optional<std::vector<double>>& gammas,
                const std::filesystem::path& out, std::ostream& log) {
  cfg.validate();
  const std::vector<double> gs = gammas ? *gammas : cfg.lumpsum_gammas;
  if (gs.empty()) throw ConfigError("lumpsum needs at least one gamma");
  for (double g : gs)
    if (!(g > 0.0)) throw ConfigError("gamma values must be positive");
  LumpSumScenario sc;
  sc.dt = cfg.lumpsum_dt;
  sc.p_hat_s = cfg.fraction_values.front();
  sc.w0 = cfg.invest.w0;
  sc.model = cfg.model;
  sc.vetf = cfg.vetf;
  sc.letf = cfg.letf;
  sc.b = cfg.lumpsum_b;
  sc.grid = LumpSumScenario::make_grid(0.0, cfg.lumpsum_grid_max, cfg.lumpsum_grid_step);
  sc.validate();
  const std::size_t n = cfg.effective(cfg.lumpsum_paths);
  ArtifactWriter w = writer(cfg, out, "lumpsum");
  std::ostringstream opt;
  opt << "gamma,kind,p_star,objective\n";
  for (double g : gs) {
    const GridSearchResult l = grid_search_ir_optimal(EtfKind::letf, g, sc, n, cfg.seed);
    const GridSearchResult v = grid_search_ir_optimal(EtfKind::vetf, g, sc, n, cfg.seed);
    log << "gamma " << format_number(g) << ": p_l* = " << fixed(l.p_star, 3)
        << ", p_v* = " << fixed(v.p_star, 3) << "\n";
    opt << format_number(g) << ",letf," << format_number(l.p_star) << ','
        << format_number(l.objective) << '\n';
    opt << format_number(g) << ",vetf," << format_number(v.p_star) << ','
        << format_number(v.objective) << '\n';
    const std::string tag = "_g" + format_number(g) + ".csv";
    std::ostringstream obj;
    obj << "p,letf,vetf\n";
    for (std::size_t i = 0; i < sc.grid.size(); ++i)
      obj << format_number(sc.grid[i]) << ',' << format_number(l.objective_curve[i]) << ','
          << format_number(v.objective_curve[i]) << '\n';
    w.write("objective" + tag, obj.str());
    for (bool scatter : {false, true}) {
      const auto pts = payoff_diagram(sc, l.p_star, v.p_star, scatter, cfg.seed,
                                      scatter ? cfg.lumpsum_scatter_draws : 1);
      std::ostringstream pay;
      pay << "index_gross,letf,vetf,benchmark\n";
      for (const auto& p : pts)
        pay << format_number(p.index_gross) << ',' << format_number(p.letf) << ','
            << format_number(p.vetf) << ',' << format_number(p.benchmark) << '\n';
      w.write((scatter ? "payoff_scatter" : "payoff") + tag, pay.str());
    }
  }
  w.write("optima.csv", opt.str());
  w.finish();
  return 0;
}

int cmd_closedform(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  cfg.validate();
  const BenchmarkPolicy pol = cfg.benchmark_policy();
  const ClosedFormControl L(EtfKind::letf, cfg.model, cfg.letf, pol, cfg.invest);
  const ClosedFormControl V(EtfKind::vetf, cfg.model, cfg.vetf, pol, cfg.invest);
  ArtifactWriter w = writer(cfg, out, "closedform");

  const auto ts = grid(0.0, cfg.invest.T, cfg.cf_t_step);
  const auto xs = grid(cfg.cf_x_min, cfg.invest.gamma, cfg.cf_x_step);
  std::ostringstream hl, hv, hr;
  hl << "t,x,W,W_hat,fraction\n";
  hv << "t,x,W,W_hat,fraction\n";
  hr << "t,x,ratio\n";
  double rmin = INFINITY, rmax = -INFINITY;
  for (double t : ts) {
    const double Wh = expected_benchmark_wealth(t, cfg.model, pol, cfg.invest.w0, cfg.invest.q);
    for (double x : xs) {
      const double W = Wh + x;
      const double fl = L.fraction(t, W, Wh), fv = V.fraction(t, W, Wh);
      const double ratio = fv / fl;
      if (std::isfinite(ratio)) {
        rmin = std::min(rmin, ratio);
        rmax = std::max(rmax, ratio);
      }
      const std::string head = format_number(t) + ',' + format_number(x) + ',';
      hl << head << format_number(W) << ',' << format_number(Wh) << ',' << format_number(fl) << '\n';
      hv << head << format_number(W) << ',' << format_number(Wh) << ',' << format_number(fv) << '\n';
      hr << head << format_number(ratio) << '\n';
    }
  }
  w.write("heatmap_letf.csv", hl.str());
  w.write("heatmap_vetf.csv", hv.str());
  w.write("ratio.csv", hr.str());
  log << "fraction ratio vetf/letf over the heatmap: [" << fixed(rmin, 4) << ", " << fixed(rmax, 4)
      << "]\n";

  SimulationConfig sim;
  sim.n_paths = cfg.effective(cfg.cf_paths);
  sim.steps_per_year = cfg.cf_steps_per_year;
  sim.record_every = cfg.cf_record_every;
  sim.seed = cfg.seed;
  const auto ens = simulate_controlled_paths({&L, &V}, sim);
  const char* names[2] = {"letf", "vetf"};
  std::ostringstream summary;
  summary << "kind,information_ratio,mean_W,median_W,prob_outperform\n";
  for (int k = 0; k < 2; ++k) {
    const ControlledEnsemble& e = ens[static_cast<std::size_t>(k)];
    PercentileCurves pc;
    pc.levels = {5, 20, 50, 80, 95};
    pc.times = e.times;
    for (std::size_t i = 0; i < e.n_times(); ++i) {
      std::vector<double> col;
      for (std::size_t j = 0; j < e.n_paths; ++j)
        if (std::isfinite(e.rho(j, i))) col.push_back(e.rho(j, i));
      for (double l : pc.levels) pc.values.push_back(col.empty() ? NAN : percentile(col, l));
    }
    std::ostringstream ps;
    write_percentiles_csv(ps, pc);
    w.write(std::string("percentiles_") + names[k] + ".csv", ps.str());
    const OutcomeSample o{e.terminal_wealth(), e.terminal_benchmark()};
    w.write(std::string("cdf_") + names[k] + ".csv", cdf_text(empirical_cdf(o.W)));
    if (k == 0) w.write("cdf_benchmark.csv", cdf_text(empirical_cdf(o.W_hat)));
    std::size_t wins = 0;
    for (std::size_t j = 0; j < o.size(); ++j) wins += o.W[j] > o.W_hat[j];
    const double ir = information_ratio(o);
    summary << names[k] << ',' << format_number(ir) << ','
            << format_number(std::accumulate(o.W.begin(), o.W.end(), 0.0) /
                             static_cast<double>(o.size()))
            << ',' << format_number(percentile(o.W, 50)) << ','
            << format_number(static_cast<double>(wins) / static_cast<double>(o.size())) << '\n';
    log << names[k] << ": IR " << fixed(ir, 4) << "\n";
  }
  w.write("summary.csv", summary.str());
  w.finish();
  return 0;
}

int cmd_bootstrap(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  cfg.validate();
  const AlignedSource src = build_source(cfg);
  const ReturnsPanel panel = build_panel(cfg, src);
  ArtifactWriter w = writer(cfg, out, "bootstrap");
  std::ostringstream s;
  s << "month";
  for (const auto& l : src.labels) s << ',' << l;
  s << '\n';
  for (std::size_t m = 0; m < src.n_months(); ++m) {
    s << format_month(src.months[m]);
    for (std::size_t a = 0; a < src.n_assets(); ++a) s << ',' << format_number(src.at(m, a));
    s << '\n';
  }
  w.write("source.csv", s.str());
  std::ostringstream bin;
  write_panel(bin, panel);
  w.write("panel.bin", bin.str());
  std::ostringstream st;
  st << "asset,mean_gross,sd_gross\n";
  for (std::size_t a = 0; a < panel.n_assets(); ++a) {
    double sum = 0.0, ss = 0.0;
    const double n = static_cast<double>(panel.n_paths * panel.n_steps);
    for (std::size_t j = 0; j < panel.n_paths; ++j)
      for (std::size_t t = 0; t < panel.n_steps; ++t) sum += panel.at(j, t, a);
    const double mean = sum / n;
    for (std::size_t j = 0; j < panel.n_paths; ++j)
      for (std::size_t t = 0; t < panel.n_steps; ++t) {
        const double d = panel.at(j, t, a) - mean;
        ss += d * d;
      }
    st << panel.labels[a] << ',' << format_number(mean) << ','
       << format_number(std::sqrt(ss / (n - 1.0))) << '\n';
  }
  w.write("panel_stats.csv", st.str());
  w.add_note("panel_sha256", panel_hash(panel));
  w.finish();
  log << "bootstrap: " << panel.n_paths << " paths x " << panel.n_steps << " intervals from "
      << src.n_months() << " source months\n";
  return 0;
}

int cmd_train(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  cfg.validate();
  const AlignedSource src = build_source(cfg);
  const ReturnsPanel panel = build_panel(cfg, src);
  const std::string hash = panel_hash(panel);
  const PanelSplit split = split_panel(panel, cfg.train_fraction);
  ArtifactWriter w = writer(cfg, out, "train");
  std::ostringstream summary;
  summary << "scenario,final_loss,constant_mix_loss,beats_constant_mix\n";
  for (const auto& t : cfg.train_scenarios) {
    const RolloutScenario sc = rollout_scenario(cfg, t, split.train);
    NetworkConfig nc = cfg.network;
    nc.n_assets = sc.investor_assets.size();
    nc.T = cfg.invest.T;
    nc.wealth_scale = wealth_scale(cfg.invest.w0, cfg.invest.T, split.train, sc.investor_assets[0]);
    OptimizerConfig opt = cfg.optimizer;
    opt.seed = cfg.seed;
    log << "training " << t.name() << " (" << opt.steps << " steps, " << split.train.n_paths
        << " paths)\n";
    const TrainResult r = train(init_policy(nc, cfg.seed, t.p_max), split.train, sc, opt);
    std::ostringstream ck;
    save_checkpoint(ck, r.policy, hash, cfg.seed);
    w.write("policy_" + t.name() + ".txt", ck.str());
    std::ostringstream lh;
    lh << "step,loss\n";
    for (std::size_t i = 0; i < r.loss_history.size(); ++i)
      lh << i << ',' << format_number(r.loss_history[i]) << '\n';
    w.write("loss_" + t.name() + ".csv", lh.str());
    summary << t.name() << ',' << format_number(r.final_loss) << ','
            << format_number(r.constant_mix.loss) << ',' << (r.beats_constant_mix ? 1 : 0) << '\n';
    log << "  final loss " << fixed(r.final_loss, 3) << ", best constant mix "
        << fixed(r.constant_mix.loss, 3) << "\n";
  }
  w.write("train_summary.csv", summary.str());
  w.add_note("panel_sha256", hash);
  w.add_note("train_paths", std::to_string(split.train.n_paths));
  w.finish();
  return 0;
}

int cmd_evaluate(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  cfg.validate();
  const AlignedSource src = build_source(cfg);
  const ReturnsPanel panel = build_panel(cfg, src);
  const std::string hash = panel_hash(panel);
  const PanelSplit split = split_panel(panel, cfg.train_fraction);
  const auto policies = load_policies(cfg, out, hash);
  const std::filesystem::path dir = out / "evaluate";
  ArtifactWriter w = writer(cfg, dir, "evaluate");
  std::ostringstream summary;
  summary << "scenario,information_ratio,mean_W,median_W,prob_outperform,loss\n";
  std::vector<std::pair<std::string, EmpiricalCdf>> cdfs;
  for (const auto& lp : policies) {
    const RolloutScenario sc = rollout_scenario(cfg, lp.scenario, split.test);
    const PathSample s = evaluate_policy(lp.checkpoint.policy, split.test, sc);
    const OutcomeSample o = s.terminal();
    const std::string name = lp.scenario.name();
    const EmpiricalCdf cdf = empirical_cdf(o.W);
    w.write("cdf_" + name + ".csv", cdf_text(cdf));
    std::vector<double> ratio(o.size());
    for (std::size_t j = 0; j < o.size(); ++j) ratio[j] = o.W[j] / o.W_hat[j];
    w.write("ratio_cdf_" + name + ".csv", cdf_text(empirical_cdf(ratio)));
    const auto curve = outperformance_curve(s);
    std::ostringstream cs;
    write_curve_csv(cs, s.times, curve);
    w.write("outperformance_" + name + ".csv", cs.str());
    std::vector<double> dec_times(s.times.begin(), s.times.end() - 1);
    std::ostringstream ps;
    write_percentiles_csv(ps, allocation_percentiles(dec_times, s.n_paths, s.allocation));
    w.write("percentiles_" + name + ".csv", ps.str());
    double ir = NAN;
    try {
      ir = information_ratio(o);
    } catch (const UndefinedStatisticError&) {
    }
    double sq = 0.0;
    for (std::size_t j = 0; j < o.size(); ++j) {
      const double e = o.W[j] - o.W_hat[j] - sc.inv.gamma;
      sq += e * e;
    }
    summary << name << ',' << format_number(ir) << ','
            << format_number(std::accumulate(o.W.begin(), o.W.end(), 0.0) /
                             static_cast<double>(o.size()))
            << ',' << format_number(percentile(o.W, 50)) << ',' << format_number(curve.back())
            << ',' << format_number(sq / static_cast<double>(o.size())) << '\n';
    log << name << ": IR " << fixed(ir, 4) << ", P[W(T) > What(T)] " << fixed(curve.back(), 4)
        << "\n";
    cdfs.emplace_back(name, cdf);
  }
  const EmpiricalCdf* a = nullptr;
  const EmpiricalCdf* b = nullptr;
  for (const auto& [n, c] : cdfs) {
    if (n == cfg.compare_a) a = &c;
    if (n == cfg.compare_b) b = &c;
  }
  if (a && b) {
    const DominanceReport r = partial_dominance(*a, *b, cfg.dominance_floor);
    std::ostringstream ds;
    write_dominance_csv(ds, r);
    w.write("dominance.csv", ds.str());
    log << cfg.compare_a << " vs " << cfg.compare_b << ": dominates above floor "
        << (r.dominates_above_floor ? "yes" : "no") << ", left-tail violation "
        << (r.left_tail_violation ? "yes" : "no") << "\n";
  }
  w.write("evaluate_summary.csv", summary.str());
  w.add_note("panel_sha256", hash);
  w.add_note("heldout_first_path", std::to_string(split.boundary));
  w.finish();
  return 0;
}

int cmd_replay(const ScenarioConfig& cfg, const std::filesystem::path& out, std::ostream& log) {
  cfg.validate();
  const AlignedSource src = build_source(cfg);
  const ReturnsPanel panel = build_panel(cfg, src);
  const auto policies = load_policies(cfg, out, panel_hash(panel));
  const std::filesystem::path dir = out / "replay";
  ArtifactWriter w = writer(cfg, dir, "replay");
  for (const auto& lp : policies) {
    const RolloutScenario sc = rollout_scenario(cfg, lp.scenario, panel);
    const auto traces = historical_replay(lp.checkpoint.policy, src, sc, cfg.rebalance_interval,
                                          replay_windows());
    std::ostringstream rs;
    write_replay_csv(rs, traces);
    w.write("replay_" + lp.scenario.name() + ".csv", rs.str());
    for (const auto& t : traces)
      log << lp.scenario.name() << " " << t.window << ": W(T) " << fixed(t.W.back(), 2)
          << ", What(T) " << fixed(t.W_hat.back(), 2) << "\n";
  }
  w.finish();
  return 0;
}

}  // namespace letf
