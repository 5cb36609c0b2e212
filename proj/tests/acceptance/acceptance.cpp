// Acceptance checks, one line per criterion: "criterion N: PASS|FAIL ...".
// Usage: acceptance [--criterion N]   (all criteria when omitted)
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "letf/bootstrap_data.hpp"
#include "letf/closed_form.hpp"
#include "letf/commands.hpp"
#include "letf/config.hpp"
#include "letf/evaluation.hpp"
#include "letf/lump_sum.hpp"
#include "letf/market_models.hpp"
#include "letf/nn_solver.hpp"
#include "letf/rng.hpp"

using namespace letf;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

const EtfSpec kLetf{2.0, 0.0089};
const EtfSpec kVetf{1.0, 0.0006};

Outcome kappa_reproduction() {
  const auto t0 = Clock::now();
  const JumpMoments m = letf_jump_moments(KouParams::calibrated_kou(), 2.0);
  const double got[5] = {m.kappa1_s, m.kappa2_s, m.kappa1_l, m.kappa2_l, m.kappa_chi};
  const double want[5] = {-0.0513, 0.0884, -0.0500, 0.0870, 0.0876};
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 1.0,
          fmt("k1s=%.5f k2s=%.5f k1l=%.5f k2l=%.5f kchi=%.5f max|err|=%.2e (tol 1e-4), %.3fs",
              got[0], got[1], got[2], got[3], got[4], worst, secs)};
}

Outcome kappa_monte_carlo() {
  const auto t0 = Clock::now();
  const KouParams p = KouParams::calibrated_kou();
  double worst_z = 0.0;
  for (double beta : {1.5, 2.0, 3.0}) {
    const JumpMoments cf = letf_jump_moments(p, beta);
    const MomentEstimate e = monte_carlo_jump_moments(p, beta, 10'000'000, 2024);
    const double c[5] = {cf.kappa1_s, cf.kappa2_s, cf.kappa1_l, cf.kappa2_l, cf.kappa_chi};
    const double m[5] = {e.mean.kappa1_s, e.mean.kappa2_s, e.mean.kappa1_l, e.mean.kappa2_l,
                         e.mean.kappa_chi};
    const double s[5] = {e.se.kappa1_s, e.se.kappa2_s, e.se.kappa1_l, e.se.kappa2_l,
                         e.se.kappa_chi};
    for (int k = 0; k < 5; ++k) worst_z = std::max(worst_z, std::abs(m[k] - c[k]) / s[k]);
  }
  const double secs = seconds_since(t0);
  return {worst_z <= 3.0 && secs < 60.0,
          fmt("beta in {1.5,2,3}, 1e7 jumps each: max |z| = %.2f (limit 3), %.1fs", worst_z, secs)};
}

Outcome ode_agreement() {
  const KouParams p = KouParams::calibrated_kou();
  const auto pol = BenchmarkPolicy::constant(0.7);
  const auto m = letf_jump_moments(p, 2.0);
  const InvestmentParams inv;
  const auto s = ode_oracle(p, kLetf, m, pol, inv.q, inv.gamma, inv.T, 10000);
  const auto c = make_coefficients(p, kLetf, m, pol, inv);
  double ea = 0, ed = 0, ef = 0, eg = 0;
  for (std::size_t k = 0; k < s.t.size(); ++k) {
    ea = std::max(ea, std::abs(s.A_rk4[k] - s.A[k]));
    ed = std::max(ed, std::abs(s.D_rk4[k] - s.D[k]));
    ef = std::max(ef, std::abs(s.F_rk4[k] - s.F[k]));
    eg = std::max(eg, std::abs(-s.D_rk4[k] / (2.0 * s.A_rk4[k]) - c.g(s.t[k])));
  }
  const double worst = std::max({ea, ed, ef, eg});
  return {worst < 1e-8, fmt("RK4 1e4 steps on [0,10]: |dA|=%.1e |dD|=%.1e |dF|=%.1e |-D/2A - g|=%.1e "
                            "(limit 1e-8)",
                            ea, ed, ef, eg)};
}

Outcome zero_cost_equivalence() {
  const auto t0 = Clock::now();
  const KouParams p = KouParams::calibrated_gbm();
  const auto pol = BenchmarkPolicy::constant(0.7);
  const InvestmentParams inv;
  const ClosedFormControl l(EtfKind::letf, p, {2.0, 0.0}, pol, inv);
  const ClosedFormControl v(EtfKind::vetf, p, {1.0, 0.0}, pol, inv);

  // (a) pathwise wealth gap on a monthly record grid, two step sizes
  double gap[2];
  for (int r = 0; r < 2; ++r) {
    SimulationConfig cfg;
    cfg.n_paths = 10'000;
    cfg.steps_per_year = 252 * (r + 1);
    cfg.record_every = 21 * (r + 1);
    cfg.seed = 7;
    const auto e = simulate_controlled_paths({&l, &v}, cfg);
    gap[r] = 0.0;
    for (std::size_t i = 0; i < e[0].wealth.size(); ++i)
      gap[r] = std::max(gap[r], std::abs(e[0].wealth[i] - e[1].wealth[i]) / inv.w0);
  }
  const bool ok_a = gap[0] < 1e-2 && gap[1] < gap[0];

  // (b) control ratio at random equal states
  Rng rng = substream(7, Stream::fuzz, 4);
  std::uniform_real_distribution<double> ut(0.0, inv.T), uw(20.0, 600.0), uh(50.0, 400.0);
  double worst_b = 0.0;
  for (int i = 0; i < 100'000; ++i) {
    const double t = ut(rng), W = uw(rng), Wh = uh(rng);
    const double fl = l.fraction(t, W, Wh);
    if (fl == 0.0) continue;
    worst_b = std::max(worst_b, std::abs(v.fraction(t, W, Wh) / fl - 2.0));
  }
  const double eps = std::numeric_limits<double>::epsilon();
  const bool ok_b = worst_b <= 64.0 * eps;

  // (c) Monte Carlo IRs against the analytic value
  const double ir_exact = ir_zero_cost(p, inv.T);
  auto irs = [&](std::size_t n) {
    SimulationConfig cfg;
    cfg.n_paths = n;
    cfg.record_every = 1 << 30;
    cfg.seed = 7;
    const auto e = simulate_controlled_paths({&l, &v}, cfg);
    return std::pair{information_ratio({e[0].terminal_wealth(), e[0].terminal_benchmark()}),
                     information_ratio({e[1].terminal_wealth(), e[1].terminal_benchmark()})};
  };
  const auto [il4, iv4] = irs(10'000);
  const auto [il6, iv6] = irs(1'000'000);
  auto dev = [&](double a, double b) {
    return std::max(std::abs(a / ir_exact - 1.0), std::abs(b / ir_exact - 1.0));
  };
  // The stated 1e4-path run and a 1e6-path run must both be within 5%.
  const double dev4 = dev(il4, iv4), dev6 = dev(il6, iv6);
  const bool ok_c = dev4 <= 0.05 && dev6 <= 0.05;
  const double secs = seconds_since(t0);
  return {ok_a && ok_b && ok_c && secs < 300.0,
          fmt("(a) max|Wl-Wv|/w0 = %.2e at 252/yr, %.2e at 504/yr [%s]; (b) max|ratio-2| = %.1e "
              "[%s]; (c) IR exact %.4f, letf/vetf MC 1e4 paths %.4f/%.4f, 1e6 paths %.4f/%.4f, max dev "
              "%.2f%%/%.2f%% [%s]; %.0fs",
              gap[0], gap[1], ok_a ? "ok" : "fail", worst_b, ok_b ? "ok" : "fail", ir_exact, il4,
              iv4, il6, iv6, 100.0 * dev4, 100.0 * dev6, ok_c ? "ok" : "fail", secs)};
}

Outcome lump_sum_optima() {
  const auto t0 = Clock::now();
  LumpSumScenario sc;
  sc.b = 0.03;
  const std::size_t n = 200'000;
  const auto l20 = grid_search_ir_optimal(EtfKind::letf, 20.0, sc, n, 2024);
  const auto v20 = grid_search_ir_optimal(EtfKind::vetf, 20.0, sc, n, 2024);
  const auto l50 = grid_search_ir_optimal(EtfKind::letf, 50.0, sc, n, 2024);
  const auto v50 = grid_search_ir_optimal(EtfKind::vetf, 50.0, sc, n, 2024);
  const bool ok = std::abs(l20.p_star - 0.483) <= 0.05 && std::abs(v20.p_star - 1.00) <= 0.05 &&
                  std::abs(l50.p_star - 0.701) <= 0.05 && std::abs(v50.p_star - 1.20) <= 0.05;
  const double secs = seconds_since(t0);
  return {ok && secs < 300.0,
          fmt("gamma 20: p_l*=%.3f (0.483) p_v*=%.3f (1.00); gamma 50: p_l*=%.3f (0.701) "
              "p_v*=%.3f (1.20); tol 0.05, %.0fs",
              l20.p_star, v20.p_star, l50.p_star, v50.p_star, secs)};
}

Outcome feasibility_fuzz() {
  Rng rng = substream(6, Stream::fuzz, 6);
  std::normal_distribution<double> z(0.0, 6.0);
  std::uniform_real_distribution<double> pm(1.0, 10.0);
  std::uniform_int_distribution<int> na(2, 6);
  std::size_t bad = 0, insolvent = 0;
  double worst_sum = 0.0;
  for (int i = 0; i < 1'000'000; ++i) {
    std::vector<double> raw(static_cast<std::size_t>(na(rng)));
    for (auto& x : raw) x = z(rng);
    const double W = z(rng) * 30.0 + 60.0;  // mostly solvent, some insolvent
    const double p_max = pm(rng);
    const Allocation a = leverage_feasible_output(raw, W, p_max);
    if (a.p.size() != raw.size()) {
      ++bad;
      continue;
    }
    if (W < 0.0) {
      ++insolvent;
      bool e1 = a.p[0] == 1.0;
      for (std::size_t k = 1; k < a.p.size(); ++k) e1 = e1 && a.p[k] == 0.0;
      bad += !e1;
      continue;
    }
    double sum = 0.0, longs = 0.0;
    bool bounds = true;
    for (std::size_t k = 0; k < a.p.size(); ++k) {
      sum += a.p[k];
      if (k > 0) {
        bounds = bounds && a.p[k] >= 0.0;
        longs += a.p[k];
      }
    }
    bounds = bounds && longs <= p_max && a.p[0] >= 1.0 - p_max && a.p[0] <= 1.0;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    bad += !bounds || std::abs(sum - 1.0) > 1e-12;
  }
  return {bad == 0, fmt("1e6 draws (%zu insolvent): %zu violations, max|sum-1| = %.1e", insolvent,
                        bad, worst_sum)};
}

Outcome gradient_check() {
  // Lognormal fund with rare crashes, so some paths cross the insolvency gate.
  const std::size_t paths = 64, steps = 40;
  const double dt = 0.25;
  ReturnsPanel panel;
  panel.labels = {"T30", "Market"};
  panel.n_paths = paths;
  panel.n_steps = steps;
  panel.dt = dt;
  Rng rng = substream(21, Stream::fuzz, 7);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  for (std::size_t i = 0; i < paths * steps; ++i) {
    panel.gross.push_back(std::exp(0.01 * dt));
    double g = std::exp(0.06 * dt + 0.2 * std::sqrt(dt) * z(rng));
    if (u(rng) < 0.03) g *= 0.25;
    panel.gross.push_back(g);
  }
  RolloutScenario sc;
  sc.inv.q = 1.25;
  sc.inv.gamma = 60.0;
  sc.inv.p_max = 3.0;
  sc.inv.b = 0.03;
  sc.investor_assets = {0, 1};
  sc.benchmark_assets = {0, 1};
  sc.benchmark_weights = {0.3, 0.7};
  NetworkConfig nc;
  nc.n_assets = 2;
  nc.wealth_scale = 110.0;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    PolicyParams pol = init_policy(nc, 500 + s, 3.0);
    Rng tr = substream(s, Stream::fuzz, 8);
    std::normal_distribution<double> jitter(0.0, 0.5);
    for (auto& th : pol.theta) th += jitter(tr);
    const LossGradient lg = loss_and_gradient(pol, panel, sc);
    double gmax = 0.0, emax = 0.0;
    for (double g : lg.grad) gmax = std::max(gmax, std::abs(g));
    for (std::size_t i = 0; i < pol.theta.size(); ++i) {
      PolicyParams up = pol, dn = pol;
      const double h = 1e-6 * std::max(1.0, std::abs(pol.theta[i]));
      up.theta[i] += h;
      dn.theta[i] -= h;
      const double fd = (loss(up, panel, sc) - loss(dn, panel, sc)) / (2.0 * h);
      emax = std::max(emax, std::abs(fd - lg.grad[i]));
    }
    worst = std::max(worst, emax / gmax);
  }
  return {worst < 1e-5,
          fmt("10 random theta, %zu params: max relative error %.2e (limit 1e-5)",
              nc.n_params(), worst)};
}

Outcome nn_vs_closed_form() {
  const auto t0 = Clock::now();
  const KouParams gbm = KouParams::calibrated_gbm();
  const double dt = 1.0 / 12.0;
  const ReturnsPanel panel = model_panel(gbm, EtfSpec{1.0, 0.0}, EtfSpec{2.0, 0.0}, 100'000,
                                         10.0, dt, 8);
  RolloutScenario sc;
  sc.inv.q = 5.0 * dt;
  sc.inv.gamma = 125.0;
  sc.inv.p_max = 10.0;
  sc.inv.b = 0.0;
  sc.investor_assets = {panel.asset_index("T30"), panel.asset_index("VETF")};
  sc.benchmark_assets = {panel.asset_index("T30"), panel.asset_index("Market")};
  sc.benchmark_weights = {0.3, 0.7};

  InvestmentParams ci;
  ci.p_max = 10.0;
  const ClosedFormControl cf(EtfKind::vetf, gbm, EtfSpec{1.0, 0.0}, BenchmarkPolicy::constant(0.7),
                             ci);
  const AllocationRule rule = closed_form_rule(cf);
  RolloutScenario free = sc;
  free.insolvency_gate = false;
  const double l_cf = loss_of_rule(rule, panel, free);
  const double l_cf_gated = loss_of_rule(rule, panel, sc);
  const AllocationRule clamped = [&](double t, double W, double Wh, double* p) {
    rule(t, W, Wh, p);
    const double risky = std::clamp(p[1], 0.0, sc.inv.p_max);
    p[0] = 1.0 - risky;
    p[1] = risky;
  };
  const double l_clamped = loss_of_rule(clamped, panel, sc);

  NetworkConfig nc;
  nc.n_assets = 2;
  nc.wealth_scale = wealth_scale(100.0, 10.0, panel, sc.investor_assets[0]);
  OptimizerConfig oc;
  oc.seed = 8;
  const TrainResult r = train(init_policy(nc, 8, sc.inv.p_max), panel, sc, oc);
  const double l_nn = loss(r.policy, panel, sc);
  const double ratio = l_nn / l_cf;
  const double secs = seconds_since(t0);
  return {std::abs(ratio - 1.0) <= 0.05 && secs < 1800.0,
          fmt("1e5 GBM paths monthly, %zu Adam steps: NN loss %.1f vs closed form %.1f, ratio "
              "%.3f (limit 1 +/- 0.05); closed form inside Z: gated %.1f, clamped %.1f; best "
              "constant mix %.1f; %.0fs",
              oc.steps, l_nn, l_cf, ratio, l_cf_gated, l_clamped, r.constant_mix.loss, secs)};
}

Outcome bootstrap_statistics() {
  const ScenarioConfig cfg;
  const AlignedSource src = build_source(cfg);
  BootstrapConfig bc;
  bc.expected_block_size = 3.0;
  bc.n_paths = 10'000;
  bc.horizon = 10.0;
  bc.rebalance_interval = 1.0 / 12.0;
  bc.seed = 9;
  const ReturnsPanel panel = stationary_block_bootstrap(src, bc);
  double worst_z = 0.0;
  for (std::size_t a = 0; a < src.n_assets(); ++a) {
    const auto col = src.column(a);
    const double n = static_cast<double>(col.size());
    double m = 0, v = 0;
    for (double x : col) m += x;
    m /= n;
    for (double x : col) v += (x - m) * (x - m);
    v /= n;
    // Per-path averages are independent, so their spread gives the standard error.
    std::vector<double> pm(panel.n_paths), pv(panel.n_paths);
    for (std::size_t j = 0; j < panel.n_paths; ++j) {
      double s = 0, q = 0;
      for (std::size_t k = 0; k < panel.n_steps; ++k) {
        const double x = panel.at(j, k, a) - 1.0;
        s += x;
        q += (x - m) * (x - m);
      }
      pm[j] = s / static_cast<double>(panel.n_steps);
      pv[j] = q / static_cast<double>(panel.n_steps);
    }
    auto z = [](const std::vector<double>& x, double target) {
      double mu = 0, var = 0;
      for (double y : x) mu += y;
      mu /= static_cast<double>(x.size());
      for (double y : x) var += (y - mu) * (y - mu);
      var /= static_cast<double>(x.size() - 1);
      return std::abs(mu - target) / std::sqrt(var / static_cast<double>(x.size()));
    };
    worst_z = std::max({worst_z, z(pm, m), z(pv, v)});
  }
  BootstrapConfig full;
  full.expected_block_size = static_cast<double>(src.n_months());
  full.n_paths = 1;
  full.rebalance_interval = 1.0 / 12.0;
  full.horizon = static_cast<double>(src.n_months()) / 12.0;
  full.forced_start = 0;
  const ReturnsPanel one = stationary_block_bootstrap(src, full);
  bool exact = one.n_steps == src.n_months();
  for (std::size_t mth = 0; exact && mth < src.n_months(); ++mth)
    for (std::size_t a = 0; a < src.n_assets(); ++a) exact = exact && one.at(0, mth, a) == 1.0 + src.at(mth, a);
  return {worst_z <= 3.0 && exact,
          fmt("%zu assets, 1e4 paths, mean block 3: max |z| over means and variances = %.2f "
              "(limit 3); full-length block reproduces %zu months exactly: %s",
              src.n_assets(), worst_z, src.n_months(), exact ? "yes" : "no")};
}

Outcome end_to_end() {
  const auto t0 = Clock::now();
  ScenarioConfig cfg;
  cfg.train_scenarios = parse_train_scenarios("letf:1:0, vetf:1.5:0.03");
  const AlignedSource src = build_source(cfg);
  const ReturnsPanel panel = build_panel(cfg, src);
  const PanelSplit split = split_panel(panel, cfg.train_fraction);
  std::vector<EmpiricalCdf> cdfs;
  std::vector<double> prob;
  for (const auto& t : cfg.train_scenarios) {
    const RolloutScenario sc = rollout_scenario(cfg, t, split.train);
    NetworkConfig nc = cfg.network;
    nc.n_assets = 3;
    nc.T = cfg.invest.T;
    nc.wealth_scale = wealth_scale(cfg.invest.w0, cfg.invest.T, split.train, sc.investor_assets[0]);
    OptimizerConfig oc = cfg.optimizer;
    oc.seed = cfg.seed;
    const TrainResult r = train(init_policy(nc, cfg.seed, t.p_max), split.train, sc, oc);
    const PathSample s = evaluate_policy(r.policy, split.test, rollout_scenario(cfg, t, split.test));
    cdfs.push_back(empirical_cdf(s.terminal().W));
    prob.push_back(outperformance_curve(s).back());
  }
  const DominanceReport d = partial_dominance(cdfs[0], cdfs[1], 0.02);
  const bool ok = d.dominates_above_floor && d.left_tail_violation && prob[0] > prob[1];
  return {ok, fmt("held-out %zu paths: LETF dominates above 2%% floor (W=%.1f): %s, left-tail "
                  "violation: %s, P[W>What] LETF %.3f vs VETF %.3f; %.0fs",
                  split.test.n_paths, d.floor_wealth, d.dominates_above_floor ? "yes" : "no",
                  d.left_tail_violation ? "yes" : "no", prob[0], prob[1], seconds_since(t0))};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto t0 = Clock::now();
  ScenarioConfig cfg;
  cfg.paths = 4000;
  cfg.lumpsum_grid_step = 0.01;
  cfg.optimizer.steps = 300;
  cfg.optimizer.batch = 256;
  cfg.train_scenarios = parse_train_scenarios("letf:1:0, vetf:1.5:0.03");
  std::ostringstream log;
  std::map<std::string, std::string> runs[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path d = fs::temp_directory_path() / ("letf_acceptance_det" + std::to_string(k));
    fs::remove_all(d);
    cmd_moments(cfg, d / "moments", log);
    cmd_lumpsum(cfg, std::nullopt, d / "lumpsum", log);
    cmd_closedform(cfg, d / "closedform", log);
    cmd_bootstrap(cfg, d / "bootstrap", log);
    cmd_train(cfg, d / "nn", log);
    cmd_evaluate(cfg, d / "nn", log);
    cmd_replay(cfg, d / "nn", log);
    for (const auto& e : fs::recursive_directory_iterator(d))
      if (e.is_regular_file()) runs[k][fs::relative(e.path(), d).string()] = slurp(e.path());
    fs::remove_all(d);
  }
  std::size_t diff = 0;
  for (const auto& [name, bytes] : runs[0]) {
    const auto it = runs[1].find(name);
    diff += it == runs[1].end() || it->second != bytes;
  }
  diff += runs[0].size() != runs[1].size();
  return {diff == 0 && !runs[0].empty(),
          fmt("7 subcommands run twice: %zu artifacts, %zu differ; %.0fs", runs[0].size(), diff,
              seconds_since(t0))};
}

const std::function<Outcome()> kCriteria[] = {
    kappa_reproduction, kappa_monte_carlo,    ode_agreement, zero_cost_equivalence,
    lump_sum_optima,    feasibility_fuzz,     gradient_check, nn_vs_closed_form,
    bootstrap_statistics, end_to_end,         determinism,
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
  if (only < 0 || only > 11) {
    std::fprintf(stderr, "criterion must be 1..11\n");
    return 2;
  }
  bool all_pass = true;
  for (int n = 1; n <= 11; ++n) {
    if (only != 0 && n != only) continue;
    Outcome o{false, ""};
    try {
      o = kCriteria[n - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
