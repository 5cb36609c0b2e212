#include "letf/lump_sum.hpp"

#include <cmath>

#include "letf/error.hpp"

namespace letf {

namespace {

double cash_growth(double p, const LumpSumScenario& sc) {
  const double rate = sc.model.r + (p > 1.0 ? sc.b : 0.0);
  return std::exp(rate * sc.dt);
}

}  // namespace

std::vector<double> LumpSumScenario::make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw ConfigError("grid needs lo <= hi and step > 0");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
  std::vector<double> g(n + 1);
  for (std::size_t i = 0; i <= n; ++i) g[i] = lo + static_cast<double>(i) * step;
  return g;
}

void LumpSumScenario::validate() const {
  if (!(dt > 0.0)) throw ConfigError("lump-sum dt must be positive");
  if (!(p_hat_s >= 0.0 && p_hat_s <= 1.0)) throw ConfigError("p_hat_s must lie in [0, 1]");
  if (!(w0 > 0.0)) throw ConfigError("w0 must be positive");
  if (!(b >= 0.0)) throw ConfigError("borrowing premium must be nonnegative");
  if (grid.empty()) throw ConfigError("lump-sum grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw ConfigError("lump-sum grid must be finite");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ConfigError("lump-sum grid must be sorted");
  }
  vetf.validate();
  letf.validate();
}

double benchmark_payoff(double p_hat_s, double index_gross, double r, double dt) {
  return (1.0 - p_hat_s) * std::exp(r * dt) + p_hat_s * index_gross;
}

double vetf_investor_payoff(double p_v, double index_gross, const LumpSumScenario& sc) {
  return (1.0 - p_v) * cash_growth(p_v, sc) +
         p_v * vetf_gross_return(index_gross, sc.dt, sc.vetf);
}

double letf_investor_payoff(double p_l, double index_gross, const std::vector<JumpEvent>& jumps,
                            const LumpSumScenario& sc) {
  return (1.0 - p_l) * cash_growth(p_l, sc) +
         p_l * letf_gross_return(index_gross, jumps, sc.dt, sc.letf, sc.model);
}

GridSearchResult grid_search_ir_optimal(EtfKind kind, double gamma, const LumpSumScenario& sc,
                                        std::size_t n_paths, std::uint64_t seed) {
  if (sc.grid.empty()) throw ConfigError("lump-sum grid is empty");
  if (n_paths == 0) throw ConfigError("grid search needs at least one path");
  // Per path: ETF gross return and target wealth.
  std::vector<double> etf(n_paths), target(n_paths);
  const double beta = kind == EtfKind::letf ? sc.letf.beta : 1.0;
  parallel_for(n_paths, [&](std::size_t j) {
    Rng rng = substream(seed, Stream::index_paths, j);
    const IntervalDraw d = simulate_interval(sc.model, sc.dt, beta, rng);
    etf[j] = kind == EtfKind::letf
                 ? letf_gross_return(d.index_gross, d.jumps, sc.dt, sc.letf, sc.model)
                 : vetf_gross_return(d.index_gross, sc.dt, sc.vetf);
    target[j] = sc.w0 * benchmark_payoff(sc.p_hat_s, d.index_gross, sc.model.r, sc.dt) + gamma;
  });

  GridSearchResult res;
  res.kind = kind;
  res.gamma = gamma;
  res.objective_curve.assign(sc.grid.size(), 0.0);
  parallel_for(sc.grid.size(), [&](std::size_t i) {
    const double p = sc.grid[i];
    const double cash = sc.w0 * (1.0 - p) * cash_growth(p, sc);
    double sum = 0.0;
    for (std::size_t j = 0; j < n_paths; ++j) {
      const double e = cash + sc.w0 * p * etf[j] - target[j];
      sum += e * e;
    }
    res.objective_curve[i] = sum / static_cast<double>(n_paths);
  });
  res.argmin = 0;
  for (std::size_t i = 1; i < sc.grid.size(); ++i)
    if (res.objective_curve[i] < res.objective_curve[res.argmin]) res.argmin = i;
  res.p_star = sc.grid[res.argmin];
  res.objective = res.objective_curve[res.argmin];
  return res;
}

std::vector<PayoffPoint> payoff_diagram(const LumpSumScenario& sc, double p_l, double p_v,
                                        bool scatter, std::uint64_t seed, int draws_per_point) {
  if (draws_per_point < 1) throw ConfigError("draws_per_point must be >= 1");
  const std::size_t n = 320;
  const int draws = scatter ? draws_per_point : 1;
  std::vector<PayoffPoint> out;
  out.reserve((n + 1) * static_cast<std::size_t>(draws));
  for (std::size_t i = 0; i <= n; ++i) {
    const double x = 0.2 + 0.005 * static_cast<double>(i);
    const double v = vetf_investor_payoff(p_v, x, sc);
    const double bm = benchmark_payoff(sc.p_hat_s, x, sc.model.r, sc.dt);
    if (!scatter) {
      out.push_back({x, letf_investor_payoff(p_l, x, {}, sc), v, bm});
      continue;
    }
    Rng rng = substream(seed, Stream::payoff_scatter, i);
    std::poisson_distribution<int> count(sc.model.has_jumps() ? sc.model.lambda * sc.dt : 1.0);
    std::uniform_real_distribution<double> when(0.0, sc.dt);
    for (int k = 0; k < draws; ++k) {
      std::vector<JumpEvent> jumps;
      if (sc.model.has_jumps()) {
        const int m = count(rng);
        for (int a = 0; a < m; ++a) {
          JumpEvent ev;
          ev.time = when(rng);
          ev.xi_s = sample_jump_multiplier(sc.model, rng);
          ev.xi_l = letf_jump_multiplier(ev.xi_s, sc.letf.beta);
          jumps.push_back(ev);
        }
      }
      out.push_back({x, letf_investor_payoff(p_l, x, jumps, sc), v, bm});
    }
  }
  return out;
}

}  // namespace letf
