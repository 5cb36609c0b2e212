#include "letf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "letf/artifacts.hpp"
#include "letf/error.hpp"
#include "letf/rng.hpp"

namespace letf {

void OutcomeSample::validate() const {
  if (W.size() != W_hat.size()) throw ConfigError("outcome sample is not paired");
  for (std::size_t i = 0; i < W.size(); ++i)
    if (!std::isfinite(W[i]) || !std::isfinite(W_hat[i]))
      throw DomainError("outcome sample has a non-finite wealth");
}

void PathSample::validate() const {
  const std::size_t nt = times.size();
  if (W.size() != n_paths * nt || W_hat.size() != n_paths * nt)
    throw ConfigError("path sample wealth matrices do not match paths x times");
  if (!allocation.empty() && (nt == 0 || allocation.size() != n_paths * (nt - 1)))
    throw ConfigError("path sample allocation matrix does not match paths x decisions");
}

OutcomeSample PathSample::terminal() const {
  validate();
  OutcomeSample o;
  const std::size_t nt = times.size();
  if (nt == 0) return o;
  for (std::size_t j = 0; j < n_paths; ++j) {
    o.W.push_back(W[j * nt + nt - 1]);
    o.W_hat.push_back(W_hat[j * nt + nt - 1]);
  }
  return o;
}

double information_ratio(const OutcomeSample& s) {
  s.validate();
  const std::size_t n = s.size();
  if (n < 2) throw UndefinedStatisticError("information ratio needs at least two paths");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += s.W[i] - s.W_hat[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = s.W[i] - s.W_hat[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  // Rounding leaves ~1e-16 relative noise in a constant difference.
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean))))
    throw UndefinedStatisticError("information ratio undefined: W - What has zero dispersion");
  return mean / sd;
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
  for (double v : sorted_)
    if (std::isnan(v)) throw DomainError("empirical CDF of a sample containing NaN");
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double x) const {
  if (sorted_.empty()) throw DomainError("empirical CDF of an empty sample");
  const auto k = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
  return static_cast<double>(k) / static_cast<double>(sorted_.size());
}

EmpiricalCdf empirical_cdf(std::vector<double> values) { return EmpiricalCdf(std::move(values)); }

std::vector<double> outperformance_curve(const PathSample& s) {
  s.validate();
  const std::size_t nt = s.times.size();
  std::vector<double> out(nt, 0.0);
  if (s.n_paths == 0) return out;
  for (std::size_t n = 0; n < nt; ++n) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < s.n_paths; ++j) k += s.W[j * nt + n] > s.W_hat[j * nt + n];
    out[n] = static_cast<double>(k) / static_cast<double>(s.n_paths);
  }
  return out;
}

double percentile(std::vector<double> values, double level) {
  if (values.empty()) throw DomainError("percentile of an empty sample");
  if (!(level >= 0.0 && level <= 100.0)) throw DomainError("percentile level must be in [0, 100]");
  const std::size_t n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) / 100.0 - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   values.end());
  return values[rank - 1];
}

PercentileCurves allocation_percentiles(const std::vector<double>& times, std::size_t n_paths,
                                        const std::vector<double>& allocation,
                                        const std::vector<double>& levels) {
  const std::size_t nt = times.size();
  if (allocation.size() != n_paths * nt)
    throw ConfigError("allocation matrix does not match paths x times");
  if (n_paths == 0) throw DomainError("percentiles of an empty allocation sample");
  PercentileCurves c{levels, times, std::vector<double>(nt * levels.size())};
  std::vector<double> col(n_paths);
  for (std::size_t n = 0; n < nt; ++n) {
    for (std::size_t j = 0; j < n_paths; ++j) col[j] = allocation[j * nt + n];
    for (std::size_t l = 0; l < levels.size(); ++l)
      c.values[n * levels.size() + l] = percentile(col, levels[l]);
  }
  return c;
}

DominanceReport partial_dominance(const EmpiricalCdf& a, const EmpiricalCdf& b,
                                  double quantile_floor) {
  if (a.size() == 0 || b.size() == 0) throw DomainError("dominance test needs nonempty samples");
  if (!(quantile_floor >= 0.0 && quantile_floor < 1.0))
    throw DomainError("quantile floor must be in [0, 1)");
  std::vector<double> pooled;
  pooled.reserve(a.size() + b.size());
  std::merge(a.sorted().begin(), a.sorted().end(), b.sorted().begin(), b.sorted().end(),
             std::back_inserter(pooled));
  DominanceReport r;
  r.quantile_floor = quantile_floor;
  r.floor_wealth = percentile(pooled, 100.0 * quantile_floor);
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

  // Walk both sorted samples once; F values at each distinct pooled point.
  std::vector<int> sign(pooled.size());
  std::size_t ia = 0, ib = 0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    while (ia < a.size() && a.sorted()[ia] <= pooled[k]) ++ia;
    while (ib < b.size() && b.sorted()[ib] <= pooled[k]) ++ib;
    // Compare ia/na with ib/nb exactly in integers-as-doubles.
    const double lhs = static_cast<double>(ia) * nb, rhs = static_cast<double>(ib) * na;
    sign[k] = lhs > rhs ? 1 : (lhs < rhs ? -1 : 0);
  }
  r.dominates_above_floor = true;
  int last = 0;
  for (std::size_t k = 0; k < pooled.size(); ++k) {
    if (sign[k] != 0) {
      if (last != 0 && sign[k] != last) r.crossing_points.push_back(pooled[k]);
      last = sign[k];
    }
    if (sign[k] > 0) {
      if (pooled[k] >= r.floor_wealth)
        r.dominates_above_floor = false;
      else
        r.left_tail_violation = true;
    }
  }
  r.dominant_hi = pooled.back();
  std::size_t k = pooled.size();
  while (k > 0 && sign[k - 1] <= 0) --k;
  r.dominant_lo = k < pooled.size() ? pooled[k] : pooled.back();
  return r;
}

namespace {

std::vector<ReplayTrace> replay_impl(const std::function<RolloutTrace(const ReturnsPanel&)>& run,
                                     const AlignedSource& source, double rebalance_interval,
                                     const std::vector<HistoricalWindow>& windows) {
  std::vector<ReplayTrace> out;
  for (const auto& w : windows) {
    const AlignedSource s = source.slice(w.first_year, w.last_year);
    const ReturnsPanel p = contiguous_panel(s, rebalance_interval);
    const RolloutTrace tr = run(p);
    ReplayTrace rt{w.name, {}, tr.wealth, tr.benchmark};
    for (std::size_t n = 0; n < tr.wealth.size(); ++n)
      rt.times.push_back(static_cast<double>(n) * p.dt);
    out.push_back(std::move(rt));
  }
  return out;
}

PathSample collect(const std::function<RolloutTrace(std::size_t)>& run, const ReturnsPanel& panel,
                   std::size_t n_invest) {
  PathSample s;
  const std::size_t nt = panel.n_steps + 1;
  s.n_paths = panel.n_paths;
  for (std::size_t n = 0; n < nt; ++n) s.times.push_back(static_cast<double>(n) * panel.dt);
  s.W.resize(panel.n_paths * nt);
  s.W_hat.resize(panel.n_paths * nt);
  s.allocation.resize(panel.n_paths * panel.n_steps);
  parallel_for(panel.n_paths, [&](std::size_t j) {
    const RolloutTrace tr = run(j);
    std::copy(tr.wealth.begin(), tr.wealth.end(), s.W.begin() + static_cast<std::ptrdiff_t>(j * nt));
    std::copy(tr.benchmark.begin(), tr.benchmark.end(),
              s.W_hat.begin() + static_cast<std::ptrdiff_t>(j * nt));
    for (std::size_t n = 0; n < panel.n_steps; ++n)
      s.allocation[j * panel.n_steps + n] = tr.allocations[n * n_invest + n_invest - 1];
  });
  return s;
}

}  // namespace

std::vector<ReplayTrace> historical_replay(const PolicyParams& policy, const AlignedSource& source,
                                           const RolloutScenario& sc, double rebalance_interval,
                                           const std::vector<HistoricalWindow>& windows) {
  return replay_impl([&](const ReturnsPanel& p) { return wealth_rollout(policy, p, 0, sc); },
                     source, rebalance_interval, windows);
}

std::vector<ReplayTrace> historical_replay(const AllocationRule& rule, const AlignedSource& source,
                                           const RolloutScenario& sc, double rebalance_interval,
                                           const std::vector<HistoricalWindow>& windows) {
  return replay_impl([&](const ReturnsPanel& p) { return rollout_with_rule(rule, p, 0, sc); },
                     source, rebalance_interval, windows);
}

PathSample evaluate_policy(const PolicyParams& policy, const ReturnsPanel& panel,
                           const RolloutScenario& sc) {
  return collect([&](std::size_t j) { return wealth_rollout(policy, panel, j, sc); }, panel,
                 sc.investor_assets.size());
}

PathSample evaluate_rule(const AllocationRule& rule, const ReturnsPanel& panel,
                         const RolloutScenario& sc) {
  return collect([&](std::size_t j) { return rollout_with_rule(rule, panel, j, sc); }, panel,
                 sc.investor_assets.size());
}

void write_cdf_csv(std::ostream& out, const EmpiricalCdf& cdf) {
  out << "x,F\n";
  const auto& v = cdf.sorted();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i + 1 < v.size() && v[i + 1] == v[i]) continue;
    out << format_number(v[i]) << ','
        << format_number(static_cast<double>(i + 1) / static_cast<double>(v.size())) << '\n';
  }
}

void write_curve_csv(std::ostream& out, const std::vector<double>& times,
                     const std::vector<double>& probs) {
  if (times.size() != probs.size()) throw ConfigError("curve times and values differ in length");
  out << "t,prob\n";
  for (std::size_t i = 0; i < times.size(); ++i)
    out << format_number(times[i]) << ',' << format_number(probs[i]) << '\n';
}

void write_percentiles_csv(std::ostream& out, const PercentileCurves& c) {
  out << 't';
  for (double l : c.levels) {
    const int li = static_cast<int>(std::lround(l));
    out << ",p" << (li < 10 ? "0" : "") << li;
  }
  out << '\n';
  for (std::size_t n = 0; n < c.times.size(); ++n) {
    out << format_number(c.times[n]);
    for (std::size_t l = 0; l < c.levels.size(); ++l) out << ',' << format_number(c.at(n, l));
    out << '\n';
  }
}

void write_replay_csv(std::ostream& out, const std::vector<ReplayTrace>& traces) {
  out << "window,t,W,W_hat\n";
  for (const auto& tr : traces)
    for (std::size_t n = 0; n < tr.times.size(); ++n)
      out << tr.window << ',' << format_number(tr.times[n]) << ',' << format_number(tr.W[n]) << ','
          << format_number(tr.W_hat[n]) << '\n';
}

void write_dominance_csv(std::ostream& out, const DominanceReport& r) {
  out << "key,value\n";
  out << "quantile_floor," << format_number(r.quantile_floor) << '\n';
  out << "floor_wealth," << format_number(r.floor_wealth) << '\n';
  out << "dominates_above_floor," << (r.dominates_above_floor ? 1 : 0) << '\n';
  out << "left_tail_violation," << (r.left_tail_violation ? 1 : 0) << '\n';
  out << "dominant_lo," << format_number(r.dominant_lo) << '\n';
  out << "dominant_hi," << format_number(r.dominant_hi) << '\n';
  for (double c : r.crossing_points) out << "crossing," << format_number(c) << '\n';
}

}  // namespace letf
