#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "letf/bootstrap_data.hpp"
#include "letf/nn_solver.hpp"

namespace letf {

// Terminal wealth of investor and benchmark, paired by path.
struct OutcomeSample {
  std::vector<double> W;
  std::vector<double> W_hat;

  void validate() const;
  std::size_t size() const { return W.size(); }
};

// Wealth at each rebalancing date, [path][time], plus the risky weight per
// decision date if recorded.
struct PathSample {
  std::vector<double> times;
  std::size_t n_paths = 0;
  std::vector<double> W;
  std::vector<double> W_hat;
  std::vector<double> allocation;  // ETF weight [path][decision], decisions = times.size() - 1

  void validate() const;
  OutcomeSample terminal() const;
};

// mean(W - What) / stdev(W - What), stdev with the n - 1 divisor.
double information_ratio(const OutcomeSample& s);

// Right-continuous empirical CDF.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> values);
  double operator()(double x) const;
  const std::vector<double>& sorted() const { return sorted_; }
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

EmpiricalCdf empirical_cdf(std::vector<double> values);

// P[W(t_n) > What(t_n)] per date; ties count as not outperforming.
std::vector<double> outperformance_curve(const PathSample& s);

// Nearest-rank percentile: the ceil(level * n / 100)-th smallest value
// (the smallest for level 0). For an even two-point sample the median is the
// lower value.
double percentile(std::vector<double> values, double level);

struct PercentileCurves {
  std::vector<double> levels;
  std::vector<double> times;
  std::vector<double> values;  // [time][level]

  double at(std::size_t time, std::size_t level) const { return values[time * levels.size() + level]; }
};

// Per-time percentiles of a [path][time] matrix.
PercentileCurves allocation_percentiles(const std::vector<double>& times, std::size_t n_paths,
                                        const std::vector<double>& allocation,
                                        const std::vector<double>& levels = {5, 20, 50, 80, 95});

struct DominanceReport {
  double quantile_floor = 0.02;
  double floor_wealth = 0.0;  // pooled quantile at quantile_floor
  bool dominates_above_floor = false;
  std::vector<double> crossing_points;
  // [lo, hi]: largest upper interval of the pooled support with F_A <= F_B.
  double dominant_lo = 0.0;
  double dominant_hi = 0.0;
  bool left_tail_violation = false;
};

// Does A's CDF lie on or below B's above the pooled quantile floor?
// Compared at every pooled sample point, where both step functions jump.
DominanceReport partial_dominance(const EmpiricalCdf& a, const EmpiricalCdf& b,
                                  double quantile_floor = 0.02);

struct ReplayTrace {
  std::string window;
  std::vector<double> times;
  std::vector<double> W;
  std::vector<double> W_hat;
};

// One rollout per historical window on the source months in calendar order.
std::vector<ReplayTrace> historical_replay(const PolicyParams& policy, const AlignedSource& source,
                                           const RolloutScenario& sc, double rebalance_interval,
                                           const std::vector<HistoricalWindow>& windows);
std::vector<ReplayTrace> historical_replay(const AllocationRule& rule, const AlignedSource& source,
                                           const RolloutScenario& sc, double rebalance_interval,
                                           const std::vector<HistoricalWindow>& windows);

// Rolls a policy over every path and collects the wealth and allocation
// matrices. The recorded allocation is the weight of the last investor asset,
// which is where scenarios put the ETF.
PathSample evaluate_policy(const PolicyParams& policy, const ReturnsPanel& panel,
                           const RolloutScenario& sc);
PathSample evaluate_rule(const AllocationRule& rule, const ReturnsPanel& panel,
                         const RolloutScenario& sc);

// CSV emitters.
void write_cdf_csv(std::ostream& out, const EmpiricalCdf& cdf);
void write_curve_csv(std::ostream& out, const std::vector<double>& times,
                     const std::vector<double>& probs);
void write_percentiles_csv(std::ostream& out, const PercentileCurves& c);
void write_replay_csv(std::ostream& out, const std::vector<ReplayTrace>& traces);
void write_dominance_csv(std::ostream& out, const DominanceReport& r);

}  // namespace letf
