#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "letf/closed_form.hpp"
#include "letf/market_models.hpp"

namespace letf {

struct LumpSumScenario {
  double dt = 0.25;
  double p_hat_s = 0.7;
  double w0 = 100.0;
  KouParams model = KouParams::calibrated_kou();
  EtfSpec vetf{1.0, 0.0006};
  EtfSpec letf{2.0, 0.0089};
  double b = 0.0;  // annual borrowing premium when p > 1
  std::vector<double> grid = make_grid(0.0, 2.0, 0.001);

  void validate() const;
  static std::vector<double> make_grid(double lo, double hi, double step);
};

double benchmark_payoff(double p_hat_s, double index_gross, double r, double dt);
double vetf_investor_payoff(double p_v, double index_gross, const LumpSumScenario& sc);
double letf_investor_payoff(double p_l, double index_gross, const std::vector<JumpEvent>& jumps,
                            const LumpSumScenario& sc);

struct GridSearchResult {
  EtfKind kind = EtfKind::letf;
  double gamma = 0.0;
  std::size_t argmin = 0;
  double p_star = 0.0;
  double objective = 0.0;
  std::vector<double> objective_curve;  // one value per grid point
};

// Minimizes the sample mean of (w0 W(dt; p) - [w0 What(dt) + gamma])^2 over the
// grid, every grid point seeing the same simulated paths. Ties go to smaller p.
GridSearchResult grid_search_ir_optimal(EtfKind kind, double gamma, const LumpSumScenario& sc,
                                        std::size_t n_paths, std::uint64_t seed);

struct PayoffPoint {
  double index_gross;
  double letf;
  double vetf;
  double benchmark;
};

// Lattice 0.2, 0.205, ..., 1.8. With scatter, each lattice point gets
// `draws_per_point` LETF payoffs under freshly drawn jump lists; otherwise
// jumps are suppressed and there is one point per lattice value.
std::vector<PayoffPoint> payoff_diagram(const LumpSumScenario& sc, double p_l, double p_v,
                                        bool scatter, std::uint64_t seed,
                                        int draws_per_point = 1);

}  // namespace letf
