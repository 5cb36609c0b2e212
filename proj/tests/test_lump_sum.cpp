#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "letf/error.hpp"
#include "letf/lump_sum.hpp"

using namespace letf;

namespace {

LumpSumScenario calibrated(double b = 0.03) {
  LumpSumScenario sc;
  sc.b = b;
  return sc;
}

// Least-squares fit y = a + c x; returns max abs residual.
double linear_fit_residual(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double c = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double a = (sy - c * sx) / n;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(y[i] - a - c * x[i]));
  return worst;
}

}  // namespace

TEST(BenchmarkPayoff, Formula) {
  EXPECT_DOUBLE_EQ(benchmark_payoff(0.0, 1.3, 0.0031, 0.25), std::exp(0.0031 * 0.25));
  EXPECT_DOUBLE_EQ(benchmark_payoff(1.0, 1.1, 0.0031, 0.25), 1.1);
  EXPECT_DOUBLE_EQ(benchmark_payoff(0.7, 1.0, 0.0031, 0.25), 0.3 * std::exp(0.000775) + 0.7);
}

TEST(VetfPayoff, Cases) {
  const auto sc = calibrated();
  EXPECT_DOUBLE_EQ(vetf_investor_payoff(0.0, 0.7, sc), std::exp(0.0031 * 0.25));
  EXPECT_DOUBLE_EQ(vetf_investor_payoff(2.0, 0.0, sc), -std::exp((0.0031 + 0.03) * 0.25));
  // p = 1 sits on the no-premium side of the indicator.
  EXPECT_DOUBLE_EQ(vetf_investor_payoff(1.0, 1.1, sc), vetf_gross_return(1.1, 0.25, sc.vetf));
  const double just_over = vetf_investor_payoff(1.0 + 1e-9, 1.1, sc);
  EXPECT_LT(std::abs(just_over - vetf_investor_payoff(1.0, 1.1, sc)), 1e-6);
}

TEST(LetfPayoff, Cases) {
  const auto sc = calibrated();
  EXPECT_DOUBLE_EQ(letf_investor_payoff(0.0, 0.5, {}, sc), std::exp(0.0031 * 0.25));
  std::vector<JumpEvent> wipe{{0.1, 0.3, 0.5}};
  EXPECT_EQ(letf_investor_payoff(1.0, 0.3, wipe, sc), 0.0);
  for (double x : {0.2, 0.5, 1.0, 1.5})
    EXPECT_GE(letf_investor_payoff(0.6, x, wipe, sc), 0.4 * std::exp(0.0031 * 0.25) - 1e-15);
}

TEST(LetfPayoff, ConvexPowerCurveWithoutJumps) {
  LumpSumScenario sc = calibrated();
  sc.model = KouParams::calibrated_gbm();
  const double f = volatility_decay(0.25, 2.0, sc.model.r, sc.model.sigma) *
                   std::exp(-sc.letf.expense_ratio * 0.25);
  std::vector<double> xb, y;
  for (const auto& pt : payoff_diagram(sc, 0.5, 1.0, false, 1)) {
    const double want = 0.5 * std::exp(sc.model.r * 0.25) + 0.5 * f * pt.index_gross * pt.index_gross;
    EXPECT_NEAR(pt.letf, want, 1e-14);
    xb.push_back(pt.index_gross * pt.index_gross);
    y.push_back(pt.letf);
  }
  EXPECT_LT(linear_fit_residual(xb, y), 1e-12);
  for (std::size_t i = 1; i + 1 < y.size(); ++i) EXPECT_GT(y[i + 1] - 2 * y[i] + y[i - 1], 0.0);
}

TEST(VetfPayoff, LinearInIndex) {
  const auto sc = calibrated();
  std::vector<double> x, y;
  for (const auto& pt : payoff_diagram(sc, 0.5, 1.3, false, 1)) {
    x.push_back(pt.index_gross);
    y.push_back(pt.vetf);
  }
  EXPECT_LT(linear_fit_residual(x, y), 1e-12);
  EXPECT_EQ(x.size(), 321u);
  EXPECT_DOUBLE_EQ(x.front(), 0.2);
  EXPECT_DOUBLE_EQ(x.back(), 1.8);
}

TEST(PayoffDiagram, ScatterVariesWithJumps) {
  LumpSumScenario sc = calibrated();
  sc.model.lambda = 4.0;  // more jumps so the spread is visible at every point
  const auto pts = payoff_diagram(sc, 1.0, 1.0, true, 9, 10);
  EXPECT_EQ(pts.size(), 3210u);
  bool varies = false;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    if (pts[i].index_gross == pts[i + 1].index_gross && pts[i].letf != pts[i + 1].letf) varies = true;
  EXPECT_TRUE(varies);
  EXPECT_EQ(payoff_diagram(sc, 1.0, 1.0, true, 9, 10).size(), pts.size());
  const auto again = payoff_diagram(sc, 1.0, 1.0, true, 9, 10);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(again[i].letf, pts[i].letf);
}

TEST(GridSearch, EmptyGridRejected) {
  LumpSumScenario sc = calibrated();
  sc.grid.clear();
  EXPECT_THROW(grid_search_ir_optimal(EtfKind::letf, 20.0, sc, 10, 1), ConfigError);
  EXPECT_THROW(sc.validate(), ConfigError);
}

TEST(GridSearch, CalibratedOptima) {
  const auto sc = calibrated();
  const std::size_t n = 200000;
  const auto l20 = grid_search_ir_optimal(EtfKind::letf, 20.0, sc, n, 2024);
  const auto v20 = grid_search_ir_optimal(EtfKind::vetf, 20.0, sc, n, 2024);
  const auto l50 = grid_search_ir_optimal(EtfKind::letf, 50.0, sc, n, 2024);
  const auto v50 = grid_search_ir_optimal(EtfKind::vetf, 50.0, sc, n, 2024);
  EXPECT_NEAR(l20.p_star, 0.483, 0.05);
  EXPECT_NEAR(v20.p_star, 1.00, 0.05);
  EXPECT_NEAR(l50.p_star, 0.701, 0.05);
  EXPECT_NEAR(v50.p_star, 1.20, 0.05);
  for (const auto* pair : {&l20, &l50}) {
    const auto& v = pair == &l20 ? v20 : v50;
    const double ratio = v.p_star / pair->p_star;
    EXPECT_GE(ratio, 1.5);
    EXPECT_LE(ratio, 2.5);
  }
  // Discrete convexity of the VETF objective.
  for (const auto* v : {&v20, &v50}) {
    const auto& c = v->objective_curve;
    for (std::size_t i = 1; i + 1 < c.size(); ++i)
      EXPECT_GE(c[i + 1] - 2.0 * c[i] + c[i - 1], -1e-9 * c[i]) << i;
  }
}

TEST(GridSearch, CommonRandomNumbersDeterministic) {
  const auto sc = calibrated();
  const auto a = grid_search_ir_optimal(EtfKind::letf, 20.0, sc, 5000, 7);
  const auto b = grid_search_ir_optimal(EtfKind::letf, 20.0, sc, 5000, 7);
  EXPECT_EQ(a.objective_curve, b.objective_curve);
  EXPECT_EQ(a.p_star, b.p_star);
}

TEST(GridSearch, OptimumShrinksWithTarget) {
  const auto sc = calibrated();
  for (EtfKind kind : {EtfKind::letf, EtfKind::vetf}) {
    double prev = 10.0;
    for (double gamma : {50.0, 20.0, 10.0, 5.0, 1.0, 0.1}) {
      const auto r = grid_search_ir_optimal(kind, gamma, sc, 100000, 11);
      EXPECT_LE(r.p_star, prev) << to_string(kind) << " gamma " << gamma;
      prev = r.p_star;
    }
  }
}

TEST(GridSearch, TiesGoToSmallerFraction) {
  LumpSumScenario sc = calibrated();
  sc.grid = {0.0, 0.5, 1.0};
  sc.model = KouParams::calibrated_gbm();
  sc.model.mu = sc.model.r;
  sc.model.sigma = 1e-300;
  sc.vetf.expense_ratio = 0.0;
  sc.p_hat_s = 0.0;
  // Every fraction then earns the riskless rate, so all objectives tie.
  const auto r = grid_search_ir_optimal(EtfKind::vetf, 5.0, sc, 10, 1);
  EXPECT_EQ(r.objective_curve[0], r.objective_curve[2]);
  EXPECT_EQ(r.p_star, 0.0);
}
