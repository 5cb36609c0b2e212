#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "letf/market_models.hpp"

namespace letf {

// Deterministic fraction of benchmark wealth held in the index.
// values[k] applies on [starts[k], starts[k+1]); the last piece extends forever.
class BenchmarkPolicy {
 public:
  static BenchmarkPolicy constant(double rho);
  static BenchmarkPolicy piecewise(std::vector<double> starts, std::vector<double> values);

  double operator()(double t) const;
  // Integral over [a, b], exact: the schedule is constant on each piece.
  double integral(double a, double b) const;
  bool is_constant() const { return values_.size() == 1; }
  const std::vector<double>& starts() const { return starts_; }
  const std::vector<double>& values() const { return values_; }

 private:
  BenchmarkPolicy(std::vector<double> starts, std::vector<double> values);
  std::vector<double> starts_;
  std::vector<double> values_;
};

struct InvestmentParams {
  double T = 10.0;
  double w0 = 100.0;
  double q = 5.0;  // per year (continuous) or per rebalance (discrete)
  double gamma = 125.0;
  double b = 0.0;  // annual borrowing premium
  double p_max = 1.0;

  void validate() const;
};

double k_beta(const KouParams& p, const EtfSpec& spec, const JumpMoments& m);

double coeff_g(double t, double K, const BenchmarkPolicy& policy, double T);
double coeff_h(double t, double K, const BenchmarkPolicy& policy, double r, double q,
               double T);

struct ClosedFormCoefficients {
  double K = 0.0;
  BenchmarkPolicy policy = BenchmarkPolicy::constant(0.0);
  double T = 0.0;
  double r = 0.0;
  double q = 0.0;

  double g(double t) const { return coeff_g(t, K, policy, T); }
  double h(double t) const { return coeff_h(t, K, policy, r, q, T); }
};

// K = k_beta for beta > 1 and K = c_v for the vanilla ETF.
ClosedFormCoefficients make_coefficients(const KouParams& p, const EtfSpec& spec,
                                         const JumpMoments& m,
                                         const BenchmarkPolicy& policy,
                                         const InvestmentParams& inv);

// Currency amount held in the ETF; divide by W for the fraction.
double optimal_letf_amount(double t, double W, double W_hat,
                           const ClosedFormCoefficients& c, const JumpMoments& m,
                           const KouParams& p, const EtfSpec& spec, double gamma);
double optimal_vetf_amount(double t, double W, double W_hat,
                           const ClosedFormCoefficients& c, const JumpMoments& m,
                           const KouParams& p, const EtfSpec& spec, double gamma);

enum class EtfKind { letf, vetf };

const char* to_string(EtfKind k);

// Bundles everything needed to evaluate one investor's feedback control.
class ClosedFormControl {
 public:
  ClosedFormControl(EtfKind kind, const KouParams& p, const EtfSpec& spec,
                    const BenchmarkPolicy& policy, const InvestmentParams& inv);

  double amount(double t, double W, double W_hat) const;
  double fraction(double t, double W, double W_hat) const;

  // amount = intercept(t) - slope * W + benchmark_loading(t) * W_hat
  double slope() const { return slope_; }
  double intercept(double t) const;
  double benchmark_loading(double t) const;

  EtfKind kind() const { return kind_; }
  const KouParams& model() const { return p_; }
  const EtfSpec& spec() const { return spec_; }
  const JumpMoments& moments() const { return m_; }
  const BenchmarkPolicy& policy() const { return coeffs_.policy; }
  const InvestmentParams& investment() const { return inv_; }
  const ClosedFormCoefficients& coefficients() const { return coeffs_; }

 private:
  EtfKind kind_;
  KouParams p_;
  EtfSpec spec_;
  InvestmentParams inv_;
  JumpMoments m_;
  ClosedFormCoefficients coeffs_;
  double slope_ = 0.0;
  double hedge_ = 1.0;
};

enum class Scheme {
  euler,        // exact cash leg, Euler step for the risky leg
  exact_asset,  // ETF return over the step drawn from its exact law
};

struct SimulationConfig {
  std::size_t n_paths = 10000;
  int steps_per_year = 252;
  std::uint64_t seed = 1;
  int record_every = 1;  // store state every this many steps (terminal always kept)
  Scheme scheme = Scheme::euler;
};

struct ControlledEnsemble {
  std::vector<double> times;
  std::size_t n_paths = 0;
  // Row-major [path][time].
  std::vector<double> wealth;
  std::vector<double> benchmark;
  std::vector<double> fraction;  // NaN where W = 0

  std::size_t n_times() const { return times.size(); }
  double W(std::size_t path, std::size_t k) const { return wealth[path * times.size() + k]; }
  double W_hat(std::size_t path, std::size_t k) const {
    return benchmark[path * times.size() + k];
  }
  double rho(std::size_t path, std::size_t k) const {
    return fraction[path * times.size() + k];
  }
  std::vector<double> terminal_wealth() const;
  std::vector<double> terminal_benchmark() const;
};

// Investor and benchmark share the same Brownian and Poisson shocks, and the
// shocks for path j depend only on (seed, j), so two controls run with one
// seed see identical markets.
ControlledEnsemble simulate_controlled_paths(const ClosedFormControl& control,
                                             const SimulationConfig& cfg);
// Several investors on one set of market draws. Controls must share the
// market model, horizon, initial wealth and injection rate.
std::vector<ControlledEnsemble> simulate_controlled_paths(
    const std::vector<const ClosedFormControl*>& controls, const SimulationConfig& cfg);

// Information ratio of the optimal zero-cost strategy under GBM.
double ir_zero_cost(const KouParams& p, double T);

// Terminal-value ODEs for the value-function coefficients, solved by RK4
// and in closed form. Validation only.
struct OdeSolution {
  std::vector<double> t;
  std::vector<double> A_rk4, D_rk4, F_rk4;
  std::vector<double> A, D, F;
};

OdeSolution ode_oracle(const KouParams& p, const EtfSpec& spec, const JumpMoments& m,
                       const BenchmarkPolicy& policy, double q, double gamma, double T,
                       int steps);

// Mean benchmark wealth under the index drift, used to place heatmap grids.
double expected_benchmark_wealth(double t, const KouParams& p,
                                 const BenchmarkPolicy& policy, double w0, double q);

}  // namespace letf
