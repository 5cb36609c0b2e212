#pragma once

#include <vector>

#include "letf/rng.hpp"

namespace letf {

// Kou jump-diffusion index parameters. lambda = 0 gives geometric Brownian motion.
struct KouParams {
  double r = 0.0;       // risk-free rate, continuously compounded, per year
  double mu = 0.0;      // index drift per year
  double sigma = 0.0;   // diffusive volatility
  double lambda = 0.0;  // jump intensity per year
  double p_up = 0.0;    // probability of an upward jump
  double eta1 = 0.0;    // upward exponent
  double eta2 = 0.0;    // downward exponent

  bool has_jumps() const { return lambda > 0.0; }
  // Throws ConfigError for out-of-range values and MomentDivergenceError when
  // jumps are on and eta1 <= 2 (second moment would be infinite).
  void validate() const;

  static KouParams calibrated_kou();
  static KouParams calibrated_gbm();
};

struct EtfSpec {
  double beta = 1.0;           // daily multiplier, 1 for a vanilla ETF
  double expense_ratio = 0.0;  // annual

  void validate() const;
};

struct JumpMoments {
  double kappa1_s = 0.0;
  double kappa2_s = 0.0;
  double kappa1_l = 0.0;
  double kappa2_l = 0.0;
  double kappa_chi = 0.0;
};

struct IndexMoments {
  double kappa1_s = 0.0;
  double kappa2_s = 0.0;
};

struct JumpEvent {
  double time = 0.0;  // offset within the interval, years
  double xi_s = 1.0;
  double xi_l = 1.0;
};

struct IntervalDraw {
  double index_gross = 1.0;
  std::vector<JumpEvent> jumps;
};

// max(xi_s, (beta-1)/beta): an index jump can at most wipe out the LETF.
double letf_jump_multiplier(double xi_s, double beta);

IndexMoments index_jump_moments(const KouParams& p);
JumpMoments letf_jump_moments(const KouParams& p, double beta);

// Exact draw of S(t+dt)/S(t) together with the jumps that occurred.
IntervalDraw simulate_interval(const KouParams& p, double dt, double beta, Rng& rng);

// One log jump y: +Exp(eta1) w.p. p_up, else -Exp(eta2). Returns xi = e^y.
double sample_jump_multiplier(const KouParams& p, Rng& rng);

struct MomentEstimate {
  JumpMoments mean;
  JumpMoments se;  // standard errors of the sample means
  std::size_t samples = 0;
};

// Sample averages of (xi_s - 1), (xi_s - 1)^2, (xi_l - 1), (xi_l - 1)^2 and
// (xi_s - 1)(xi_l - 1) over n jump draws.
MomentEstimate monte_carlo_jump_moments(const KouParams& p, double beta, std::size_t n,
                                        std::uint64_t seed);

double vetf_gross_return(double index_gross, double dt, const EtfSpec& spec);

// exp{-[(beta-1) r + (beta-1) beta sigma^2 / 2] dt}
double volatility_decay(double dt, double beta, double r, double sigma);
// prod [1 + beta (xi_l - 1)] / xi_s^beta, always in [0, 1].
double jump_decay(const std::vector<JumpEvent>& jumps, double beta);

double letf_gross_return(double index_gross, const std::vector<JumpEvent>& jumps,
                         double dt, const EtfSpec& spec, const KouParams& p);

}  // namespace letf
