#include "letf/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/random/normal_distribution.hpp>

#include "letf/error.hpp"

namespace letf {

namespace {

using GL16 = boost::math::quadrature::gauss<double, 16>;

// (1 - e^{-a tau}) / a with its a -> 0 limit.
double discount_annuity(double a, double tau) {
  const double x = a * tau;
  if (std::abs(x) < 1e-8) return tau * (1.0 - 0.5 * x + x * x / 6.0);
  return -std::expm1(-x) / a;
}

}  // namespace

BenchmarkPolicy::BenchmarkPolicy(std::vector<double> starts, std::vector<double> values)
    : starts_(std::move(starts)), values_(std::move(values)) {}

BenchmarkPolicy BenchmarkPolicy::constant(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw ConfigError("benchmark index fraction must lie in [0, 1]");
  return BenchmarkPolicy({0.0}, {rho});
}

BenchmarkPolicy BenchmarkPolicy::piecewise(std::vector<double> starts,
                                           std::vector<double> values) {
  if (starts.empty() || starts.size() != values.size())
    throw ConfigError("piecewise benchmark needs one value per start time");
  if (starts.front() != 0.0) throw ConfigError("piecewise benchmark must start at t = 0");
  for (std::size_t k = 1; k < starts.size(); ++k)
    if (!(starts[k] > starts[k - 1]))
      throw ConfigError("benchmark start times must be strictly increasing");
  for (double v : values)
    if (!(v >= 0.0 && v <= 1.0))
      throw ConfigError("benchmark index fraction must lie in [0, 1]");
  return BenchmarkPolicy(std::move(starts), std::move(values));
}

double BenchmarkPolicy::operator()(double t) const {
  auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  if (it == starts_.begin()) return values_.front();
  return values_[static_cast<std::size_t>(it - starts_.begin()) - 1];
}

double BenchmarkPolicy::integral(double a, double b) const {
  if (a == b) return 0.0;
  if (a > b) return -integral(b, a);
  if (is_constant()) return values_.front() * (b - a);
  // Piece-by-piece: the integrand is constant on each piece.
  double sum = 0.0;
  for (std::size_t k = 0; k < starts_.size(); ++k) {
    const double lo = k == 0 ? -std::numeric_limits<double>::infinity() : starts_[k];
    const double hi = k + 1 < starts_.size() ? starts_[k + 1]
                                             : std::numeric_limits<double>::infinity();
    const double x0 = std::max(a, lo), x1 = std::min(b, hi);
    if (x1 > x0) sum += values_[k] * (x1 - x0);
  }
  return sum;
}

void InvestmentParams::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("horizon T must be positive");
  if (!(w0 > 0.0)) throw ConfigError("initial wealth w0 must be positive");
  if (!(q >= 0.0)) throw ConfigError("cash injection q must be nonnegative");
  if (!(gamma > 0.0)) throw ConfigError("target gamma must be positive");
  if (!(b >= 0.0)) throw ConfigError("borrowing premium b must be nonnegative");
  if (!(p_max >= 1.0)) throw ConfigError("maximum leverage p_max must be >= 1");
}

double k_beta(const KouParams& p, const EtfSpec& spec, const JumpMoments& m) {
  const double beta = spec.beta;
  const double s2 = p.sigma * p.sigma;
  const double den = beta * (s2 + p.lambda * m.kappa2_l);
  if (!(den > 0.0) || !std::isfinite(den))
    throw DegenerateModelError("beta (sigma^2 + lambda kappa2_l) must be positive");
  const double num =
      beta * (p.mu + p.lambda * (m.kappa1_l - m.kappa1_s) - p.r) - spec.expense_ratio;
  return p.mu - p.r - num * (s2 + p.lambda * m.kappa_chi) / den;
}

double coeff_g(double t, double K, const BenchmarkPolicy& policy, double T) {
  return std::exp(K * policy.integral(t, T));
}

double coeff_h(double t, double K, const BenchmarkPolicy& policy, double r, double q,
               double T) {
  const double tau = T - t;
  if (q == 0.0 || tau <= 0.0) return 0.0;
  if (policy.is_constant()) {
    const double rho = policy.values().front();
    return q * (std::exp(K * rho * tau) * discount_annuity(r + K * rho, tau) -
                discount_annuity(r, tau));
  }
  // h = q * int_t^T e^{-r (y - t)} (e^{K I(y)} - 1) dy,  I(y) = int_y^T rho.
  auto integrand = [&](double y) {
    return std::exp(-r * (y - t)) * std::expm1(K * policy.integral(y, T));
  };
  double sum = 0.0;
  double lo = t;
  for (double s : policy.starts()) {
    if (s <= lo) continue;
    if (s >= T) break;
    sum += GL16::integrate(integrand, lo, s);
    lo = s;
  }
  sum += GL16::integrate(integrand, lo, T);
  return q * sum;
}

ClosedFormCoefficients make_coefficients(const KouParams& p, const EtfSpec& spec,
                                         const JumpMoments& m,
                                         const BenchmarkPolicy& policy,
                                         const InvestmentParams& inv) {
  ClosedFormCoefficients c;
  c.K = spec.beta == 1.0 ? spec.expense_ratio : k_beta(p, spec, m);
  c.policy = policy;
  c.T = inv.T;
  c.r = p.r;
  c.q = inv.q;
  return c;
}

namespace {

struct ControlFactors {
  double slope;  // coefficient of the bracket
  double hedge;  // multiplier on g * rho_hat * W_hat
};

ControlFactors letf_factors(const KouParams& p, const EtfSpec& spec, const JumpMoments& m) {
  const double beta = spec.beta;
  const double s2 = p.sigma * p.sigma;
  const double var_l = s2 + p.lambda * m.kappa2_l;
  if (!(var_l > 0.0)) throw DegenerateModelError("sigma^2 + lambda kappa2_l must be positive");
  const double num =
      beta * (p.mu + p.lambda * (m.kappa1_l - m.kappa1_s) - p.r) - spec.expense_ratio;
  return {num / (beta * beta * var_l), (s2 + p.lambda * m.kappa_chi) / (beta * var_l)};
}

ControlFactors vetf_factors(const KouParams& p, const EtfSpec& spec, const JumpMoments& m) {
  const double var_s = p.sigma * p.sigma + p.lambda * m.kappa2_s;
  if (!(var_s > 0.0)) throw DegenerateModelError("sigma^2 + lambda kappa2_s must be positive");
  return {(p.mu - p.r - spec.expense_ratio) / var_s, 1.0};
}

double control_amount(const ControlFactors& f, double t, double W, double W_hat,
                      const ClosedFormCoefficients& c, double r, double gamma) {
  const double g = c.g(t);
  const double h = c.h(t);
  const double bracket = h + gamma * std::exp(-r * (c.T - t)) - (W - g * W_hat);
  return f.slope * bracket + f.hedge * g * c.policy(t) * W_hat;
}

}  // namespace

double optimal_letf_amount(double t, double W, double W_hat,
                           const ClosedFormCoefficients& c, const JumpMoments& m,
                           const KouParams& p, const EtfSpec& spec, double gamma) {
  if (!(spec.beta > 1.0)) throw DomainError("LETF control requires beta > 1");
  return control_amount(letf_factors(p, spec, m), t, W, W_hat, c, p.r, gamma);
}

double optimal_vetf_amount(double t, double W, double W_hat,
                           const ClosedFormCoefficients& c, const JumpMoments& m,
                           const KouParams& p, const EtfSpec& spec, double gamma) {
  return control_amount(vetf_factors(p, spec, m), t, W, W_hat, c, p.r, gamma);
}

const char* to_string(EtfKind k) { return k == EtfKind::letf ? "letf" : "vetf"; }

ClosedFormControl::ClosedFormControl(EtfKind kind, const KouParams& p, const EtfSpec& spec,
                                     const BenchmarkPolicy& policy,
                                     const InvestmentParams& inv)
    : kind_(kind), p_(p), spec_(spec), inv_(inv) {
  spec_.validate();
  if (kind == EtfKind::letf && !(spec.beta > 1.0))
    throw ConfigError("LETF investor needs beta > 1");
  if (kind == EtfKind::vetf && spec.beta != 1.0)
    throw ConfigError("VETF investor needs beta = 1");
  m_ = letf_jump_moments(p, spec.beta);
  coeffs_ = make_coefficients(p, spec, m_, policy, inv);
  const ControlFactors f = kind == EtfKind::letf ? letf_factors(p, spec, m_)
                                                 : vetf_factors(p, spec, m_);
  slope_ = f.slope;
  hedge_ = f.hedge;
}

double ClosedFormControl::intercept(double t) const {
  return slope_ * (coeffs_.h(t) + inv_.gamma * std::exp(-p_.r * (inv_.T - t)));
}

double ClosedFormControl::benchmark_loading(double t) const {
  const double g = coeffs_.g(t);
  return slope_ * g + hedge_ * g * coeffs_.policy(t);
}

double ClosedFormControl::amount(double t, double W, double W_hat) const {
  const double g = coeffs_.g(t);
  const double bracket =
      coeffs_.h(t) + inv_.gamma * std::exp(-p_.r * (inv_.T - t)) - (W - g * W_hat);
  return slope_ * bracket + hedge_ * g * coeffs_.policy(t) * W_hat;
}

double ClosedFormControl::fraction(double t, double W, double W_hat) const {
  if (W == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return amount(t, W, W_hat) / W;
}

std::vector<double> ControlledEnsemble::terminal_wealth() const {
  std::vector<double> out(n_paths);
  for (std::size_t j = 0; j < n_paths; ++j) out[j] = W(j, n_times() - 1);
  return out;
}

std::vector<double> ControlledEnsemble::terminal_benchmark() const {
  std::vector<double> out(n_paths);
  for (std::size_t j = 0; j < n_paths; ++j) out[j] = W_hat(j, n_times() - 1);
  return out;
}

std::vector<ControlledEnsemble> simulate_controlled_paths(
    const std::vector<const ClosedFormControl*>& controls, const SimulationConfig& cfg) {
  if (controls.empty()) return {};
  if (cfg.steps_per_year < 12) throw ConfigError("steps_per_year must be >= 12");
  if (cfg.record_every < 1) throw ConfigError("record_every must be >= 1");
  const ClosedFormControl& first = *controls.front();
  const KouParams& p = first.model();
  const InvestmentParams& inv = first.investment();
  for (const auto* c : controls) {
    const KouParams& o = c->model();
    const bool same_market = o.r == p.r && o.mu == p.mu && o.sigma == p.sigma &&
                             o.lambda == p.lambda && o.p_up == p.p_up &&
                             o.eta1 == p.eta1 && o.eta2 == p.eta2;
    if (!same_market || c->investment().T != inv.T || c->investment().w0 != inv.w0 ||
        c->investment().q != inv.q)
      throw ConfigError("jointly simulated controls must share market and horizon");
  }
  const std::size_t nc = controls.size();

  const auto n_steps = static_cast<std::size_t>(std::llround(inv.T * cfg.steps_per_year));
  if (n_steps == 0) throw ConfigError("horizon too short for the step size");
  const double dt = inv.T / static_cast<double>(n_steps);
  const double sqdt = std::sqrt(dt);
  const double growth = std::exp(p.r * dt);
  const double jump_comp = p.lambda * index_jump_moments(p).kappa1_s;
  const double idx_log_drift = (p.mu - jump_comp - 0.5 * p.sigma * p.sigma) * dt;

  struct Investor {
    bool letf;
    double beta, slope, drift, vol, cost, fdecay;
    std::vector<double> icpt, load;
  };
  std::vector<Investor> inv_data(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const ClosedFormControl& ctl = *controls[c];
    const EtfSpec& spec = ctl.spec();
    Investor& d = inv_data[c];
    d.letf = ctl.kind() == EtfKind::letf;
    d.beta = spec.beta;
    d.slope = ctl.slope();
    d.drift = d.letf ? d.beta * (p.mu - jump_comp) - (d.beta - 1.0) * p.r - spec.expense_ratio
                     : p.mu - jump_comp - spec.expense_ratio;
    d.vol = d.beta * p.sigma;
    d.cost = std::exp(-spec.expense_ratio * dt);
    d.fdecay = d.letf ? volatility_decay(dt, d.beta, p.r, p.sigma) : 1.0;
    d.icpt.resize(n_steps);
    d.load.resize(n_steps);
    for (std::size_t n = 0; n < n_steps; ++n) {
      const double t = static_cast<double>(n) * dt;
      d.icpt[n] = ctl.intercept(t);
      d.load[n] = ctl.benchmark_loading(t);
    }
  }
  // Each investor tracks its own benchmark policy.
  std::vector<std::vector<double>> rho(nc, std::vector<double>(n_steps));
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t n = 0; n < n_steps; ++n)
      rho[c][n] = controls[c]->policy()(static_cast<double>(n) * dt);

  std::vector<std::size_t> rec;
  for (std::size_t n = 0; n < n_steps; n += static_cast<std::size_t>(cfg.record_every))
    rec.push_back(n);
  rec.push_back(n_steps);
  const std::size_t nt = rec.size();

  std::vector<ControlledEnsemble> out(nc);
  for (auto& e : out) {
    e.n_paths = cfg.n_paths;
    for (std::size_t n : rec) e.times.push_back(static_cast<double>(n) * dt);
    e.wealth.assign(cfg.n_paths * nt, 0.0);
    e.benchmark.assign(cfg.n_paths * nt, 0.0);
    e.fraction.assign(cfg.n_paths * nt, 0.0);
  }

  parallel_for(cfg.n_paths, [&](std::size_t j) {
    Rng rng = substream(cfg.seed, Stream::index_paths, j);
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    std::poisson_distribution<int> count(p.has_jumps() ? p.lambda * dt : 1.0);
    std::vector<double> W(nc, inv.w0), Wh(nc, inv.w0);
    std::vector<double> xs_list;
    std::size_t next = 0;
    for (std::size_t n = 0; n <= n_steps; ++n) {
      const bool record = next < nt && rec[next] == n;
      if (n == n_steps || record) {
        for (std::size_t c = 0; c < nc; ++c) {
          const double u = n < n_steps
                               ? inv_data[c].icpt[n] - inv_data[c].slope * W[c] +
                                     inv_data[c].load[n] * Wh[c]
                               : controls[c]->amount(inv.T, W[c], Wh[c]);
          const std::size_t at = j * nt + next;
          out[c].wealth[at] = W[c];
          out[c].benchmark[at] = Wh[c];
          out[c].fraction[at] =
              W[c] == 0.0 ? std::numeric_limits<double>::quiet_NaN() : u / W[c];
        }
        ++next;
      }
      if (n == n_steps) break;

      const double z = normal(rng);
      double jump_s = 0.0, log_jump = 0.0;
      xs_list.clear();
      if (p.has_jumps()) {
        const int k = count(rng);
        for (int i = 0; i < k; ++i) {
          const double xs = sample_jump_multiplier(p, rng);
          xs_list.push_back(xs);
          jump_s += xs - 1.0;
          log_jump += std::log(xs);
        }
      }
      const double x = cfg.scheme == Scheme::exact_asset
                           ? std::exp(idx_log_drift + p.sigma * sqdt * z + log_jump)
                           : 0.0;
      const double idx_ret = cfg.scheme == Scheme::euler
                                 ? (p.mu - jump_comp) * dt + p.sigma * sqdt * z + jump_s
                                 : x - 1.0;

      for (std::size_t c = 0; c < nc; ++c) {
        const Investor& d = inv_data[c];
        double etf_ret;
        if (cfg.scheme == Scheme::euler) {
          double jl = jump_s;
          if (d.letf) {
            jl = 0.0;
            for (double xs : xs_list) jl += letf_jump_multiplier(xs, d.beta) - 1.0;
            jl *= d.beta;
          }
          etf_ret = d.drift * dt + d.vol * sqdt * z + jl;
        } else if (d.letf) {
          double ydecay = 1.0;
          for (double xs : xs_list) {
            const double xl = letf_jump_multiplier(xs, d.beta);
            ydecay *= std::max(0.0, 1.0 + d.beta * (xl - 1.0)) / std::pow(xs, d.beta);
          }
          etf_ret = d.cost * d.fdecay * ydecay * std::pow(x, d.beta) - 1.0;
        } else {
          etf_ret = d.cost * x - 1.0;
        }
        const double u = d.icpt[n] - d.slope * W[c] + d.load[n] * Wh[c];
        W[c] = (W[c] - u) * growth + u * (1.0 + etf_ret) + inv.q * dt;
        Wh[c] = Wh[c] * ((1.0 - rho[c][n]) * growth + rho[c][n] * (1.0 + idx_ret)) + inv.q * dt;
      }
    }
  });
  return out;
}

ControlledEnsemble simulate_controlled_paths(const ClosedFormControl& control,
                                             const SimulationConfig& cfg) {
  return std::move(simulate_controlled_paths({&control}, cfg).front());
}

double ir_zero_cost(const KouParams& p, double T) {
  if (p.lambda != 0.0) throw DomainError("zero-cost information ratio needs lambda = 0");
  if (!(p.sigma > 0.0)) throw DomainError("sigma must be positive");
  const double theta = (p.mu - p.r) / p.sigma;
  return std::sqrt(std::expm1(theta * theta * T));
}

OdeSolution ode_oracle(const KouParams& p, const EtfSpec& spec, const JumpMoments& m,
                       const BenchmarkPolicy& policy, double q, double gamma, double T,
                       int steps) {
  if (steps < 1) throw ConfigError("ODE oracle needs at least one step");
  const double beta = spec.beta;
  const double s2 = p.sigma * p.sigma;
  const double var_l = s2 + p.lambda * m.kappa2_l;
  const double num =
      beta * (p.mu + p.lambda * (m.kappa1_l - m.kappa1_s) - p.r) - spec.expense_ratio;
  const double Q = num * num / (beta * beta * var_l);
  const double K = beta == 1.0 ? spec.expense_ratio : k_beta(p, spec, m);
  const double r = p.r;

  struct State { double A, D, F; };
  // rho is piecewise constant; it is sampled once per step at the midpoint
  // so a step ending on a breakpoint uses the piece it actually covers.
  auto rhs = [&](double rho, const State& y) {
    return State{-(2.0 * r - Q) * y.A,
                 -(2.0 * r - Q + K * rho) * y.D,
                 -2.0 * q * y.A - (r - Q) * y.F - q * y.D};
  };

  OdeSolution sol;
  const auto n = static_cast<std::size_t>(steps);
  sol.t.resize(n + 1);
  sol.A_rk4.resize(n + 1);
  sol.D_rk4.resize(n + 1);
  sol.F_rk4.resize(n + 1);
  sol.A.resize(n + 1);
  sol.D.resize(n + 1);
  sol.F.resize(n + 1);
  const double dt = T / static_cast<double>(steps);
  for (std::size_t k = 0; k <= n; ++k) sol.t[k] = static_cast<double>(k) * dt;
  sol.t[n] = T;

  State y{1.0, -2.0, -2.0 * gamma};
  sol.A_rk4[n] = y.A;
  sol.D_rk4[n] = y.D;
  sol.F_rk4[n] = y.F;
  for (std::size_t k = n; k-- > 0;) {
    const double t1 = sol.t[k + 1];
    const double h = -(t1 - sol.t[k]);
    const double rho = policy(t1 + 0.5 * h);
    const State k1 = rhs(rho, y);
    const State y2{y.A + 0.5 * h * k1.A, y.D + 0.5 * h * k1.D, y.F + 0.5 * h * k1.F};
    const State k2 = rhs(rho, y2);
    const State y3{y.A + 0.5 * h * k2.A, y.D + 0.5 * h * k2.D, y.F + 0.5 * h * k2.F};
    const State k3 = rhs(rho, y3);
    const State y4{y.A + h * k3.A, y.D + h * k3.D, y.F + h * k3.F};
    const State k4 = rhs(rho, y4);
    y.A += h / 6.0 * (k1.A + 2.0 * k2.A + 2.0 * k3.A + k4.A);
    y.D += h / 6.0 * (k1.D + 2.0 * k2.D + 2.0 * k3.D + k4.D);
    y.F += h / 6.0 * (k1.F + 2.0 * k2.F + 2.0 * k3.F + k4.F);
    sol.A_rk4[k] = y.A;
    sol.D_rk4[k] = y.D;
    sol.F_rk4[k] = y.F;
  }

  for (std::size_t k = 0; k <= n; ++k) {
    const double t = sol.t[k];
    const double tau = T - t;
    const double A = std::exp((2.0 * r - Q) * tau);
    sol.A[k] = A;
    sol.D[k] = -2.0 * std::exp((2.0 * r - Q) * tau + K * policy.integral(t, T));
    sol.F[k] = -2.0 * A * (gamma * std::exp(-r * tau) + coeff_h(t, K, policy, r, q, T));
  }
  return sol;
}

double expected_benchmark_wealth(double t, const KouParams& p,
                                 const BenchmarkPolicy& policy, double w0, double q) {
  double w = w0;
  double s = 0.0;
  const auto& starts = policy.starts();
  for (std::size_t k = 0; k < starts.size() && s < t; ++k) {
    const double end = k + 1 < starts.size() ? std::min(t, starts[k + 1]) : t;
    const double len = end - s;
    if (len <= 0.0) continue;
    const double a = p.r + policy.values()[k] * (p.mu - p.r);
    const double e = std::exp(a * len);
    w = w * e + q * e * discount_annuity(a, len);
    s = end;
  }
  return w;
}

}  // namespace letf
