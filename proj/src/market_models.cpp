#include "letf/market_models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "letf/error.hpp"

namespace letf {

namespace {

constexpr double kEta1Guard = 2.0 + 1e-9;

struct RawMoments {
  long double e1 = 1.0L;   // E[xi]
  long double e2 = 1.0L;   // E[xi^2]
};

RawMoments index_raw(const KouParams& p) {
  const long double pu = p.p_up, e1 = p.eta1, e2 = p.eta2;
  RawMoments m;
  m.e1 = pu * e1 / (e1 - 1.0L) + (1.0L - pu) * e2 / (e2 + 1.0L);
  m.e2 = pu * e1 / (e1 - 2.0L) + (1.0L - pu) * e2 / (e2 + 2.0L);
  return m;
}

void require_second_moment(const KouParams& p) {
  if (!(p.eta1 > kEta1Guard)) {
    std::ostringstream os;
    os << "eta1 = " << p.eta1 << " must exceed 2: E[xi^2] diverges";
    throw MomentDivergenceError(os.str());
  }
  if (!(p.eta2 > 0.0)) throw DomainError("eta2 must be positive");
}

}  // namespace

void KouParams::validate() const {
  const double vals[] = {r, mu, sigma, lambda, p_up, eta1, eta2};
  for (double v : vals)
    if (!std::isfinite(v)) throw ConfigError("model parameters must be finite");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  if (p_up < 0.0 || p_up > 1.0) throw ConfigError("p_up must lie in [0, 1]");
  if (has_jumps()) require_second_moment(*this);
}

KouParams KouParams::calibrated_kou() {
  return {0.0031, 0.0873, 0.1477, 0.3163, 0.2258, 4.3591, 5.5337};
}

KouParams KouParams::calibrated_gbm() {
  return {0.0031, 0.0819, 0.1850, 0.0, 0.0, 0.0, 0.0};
}

void EtfSpec::validate() const {
  if (!std::isfinite(beta) || beta < 1.0)
    throw ConfigError("ETF multiplier beta must be >= 1");
  if (!std::isfinite(expense_ratio) || expense_ratio < 0.0)
    throw ConfigError("expense ratio must be nonnegative");
}

double letf_jump_multiplier(double xi_s, double beta) {
  if (!(xi_s > 0.0)) throw DomainError("jump multiplier must be positive");
  if (!(beta >= 1.0)) throw DomainError("beta must be >= 1");
  const double floor = static_cast<double>((static_cast<long double>(beta) - 1.0L) /
                                           static_cast<long double>(beta));
  return xi_s > floor ? xi_s : floor;
}

IndexMoments index_jump_moments(const KouParams& p) {
  if (!p.has_jumps()) return {};
  require_second_moment(p);
  const RawMoments m = index_raw(p);
  return {static_cast<double>(m.e1 - 1.0L),
          static_cast<double>(m.e2 - 2.0L * m.e1 + 1.0L)};
}

JumpMoments letf_jump_moments(const KouParams& p, double beta) {
  if (!(beta >= 1.0)) throw DomainError("beta must be >= 1");
  if (!p.has_jumps()) return {};
  const IndexMoments s = index_jump_moments(p);
  if (beta == 1.0) return {s.kappa1_s, s.kappa2_s, s.kappa1_s, s.kappa2_s, s.kappa2_s};

  const long double pu = p.p_up, e1 = p.eta1, e2 = p.eta2;
  const long double th = (static_cast<long double>(beta) - 1.0L) / beta;
  const long double th1 = std::pow(th, e2 + 1.0L);
  const long double th2 = std::pow(th, e2 + 2.0L);
  const long double up1 = pu * e1 / (e1 - 1.0L);
  const long double up2 = pu * e1 / (e1 - 2.0L);
  const long double dn = (1.0L - pu) * e2;

  const RawMoments ms = index_raw(p);
  const long double el = up1 + dn * (th1 / e2 + (1.0L - th1) / (e2 + 1.0L));
  const long double el2 = up2 + dn * (th2 / e2 + (1.0L - th2) / (e2 + 2.0L));
  const long double els = up2 + dn * (th2 / (e2 + 1.0L) + (1.0L - th2) / (e2 + 2.0L));

  JumpMoments j;
  j.kappa1_s = s.kappa1_s;
  j.kappa2_s = s.kappa2_s;
  j.kappa1_l = static_cast<double>(el - 1.0L);
  j.kappa2_l = static_cast<double>(el2 - 2.0L * el + 1.0L);
  j.kappa_chi = static_cast<double>(els - el - ms.e1 + 1.0L);
  return j;
}

double sample_jump_multiplier(const KouParams& p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const bool up = u(rng) < p.p_up;
  boost::random::exponential_distribution<double> ex(up ? p.eta1 : p.eta2);
  const double y = ex(rng);
  return std::exp(up ? y : -y);
}

IntervalDraw simulate_interval(const KouParams& p, double dt, double beta, Rng& rng) {
  if (!(dt > 0.0)) throw DomainError("interval length must be positive");
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  const double z = normal(rng);

  IntervalDraw out;
  double log_jumps = 0.0;
  double kappa1 = 0.0;
  if (p.has_jumps()) {
    const long double pu = p.p_up, e1 = p.eta1, e2 = p.eta2;
    kappa1 = static_cast<double>(pu * e1 / (e1 - 1.0L) + (1.0L - pu) * e2 / (e2 + 1.0L) - 1.0L);
    std::poisson_distribution<int> count(p.lambda * dt);
    const int n = count(rng);
    std::uniform_real_distribution<double> when(0.0, dt);
    out.jumps.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
      JumpEvent ev;
      ev.time = when(rng);
      ev.xi_s = sample_jump_multiplier(p, rng);
      ev.xi_l = letf_jump_multiplier(ev.xi_s, beta);
      log_jumps += std::log(ev.xi_s);
      out.jumps.push_back(ev);
    }
    std::sort(out.jumps.begin(), out.jumps.end(),
              [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
  }
  const double drift = (p.mu - p.lambda * kappa1 - 0.5 * p.sigma * p.sigma) * dt;
  out.index_gross = std::exp(drift + p.sigma * std::sqrt(dt) * z + log_jumps);
  return out;
}

double vetf_gross_return(double index_gross, double dt, const EtfSpec& spec) {
  return std::exp(-spec.expense_ratio * dt) * index_gross;
}

double volatility_decay(double dt, double beta, double r, double sigma) {
  return std::exp(-((beta - 1.0) * r + 0.5 * (beta - 1.0) * beta * sigma * sigma) * dt);
}

double jump_decay(const std::vector<JumpEvent>& jumps, double beta) {
  double y = 1.0;
  for (const auto& j : jumps) {
    const double xl = letf_jump_multiplier(j.xi_s, beta);
    y *= std::max(0.0, 1.0 + beta * (xl - 1.0)) / std::pow(j.xi_s, beta);
  }
  return y;
}

double letf_gross_return(double index_gross, const std::vector<JumpEvent>& jumps,
                         double dt, const EtfSpec& spec, const KouParams& p) {
  if (!(index_gross >= 0.0)) throw DomainError("index gross return must be nonnegative");
  const double beta = spec.beta;
  const double g = std::exp(-spec.expense_ratio * dt) *
                   volatility_decay(dt, beta, p.r, p.sigma) * jump_decay(jumps, beta) *
                   std::pow(index_gross, beta);
  return std::max(0.0, g);
}

MomentEstimate monte_carlo_jump_moments(const KouParams& p, double beta, std::size_t n,
                                        std::uint64_t seed) {
  p.validate();
  if (!(beta >= 1.0)) throw ConfigError("LETF multiplier beta must be >= 1");
  if (!p.has_jumps()) throw DomainError("no jumps to sample when lambda = 0");
  if (n < 2) throw DomainError("need at least two samples");
  Rng rng = substream(seed, Stream::moment_check, 0);
  long double s[5] = {}, ss[5] = {};
  for (std::size_t i = 0; i < n; ++i) {
    const double xs = sample_jump_multiplier(p, rng);
    const double xl = letf_jump_multiplier(xs, beta);
    const double a = xs - 1.0, b = xl - 1.0;
    const double v[5] = {a, a * a, b, b * b, a * b};
    for (int k = 0; k < 5; ++k) {
      s[k] += v[k];
      ss[k] += static_cast<long double>(v[k]) * v[k];
    }
  }
  const long double N = static_cast<long double>(n);
  double mean[5], se[5];
  for (int k = 0; k < 5; ++k) {
    const long double m = s[k] / N;
    const long double var = (ss[k] - N * m * m) / (N - 1);
    mean[k] = static_cast<double>(m);
    se[k] = static_cast<double>(std::sqrt(std::max(var, 0.0L) / N));
  }
  MomentEstimate e;
  e.mean = {mean[0], mean[1], mean[2], mean[3], mean[4]};
  e.se = {se[0], se[1], se[2], se[3], se[4]};
  e.samples = n;
  return e;
}

}  // namespace letf
