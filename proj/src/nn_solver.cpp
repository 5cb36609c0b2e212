#include "letf/nn_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "letf/error.hpp"
#include "letf/rng.hpp"

namespace letf {

namespace {

constexpr std::size_t kInputs = 3;
constexpr std::size_t kChunk = 64;  // paths per partial sum; fixes the reduction order

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Weights of layer l are (out x in) row-major, followed by the out biases.
struct Layout {
  std::size_t width, layers, outputs;
  std::vector<std::size_t> offset, fan_in, fan_out;

  explicit Layout(const NetworkConfig& c)
      : width(c.hidden_width), layers(c.hidden_layers), outputs(c.n_assets) {
    std::size_t at = 0;
    for (std::size_t l = 0; l <= layers; ++l) {
      const std::size_t in = l == 0 ? kInputs : width;
      const std::size_t out = l == layers ? outputs : width;
      offset.push_back(at);
      fan_in.push_back(in);
      fan_out.push_back(out);
      at += out * in + out;
    }
    offset.push_back(at);
  }
  std::size_t total() const { return offset.back(); }
};

// acts holds the hidden activations layer by layer; raw the outputs.
void forward(const Layout& lay, const double* theta, const double* x, double* acts, double* raw) {
  const double* in = x;
  for (std::size_t l = 0; l <= lay.layers; ++l) {
    const std::size_t ni = lay.fan_in[l], no = lay.fan_out[l];
    const double* w = theta + lay.offset[l];
    const double* b = w + no * ni;
    double* out = l == lay.layers ? raw : acts + l * lay.width;
    for (std::size_t o = 0; o < no; ++o) {
      double z = b[o];
      const double* row = w + o * ni;
      for (std::size_t i = 0; i < ni; ++i) z += row[i] * in[i];
      out[o] = l == lay.layers ? z : logistic(z);
    }
    in = out;
  }
}

// Accumulates d/dtheta into grad and returns d/dx in adj_x.
void backward(const Layout& lay, const double* theta, const double* x, const double* acts,
              const double* adj_raw, double* grad, double* adj_x, double* buf_a, double* buf_b) {
  std::copy(adj_raw, adj_raw + lay.outputs, buf_a);
  for (std::size_t l = lay.layers + 1; l-- > 0;) {
    const std::size_t ni = lay.fan_in[l], no = lay.fan_out[l];
    const double* w = theta + lay.offset[l];
    double* gw = grad + lay.offset[l];
    double* gb = gw + no * ni;
    const double* in = l == 0 ? x : acts + (l - 1) * lay.width;
    double* adj_in = l == 0 ? adj_x : buf_b;
    std::fill(adj_in, adj_in + ni, 0.0);
    for (std::size_t o = 0; o < no; ++o) {
      const double d = buf_a[o];
      gb[o] += d;
      const double* row = w + o * ni;
      double* grow = gw + o * ni;
      for (std::size_t i = 0; i < ni; ++i) {
        grow[i] += d * in[i];
        adj_in[i] += d * row[i];
      }
    }
    if (l > 0) {
      for (std::size_t i = 0; i < ni; ++i) buf_b[i] *= in[i] * (1.0 - in[i]);
      std::swap(buf_a, buf_b);
    }
  }
}

// Output map on raw outputs; writes p and the pieces needed by the adjoint.
void output_map(const double* raw, std::size_t na, double p_max, double* p, double* soft,
                double* sig, double* exposure) {
  const double s = logistic(raw[0]);
  const double L = p_max * s;
  *sig = s;
  *exposure = L;
  if (na == 1) {
    p[0] = 1.0;
    return;
  }
  double mx = raw[1];
  for (std::size_t k = 2; k < na; ++k) mx = std::max(mx, raw[k]);
  double sum = 0.0;
  for (std::size_t k = 1; k < na; ++k) {
    soft[k - 1] = std::exp(raw[k] - mx);
    sum += soft[k - 1];
  }
  double longs = 0.0;
  for (std::size_t k = 1; k < na; ++k) {
    soft[k - 1] /= sum;
    p[k] = L * soft[k - 1];
    longs += p[k];
  }
  p[0] = 1.0 - longs;
}

struct Workspace {
  std::vector<double> x, acts, raw, soft, p, gross, V, M, sig, L;
  std::vector<char> insolvent, shorted;
  std::vector<double> adj_raw, adj_x, buf_a, buf_b;

  Workspace(const Layout& lay, std::size_t steps, std::size_t na) {
    x.resize(steps * kInputs);
    acts.resize(steps * lay.layers * lay.width);
    raw.resize(steps * na);
    soft.resize(steps * (na > 1 ? na - 1 : 1));
    p.resize(steps * na);
    gross.resize(steps * na);
    V.resize(steps);
    M.resize(steps);
    sig.resize(steps);
    L.resize(steps);
    insolvent.resize(steps);
    shorted.resize(steps);
    adj_raw.resize(na);
    adj_x.resize(kInputs);
    const std::size_t big = std::max({lay.width, na, kInputs});
    buf_a.resize(big);
    buf_b.resize(big);
  }
};

double benchmark_growth(const double* row, const RolloutScenario& sc) {
  double g = 0.0;
  for (std::size_t k = 0; k < sc.benchmark_assets.size(); ++k)
    g += sc.benchmark_weights[k] * row[sc.benchmark_assets[k]];
  return g;
}

// Forward pass of one path that records what the adjoint needs.
// Returns W(T); What(T) goes to w_hat_T.
double rollout_taped(const Layout& lay, const PolicyParams& pol, const ReturnsPanel& panel,
                     std::size_t path, const RolloutScenario& sc, Workspace& ws,
                     double* w_hat_T) {
  const NetworkConfig& cfg = pol.config;
  const std::size_t na = cfg.n_assets, steps = panel.n_steps, nassets = panel.n_assets();
  const double* data = panel.path_data(path);
  const double prem = sc.inv.b * panel.dt;
  double W = sc.inv.w0, Wh = sc.inv.w0;
  for (std::size_t n = 0; n < steps; ++n) {
    const double* row = data + n * nassets;
    const double t = static_cast<double>(n) * panel.dt;
    const double V = W + sc.inv.q;
    const double Vh = Wh + sc.inv.q;
    double* x = &ws.x[n * kInputs];
    const auto f = features(t, V, Vh, cfg);
    std::copy(f.begin(), f.end(), x);
    double* g = &ws.gross[n * na];
    for (std::size_t k = 0; k < na; ++k) g[k] = row[sc.investor_assets[k]];
    double* p = &ws.p[n * na];
    ws.V[n] = V;
    if (sc.insolvency_gate && V < 0.0) {
      ws.insolvent[n] = 1;
      ws.shorted[n] = 1;
      std::fill(p, p + na, 0.0);
      p[0] = 1.0;
      g[0] += prem;
      ws.M[n] = g[0];
    } else {
      ws.insolvent[n] = 0;
      forward(lay, pol.theta.data(), x, &ws.acts[n * lay.layers * lay.width], &ws.raw[n * na]);
      output_map(&ws.raw[n * na], na, sc.inv.p_max, p, &ws.soft[n * (na > 1 ? na - 1 : 1)],
                 &ws.sig[n], &ws.L[n]);
      ws.shorted[n] = p[0] < 0.0;
      if (ws.shorted[n]) g[0] += prem;
      double m = 0.0;
      for (std::size_t k = 0; k < na; ++k) m += p[k] * g[k];
      ws.M[n] = m;
    }
    W = V * ws.M[n];
    Wh = Vh * benchmark_growth(row, sc);
  }
  *w_hat_T = Wh;
  return W;
}

// Adds d loss_j / d theta (scaled by lambda_T) into grad.
void adjoint(const Layout& lay, const PolicyParams& pol, std::size_t steps, double lambda_T,
             double p_max, Workspace& ws, double* grad) {
  const std::size_t na = pol.config.n_assets;
  const double inv_scale = 1.0 / pol.config.wealth_scale;
  double lam = lambda_T;
  for (std::size_t n = steps; n-- > 0;) {
    if (ws.insolvent[n]) {
      lam *= ws.M[n];
      continue;
    }
    const double V = ws.V[n];
    const double* g = &ws.gross[n * na];
    const double* soft = &ws.soft[n * (na > 1 ? na - 1 : 1)];
    double* adj_raw = ws.adj_raw.data();
    // dW/dp_k = V g_k
    const double L = ws.L[n];
    double adj_L = -lam * V * g[0];
    double dot = 0.0;
    for (std::size_t k = 1; k < na; ++k) {
      const double gp = lam * V * g[k];
      adj_L += gp * soft[k - 1];
      dot += soft[k - 1] * gp * L;
    }
    const double s = ws.sig[n];
    adj_raw[0] = adj_L * p_max * s * (1.0 - s);
    for (std::size_t k = 1; k < na; ++k) {
      const double adj_s = lam * V * g[k] * L;
      adj_raw[k] = soft[k - 1] * (adj_s - dot);
    }
    backward(lay, pol.theta.data(), &ws.x[n * kInputs], &ws.acts[n * lay.layers * lay.width],
             adj_raw, grad, ws.adj_x.data(), ws.buf_a.data(), ws.buf_b.data());
    lam = lam * ws.M[n] + ws.adj_x[1] * inv_scale;
  }
}

void check_panel(const PolicyParams& pol, const ReturnsPanel& panel, const RolloutScenario& sc) {
  pol.validate();
  sc.validate(panel);
  if (sc.investor_assets.size() != pol.config.n_assets)
    throw ConfigError("network asset count does not match the scenario's investor assets");
}

}  // namespace

void NetworkConfig::validate() const {
  if (n_assets < 2) throw ConfigError("network needs at least two assets");
  if (hidden_layers < 1) throw ConfigError("network needs at least one hidden layer");
  if (hidden_width < 1) throw ConfigError("hidden width must be positive");
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("feature time scale must be positive");
  if (!(wealth_scale > 0.0) || !std::isfinite(wealth_scale))
    throw ConfigError("feature wealth scale must be positive");
}

std::size_t NetworkConfig::n_params() const { return Layout(*this).total(); }

void PolicyParams::validate() const {
  config.validate();
  if (theta.size() != config.n_params())
    throw ConfigError("parameter vector has " + std::to_string(theta.size()) +
                      " entries, network needs " + std::to_string(config.n_params()));
  for (double v : theta)
    if (!std::isfinite(v)) throw ConfigError("parameter vector has a non-finite entry");
}

PolicyParams init_policy(const NetworkConfig& cfg, std::uint64_t seed, double p_max) {
  cfg.validate();
  if (!(p_max >= 1.0)) throw ConfigError("maximum leverage p_max must be >= 1");
  const Layout lay(cfg);
  PolicyParams pol{cfg, std::vector<double>(lay.total(), 0.0)};
  Rng rng = substream(seed, Stream::nn_init, 0);
  for (std::size_t l = 0; l <= lay.layers; ++l) {
    const double a = std::sqrt(6.0 / static_cast<double>(lay.fan_in[l] + lay.fan_out[l]));
    std::uniform_real_distribution<double> u(-a, a);
    double* w = pol.theta.data() + lay.offset[l];
    for (std::size_t i = 0; i < lay.fan_in[l] * lay.fan_out[l]; ++i) w[i] = u(rng);
  }
  const double s = std::min(1.0, 0.5 * p_max) / p_max;
  pol.theta[lay.offset[lay.layers] + lay.outputs * lay.width] = std::log(s / (1.0 - s));
  return pol;
}

std::array<double, 3> features(double t, double W, double W_hat, const NetworkConfig& cfg) {
  return {t / cfg.T, W / cfg.wealth_scale, W_hat / cfg.wealth_scale};
}

double wealth_scale(double w0, double T, const ReturnsPanel& panel, std::size_t tbill_asset) {
  if (tbill_asset >= panel.n_assets()) throw ConfigError("T-bill column out of range");
  if (panel.n_paths == 0 || panel.n_steps == 0) throw ConfigError("panel is empty");
  double sum = 0.0;
  for (std::size_t j = 0; j < panel.n_paths; ++j)
    for (std::size_t n = 0; n < panel.n_steps; ++n) {
      const double g = panel.at(j, n, tbill_asset);
      if (!(g > 0.0)) throw DomainError("T-bill gross return must be positive");
      sum += std::log(g);
    }
  const double rbar =
      sum / (static_cast<double>(panel.n_paths * panel.n_steps) * panel.dt);
  return w0 * std::exp(rbar * T);
}

Allocation leverage_feasible_output(const std::vector<double>& raw, double W, double p_max) {
  const std::size_t na = raw.size();
  Allocation a{std::vector<double>(na, 0.0)};
  if (na == 0) return a;
  if (W < 0.0) {
    a.p[0] = 1.0;
    return a;
  }
  std::vector<double> soft(na > 1 ? na - 1 : 1);
  double sig, L;
  output_map(raw.data(), na, p_max, a.p.data(), soft.data(), &sig, &L);
  return a;
}

std::vector<double> network_output(const PolicyParams& policy, const std::array<double, 3>& x) {
  const Layout lay(policy.config);
  std::vector<double> acts(lay.layers * lay.width), raw(lay.outputs);
  forward(lay, policy.theta.data(), x.data(), acts.data(), raw.data());
  return raw;
}

void RolloutScenario::validate(const ReturnsPanel& panel) const {
  inv.validate();
  if (investor_assets.size() < 2) throw ConfigError("need a T-bill and at least one risky asset");
  for (std::size_t a : investor_assets)
    if (a >= panel.n_assets()) throw ConfigError("investor asset column out of range");
  if (benchmark_assets.empty() || benchmark_assets.size() != benchmark_weights.size())
    throw ConfigError("benchmark assets and weights must be nonempty and of equal length");
  double sum = 0.0;
  for (std::size_t k = 0; k < benchmark_assets.size(); ++k) {
    if (benchmark_assets[k] >= panel.n_assets())
      throw ConfigError("benchmark asset column out of range");
    if (!(benchmark_weights[k] >= 0.0)) throw ConfigError("benchmark weights must be nonnegative");
    sum += benchmark_weights[k];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("benchmark weights must sum to 1");
  if (panel.n_steps == 0) throw ConfigError("panel has no rebalancing steps");
}

RolloutTrace rollout_with_rule(const AllocationRule& rule, const ReturnsPanel& panel,
                               std::size_t path, const RolloutScenario& sc) {
  sc.validate(panel);
  if (path >= panel.n_paths) throw ConfigError("path index out of range");
  const std::size_t na = sc.investor_assets.size(), steps = panel.n_steps;
  const double prem = sc.inv.b * panel.dt;
  RolloutTrace tr;
  tr.wealth.reserve(steps + 1);
  tr.benchmark.reserve(steps + 1);
  tr.allocations.assign(steps * na, 0.0);
  double W = sc.inv.w0, Wh = sc.inv.w0;
  tr.wealth.push_back(W);
  tr.benchmark.push_back(Wh);
  const double* data = panel.path_data(path);
  for (std::size_t n = 0; n < steps; ++n) {
    const double* row = data + n * panel.n_assets();
    const double V = W + sc.inv.q, Vh = Wh + sc.inv.q;
    double* p = &tr.allocations[n * na];
    if (sc.insolvency_gate && V < 0.0) {
      p[0] = 1.0;
    } else {
      rule(static_cast<double>(n) * panel.dt, V, Vh, p);
    }
    double m = 0.0;
    for (std::size_t k = 0; k < na; ++k) {
      double g = row[sc.investor_assets[k]];
      if (k == 0 && (p[0] < 0.0 || V < 0.0)) g += prem;
      m += p[k] * g;
    }
    W = V * m;
    Wh = Vh * benchmark_growth(row, sc);
    tr.wealth.push_back(W);
    tr.benchmark.push_back(Wh);
  }
  tr.W_T = W;
  tr.W_hat_T = Wh;
  return tr;
}

RolloutTrace wealth_rollout(const PolicyParams& policy, const ReturnsPanel& panel,
                            std::size_t path, const RolloutScenario& sc) {
  check_panel(policy, panel, sc);
  const Layout lay(policy.config);
  std::vector<double> acts(lay.layers * lay.width), raw(lay.outputs), soft(lay.outputs);
  const double p_max = sc.inv.p_max;
  auto rule = [&](double t, double W, double Wh, double* p) {
    const auto x = features(t, W, Wh, policy.config);
    forward(lay, policy.theta.data(), x.data(), acts.data(), raw.data());
    double sig, L;
    output_map(raw.data(), lay.outputs, p_max, p, soft.data(), &sig, &L);
  };
  return rollout_with_rule(rule, panel, path, sc);
}

double loss(const PolicyParams& policy, const ReturnsPanel& panel, const RolloutScenario& sc) {
  return loss_and_gradient(policy, panel, sc).loss;
}

double loss_of_rule(const AllocationRule& rule, const ReturnsPanel& panel,
                    const RolloutScenario& sc) {
  sc.validate(panel);
  if (panel.n_paths == 0) throw ConfigError("panel is empty");
  std::vector<double> sq(panel.n_paths);
  for (std::size_t j = 0; j < panel.n_paths; ++j) {
    const RolloutTrace tr = rollout_with_rule(rule, panel, j, sc);
    const double e = tr.W_T - tr.W_hat_T - sc.inv.gamma;
    sq[j] = e * e;
  }
  return std::accumulate(sq.begin(), sq.end(), 0.0) / static_cast<double>(panel.n_paths);
}

LossGradient loss_and_gradient(const PolicyParams& policy, const ReturnsPanel& panel,
                               const RolloutScenario& sc, const std::vector<std::size_t>& paths) {
  check_panel(policy, panel, sc);
  if (paths.empty()) throw ConfigError("no paths to evaluate");
  for (std::size_t j : paths)
    if (j >= panel.n_paths) throw ConfigError("path index out of range");
  const Layout lay(policy.config);
  const std::size_t np = lay.total();
  const std::size_t nchunks = (paths.size() + kChunk - 1) / kChunk;
  const double scale = 1.0 / static_cast<double>(paths.size());
  std::vector<double> partial_loss(nchunks, 0.0);
  std::vector<double> partial_grad(nchunks * np, 0.0);
  parallel_for(nchunks, [&](std::size_t c) {
    Workspace ws(lay, panel.n_steps, policy.config.n_assets);
    double* grad = &partial_grad[c * np];
    const std::size_t hi = std::min(paths.size(), (c + 1) * kChunk);
    double acc = 0.0;
    for (std::size_t i = c * kChunk; i < hi; ++i) {
      double wh = 0.0;
      const double w = rollout_taped(lay, policy, panel, paths[i], sc, ws, &wh);
      const double e = w - wh - sc.inv.gamma;
      acc += e * e;
      adjoint(lay, policy, panel.n_steps, 2.0 * e * scale, sc.inv.p_max, ws, grad);
    }
    partial_loss[c] = acc;
  });
  LossGradient out;
  out.grad.assign(np, 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) {
    total += partial_loss[c];
    for (std::size_t i = 0; i < np; ++i) out.grad[i] += partial_grad[c * np + i];
  }
  out.loss = total * scale;
  return out;
}

LossGradient loss_and_gradient(const PolicyParams& policy, const ReturnsPanel& panel,
                               const RolloutScenario& sc) {
  std::vector<std::size_t> all(panel.n_paths);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss_and_gradient(policy, panel, sc, all);
}

void OptimizerConfig::validate() const {
  if (steps == 0) throw ConfigError("optimizer needs at least one step");
  if (batch == 0) throw ConfigError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(first_decay >= 0.0 && first_decay <= second_decay && second_decay <= 1.0))
    throw ConfigError("decay points must satisfy 0 <= first <= second <= 1");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0))
    throw ConfigError("decay factor must be in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("Adam moment decay rates must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

ConstantMix best_constant_mix(const ReturnsPanel& panel, const RolloutScenario& sc) {
  sc.validate(panel);
  const std::size_t na = sc.investor_assets.size();
  const double top = std::min(sc.inv.p_max, 2.0);
  const int levels = static_cast<int>(std::floor(top / 0.1 + 1e-9));
  // Splits of the long exposure over the risky assets in steps of 1/4.
  std::vector<std::vector<double>> splits;
  std::vector<int> parts(na - 1, 0);
  auto rec = [&](auto&& self, std::size_t k, int left) -> void {
    if (k + 1 == na - 1) {
      parts[k] = left;
      std::vector<double> s(na - 1);
      for (std::size_t i = 0; i < na - 1; ++i) s[i] = parts[i] / 4.0;
      splits.push_back(std::move(s));
      return;
    }
    for (int v = 0; v <= left; ++v) {
      parts[k] = v;
      self(self, k + 1, left - v);
    }
  };
  rec(rec, 0, 4);

  std::vector<std::vector<double>> cands;
  for (int l = 0; l <= levels; ++l) {
    const double L = l * 0.1;
    for (const auto& s : splits) {
      std::vector<double> p(na);
      double longs = 0.0;
      for (std::size_t i = 1; i < na; ++i) {
        p[i] = L * s[i - 1];
        longs += p[i];
      }
      p[0] = 1.0 - longs;
      cands.push_back(std::move(p));
      if (l == 0) break;
    }
  }
  std::vector<double> losses(cands.size());
  const double prem = sc.inv.b * panel.dt;
  parallel_for(cands.size(), [&](std::size_t c) {
    const auto& p = cands[c];
    double acc = 0.0;
    for (std::size_t j = 0; j < panel.n_paths; ++j) {
      const double* data = panel.path_data(j);
      double W = sc.inv.w0, Wh = sc.inv.w0;
      for (std::size_t n = 0; n < panel.n_steps; ++n) {
        const double* row = data + n * panel.n_assets();
        const double V = W + sc.inv.q;
        double m;
        if (sc.insolvency_gate && V < 0.0) {
          m = row[sc.investor_assets[0]] + prem;
        } else {
          m = 0.0;
          for (std::size_t k = 0; k < na; ++k) {
            double g = row[sc.investor_assets[k]];
            if (k == 0 && p[0] < 0.0) g += prem;
            m += p[k] * g;
          }
        }
        W = V * m;
        Wh = (Wh + sc.inv.q) * benchmark_growth(row, sc);
      }
      const double e = W - Wh - sc.inv.gamma;
      acc += e * e;
    }
    losses[c] = acc / static_cast<double>(panel.n_paths);
  });
  const std::size_t best =
      static_cast<std::size_t>(std::min_element(losses.begin(), losses.end()) - losses.begin());
  return {cands[best], losses[best]};
}

TrainResult train(const PolicyParams& theta0, const ReturnsPanel& panel, const RolloutScenario& sc,
                  const OptimizerConfig& opt) {
  check_panel(theta0, panel, sc);
  opt.validate();
  if (panel.n_paths == 0) throw ConfigError("training panel is empty");
  TrainResult res;
  res.policy = theta0;
  std::vector<double>& theta = res.policy.theta;
  const std::size_t np = theta.size();
  std::vector<double> m(np, 0.0), v(np, 0.0);
  res.loss_history.reserve(opt.steps);

  const bool full = opt.batch >= panel.n_paths;
  std::vector<std::size_t> batch(full ? panel.n_paths : opt.batch);
  if (full) std::iota(batch.begin(), batch.end(), std::size_t{0});
  std::uniform_int_distribution<std::size_t> pick(0, panel.n_paths - 1);
  const auto d1 = static_cast<std::size_t>(opt.first_decay * static_cast<double>(opt.steps));
  const auto d2 = static_cast<std::size_t>(opt.second_decay * static_cast<double>(opt.steps));
  double b1t = 1.0, b2t = 1.0;

  for (std::size_t step = 0; step < opt.steps; ++step) {
    if (!full) {
      Rng rng = substream(opt.seed, Stream::nn_batch, step);
      for (auto& j : batch) j = pick(rng);
    }
    const LossGradient lg = loss_and_gradient(res.policy, panel, sc, batch);
    bool finite = std::isfinite(lg.loss);
    for (double g : lg.grad) finite = finite && std::isfinite(g);
    if (!finite) {
      const double last = res.loss_history.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                   : res.loss_history.back();
      std::ostringstream msg;
      msg << "training diverged at step " << step << " (last finite loss " << last << ")";
      throw DivergenceError(msg.str());
    }
    res.loss_history.push_back(lg.loss);
    double lr = opt.learning_rate;
    if (step >= d1) lr *= opt.decay_factor;
    if (step >= d2) lr *= opt.decay_factor;
    b1t *= opt.beta1;
    b2t *= opt.beta2;
    for (std::size_t i = 0; i < np; ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * lg.grad[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * lg.grad[i] * lg.grad[i];
      const double mh = m[i] / (1.0 - b1t);
      const double vh = v[i] / (1.0 - b2t);
      theta[i] -= lr * mh / (std::sqrt(vh) + opt.epsilon);
    }
    for (double t : theta)
      if (!std::isfinite(t)) throw DivergenceError("parameters became non-finite at step " +
                                                   std::to_string(step));
  }
  res.final_loss = loss(res.policy, panel, sc);
  if (!std::isfinite(res.final_loss)) throw DivergenceError("final training loss is not finite");
  res.constant_mix = best_constant_mix(panel, sc);
  res.beats_constant_mix = res.final_loss <= res.constant_mix.loss;
  return res;
}

void save_checkpoint(std::ostream& out, const PolicyParams& policy, const std::string& panel_hash,
                     std::uint64_t seed) {
  policy.validate();
  const NetworkConfig& c = policy.config;
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  out << "letf-policy 1\n";
  out << "n_assets " << c.n_assets << "\n";
  out << "hidden_layers " << c.hidden_layers << "\n";
  out << "hidden_width " << c.hidden_width << "\n";
  out << "T " << num(c.T) << "\n";
  out << "wealth_scale " << num(c.wealth_scale) << "\n";
  out << "panel_hash " << (panel_hash.empty() ? "-" : panel_hash) << "\n";
  out << "seed " << seed << "\n";
  out << "theta " << policy.theta.size() << "\n";
  for (double t : policy.theta) out << num(t) << "\n";
}

Checkpoint load_checkpoint(std::istream& in) {
  auto fail = [](const std::string& what) -> void { throw ConfigError("checkpoint: " + what); };
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "letf-policy") fail("missing header");
  if (version != 1) fail("unsupported version " + std::to_string(version));
  Checkpoint ck;
  auto expect = [&](const char* key) {
    std::string k;
    if (!(in >> k) || k != key) fail(std::string("expected ") + key);
  };
  NetworkConfig& c = ck.policy.config;
  expect("n_assets");
  in >> c.n_assets;
  expect("hidden_layers");
  in >> c.hidden_layers;
  expect("hidden_width");
  in >> c.hidden_width;
  expect("T");
  in >> c.T;
  expect("wealth_scale");
  in >> c.wealth_scale;
  expect("panel_hash");
  in >> ck.panel_hash;
  if (ck.panel_hash == "-") ck.panel_hash.clear();
  expect("seed");
  in >> ck.seed;
  expect("theta");
  std::size_t n = 0;
  in >> n;
  if (!in) fail("malformed header");
  ck.policy.theta.resize(n);
  for (auto& t : ck.policy.theta)
    if (!(in >> t)) fail("truncated parameter list");
  ck.policy.validate();
  return ck;
}

AllocationRule closed_form_rule(const ClosedFormControl& control) {
  return [control](double t, double W, double W_hat, double* p) {
    const double a = control.amount(t, W, W_hat);
    const double f = W == 0.0 ? 0.0 : a / W;
    p[0] = 1.0 - f;
    p[1] = f;
  };
}

}  // namespace letf
