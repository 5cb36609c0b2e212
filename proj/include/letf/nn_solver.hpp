#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "letf/bootstrap_data.hpp"
#include "letf/closed_form.hpp"

namespace letf {

struct NetworkConfig {
  std::size_t n_assets = 3;  // asset 0 is the shortable T-bill
  std::size_t hidden_layers = 2;
  std::size_t hidden_width = 8;
  // Feature normalisation: t / T, W / wealth_scale, What / wealth_scale.
  double T = 10.0;
  double wealth_scale = 100.0;

  void validate() const;
  std::size_t n_params() const;
};

struct PolicyParams {
  NetworkConfig config;
  std::vector<double> theta;

  void validate() const;
};

// Glorot-uniform weights, zero biases except the exposure output, which starts
// at total long exposure min(1, p_max / 2).
PolicyParams init_policy(const NetworkConfig& cfg, std::uint64_t seed, double p_max = 1.0);

struct Allocation {
  std::vector<double> p;
};

std::array<double, 3> features(double t, double W, double W_hat, const NetworkConfig& cfg);

// w0 * exp(rbar * T) with rbar the mean continuously compounded T-bill rate
// over every path and step of the panel.
double wealth_scale(double w0, double T, const ReturnsPanel& panel, std::size_t tbill_asset);

// Insolvent wealth gets e_1. Otherwise total long exposure
// L = p_max * logistic(raw[0]) is split over assets 1.. by softmax(raw[1..]),
// and the T-bill takes 1 - L.
Allocation leverage_feasible_output(const std::vector<double>& raw, double W, double p_max);

// Raw network output for a feature vector.
std::vector<double> network_output(const PolicyParams& policy, const std::array<double, 3>& x);

struct RolloutScenario {
  InvestmentParams inv;  // q is per rebalance here; b is annual
  std::vector<std::size_t> investor_assets;   // panel columns; the first is the T-bill
  std::vector<std::size_t> benchmark_assets;  // panel columns
  std::vector<double> benchmark_weights;
  bool insolvency_gate = true;

  void validate(const ReturnsPanel& panel) const;
};

struct RolloutTrace {
  double W_T = 0.0;
  double W_hat_T = 0.0;
  std::vector<double> wealth;       // W(t_n), n = 0..N
  std::vector<double> benchmark;    // What(t_n)
  std::vector<double> allocations;  // [n][asset], n = 0..N-1
};

// Any feedback rule: fills p (length n_assets) from (t, W, What) where W and
// What already include the injection at t.
using AllocationRule = std::function<void(double t, double W, double W_hat, double* p)>;

RolloutTrace wealth_rollout(const PolicyParams& policy, const ReturnsPanel& panel,
                            std::size_t path, const RolloutScenario& sc);
RolloutTrace rollout_with_rule(const AllocationRule& rule, const ReturnsPanel& panel,
                               std::size_t path, const RolloutScenario& sc);

// Mean of (W(T) - What(T) - gamma)^2 over all paths.
double loss(const PolicyParams& policy, const ReturnsPanel& panel, const RolloutScenario& sc);
double loss_of_rule(const AllocationRule& rule, const ReturnsPanel& panel,
                    const RolloutScenario& sc);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

// Loss over the listed paths and its gradient in theta. The insolvency gate
// and the premium indicator are held fixed within each step.
LossGradient loss_and_gradient(const PolicyParams& policy, const ReturnsPanel& panel,
                               const RolloutScenario& sc, const std::vector<std::size_t>& paths);
LossGradient loss_and_gradient(const PolicyParams& policy, const ReturnsPanel& panel,
                               const RolloutScenario& sc);

struct OptimizerConfig {
  std::size_t steps = 20000;
  std::size_t batch = 1024;
  double learning_rate = 1e-2;
  double first_decay = 0.6;   // fraction of steps
  double second_decay = 0.85;
  double decay_factor = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ConstantMix {
  std::vector<double> p;
  double loss = 0.0;
};

// Best fixed allocation on a coarse grid: total exposure in steps of 0.1 up to
// min(p_max, 2), split over the risky assets in quarters.
ConstantMix best_constant_mix(const ReturnsPanel& panel, const RolloutScenario& sc);

struct TrainResult {
  PolicyParams policy;
  std::vector<double> loss_history;  // minibatch loss per step
  double final_loss = 0.0;           // full-panel loss at the returned theta
  ConstantMix constant_mix;
  bool beats_constant_mix = false;
};

TrainResult train(const PolicyParams& theta0, const ReturnsPanel& panel, const RolloutScenario& sc,
                  const OptimizerConfig& opt);

void save_checkpoint(std::ostream& out, const PolicyParams& policy, const std::string& panel_hash,
                     std::uint64_t seed);
struct Checkpoint {
  PolicyParams policy;
  std::string panel_hash;
  std::uint64_t seed = 0;
};
Checkpoint load_checkpoint(std::istream& in);

// Discrete-time use of a closed-form control: ETF weight amount / W, the rest
// in the T-bill. Expects two investor assets.
AllocationRule closed_form_rule(const ClosedFormControl& control);

}  // namespace letf
