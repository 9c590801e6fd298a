// Copyright 2026 The fresgld Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FRESGLD_SAMPLERS_HPP
#define FRESGLD_SAMPLERS_HPP

#include "fresgld/rng.hpp"
#include "fresgld/targets.hpp"
#include "fresgld/variance.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fresgld {

// The corrected-noise matrix tau*eta I - eta^2/2 s s^T is not positive
// semidefinite: eta exceeds 2 tau / lambda_max(s s^T).
class StepTooLarge : public std::runtime_error {
 public:
  StepTooLarge(double eta, double max_eta, std::optional<std::int64_t> step = std::nullopt);

  double eta() const { return eta_; }
  double max_eta() const { return max_eta_; }
  std::optional<std::int64_t> step() const { return step_; }

 private:
  double eta_;
  double max_eta_;
  std::optional<std::int64_t> step_;
};

class NonFiniteState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StepSchedule {
 public:
  static StepSchedule constant(double eta);
  // eta_k = etas[k]; the last value is held past the end.
  static StepSchedule sequence(std::vector<double> etas);

  double at(std::int64_t k) const;
  bool is_constant() const { return values_.size() == 1 && constant_; }
  const std::vector<double> &values() const { return values_; }

 private:
  StepSchedule(std::vector<double> values, bool constant);
  std::vector<double> values_;
  bool constant_;
};

// (tau_1, tau_2) with tau_2 > tau_1 > 0.
struct TemperaturePair {
  TemperaturePair(double low, double high);
  double low;
  double high;
  // tau_delta = 1/tau_1 - 1/tau_2
  double delta() const { return 1.0 / low - 1.0 / high; }
};

struct ChainState {
  State position;
  double temperature = 1.0;
  std::int64_t iteration = 0;
  Stream rng;  // injected Langevin noise
};

// ---------------------------------------------------------------------------
// Single-chain kernels.
//
// Per step a chain draws p gradient-noise normals from its model's gradient
// stream, then p injected-noise normals from its own stream. Energy noise for
// swaps comes from the model's energy stream.

// 2 eta tau, shared by every kernel so the zero-noise paths agree bitwise.
inline double injected_variance(double eta, double tau) { return 2.0 * eta * tau; }

// theta - eta grad + sqrt(2 eta tau) xi
State ld_update(const State &theta, const State &grad, double eta, double tau, const Eigen::VectorXd &xi);

void ld_step(ChainState &chain, const EnergyModel &model, double eta);
void sgld_step(ChainState &chain, NoisyEnergyModel &model, double eta);

// c_hat with c_hat c_hat^T = tau eta I - eta^2/2 s_hat s_hat^T, the symmetric
// (spectral) square root. Eigenvalues in [-1e-12, 0) are clamped to 0; below
// that StepTooLarge is thrown unless `clamp` is set.
Eigen::MatrixXd effective_noise_factor(const Eigen::MatrixXd &s_hat, double eta, double tau,
                                       bool clamp = false);

// Noise actually injected by the bias-corrected step: L with
// L L^T = 2 tau eta I - eta^2 s_hat s_hat^T (= 2 c_hat c_hat^T). For diagonal
// s_hat only the per-coordinate scales are filled.
struct InjectedNoise {
  bool diagonal = true;
  Eigen::VectorXd scales;
  Eigen::MatrixXd factor;

  Eigen::VectorXd apply(const Eigen::VectorXd &xi) const;
};

InjectedNoise injected_noise_factor(const Eigen::MatrixXd &s_hat, bool s_hat_diagonal, double eta,
                                    double tau, bool clamp = false);

State f_sgld_update(const State &theta, const State &noisy_grad, double eta, const InjectedNoise &noise,
                    const Eigen::VectorXd &xi);

// Bias-corrected SGLD: the gradient estimator's covariance (as estimated by
// `variance`) is credited against the injected noise.
void f_sgld_step(ChainState &chain, NoisyEnergyModel &model, const VarianceEstimator &variance,
                 double eta, bool clamp = false);

// ---------------------------------------------------------------------------
// Swap rates. All exponents are evaluated in log space and capped at +-700.

inline constexpr double kMaxLogRate = 700.0;

double swap_rate_exact(double u_low, double u_high, const TemperaturePair &temps);

// Equal-variance correction: exp{tau_d (U1_hat - U2_hat - tau_d sigma^2)}.
double swap_rate_resgld(double u_low_hat, double u_high_hat, double variance,
                        const TemperaturePair &temps);

// Both estimators evaluated at both states.
struct CrossEnergies {
  double low_at_low;    // U1_hat(theta1)
  double low_at_high;   // U1_hat(theta2)
  double high_at_low;   // U2_hat(theta1)
  double high_at_high;  // U2_hat(theta2)
};

double swap_rate_mresgld(const CrossEnergies &u, double low_variance, double high_variance, double a1,
                         double a2, const TemperaturePair &temps);

// One evaluation per chain: exp{tau_d (U1_hat(theta1) - U2_hat(theta2)
//   - tau_d (sigma1^2(theta1) + sigma2^2(theta2)) / 2)}.
double swap_rate_fresgld(double u_low_at_low, double u_high_at_high, double low_variance_at_low,
                         double high_variance_at_high, const TemperaturePair &temps);

// ---------------------------------------------------------------------------
// Replica exchange.

enum class SamplerKind { reld, resgld, m_resgld, f_resgld };

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string &name);

struct SwapRule {
  SamplerKind kind = SamplerKind::f_resgld;
  double a = 1.0;  // swap intensity
  double a1 = 0.5;
  double a2 = 0.5;

  void validate() const;
};

struct ReplicaPair {
  ReplicaPair(ChainState low, ChainState high, SwapRule rule, std::uint64_t swap_seed);

  ChainState low;
  ChainState high;
  SwapRule rule;
  std::int64_t swap_attempts = 0;
  std::int64_t swap_accepts = 0;
  Stream swap_rng;

  TemperaturePair temperatures() const { return {low.temperature, high.temperature}; }
};

// min(1, a eta min(1, rate)), clamped into [0, 1].
double swap_probability(double a, double eta, double rate);

// Draws one uniform from the pair's swap stream and exchanges the positions
// with probability swap_probability(rule.a, eta, rate).
bool attempt_swap(ReplicaPair &pair, double eta, double rate);

// Axis-aligned box; positions leaving it are reflected back in.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

void reflect_into(State &theta, const Box &box);

struct RunOptions {
  bool clamp_noise = false;
  std::optional<Box> reflect;
};

struct StepRecord {
  std::int64_t step;  // 1-based
  double eta;
  const ReplicaPair &pair;
  std::array<double, 2> energies;  // estimate attached to each chain's current position
  bool swapped;
};

using StepObserver = std::function<void(const StepRecord &)>;

struct TraceRow {
  std::int64_t step;
  int chain_id;  // 0 = low temperature, 1 = high temperature
  double temperature;
  State theta;
  double energy_estimate;
  bool swapped;
  double eta;
};

struct SampleTrace {
  Eigen::Index dim = 0;
  std::vector<TraceRow> rows;
  std::int64_t swap_attempts = 0;
  std::int64_t swap_accepts = 0;

  // Positions of one chain for steps > after_step, in step order.
  std::vector<State> positions(int chain_id, std::int64_t after_step = 0) const;
  void write_csv(std::ostream &out) const;
};

// Advances the pair n_steps times. Per step: both chains move (low first),
// variance estimators are fed the new states, swap energies are evaluated
// and one swap is attempted on the post-update positions.
void advance_replica_exchange(ReplicaPair &pair, std::span<NoisyEnergyModel, 2> models,
                              std::span<VarianceEstimator, 2> variance, const StepSchedule &schedule,
                              std::int64_t n_steps, const RunOptions &options,
                              const StepObserver &observer);

SampleTrace run_replica_exchange(ReplicaPair &pair, std::span<NoisyEnergyModel, 2> models,
                                 std::span<VarianceEstimator, 2> variance, const StepSchedule &schedule,
                                 std::int64_t n_steps, const RunOptions &options = {});

enum class ChainKind { ld, sgld, f_sgld };

// Single chain without exchange; trace rows carry chain_id 0 and the exact
// energy of each visited state.
SampleTrace run_single_chain(ChainState &chain, NoisyEnergyModel &model, VarianceEstimator *variance,
                             ChainKind kind, const StepSchedule &schedule, std::int64_t n_steps,
                             const RunOptions &options = {});

}  // namespace fresgld

#endif  // FRESGLD_SAMPLERS_HPP
