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

#include "fresgld/samplers.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <sstream>
#include <utility>

namespace fresgld {

namespace {

constexpr double kEigenTolerance = 1e-12;

std::string describe(const State &theta) {
  std::ostringstream os;
  os.precision(17);
  os << "[";
  for (Eigen::Index i = 0; i < theta.size(); ++i) os << (i ? ", " : "") << theta[i];
  os << "]";
  return os.str();
}

void check_finite_gradient(const State &grad, const ChainState &chain) {
  if (grad.allFinite()) return;
  throw NonFiniteState("non-finite gradient at iteration " + std::to_string(chain.iteration) +
                       ", temperature " + std::to_string(chain.temperature) + ", position " +
                       describe(chain.position) + ", gradient " + describe(grad));
}

void check_step_args(double eta, double tau) {
  if (!(eta > 0.0)) throw std::invalid_argument("step size must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
}

double capped_exp(double log_rate) {
  if (std::isnan(log_rate)) return 0.0;
  return std::exp(std::clamp(log_rate, -kMaxLogRate, kMaxLogRate));
}

// tau_d (diff - tau_d correction)
double log_swap_rate(double diff, double correction, double tau_delta) {
  return tau_delta * (diff - tau_delta * correction);
}

double max_admissible_eta(const Eigen::MatrixXd &s_hat, double tau) {
  const Eigen::MatrixXd ss = s_hat * s_hat.transpose();
  const double lambda_max = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(ss, Eigen::EigenvaluesOnly)
                                .eigenvalues()
                                .maxCoeff();
  return lambda_max > 0.0 ? 2.0 * tau / lambda_max : std::numeric_limits<double>::infinity();
}

// Spectral square root of a symmetric matrix whose smallest admissible
// eigenvalue is -tol.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd &m, double tol, bool clamp, double eta,
                               const Eigen::MatrixXd &s_hat, double tau) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda[i] >= 0.0) continue;
    if (lambda[i] < -tol && !clamp) throw StepTooLarge(eta, max_admissible_eta(s_hat, tau));
    lambda[i] = 0.0;
  }
  return eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

std::atomic<bool> warned_clamp{false};

void warn_clamped(double eta) {
  if (warned_clamp.exchange(true)) return;
  std::clog << "warning: corrected noise clamped at eta=" << eta
            << "; the chain no longer targets its nominal temperature\n";
}

}  // namespace

StepTooLarge::StepTooLarge(double eta, double max_eta, std::optional<std::int64_t> step)
    : std::runtime_error([&] {
        std::ostringstream os;
        os.precision(10);
        os << "step size " << eta << " too large for the corrected noise; maximal admissible step "
           << max_eta;
        if (step) os << " (step " << *step << ")";
        return os.str();
      }()),
      eta_(eta),
      max_eta_(max_eta),
      step_(step) {}

StepSchedule::StepSchedule(std::vector<double> values, bool constant)
    : values_(std::move(values)), constant_(constant) {
  if (values_.empty()) throw std::invalid_argument("step schedule is empty");
  for (double v : values_)
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("step sizes must be positive");
}

StepSchedule StepSchedule::constant(double eta) { return StepSchedule({eta}, true); }

StepSchedule StepSchedule::sequence(std::vector<double> etas) { return StepSchedule(std::move(etas), false); }

double StepSchedule::at(std::int64_t k) const {
  if (k < 0) throw std::out_of_range("negative step index");
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(k), values_.size() - 1);
  return values_[i];
}

TemperaturePair::TemperaturePair(double low_, double high_) : low(low_), high(high_) {
  if (!(low > 0.0) || !(high > low))
    throw std::invalid_argument("temperatures must satisfy tau_2 > tau_1 > 0");
}

State ld_update(const State &theta, const State &grad, double eta, double tau, const Eigen::VectorXd &xi) {
  const double scale = std::sqrt(injected_variance(eta, tau));
  return theta - eta * grad + scale * xi;
}

void ld_step(ChainState &chain, const EnergyModel &model, double eta) {
  check_step_args(eta, chain.temperature);
  const State grad = model.gradient(chain.position);
  check_finite_gradient(grad, chain);
  const Eigen::VectorXd xi = chain.rng.normal_vector(chain.position.size());
  chain.position = ld_update(chain.position, grad, eta, chain.temperature, xi);
  ++chain.iteration;
}

void sgld_step(ChainState &chain, NoisyEnergyModel &model, double eta) {
  check_step_args(eta, chain.temperature);
  const State grad = model.noisy_gradient(chain.position);
  check_finite_gradient(grad, chain);
  const Eigen::VectorXd xi = chain.rng.normal_vector(chain.position.size());
  chain.position = ld_update(chain.position, grad, eta, chain.temperature, xi);
  ++chain.iteration;
}

Eigen::MatrixXd effective_noise_factor(const Eigen::MatrixXd &s_hat, double eta, double tau, bool clamp) {
  check_step_args(eta, tau);
  if (s_hat.rows() != s_hat.cols()) throw std::invalid_argument("s_hat must be square");
  const auto p = s_hat.rows();
  if (s_hat.isDiagonal(0.0)) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
      double v = tau * eta - 0.5 * eta * eta * (s_hat(i, i) * s_hat(i, i));
      if (v < 0.0) {
        if (v < -kEigenTolerance && !clamp) throw StepTooLarge(eta, max_admissible_eta(s_hat, tau));
        v = 0.0;
      }
      c(i, i) = std::sqrt(v);
    }
    return c;
  }
  const Eigen::MatrixXd m = tau * eta * Eigen::MatrixXd::Identity(p, p) -
                            0.5 * eta * eta * (s_hat * s_hat.transpose());
  return symmetric_sqrt(m, kEigenTolerance, clamp, eta, s_hat, tau);
}

Eigen::VectorXd InjectedNoise::apply(const Eigen::VectorXd &xi) const {
  if (diagonal) return scales.cwiseProduct(xi);
  return factor * xi;
}

InjectedNoise injected_noise_factor(const Eigen::MatrixXd &s_hat, bool s_hat_diagonal, double eta,
                                    double tau, bool clamp) {
  check_step_args(eta, tau);
  const auto p = s_hat.rows();
  InjectedNoise noise;
  noise.diagonal = s_hat_diagonal || s_hat.isDiagonal(0.0);
  if (noise.diagonal) {
    noise.scales.resize(p);
    const double base = injected_variance(eta, tau);
    for (Eigen::Index i = 0; i < p; ++i) {
      double v = base - eta * eta * (s_hat(i, i) * s_hat(i, i));
      if (v < 0.0) {
        if (v < -2.0 * kEigenTolerance) {
          if (!clamp) throw StepTooLarge(eta, max_admissible_eta(s_hat, tau));
          warn_clamped(eta);
        }
        v = 0.0;
      }
      noise.scales[i] = std::sqrt(v);
    }
    return noise;
  }
  const Eigen::MatrixXd m = injected_variance(eta, tau) * Eigen::MatrixXd::Identity(p, p) -
                            eta * eta * (s_hat * s_hat.transpose());
  if (clamp) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -2.0 * kEigenTolerance) warn_clamped(eta);
  }
  noise.factor = symmetric_sqrt(m, 2.0 * kEigenTolerance, clamp, eta, s_hat, tau);
  return noise;
}

State f_sgld_update(const State &theta, const State &noisy_grad, double eta, const InjectedNoise &noise,
                    const Eigen::VectorXd &xi) {
  return theta - eta * noisy_grad + noise.apply(xi);
}

void f_sgld_step(ChainState &chain, NoisyEnergyModel &model, const VarianceEstimator &variance,
                 double eta, bool clamp) {
  check_step_args(eta, chain.temperature);
  const InjectedNoise noise = injected_noise_factor(variance.gradient_factor(chain.position),
                                                    variance.diagonal(), eta, chain.temperature, clamp);
  const State grad = model.noisy_gradient(chain.position);
  check_finite_gradient(grad, chain);
  const Eigen::VectorXd xi = chain.rng.normal_vector(chain.position.size());
  chain.position = f_sgld_update(chain.position, grad, eta, noise, xi);
  ++chain.iteration;
}

double swap_rate_exact(double u_low, double u_high, const TemperaturePair &temps) {
  return capped_exp(log_swap_rate(u_low - u_high, 0.0, temps.delta()));
}

double swap_rate_resgld(double u_low_hat, double u_high_hat, double variance,
                        const TemperaturePair &temps) {
  if (variance < 0.0) throw std::invalid_argument("energy variance must be non-negative");
  return capped_exp(log_swap_rate(u_low_hat - u_high_hat, variance, temps.delta()));
}

double swap_rate_mresgld(const CrossEnergies &u, double low_variance, double high_variance, double a1,
                         double a2, const TemperaturePair &temps) {
  if (a1 < 0.0 || a2 < 0.0 || std::abs(a1 + a2 - 1.0) > 1e-12)
    throw std::invalid_argument("m-reSGLD weights must be non-negative and sum to 1");
  if (low_variance < 0.0 || high_variance < 0.0)
    throw std::invalid_argument("energy variance must be non-negative");
  const double diff = a1 * (u.low_at_low - u.low_at_high) + a2 * (u.high_at_low - u.high_at_high);
  const double correction = a1 * a1 * low_variance + a2 * a2 * high_variance;
  return capped_exp(log_swap_rate(diff, correction, temps.delta()));
}

double swap_rate_fresgld(double u_low_at_low, double u_high_at_high, double low_variance_at_low,
                         double high_variance_at_high, const TemperaturePair &temps) {
  if (low_variance_at_low < 0.0 || high_variance_at_high < 0.0)
    throw std::invalid_argument("energy variance must be non-negative");
  const double correction = (low_variance_at_low + high_variance_at_high) / 2.0;
  return capped_exp(log_swap_rate(u_low_at_low - u_high_at_high, correction, temps.delta()));
}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::reld: return "reld";
    case SamplerKind::resgld: return "resgld";
    case SamplerKind::m_resgld: return "m_resgld";
    case SamplerKind::f_resgld: return "f_resgld";
  }
  return "?";
}

SamplerKind sampler_kind_from_string(const std::string &name) {
  if (name == "reld") return SamplerKind::reld;
  if (name == "resgld") return SamplerKind::resgld;
  if (name == "m_resgld") return SamplerKind::m_resgld;
  if (name == "f_resgld") return SamplerKind::f_resgld;
  throw std::invalid_argument("unknown replica sampler '" + name + "'");
}

void SwapRule::validate() const {
  if (!(a > 0.0)) throw std::invalid_argument("swap intensity a must be positive");
  if (kind == SamplerKind::m_resgld && (a1 < 0.0 || a2 < 0.0 || std::abs(a1 + a2 - 1.0) > 1e-12))
    throw std::invalid_argument("m-reSGLD weights must be non-negative and sum to 1");
}

ReplicaPair::ReplicaPair(ChainState low_, ChainState high_, SwapRule rule_, std::uint64_t swap_seed)
    : low(std::move(low_)), high(std::move(high_)), rule(rule_), swap_rng(swap_seed) {
  (void)TemperaturePair{low.temperature, high.temperature};
  rule.validate();
  if (low.position.size() != high.position.size() || low.position.size() < 1)
    throw std::invalid_argument("replica chains must share a positive dimension");
}

double swap_probability(double a, double eta, double rate) {
  if (std::isnan(rate) || rate <= 0.0) return 0.0;
  const double p = a * eta * std::min(1.0, rate);
  return std::clamp(p, 0.0, 1.0);
}

bool attempt_swap(ReplicaPair &pair, double eta, double rate) {
  const double p = swap_probability(pair.rule.a, eta, rate);
  const double u = pair.swap_rng.uniform();
  ++pair.swap_attempts;
  if (u < p) {
    std::swap(pair.low.position, pair.high.position);
    ++pair.swap_accepts;
    return true;
  }
  return false;
}

void reflect_into(State &theta, const Box &box) {
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double lo = box.lower[i];
    const double hi = box.upper[i];
    const double width = hi - lo;
    if (!(width > 0.0)) throw std::invalid_argument("reflection box has zero width");
    double x = theta[i];
    if (x >= lo && x <= hi) continue;
    // Fold onto [lo, lo + 2 width) then mirror the upper half.
    double y = std::fmod(x - lo, 2.0 * width);
    if (y < 0.0) y += 2.0 * width;
    theta[i] = y <= width ? lo + y : hi - (y - width);
  }
}

std::vector<State> SampleTrace::positions(int chain_id, std::int64_t after_step) const {
  std::vector<State> out;
  for (const auto &row : rows)
    if (row.chain_id == chain_id && row.step > after_step) out.push_back(row.theta);
  return out;
}

void SampleTrace::write_csv(std::ostream &out) const {
  out << "step,chain_id,temperature";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",theta_" << i;
  out << ",energy_estimate,swapped,eta\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  };
  for (const auto &row : rows) {
    out << row.step << ',' << row.chain_id << ',' << num(row.temperature);
    for (Eigen::Index i = 0; i < row.theta.size(); ++i) out << ',' << num(row.theta[i]);
    out << ',' << num(row.energy_estimate) << ',' << (row.swapped ? 1 : 0) << ',' << num(row.eta) << '\n';
  }
}

void advance_replica_exchange(ReplicaPair &pair, std::span<NoisyEnergyModel, 2> models,
                              std::span<VarianceEstimator, 2> variance, const StepSchedule &schedule,
                              std::int64_t n_steps, const RunOptions &options,
                              const StepObserver &observer) {
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  const SamplerKind kind = pair.rule.kind;
  const TemperaturePair temps = pair.temperatures();
  std::array<ChainState *, 2> chains{&pair.low, &pair.high};

  const bool estimates = kind != SamplerKind::reld;
  if (estimates)
    for (int l = 0; l < 2; ++l) variance[l].update(models[l], chains[l]->position, pair.high.position);

  for (std::int64_t k = 0; k < n_steps; ++k) {
    const double eta = schedule.at(k);
    try {
      for (int l = 0; l < 2; ++l) {
        ChainState &chain = *chains[l];
        switch (kind) {
          case SamplerKind::reld: ld_step(chain, models[l].base(), eta); break;
          case SamplerKind::resgld:
          case SamplerKind::m_resgld: sgld_step(chain, models[l], eta); break;
          case SamplerKind::f_resgld: f_sgld_step(chain, models[l], variance[l], eta, options.clamp_noise); break;
        }
        if (options.reflect) reflect_into(chain.position, *options.reflect);
      }
    } catch (const StepTooLarge &e) {
      throw StepTooLarge(e.eta(), e.max_eta(), k + 1);
    }

    const State &t1 = pair.low.position;
    const State &t2 = pair.high.position;
    if (estimates)
      for (int l = 0; l < 2; ++l) variance[l].update(models[l], chains[l]->position, t2);

    std::array<double, 2> energies{};
    double rate = 0.0;
    switch (kind) {
      case SamplerKind::reld:
        energies = {models[0].base().energy(t1), models[1].base().energy(t2)};
        rate = swap_rate_exact(energies[0], energies[1], temps);
        break;
      case SamplerKind::resgld:
        energies = {models[0].noisy_energy(t1), models[1].noisy_energy(t2)};
        rate = swap_rate_resgld(energies[0], energies[1], variance[0].energy_variance(t1), temps);
        break;
      case SamplerKind::m_resgld: {
        CrossEnergies u{};
        u.low_at_low = models[0].noisy_energy(t1);
        u.low_at_high = models[0].noisy_energy(t2);
        u.high_at_low = models[1].noisy_energy(t1);
        u.high_at_high = models[1].noisy_energy(t2);
        energies = {u.low_at_low, u.high_at_high};
        const double v1 = (variance[0].energy_variance(t1) + variance[0].energy_variance(t2)) / 2.0;
        const double v2 = (variance[1].energy_variance(t1) + variance[1].energy_variance(t2)) / 2.0;
        rate = swap_rate_mresgld(u, v1, v2, pair.rule.a1, pair.rule.a2, temps);
        break;
      }
      case SamplerKind::f_resgld:
        energies = {models[0].noisy_energy(t1), models[1].noisy_energy(t2)};
        rate = swap_rate_fresgld(energies[0], energies[1], variance[0].energy_variance(t1),
                                 variance[1].energy_variance(t2), temps);
        break;
    }

    const bool swapped = attempt_swap(pair, eta, rate);
    if (swapped) std::swap(energies[0], energies[1]);
    if (observer) observer(StepRecord{k + 1, eta, pair, energies, swapped});
  }
}

SampleTrace run_replica_exchange(ReplicaPair &pair, std::span<NoisyEnergyModel, 2> models,
                                 std::span<VarianceEstimator, 2> variance, const StepSchedule &schedule,
                                 std::int64_t n_steps, const RunOptions &options) {
  SampleTrace trace;
  trace.dim = pair.low.position.size();
  trace.rows.reserve(static_cast<std::size_t>(2 * std::max<std::int64_t>(n_steps, 0)));
  const std::int64_t attempts0 = pair.swap_attempts;
  const std::int64_t accepts0 = pair.swap_accepts;
  advance_replica_exchange(pair, models, variance, schedule, n_steps, options, [&](const StepRecord &r) {
    trace.rows.push_back({r.step, 0, r.pair.low.temperature, r.pair.low.position, r.energies[0], r.swapped, r.eta});
    trace.rows.push_back({r.step, 1, r.pair.high.temperature, r.pair.high.position, r.energies[1], r.swapped, r.eta});
  });
  trace.swap_attempts = pair.swap_attempts - attempts0;
  trace.swap_accepts = pair.swap_accepts - accepts0;
  return trace;
}

SampleTrace run_single_chain(ChainState &chain, NoisyEnergyModel &model, VarianceEstimator *variance,
                             ChainKind kind, const StepSchedule &schedule, std::int64_t n_steps,
                             const RunOptions &options) {
  if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
  if (kind == ChainKind::f_sgld && variance == nullptr)
    throw std::invalid_argument("f-SGLD needs a variance estimator");
  SampleTrace trace;
  trace.dim = chain.position.size();
  trace.rows.reserve(static_cast<std::size_t>(n_steps));
  if (kind == ChainKind::f_sgld) variance->update(model, chain.position, chain.position);
  for (std::int64_t k = 0; k < n_steps; ++k) {
    const double eta = schedule.at(k);
    try {
      switch (kind) {
        case ChainKind::ld: ld_step(chain, model.base(), eta); break;
        case ChainKind::sgld: sgld_step(chain, model, eta); break;
        case ChainKind::f_sgld: f_sgld_step(chain, model, *variance, eta, options.clamp_noise); break;
      }
    } catch (const StepTooLarge &e) {
      throw StepTooLarge(e.eta(), e.max_eta(), k + 1);
    }
    if (options.reflect) reflect_into(chain.position, *options.reflect);
    if (kind == ChainKind::f_sgld) variance->update(model, chain.position, chain.position);
    trace.rows.push_back({k + 1, 0, chain.temperature, chain.position, model.base().energy(chain.position),
                          false, eta});
  }
  return trace;
}

}  // namespace fresgld
