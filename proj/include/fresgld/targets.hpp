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

#ifndef FRESGLD_TARGETS_HPP
#define FRESGLD_TARGETS_HPP

#include "fresgld/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace fresgld {

// A point in parameter space.
using State = Eigen::VectorXd;

// Exact energy U and its gradient. Implementations are immutable and can be
// shared between threads.
class EnergyModel {
 public:
  virtual ~EnergyModel() = default;
  virtual Eigen::Index dim() const = 0;
  virtual double energy(const State &theta) const = 0;
  virtual State gradient(const State &theta) const = 0;
};

// One-dimensional Gaussian mixture, U = -log sum_i w_i N(theta; mu_i, sd_i^2).
// The default components are the two-mode benchmark target
// 0.4 N(-4, 0.7^2) + 0.6 N(3, 0.5^2).
class GaussianMixture1D final : public EnergyModel {
 public:
  struct Component {
    double weight;
    double mean;
    double sd;
  };

  GaussianMixture1D();
  explicit GaussianMixture1D(std::vector<Component> components);

  Eigen::Index dim() const override { return 1; }
  double energy(const State &theta) const override;
  State gradient(const State &theta) const override;

  double energy(double theta) const;
  double gradient(double theta) const;
  double density(double theta) const;
  double cdf(double theta) const;

  const std::vector<Component> &components() const { return components_; }

 private:
  std::vector<Component> components_;
};

double gaussian_mixture_energy(double theta);
double gaussian_mixture_gradient(double theta);

// U = (m/2)|theta|^2, so pi_tau = N(0, tau/m I).
class QuadraticEnergy final : public EnergyModel {
 public:
  QuadraticEnergy(Eigen::Index dim, double curvature);

  Eigen::Index dim() const override { return dim_; }
  double energy(const State &theta) const override;
  State gradient(const State &theta) const override;
  double curvature() const { return curvature_; }

 private:
  Eigen::Index dim_;
  double curvature_;
};

double quadratic_energy(const State &theta, double m);
State quadratic_gradient(const State &theta, double m);

enum class NoiseKind { constant, state_dependent };

// Noise structure of the stochastic estimators:
//   U_hat(theta)    ~ N(U(theta), energy_sd(theta)^2)
//   grad_hat(theta) ~ N(grad U(theta), s(theta) s(theta)^T)
// with s = gradient_factor. `diagonal` is set when s(theta) is always
// diagonal, which lets samplers skip the eigendecomposition.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::constant;
  std::function<double(const State &)> energy_sd;
  std::function<Eigen::MatrixXd(const State &)> gradient_factor;
  bool diagonal = true;

  static NoiseSpec zero(Eigen::Index dim);
  static NoiseSpec constant(Eigen::Index dim, double energy_sd, double gradient_sd);
  static NoiseSpec constant_matrix(double energy_sd, Eigen::MatrixXd factor);
};

double logistic(double x);

// s(theta) = scale * e^theta / (1 + e^theta), applied per coordinate.
std::function<Eigen::MatrixXd(const State &)> logistic_state_factor(Eigen::Index dim,
                                                                   double scale);

// sigma(theta) = scale * e^U / (1 + e^U) with U the exact energy of `model`.
std::function<double(const State &)> logistic_energy_sd(std::shared_ptr<const EnergyModel> model,
                                                        double scale);

// Gaussian-noise wrapper producing U_hat and grad_hat. Owns its gradient and
// energy streams, so it is confined to one chain. Draw counts per call are
// fixed (p normals per gradient, one per energy) regardless of the noise
// level; with zero noise the exact values are returned.
class NoisyEnergyModel {
 public:
  NoisyEnergyModel(std::shared_ptr<const EnergyModel> base, NoiseSpec noise,
                   std::uint64_t gradient_seed, std::uint64_t energy_seed);

  Eigen::Index dim() const { return base_->dim(); }
  const EnergyModel &base() const { return *base_; }
  const std::shared_ptr<const EnergyModel> &base_ptr() const { return base_; }
  const NoiseSpec &noise() const { return noise_; }

  double noisy_energy(const State &theta);
  State noisy_gradient(const State &theta);

  // Draw from an external stream (variance probes).
  double noisy_energy(const State &theta, Stream &rng);
  State noisy_gradient(const State &theta, Stream &rng);

  // Deterministic forms given the standard-normal draws.
  double noisy_energy_with(const State &theta, double z) const;
  State noisy_gradient_with(const State &theta, const Eigen::VectorXd &zeta) const;

  double energy_variance(const State &theta) const;
  Eigen::MatrixXd gradient_factor(const State &theta) const;

  std::int64_t energy_evaluations() const { return energy_evaluations_; }
  std::int64_t gradient_evaluations() const { return gradient_evaluations_; }
  void reset_counters() { energy_evaluations_ = gradient_evaluations_ = 0; }

 private:
  std::shared_ptr<const EnergyModel> base_;
  NoiseSpec noise_;
  Stream gradient_rng_;
  Stream energy_rng_;
  std::int64_t energy_evaluations_ = 0;
  std::int64_t gradient_evaluations_ = 0;
};

}  // namespace fresgld

#endif  // FRESGLD_TARGETS_HPP
