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

#include "fresgld/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace fresgld {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

double component_log_density(const GaussianMixture1D::Component &c, double theta) {
  const double z = (theta - c.mean) / c.sd;
  return std::log(c.weight) - std::log(c.sd) - kLogSqrt2Pi - 0.5 * z * z;
}

}  // namespace

GaussianMixture1D::GaussianMixture1D()
    : GaussianMixture1D({{0.4, -4.0, 0.7}, {0.6, 3.0, 0.5}}) {}

GaussianMixture1D::GaussianMixture1D(std::vector<Component> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
  double total = 0.0;
  for (const auto &c : components_) {
    if (!(c.weight > 0.0) || !(c.sd > 0.0))
      throw std::invalid_argument("mixture weights and sds must be positive");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture weights must sum to 1");
}

double GaussianMixture1D::energy(double theta) const {
  // -log-sum-exp over components
  double lmax = -std::numeric_limits<double>::infinity();
  for (const auto &c : components_) lmax = std::max(lmax, component_log_density(c, theta));
  double acc = 0.0;
  for (const auto &c : components_) acc += std::exp(component_log_density(c, theta) - lmax);
  return -(lmax + std::log(acc));
}

double GaussianMixture1D::gradient(double theta) const {
  double lmax = -std::numeric_limits<double>::infinity();
  for (const auto &c : components_) lmax = std::max(lmax, component_log_density(c, theta));
  double norm = 0.0;
  double weighted = 0.0;
  for (const auto &c : components_) {
    const double r = std::exp(component_log_density(c, theta) - lmax);
    norm += r;
    weighted += r * (theta - c.mean) / (c.sd * c.sd);
  }
  return weighted / norm;
}

double GaussianMixture1D::density(double theta) const { return std::exp(-energy(theta)); }

double GaussianMixture1D::cdf(double theta) const {
  double acc = 0.0;
  for (const auto &c : components_)
    acc += c.weight * 0.5 * std::erfc(-(theta - c.mean) / (c.sd * std::numbers::sqrt2));
  return acc;
}

double GaussianMixture1D::energy(const State &theta) const {
  if (theta.size() != 1) throw std::invalid_argument("mixture target is one-dimensional");
  return energy(theta[0]);
}

State GaussianMixture1D::gradient(const State &theta) const {
  if (theta.size() != 1) throw std::invalid_argument("mixture target is one-dimensional");
  State g(1);
  g[0] = gradient(theta[0]);
  return g;
}

double gaussian_mixture_energy(double theta) {
  static const GaussianMixture1D mixture;
  return mixture.energy(theta);
}

double gaussian_mixture_gradient(double theta) {
  static const GaussianMixture1D mixture;
  return mixture.gradient(theta);
}

QuadraticEnergy::QuadraticEnergy(Eigen::Index dim, double curvature)
    : dim_(dim), curvature_(curvature) {
  if (dim < 1) throw std::invalid_argument("quadratic target needs dim >= 1");
  if (!(curvature > 0.0)) throw std::invalid_argument("quadratic curvature must be positive");
}

double QuadraticEnergy::energy(const State &theta) const { return quadratic_energy(theta, curvature_); }

State QuadraticEnergy::gradient(const State &theta) const {
  return quadratic_gradient(theta, curvature_);
}

double quadratic_energy(const State &theta, double m) { return 0.5 * m * theta.squaredNorm(); }

State quadratic_gradient(const State &theta, double m) { return m * theta; }

NoiseSpec NoiseSpec::zero(Eigen::Index dim) { return constant(dim, 0.0, 0.0); }

NoiseSpec NoiseSpec::constant(Eigen::Index dim, double energy_sd, double gradient_sd) {
  if (energy_sd < 0.0 || gradient_sd < 0.0)
    throw std::invalid_argument("noise standard deviations must be non-negative");
  NoiseSpec spec;
  spec.kind = NoiseKind::constant;
  spec.energy_sd = [energy_sd](const State &) { return energy_sd; };
  Eigen::MatrixXd factor = gradient_sd * Eigen::MatrixXd::Identity(dim, dim);
  spec.gradient_factor = [factor](const State &) { return factor; };
  spec.diagonal = true;
  return spec;
}

NoiseSpec NoiseSpec::constant_matrix(double energy_sd, Eigen::MatrixXd factor) {
  if (energy_sd < 0.0) throw std::invalid_argument("energy noise sd must be non-negative");
  if (factor.rows() != factor.cols()) throw std::invalid_argument("gradient noise factor must be square");
  NoiseSpec spec;
  spec.kind = NoiseKind::constant;
  spec.energy_sd = [energy_sd](const State &) { return energy_sd; };
  spec.diagonal = factor.isDiagonal(0.0);
  spec.gradient_factor = [factor = std::move(factor)](const State &) { return factor; };
  return spec;
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::function<Eigen::MatrixXd(const State &)> logistic_state_factor(Eigen::Index dim, double scale) {
  return [dim, scale](const State &theta) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) s(i, i) = scale * logistic(theta[i]);
    return s;
  };
}

std::function<double(const State &)> logistic_energy_sd(std::shared_ptr<const EnergyModel> model,
                                                        double scale) {
  return [model = std::move(model), scale](const State &theta) {
    return scale * logistic(model->energy(theta));
  };
}

NoisyEnergyModel::NoisyEnergyModel(std::shared_ptr<const EnergyModel> base, NoiseSpec noise,
                                   std::uint64_t gradient_seed, std::uint64_t energy_seed)
    : base_(std::move(base)),
      noise_(std::move(noise)),
      gradient_rng_(gradient_seed),
      energy_rng_(energy_seed) {
  if (!base_) throw std::invalid_argument("noisy model needs a base energy model");
  if (!noise_.energy_sd || !noise_.gradient_factor)
    throw std::invalid_argument("noise spec is incomplete");
}

double NoisyEnergyModel::noisy_energy(const State &theta) { return noisy_energy(theta, energy_rng_); }

State NoisyEnergyModel::noisy_gradient(const State &theta) {
  return noisy_gradient(theta, gradient_rng_);
}

double NoisyEnergyModel::noisy_energy(const State &theta, Stream &rng) {
  ++energy_evaluations_;
  return noisy_energy_with(theta, rng.normal());
}

State NoisyEnergyModel::noisy_gradient(const State &theta, Stream &rng) {
  ++gradient_evaluations_;
  return noisy_gradient_with(theta, rng.normal_vector(dim()));
}

double NoisyEnergyModel::noisy_energy_with(const State &theta, double z) const {
  return base_->energy(theta) + noise_.energy_sd(theta) * z;
}

State NoisyEnergyModel::noisy_gradient_with(const State &theta, const Eigen::VectorXd &zeta) const {
  State g = base_->gradient(theta);
  const Eigen::MatrixXd s = noise_.gradient_factor(theta);
  if (noise_.diagonal)
    g.array() += s.diagonal().array() * zeta.array();
  else
    g.noalias() += s * zeta;
  return g;
}

double NoisyEnergyModel::energy_variance(const State &theta) const {
  const double sd = noise_.energy_sd(theta);
  return sd * sd;
}

Eigen::MatrixXd NoisyEnergyModel::gradient_factor(const State &theta) const {
  return noise_.gradient_factor(theta);
}

}  // namespace fresgld
