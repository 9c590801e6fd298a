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

#include "fresgld/variance.hpp"

#include "fresgld/kernels.hpp"

#include <Eigen/Cholesky>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <stdexcept>
#include <utility>

namespace fresgld {

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("sample variance needs at least two values");
  // shifted by the first value; identical draws give exactly 0
  const double shift = values.front();
  double sum = 0.0;
  for (double v : values) sum += v - shift;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - shift - mean) * (v - shift - mean);
  return ss / static_cast<double>(values.size() - 1);
}

Eigen::VectorXd sample_variance_at_state(NoisyEnergyModel &model, const State &theta, int n_draws,
                                         Stream &rng) {
  if (n_draws < 2) throw std::invalid_argument("sample variance needs n_draws >= 2");
  Eigen::MatrixXd draws(model.dim(), n_draws);
  for (int j = 0; j < n_draws; ++j) draws.col(j) = model.noisy_gradient(theta, rng);
  const Eigen::VectorXd mean = draws.rowwise().mean();
  return (draws.colwise() - mean).rowwise().squaredNorm() / static_cast<double>(n_draws - 1);
}

double sample_energy_variance_at_state(NoisyEnergyModel &model, const State &theta, int n_draws,
                                       Stream &rng) {
  if (n_draws < 2) throw std::invalid_argument("sample variance needs n_draws >= 2");
  std::vector<double> draws(static_cast<std::size_t>(n_draws));
  for (auto &d : draws) d = model.noisy_energy(theta, rng);
  return sample_variance(draws);
}

NoiseProbe probe_noise(NoisyEnergyModel &model, const State &theta, int n_draws, Stream &rng) {
  NoiseProbe probe;
  probe.gradient_variance = sample_variance_at_state(model, theta, n_draws, rng);
  probe.energy_variance = sample_energy_variance_at_state(model, theta, n_draws, rng);
  return probe;
}

double median_pairwise_distance(const std::vector<State> &inputs) {
  std::vector<double> d;
  d.reserve(inputs.size() * (inputs.size() - (inputs.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) d.push_back((inputs[i] - inputs[j]).norm());
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
  return med > 0.0 ? med : 1.0;
}

KrrModel krr_fit(std::vector<State> inputs, Eigen::VectorXd targets, double bandwidth, double ridge) {
  if (inputs.empty()) throw std::invalid_argument("krr_fit needs at least one training pair");
  if (static_cast<Eigen::Index>(inputs.size()) != targets.size())
    throw std::invalid_argument("krr_fit: inputs and targets differ in length");
  if (!(ridge > 0.0)) throw std::invalid_argument("krr_fit: ridge must be positive");
  for (const auto &x : inputs)
    if (x.size() != inputs.front().size()) throw std::invalid_argument("krr_fit: ragged inputs");

  KrrModel model;
  model.bandwidth = bandwidth > 0.0 ? bandwidth : median_pairwise_distance(inputs);
  model.ridge = ridge;
  model.inputs = std::move(inputs);
  model.targets = std::move(targets);

  Eigen::MatrixXd system = kernels::rbf_gram_parallel(model.inputs, model.bandwidth);
  system.diagonal().array() += ridge;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() == Eigen::Success) {
    model.weights = llt.solve(model.targets);
  } else {
    model.weights = system.ldlt().solve(model.targets);
  }
  // One step of iterative refinement for badly conditioned Gram matrices.
  const Eigen::VectorXd r = model.targets - system * model.weights;
  model.weights += system.ldlt().solve(r);
  return model;
}

double krr_predict_raw(const KrrModel &model, const State &theta) {
  const double c = 1.0 / (2.0 * model.bandwidth * model.bandwidth);
  double acc = 0.0;
  for (std::size_t i = 0; i < model.inputs.size(); ++i)
    acc += model.weights[static_cast<Eigen::Index>(i)] *
           std::exp(-(theta - model.inputs[i]).squaredNorm() * c);
  return acc;
}

double krr_predict(const KrrModel &model, const State &theta) {
  return std::max(0.0, krr_predict_raw(model, theta));
}

double krr_residual_norm(const KrrModel &model) {
  Eigen::MatrixXd system = kernels::rbf_gram_serial(model.inputs, model.bandwidth);
  system.diagonal().array() += model.ridge;
  return (system * model.weights - model.targets).norm();
}

std::string krr_to_json(const KrrModel &model) {
  nlohmann::json j;
  j["bandwidth"] = model.bandwidth;
  j["ridge"] = model.ridge;
  auto &inputs = j["inputs"] = nlohmann::json::array();
  for (const auto &x : model.inputs) inputs.push_back(std::vector<double>(x.data(), x.data() + x.size()));
  j["targets"] = std::vector<double>(model.targets.data(), model.targets.data() + model.targets.size());
  j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
  return j.dump(2);
}

KrrModel krr_from_json(const std::string &text) {
  const auto j = nlohmann::json::parse(text);
  KrrModel model;
  model.bandwidth = j.at("bandwidth").get<double>();
  model.ridge = j.at("ridge").get<double>();
  for (const auto &x : j.at("inputs")) {
    const auto v = x.get<std::vector<double>>();
    model.inputs.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  const auto t = j.at("targets").get<std::vector<double>>();
  const auto w = j.at("weights").get<std::vector<double>>();
  if (t.size() != model.inputs.size() || w.size() != model.inputs.size())
    throw std::runtime_error("krr model file: inconsistent lengths");
  model.targets = Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
  model.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  return model;
}

VarianceEstimator::VarianceEstimator(Eigen::Index dim, int n_draws, std::uint64_t seed)
    : dim_(dim), n_draws_(n_draws), probe_(seed) {
  if (dim < 1) throw std::invalid_argument("variance estimator needs dim >= 1");
}

VarianceEstimator VarianceEstimator::known(Eigen::Index dim, NoiseSpec noise) {
  if (!noise.gradient_factor || !noise.energy_sd) throw std::invalid_argument("noise spec is incomplete");
  VarianceEstimator est(dim, 2, 0);
  est.state_ = Known{std::move(noise)};
  return est;
}

VarianceEstimator VarianceEstimator::running_constant(Eigen::Index dim, int n_draws,
                                                      std::uint64_t probe_seed) {
  if (n_draws < 2) throw std::invalid_argument("variance estimator needs n_draws >= 2");
  VarianceEstimator est(dim, n_draws, probe_seed);
  est.state_ = Running{std::vector<RunningVariance>(static_cast<std::size_t>(dim)), {}};
  return est;
}

VarianceEstimator VarianceEstimator::kernel_ridge(Eigen::Index dim, int n_draws, KrrOptions options,
                                                  std::uint64_t probe_seed) {
  if (n_draws < 2) throw std::invalid_argument("variance estimator needs n_draws >= 2");
  if (options.n_train < 1) throw std::invalid_argument("kernel ridge needs n_train >= 1");
  if (!(options.ridge > 0.0)) throw std::invalid_argument("kernel ridge needs ridge > 0");
  VarianceEstimator est(dim, n_draws, probe_seed);
  KernelRidge krr;
  krr.options = options;
  krr.fallback.gradient.resize(static_cast<std::size_t>(dim));
  est.state_ = std::move(krr);
  return est;
}

VarianceKind VarianceEstimator::kind() const {
  switch (state_.index()) {
    case 0: return VarianceKind::known;
    case 1: return VarianceKind::running_constant;
    default: return VarianceKind::kernel_ridge;
  }
}

bool VarianceEstimator::diagonal() const {
  if (const auto *k = std::get_if<Known>(&state_)) return k->noise.diagonal;
  return true;
}

double VarianceEstimator::clamp(double raw) const {
  if (raw >= 0.0) return raw;
  ++clamped_;
  // per-estimator counts are kept; the warning is printed once per process
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true))
    std::clog << "warning: negative variance prediction " << raw << " clamped to 0\n";
  return 0.0;
}

Eigen::MatrixXd VarianceEstimator::running_factor(const Running &r, Eigen::Index dim) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) s(i, i) = std::sqrt(std::max(0.0, r.gradient[i].value()));
  return s;
}

Eigen::MatrixXd VarianceEstimator::gradient_factor(const State &theta) const {
  if (const auto *k = std::get_if<Known>(&state_)) return k->noise.gradient_factor(theta);
  if (const auto *r = std::get_if<Running>(&state_)) return running_factor(*r, dim_);
  const auto &krr = std::get<KernelRidge>(state_);
  if (krr.models.empty()) return running_factor(krr.fallback, dim_);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim_, dim_);
  for (Eigen::Index i = 0; i < dim_; ++i)
    s(i, i) = std::sqrt(clamp(krr_predict_raw(krr.models[static_cast<std::size_t>(i)], theta)));
  return s;
}

double VarianceEstimator::energy_variance(const State &theta) const {
  if (const auto *k = std::get_if<Known>(&state_)) {
    const double sd = k->noise.energy_sd(theta);
    return sd * sd;
  }
  if (const auto *r = std::get_if<Running>(&state_)) return r->energy.value();
  const auto &krr = std::get<KernelRidge>(state_);
  if (krr.models.empty()) return krr.fallback.energy.value();
  return clamp(krr_predict_raw(krr.models.back(), theta));
}

void VarianceEstimator::update(NoisyEnergyModel &model, const State &own, const State &explorer) {
  auto feed = [](Running &r, const NoiseProbe &p) {
    for (std::size_t i = 0; i < r.gradient.size(); ++i)
      r.gradient[i].update(p.gradient_variance[static_cast<Eigen::Index>(i)]);
    r.energy.update(p.energy_variance);
  };

  if (std::holds_alternative<Known>(state_)) return;
  if (auto *r = std::get_if<Running>(&state_)) {
    feed(*r, probe_noise(model, own, n_draws_, probe_));
    return;
  }

  auto &krr = std::get<KernelRidge>(state_);
  if (!krr.models.empty()) return;
  const NoiseProbe own_probe = probe_noise(model, own, n_draws_, probe_);
  feed(krr.fallback, own_probe);

  const NoiseProbe explorer_probe =
      (explorer.size() == own.size() && explorer == own) ? own_probe
                                                           : probe_noise(model, explorer, n_draws_, probe_);
  krr.inputs.push_back(explorer);
  krr.gradient_targets.push_back(explorer_probe.gradient_variance);
  krr.energy_targets.push_back(explorer_probe.energy_variance);
  if (static_cast<int>(krr.inputs.size()) < krr.options.n_train) return;

  const double bandwidth = krr.options.bandwidth > 0.0 ? krr.options.bandwidth
                                                       : median_pairwise_distance(krr.inputs);
  const auto n = static_cast<Eigen::Index>(krr.inputs.size());
  for (Eigen::Index c = 0; c < dim_; ++c) {
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y[i] = krr.gradient_targets[static_cast<std::size_t>(i)][c];
    krr.models.push_back(krr_fit(krr.inputs, std::move(y), bandwidth, krr.options.ridge));
  }
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(krr.energy_targets.data(), n);
  krr.models.push_back(krr_fit(krr.inputs, std::move(y), bandwidth, krr.options.ridge));
}

bool VarianceEstimator::fitted() const {
  if (const auto *krr = std::get_if<KernelRidge>(&state_)) return !krr->models.empty();
  return true;
}

const std::vector<KrrModel> &VarianceEstimator::krr_models() const {
  static const std::vector<KrrModel> none;
  if (const auto *krr = std::get_if<KernelRidge>(&state_)) return krr->models;
  return none;
}

}  // namespace fresgld
