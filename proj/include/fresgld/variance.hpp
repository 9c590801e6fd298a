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

#ifndef FRESGLD_VARIANCE_HPP
#define FRESGLD_VARIANCE_HPP

#include "fresgld/rng.hpp"
#include "fresgld/targets.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fresgld {

// Unbiased sample variance; needs at least two values.
double sample_variance(std::span<const double> values);

// Per-state noise probe: n_draws independent estimator calls at theta,
// gradients first, then energies, all drawn from `rng`.
struct NoiseProbe {
  Eigen::VectorXd gradient_variance;  // componentwise
  double energy_variance = 0.0;
};

Eigen::VectorXd sample_variance_at_state(NoisyEnergyModel &model, const State &theta, int n_draws,
                                         Stream &rng);
double sample_energy_variance_at_state(NoisyEnergyModel &model, const State &theta, int n_draws,
                                       Stream &rng);
NoiseProbe probe_noise(NoisyEnergyModel &model, const State &theta, int n_draws, Stream &rng);

// s2_k = (1 - 1/k) s2_{k-1} + (1/k) observed, i.e. the running mean of the
// observations.
class RunningVariance {
 public:
  void update(double observed) {
    ++count_;
    const double k = static_cast<double>(count_);
    value_ = (1.0 - 1.0 / k) * value_ + (1.0 / k) * observed;
  }
  double value() const { return value_; }
  std::int64_t count() const { return count_; }

 private:
  double value_ = 0.0;
  std::int64_t count_ = 0;
};

// Kernel ridge regression with a Gaussian RBF kernel.
struct KrrModel {
  std::vector<State> inputs;
  Eigen::VectorXd targets;
  double bandwidth = 1.0;
  double ridge = 1e-3;
  Eigen::VectorXd weights;
};

// Median of the pairwise Euclidean distances; 1.0 when every distance is 0.
double median_pairwise_distance(const std::vector<State> &inputs);

// Solves (K + ridge I) w = y. A non-positive bandwidth selects the median
// heuristic.
KrrModel krr_fit(std::vector<State> inputs, Eigen::VectorXd targets, double bandwidth, double ridge);

// max(0, sum_i w_i k(theta, x_i)).
double krr_predict(const KrrModel &model, const State &theta);
double krr_predict_raw(const KrrModel &model, const State &theta);
double krr_residual_norm(const KrrModel &model);

std::string krr_to_json(const KrrModel &model);
KrrModel krr_from_json(const std::string &text);

struct KrrOptions {
  int n_train = 100;
  double bandwidth = 0.0;  // <= 0 selects the median heuristic
  double ridge = 1e-3;
};

enum class VarianceKind { known, running_constant, kernel_ridge };

// Supplies s_hat(theta) and sigma_hat^2(theta) to a chain. Mutable and
// confined to one chain; it owns the probe stream used for sample variances.
class VarianceEstimator {
 public:
  static VarianceEstimator known(Eigen::Index dim, NoiseSpec noise);
  static VarianceEstimator running_constant(Eigen::Index dim, int n_draws, std::uint64_t probe_seed);
  static VarianceEstimator kernel_ridge(Eigen::Index dim, int n_draws, KrrOptions options,
                                        std::uint64_t probe_seed);

  VarianceKind kind() const;
  Eigen::Index dim() const { return dim_; }

  // s_hat(theta), a p x p factor (diagonal for the estimated kinds).
  Eigen::MatrixXd gradient_factor(const State &theta) const;
  bool diagonal() const;
  double energy_variance(const State &theta) const;

  // Feeds the estimator after a step. `own` is this chain's state;
  // `explorer` is the high-temperature chain's state, whose first n_train
  // visits form the kernel-ridge training set. No-op for `known`.
  void update(NoisyEnergyModel &model, const State &own, const State &explorer);

  bool fitted() const;
  const std::vector<KrrModel> &krr_models() const;
  std::int64_t clamped_predictions() const { return clamped_; }

 private:
  struct Known {
    NoiseSpec noise;
  };
  struct Running {
    std::vector<RunningVariance> gradient;
    RunningVariance energy;
  };
  struct KernelRidge {
    KrrOptions options;
    Running fallback;
    std::vector<State> inputs;
    std::vector<Eigen::VectorXd> gradient_targets;
    std::vector<double> energy_targets;
    std::vector<KrrModel> models;  // p gradient components, then energy
  };

  VarianceEstimator(Eigen::Index dim, int n_draws, std::uint64_t seed);
  static Eigen::MatrixXd running_factor(const Running &r, Eigen::Index dim);
  double clamp(double raw) const;

  Eigen::Index dim_;
  int n_draws_;
  Stream probe_;
  std::variant<Known, Running, KernelRidge> state_;
  mutable std::int64_t clamped_ = 0;
};

}  // namespace fresgld

#endif  // FRESGLD_VARIANCE_HPP
