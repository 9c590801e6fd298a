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

#ifndef FRESGLD_PDE_HPP
#define FRESGLD_PDE_HPP

// Single-sensor inverse heat problem. The forward model is the closed form
// u(x, t) = beta exp(-|x - x0|^2 / alpha) exp(-t); the unknown is the bump
// center x0, and one reading at the sensor makes every center on a circle
// around the sensor equally consistent with the data.

#include "fresgld/samplers.hpp"
#include "fresgld/targets.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace fresgld {

struct HeatModelParams {
  double h = 0.1;
  double terminal_time = 0.03;
  Eigen::Vector2d sensor{0.3, 0.5};
  Eigen::Vector2d x0_true{0.5, 0.5};

  double beta() const;   // 1 / (2 pi h^2)
  double alpha() const;  // 2 h^2
  double r_star() const { return (x0_true - sensor).norm(); }
  void validate() const;
};

double forward_solution(const HeatModelParams &params, const Eigen::Vector2d &center,
                        const Eigen::Vector2d &x, double t);

// Energy over theta = x0: (u(sensor, T; x0) - y_obs)^2 / (2 sd^2), with y_obs
// generated noiselessly from x0_true.
class PdePosterior final : public EnergyModel {
 public:
  explicit PdePosterior(HeatModelParams params, double obs_noise_sd = 0.1);

  Eigen::Index dim() const override { return 2; }
  double energy(const State &x0) const override;
  State gradient(const State &x0) const override;

  const HeatModelParams &params() const { return params_; }
  double observation() const { return observation_; }
  double obs_noise_sd() const { return obs_noise_sd_; }

 private:
  HeatModelParams params_;
  double observation_;
  double obs_noise_sd_;
};

enum class PdeArm { s_resgld, f_resgld, l_resgld };

std::string to_string(PdeArm arm);
PdeArm pde_arm_from_string(const std::string &name);

struct PdeArmSetup {
  PdeArm arm;
  double energy_noise_sd;
  double gradient_noise_sd;
  double tau_low;
  double tau_high;
  SamplerKind sampler;
};

PdeArmSetup make_pde_arm(PdeArm arm);

struct IqoiMetrics {
  std::string arm;
  std::int64_t n_samples = 0;
  double annulus_coverage = 0.0;
  int angular_bins_occupied = 0;
  double r_star = 0.0;

  std::string to_json() const;
};

inline constexpr double kAnnulusHalfWidth = 0.05;
inline constexpr int kAngularBins = 36;

// (a) fraction of samples within 0.05 of the circle of radius r* about the
// sensor; (b) occupied 10-degree bins among the in-annulus samples.
IqoiMetrics iqoi_metrics(const std::vector<Eigen::VectorXd> &samples, const HeatModelParams &params,
                         std::string arm = {});

}  // namespace fresgld

#endif  // FRESGLD_PDE_HPP
