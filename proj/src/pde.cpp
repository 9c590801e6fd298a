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

#include "fresgld/pde.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fresgld {

double HeatModelParams::beta() const { return 1.0 / (2.0 * std::numbers::pi * h * h); }

double HeatModelParams::alpha() const { return 2.0 * h * h; }

void HeatModelParams::validate() const {
  if (!(h > 0.0)) throw std::invalid_argument("heat model: h must be positive");
  if (!(terminal_time >= 0.0)) throw std::invalid_argument("heat model: T must be non-negative");
  auto inside = [](const Eigen::Vector2d &p) {
    return p.x() >= 0.0 && p.x() <= 1.0 && p.y() >= 0.0 && p.y() <= 1.0;
  };
  if (!inside(sensor)) throw std::invalid_argument("heat model: sensor outside the unit square");
  if (!inside(x0_true)) throw std::invalid_argument("heat model: x0_true outside the unit square");
}

double forward_solution(const HeatModelParams &params, const Eigen::Vector2d &center,
                        const Eigen::Vector2d &x, double t) {
  if (t < 0.0) throw std::invalid_argument("forward solution needs t >= 0");
  return params.beta() * std::exp(-(x - center).squaredNorm() / params.alpha()) * std::exp(-t);
}

PdePosterior::PdePosterior(HeatModelParams params, double obs_noise_sd)
    : params_(std::move(params)), obs_noise_sd_(obs_noise_sd) {
  params_.validate();
  if (!(obs_noise_sd > 0.0)) throw std::invalid_argument("observation noise sd must be positive");
  observation_ = forward_solution(params_, params_.x0_true, params_.sensor, params_.terminal_time);
}

double PdePosterior::energy(const State &x0) const {
  if (x0.size() != 2) throw std::invalid_argument("pde posterior is two-dimensional");
  const double residual = forward_solution(params_, x0, params_.sensor, params_.terminal_time) - observation_;
  return residual * residual / (2.0 * obs_noise_sd_ * obs_noise_sd_);
}

State PdePosterior::gradient(const State &x0) const {
  if (x0.size() != 2) throw std::invalid_argument("pde posterior is two-dimensional");
  const double u = forward_solution(params_, x0, params_.sensor, params_.terminal_time);
  const double residual = u - observation_;
  // du/dx0 = u * 2 (sensor - x0) / alpha
  const Eigen::Vector2d du = u * 2.0 * (params_.sensor - x0) / params_.alpha();
  return residual / (obs_noise_sd_ * obs_noise_sd_) * du;
}

std::string to_string(PdeArm arm) {
  switch (arm) {
    case PdeArm::s_resgld: return "s_reSGLD";
    case PdeArm::f_resgld: return "f_reSGLD";
    case PdeArm::l_resgld: return "l_reSGLD";
  }
  return "?";
}

PdeArm pde_arm_from_string(const std::string &name) {
  if (name == "s" || name == "s_reSGLD") return PdeArm::s_resgld;
  if (name == "f" || name == "f_reSGLD") return PdeArm::f_resgld;
  if (name == "l" || name == "l_reSGLD") return PdeArm::l_resgld;
  throw std::invalid_argument("unknown pde arm '" + name + "'");
}

PdeArmSetup make_pde_arm(PdeArm arm) {
  constexpr double kTauLow = 0.08;
  constexpr double kTauHigh = 0.5;
  switch (arm) {
    case PdeArm::s_resgld: return {arm, 0.1, 0.1, kTauLow, kTauHigh, SamplerKind::resgld};
    case PdeArm::f_resgld: return {arm, 0.8, 2.0, kTauLow, kTauHigh, SamplerKind::f_resgld};
    case PdeArm::l_resgld: return {arm, 0.8, 2.0, kTauLow, kTauHigh, SamplerKind::resgld};
  }
  throw std::invalid_argument("unknown pde arm");
}

std::string IqoiMetrics::to_json() const {
  nlohmann::json j;
  j["arm"] = arm;
  j["n_samples"] = n_samples;
  j["annulus_coverage"] = annulus_coverage;
  j["angular_bins_occupied"] = angular_bins_occupied;
  j["r_star"] = r_star;
  return j.dump(2);
}

IqoiMetrics iqoi_metrics(const std::vector<Eigen::VectorXd> &samples, const HeatModelParams &params,
                         std::string arm) {
  if (samples.empty()) throw std::invalid_argument("iqoi metrics need at least one sample");
  IqoiMetrics m;
  m.arm = std::move(arm);
  m.n_samples = static_cast<std::int64_t>(samples.size());
  m.r_star = params.r_star();
  std::array<bool, kAngularBins> occupied{};
  std::int64_t inside = 0;
  for (const auto &x : samples) {
    if (x.size() != 2) throw std::invalid_argument("iqoi metrics need two-dimensional samples");
    const Eigen::Vector2d d = x - params.sensor;
    if (std::abs(d.norm() - m.r_star) > kAnnulusHalfWidth) continue;
    ++inside;
    double angle = std::atan2(d.y(), d.x());
    if (angle < 0.0) angle += 2.0 * std::numbers::pi;
    auto bin = static_cast<int>(angle / (2.0 * std::numbers::pi) * kAngularBins);
    if (bin >= kAngularBins) bin = kAngularBins - 1;
    occupied[static_cast<std::size_t>(bin)] = true;
  }
  m.annulus_coverage = static_cast<double>(inside) / static_cast<double>(samples.size());
  for (bool b : occupied) m.angular_bins_occupied += b ? 1 : 0;
  return m;
}

}  // namespace fresgld
