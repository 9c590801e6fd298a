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

#ifndef FRESGLD_DIAGNOSTICS_HPP
#define FRESGLD_DIAGNOSTICS_HPP

#include "fresgld/samplers.hpp"
#include "fresgld/targets.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace fresgld {

struct DensityEstimate {
  std::vector<double> grid;
  std::vector<double> values;
  double bandwidth = 0.0;

  // Trapezoid rule over the grid.
  double integral() const;
  // Two columns: grid,value.
  void write_csv(std::ostream &out) const;
};

// 0.9 min(sd, IQR/1.34) n^(-1/5).
double silverman_bandwidth(std::span<const double> samples);

// n points spanning [min - pad*h, max + pad*h].
std::vector<double> default_grid(std::span<const double> samples, double bandwidth, int n_points = 512,
                                 double pad_bandwidths = 3.0);

DensityEstimate kde(std::span<const double> samples, std::vector<double> grid, double bandwidth);

// Exact W2 between equal-length empirical measures (sorted coupling).
// Unequal lengths fall back to the quantile-grid coupling at 10^4 levels.
double wasserstein2_1d(std::span<const double> a, std::span<const double> b);

using QuantileFunction = std::function<double(double)>;

// W2 between the empirical measure and a target given by its quantile
// function, coupled at n_quantiles midpoint levels (j + 1/2) / n.
double wasserstein2_vs_target(std::span<const double> samples, const QuantileFunction &target_quantile,
                              int n_quantiles = 10000);

// CDF inversion by bisection to 1e-10 on a bracket grown from [-20, 20].
QuantileFunction mixture_quantile(const GaussianMixture1D &mixture);
QuantileFunction gaussian_quantile(double mean, double sd);

// Running mean and covariance (Welford).
class MomentAccumulator {
 public:
  explicit MomentAccumulator(Eigen::Index dim);
  void add(const Eigen::VectorXd &x);
  std::int64_t count() const { return n_; }
  const Eigen::VectorXd &mean() const { return mean_; }
  Eigen::MatrixXd covariance() const;

 private:
  std::int64_t n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
};

// W2 between N(mean_a, cov_a) and N(mean_b, cov_b).
double gaussian_w2(const Eigen::VectorXd &mean_a, const Eigen::MatrixXd &cov_a,
                   const Eigen::VectorXd &mean_b, const Eigen::MatrixXd &cov_b);

struct RunMetrics {
  double w2_to_truth = 0.0;
  bool has_w2 = false;
  double swap_acceptance_rate = 0.0;
  std::vector<double> mean_energy;  // per chain id
  std::int64_t sample_count = 0;
  std::int64_t steps = 0;

  std::string to_json() const;
};

// Acceptance rate = accepted swaps / steps, plus per-chain mean energy.
RunMetrics swap_summary(const SampleTrace &trace);

}  // namespace fresgld

#endif  // FRESGLD_DIAGNOSTICS_HPP
