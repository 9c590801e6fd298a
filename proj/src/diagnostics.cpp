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

#include "fresgld/diagnostics.hpp"

#include "fresgld/kernels.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace fresgld {

namespace {

constexpr int kUnequalQuantiles = 10000;

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return s;
}

// Left-continuous inverse of the empirical CDF of sorted data at level u.
double empirical_quantile(const std::vector<double> &sorted, double u) {
  const auto n = static_cast<double>(sorted.size());
  auto idx = static_cast<std::ptrdiff_t>(std::ceil(u * n)) - 1;
  idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(sorted.size()) - 1);
  return sorted[static_cast<std::size_t>(idx)];
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd &m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double DensityEstimate::integral() const {
  double acc = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
  return acc;
}

void DensityEstimate::write_csv(std::ostream &out) const {
  out << "grid,value\n";
  char buf[80];
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", grid[i], values[i]);
    out << buf;
  }
}

double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw std::invalid_argument("bandwidth selection needs at least two samples");
  const auto s = sorted_copy(samples);
  const double n = static_cast<double>(s.size());
  double mean = 0.0;
  for (double x : s) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : s) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  const double iqr = empirical_quantile(s, 0.75) - empirical_quantile(s, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1.0;
  return 0.9 * spread * std::pow(n, -0.2);
}

std::vector<double> default_grid(std::span<const double> samples, double bandwidth, int n_points,
                                 double pad_bandwidths) {
  if (samples.empty()) throw std::invalid_argument("grid needs samples");
  if (n_points < 2) throw std::invalid_argument("grid needs at least two points");
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it - pad_bandwidths * bandwidth;
  const double hi = *hi_it + pad_bandwidths * bandwidth;
  std::vector<double> grid(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) grid[i] = lo + (hi - lo) * i / (n_points - 1);
  return grid;
}

DensityEstimate kde(std::span<const double> samples, std::vector<double> grid, double bandwidth) {
  if (samples.empty()) throw std::invalid_argument("kde needs samples");
  DensityEstimate d;
  d.grid = std::move(grid);
  d.bandwidth = bandwidth;
  d.values.resize(d.grid.size());
  kernels::kde_parallel(samples, d.grid, bandwidth, d.values);
  return d;
}

double wasserstein2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("W2 needs non-empty samples");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  double acc = 0.0;
  if (sa.size() == sb.size()) {
    for (std::size_t i = 0; i < sa.size(); ++i) acc += (sa[i] - sb[i]) * (sa[i] - sb[i]);
    return std::sqrt(acc / static_cast<double>(sa.size()));
  }
  for (int j = 0; j < kUnequalQuantiles; ++j) {
    const double u = (j + 0.5) / kUnequalQuantiles;
    const double d = empirical_quantile(sa, u) - empirical_quantile(sb, u);
    acc += d * d;
  }
  return std::sqrt(acc / kUnequalQuantiles);
}

double wasserstein2_vs_target(std::span<const double> samples, const QuantileFunction &target_quantile,
                              int n_quantiles) {
  if (samples.empty()) throw std::invalid_argument("W2 needs non-empty samples");
  if (n_quantiles < 1) throw std::invalid_argument("W2 needs at least one quantile level");
  const auto s = sorted_copy(samples);
  double acc = 0.0;
  for (int j = 0; j < n_quantiles; ++j) {
    const double u = (j + 0.5) / n_quantiles;
    const double d = empirical_quantile(s, u) - target_quantile(u);
    acc += d * d;
  }
  return std::sqrt(acc / n_quantiles);
}

QuantileFunction mixture_quantile(const GaussianMixture1D &mixture) {
  return [mixture](double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("quantile level must lie in (0, 1)");
    double lo = -20.0, hi = 20.0;
    for (int i = 0; mixture.cdf(lo) > u; ++i) {
      if (i == 60) throw std::runtime_error("mixture quantile: cannot bracket level");
      lo = 2.0 * lo - hi;
    }
    for (int i = 0; mixture.cdf(hi) < u; ++i) {
      if (i == 60) throw std::runtime_error("mixture quantile: cannot bracket level");
      hi = 2.0 * hi - lo;
    }
    while (hi - lo > 1e-10) {
      const double mid = 0.5 * (lo + hi);
      if (mixture.cdf(mid) < u)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };
}

QuantileFunction gaussian_quantile(double mean, double sd) {
  if (!(sd > 0.0)) throw std::invalid_argument("gaussian quantile needs sd > 0");
  const boost::math::normal_distribution<double> dist(mean, sd);
  return [dist](double u) { return boost::math::quantile(dist, u); };
}

MomentAccumulator::MomentAccumulator(Eigen::Index dim)
    : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::MatrixXd::Zero(dim, dim)) {}

void MomentAccumulator::add(const Eigen::VectorXd &x) {
  ++n_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_.noalias() += delta * (x - mean_).transpose();
}

Eigen::MatrixXd MomentAccumulator::covariance() const {
  if (n_ < 2) throw std::logic_error("covariance needs at least two samples");
  const Eigen::MatrixXd c = m2_ / static_cast<double>(n_ - 1);
  return 0.5 * (c + c.transpose());
}

double gaussian_w2(const Eigen::VectorXd &mean_a, const Eigen::MatrixXd &cov_a,
                   const Eigen::VectorXd &mean_b, const Eigen::MatrixXd &cov_b) {
  const Eigen::MatrixXd root_b = psd_sqrt(cov_b);
  const Eigen::MatrixXd cross = psd_sqrt(root_b * cov_a * root_b);
  const double w2sq = (mean_a - mean_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
  return std::sqrt(std::max(0.0, w2sq));
}

std::string RunMetrics::to_json() const {
  nlohmann::json j;
  j["w2_to_truth"] = has_w2 ? nlohmann::json(w2_to_truth) : nlohmann::json(nullptr);
  j["swap_acceptance_rate"] = swap_acceptance_rate;
  j["mean_energy"] = mean_energy;
  j["sample_count"] = sample_count;
  j["steps"] = steps;
  return j.dump(2);
}

RunMetrics swap_summary(const SampleTrace &trace) {
  RunMetrics m;
  std::int64_t steps = 0, accepted = 0;
  std::vector<double> energy_sum;
  std::vector<std::int64_t> energy_count;
  for (const auto &row : trace.rows) {
    const auto id = static_cast<std::size_t>(row.chain_id);
    if (energy_sum.size() <= id) {
      energy_sum.resize(id + 1, 0.0);
      energy_count.resize(id + 1, 0);
    }
    energy_sum[id] += row.energy_estimate;
    ++energy_count[id];
    if (row.chain_id == 0) {
      ++steps;
      if (row.swapped) ++accepted;
    }
  }
  m.steps = steps;
  m.swap_acceptance_rate = steps > 0 ? static_cast<double>(accepted) / static_cast<double>(steps) : 0.0;
  for (std::size_t i = 0; i < energy_sum.size(); ++i)
    m.mean_energy.push_back(energy_count[i] ? energy_sum[i] / static_cast<double>(energy_count[i]) : 0.0);
  m.sample_count = steps;
  return m;
}

}  // namespace fresgld
