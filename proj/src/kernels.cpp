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

#include "fresgld/kernels.hpp"

#include <numbers>
#include <stdexcept>

namespace fresgld::kernels {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double kde_point(std::span<const double> samples, double x, double bandwidth) {
  const double inv_h = 1.0 / bandwidth;
  double acc = 0.0;
  for (double s : samples) {
    const double z = (x - s) * inv_h;
    acc += std::exp(-0.5 * z * z);
  }
  return acc * kInvSqrt2Pi * inv_h / static_cast<double>(samples.size());
}

double rbf(const Eigen::VectorXd &a, const Eigen::VectorXd &b, double inv_two_h2) {
  return std::exp(-(a - b).squaredNorm() * inv_two_h2);
}

void check_kde_args(std::span<const double> samples, std::span<const double> grid, double bandwidth,
                    std::span<double> out) {
  if (samples.empty()) throw std::invalid_argument("kde needs samples");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("kde bandwidth must be positive");
  if (out.size() != grid.size()) throw std::invalid_argument("kde output size mismatch");
}

}  // namespace

void kde_serial(std::span<const double> samples, std::span<const double> grid, double bandwidth,
                std::span<double> out) {
  check_kde_args(samples, grid, bandwidth, out);
  for (std::size_t j = 0; j < grid.size(); ++j) out[j] = kde_point(samples, grid[j], bandwidth);
}

void kde_parallel(std::span<const double> samples, std::span<const double> grid, double bandwidth,
                  std::span<double> out) {
  check_kde_args(samples, grid, bandwidth, out);
  const auto n = static_cast<std::int64_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < n; ++j) out[j] = kde_point(samples, grid[j], bandwidth);
}

Eigen::MatrixXd rbf_gram_serial(const std::vector<Eigen::VectorXd> &inputs, double bandwidth) {
  const auto n = static_cast<Eigen::Index>(inputs.size());
  const double c = 1.0 / (2.0 * bandwidth * bandwidth);
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i) = rbf(inputs[i], inputs[j], c);
  }
  return k;
}

Eigen::MatrixXd rbf_gram_parallel(const std::vector<Eigen::VectorXd> &inputs, double bandwidth) {
  const auto n = static_cast<Eigen::Index>(inputs.size());
  const double c = 1.0 / (2.0 * bandwidth * bandwidth);
  Eigen::MatrixXd k(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) k(i, j) = k(j, i) = rbf(inputs[i], inputs[j], c);
  }
  return k;
}

Eigen::VectorXd rbf_predict_serial(const std::vector<Eigen::VectorXd> &inputs,
                                   const Eigen::VectorXd &weights, double bandwidth,
                                   const std::vector<Eigen::VectorXd> &queries) {
  const double c = 1.0 / (2.0 * bandwidth * bandwidth);
  Eigen::VectorXd out(static_cast<Eigen::Index>(queries.size()));
  for (std::size_t q = 0; q < queries.size(); ++q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) acc += weights[i] * rbf(queries[q], inputs[i], c);
    out[q] = acc;
  }
  return out;
}

Eigen::VectorXd rbf_predict_parallel(const std::vector<Eigen::VectorXd> &inputs,
                                     const Eigen::VectorXd &weights, double bandwidth,
                                     const std::vector<Eigen::VectorXd> &queries) {
  const double c = 1.0 / (2.0 * bandwidth * bandwidth);
  const auto nq = static_cast<std::int64_t>(queries.size());
  Eigen::VectorXd out(nq);
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < nq; ++q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) acc += weights[i] * rbf(queries[q], inputs[i], c);
    out[q] = acc;
  }
  return out;
}

}  // namespace fresgld::kernels
