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

#ifndef FRESGLD_KERNELS_HPP
#define FRESGLD_KERNELS_HPP

// Data-parallel inner loops. Every kernel has a serial reference twin with
// the same arithmetic; the OpenMP variants partition work so that results do
// not depend on the number of threads (block sums are combined in block
// order), which the tests check bit-for-bit.

#include "fresgld/rng.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace fresgld::kernels {

// Gaussian kernel density on a grid: out[j] = mean_i phi((grid[j]-x_i)/h)/h.
void kde_serial(std::span<const double> samples, std::span<const double> grid, double bandwidth,
                std::span<double> out);
void kde_parallel(std::span<const double> samples, std::span<const double> grid, double bandwidth,
                  std::span<double> out);

// K_ij = exp(-|x_i - x_j|^2 / (2 h^2)).
Eigen::MatrixXd rbf_gram_serial(const std::vector<Eigen::VectorXd> &inputs, double bandwidth);
Eigen::MatrixXd rbf_gram_parallel(const std::vector<Eigen::VectorXd> &inputs, double bandwidth);

// f(q) = sum_i w_i k(q, x_i) for every query.
Eigen::VectorXd rbf_predict_serial(const std::vector<Eigen::VectorXd> &inputs,
                                   const Eigen::VectorXd &weights, double bandwidth,
                                   const std::vector<Eigen::VectorXd> &queries);
Eigen::VectorXd rbf_predict_parallel(const std::vector<Eigen::VectorXd> &inputs,
                                     const Eigen::VectorXd &weights, double bandwidth,
                                     const std::vector<Eigen::VectorXd> &queries);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::int64_t count = 0;
};

inline constexpr std::int64_t kMonteCarloBlock = 1 << 16;

namespace detail {

struct BlockSums {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::int64_t count = 0;
};

inline std::uint64_t block_seed(std::uint64_t seed, std::int64_t block) {
  return mix64(seed ^ mix64(static_cast<std::uint64_t>(block) + 1));
}

template <class Draw>
BlockSums run_block(Draw &draw, std::uint64_t seed, std::int64_t block, std::int64_t n) {
  Stream rng(block_seed(seed, block));
  BlockSums s;
  const std::int64_t begin = block * kMonteCarloBlock;
  const std::int64_t end = std::min(n, begin + kMonteCarloBlock);
  for (std::int64_t i = begin; i < end; ++i) {
    const double v = draw(rng);
    s.sum += v;
    s.sum_sq += v * v;
  }
  s.count = end - begin;
  return s;
}

inline MeanEstimate combine(const std::vector<BlockSums> &blocks) {
  double sum = 0.0, sum_sq = 0.0;
  std::int64_t n = 0;
  for (const auto &b : blocks) {
    sum += b.sum;
    sum_sq += b.sum_sq;
    n += b.count;
  }
  MeanEstimate est;
  est.count = n;
  if (n == 0) return est;
  est.mean = sum / static_cast<double>(n);
  if (n > 1) {
    const double var = std::max(0.0, (sum_sq - n * est.mean * est.mean) / static_cast<double>(n - 1));
    est.std_error = std::sqrt(var / static_cast<double>(n));
  }
  return est;
}

}  // namespace detail

// Monte Carlo mean of draw(rng) over n draws. Draws are grouped in fixed
// blocks with per-block streams derived from `seed`.
template <class Draw>
MeanEstimate mc_mean_serial(Draw draw, std::int64_t n, std::uint64_t seed) {
  const std::int64_t n_blocks = (n + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<detail::BlockSums> blocks(static_cast<std::size_t>(n_blocks));
  for (std::int64_t b = 0; b < n_blocks; ++b) blocks[b] = detail::run_block(draw, seed, b, n);
  return detail::combine(blocks);
}

template <class Draw>
MeanEstimate mc_mean_parallel(Draw draw, std::int64_t n, std::uint64_t seed) {
  const std::int64_t n_blocks = (n + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<detail::BlockSums> blocks(static_cast<std::size_t>(n_blocks));
#pragma omp parallel for schedule(dynamic, 1) firstprivate(draw)
  for (std::int64_t b = 0; b < n_blocks; ++b) blocks[b] = detail::run_block(draw, seed, b, n);
  return detail::combine(blocks);
}

}  // namespace fresgld::kernels

#endif  // FRESGLD_KERNELS_HPP
