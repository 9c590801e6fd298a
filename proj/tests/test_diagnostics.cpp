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
#include "fresgld/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace fresgld;

namespace {

std::vector<double> normals(int n, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
  Stream rng(seed);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto &x : v) x = mean + sd * rng.normal();
  return v;
}

std::vector<double> mixture_draws(int n, std::uint64_t seed) {
  Stream rng(seed);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto &x : v) x = rng.uniform() < 0.4 ? -4.0 + 0.7 * rng.normal() : 3.0 + 0.5 * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("silverman bandwidth") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0, 5.0};
  // sd = sqrt(2.5); IQR (type 7) = 2
  const double expect = 0.9 * std::min(std::sqrt(2.5), 2.0 / 1.34) * std::pow(5.0, -0.2);
  CHECK(silverman_bandwidth(v) == doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS(silverman_bandwidth(std::vector<double>{}));
}

TEST_CASE("kde of a repeated point peaks there") {
  const std::vector<double> v(50, 1.25);
  const auto grid = default_grid(v, 0.05);
  const auto d = kde(v, grid, 0.05);
  const auto peak = std::max_element(d.values.begin(), d.values.end()) - d.values.begin();
  CHECK(std::abs(d.grid[static_cast<std::size_t>(peak)] - 1.25) < 0.01);
  // default grid spans +-3 bandwidths, so about 0.3% of the mass is cut off
  CHECK(d.integral() == doctest::Approx(1.0).epsilon(5e-3));
  CHECK_THROWS(kde(std::vector<double>{}, grid, 0.1));
}

TEST_CASE("kde of normal samples recovers the pdf") {
  const auto v = normals(1'000'000, 21);
  const double h = silverman_bandwidth(v);
  std::vector<double> grid;
  for (double x = -4.0; x <= 4.0; x += 0.05) grid.push_back(x);
  const auto d = kde(v, grid, h);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    worst = std::max(worst, std::abs(d.values[i] - std::exp(-0.5 * grid[i] * grid[i]) / std::sqrt(2.0 * std::numbers::pi)));
  CHECK(worst < 0.01);
  std::ostringstream os;
  d.write_csv(os);
  CHECK(os.str().rfind("grid,value\n", 0) == 0);
}

TEST_CASE("w2 1d basics") {
  const std::vector<double> a{0.0}, b{1.0};
  CHECK(wasserstein2_1d(a, b) == 1.0);
  const auto x = normals(500, 2);
  CHECK(wasserstein2_1d(x, x) == 0.0);
  std::vector<double> y = x;
  for (auto &v : y) v += 2.5;
  CHECK(wasserstein2_1d(x, y) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK_THROWS(wasserstein2_1d(std::vector<double>{}, x));
  // unequal lengths: two point masses at 0 vs three at 0 gives 0
  CHECK(wasserstein2_1d(std::vector<double>{0.0, 0.0}, std::vector<double>{0.0, 0.0, 0.0}) == 0.0);
  // {0,1} vs {0, 0.5, 1}: quantile oracle
  const std::vector<double> p{0.0, 1.0}, q{0.0, 0.5, 1.0};
  double acc = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double u = (i + 0.5) / n;
    const double qa = u < 0.5 ? 0.0 : 1.0;
    const double qb = u < 1.0 / 3 ? 0.0 : (u < 2.0 / 3 ? 0.5 : 1.0);
    acc += (qa - qb) * (qa - qb);
  }
  CHECK(wasserstein2_1d(p, q) == doctest::Approx(std::sqrt(acc / n)).epsilon(1e-3));
}

TEST_CASE("w2 against a target quantile") {
  const auto q = gaussian_quantile(1.0, 2.0);
  CHECK(q(0.5) == doctest::Approx(1.0));
  CHECK(q(0.975) == doctest::Approx(1.0 + 2.0 * 1.959963985).epsilon(1e-8));

  const GaussianMixture1D mix;
  const auto mq = mixture_quantile(mix);
  for (double u : {0.01, 0.2, 0.4, 0.41, 0.7, 0.999}) CHECK(mix.cdf(mq(u)) == doctest::Approx(u).epsilon(1e-9));

  // point mass at the median: W2 = rms deviation from the median (quadrature oracle)
  const double median = mq(0.5);
  double acc = 0.0;
  const double h = 1e-3;
  for (double x = -15.0; x < 15.0; x += h) acc += (x - median) * (x - median) * mix.density(x + 0.5 * h) * h;
  const std::vector<double> at_median(100, median);
  CHECK(wasserstein2_vs_target(at_median, mq, 100000) == doctest::Approx(std::sqrt(acc)).epsilon(2e-3));

  // Riemann refinement converges
  const auto draws = mixture_draws(200, 5);
  CHECK(std::abs(wasserstein2_vs_target(draws, mq, 1000) - wasserstein2_vs_target(draws, mq, 10000)) < 1e-3);

  // exact draws: the distance shrinks with n
  double small = 0.0, large = 0.0;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    small += wasserstein2_vs_target(mixture_draws(1000, s), mq) / 5.0;
    large += wasserstein2_vs_target(mixture_draws(100000, 100 + s), mq) / 5.0;
  }
  CHECK(large < small);
  CHECK(large < 0.3);
  CHECK_THROWS(wasserstein2_vs_target(std::vector<double>{}, mq));
}

TEST_CASE("moments and gaussian w2") {
  MomentAccumulator acc(2);
  acc.add(Eigen::Vector2d(1.0, 0.0));
  acc.add(Eigen::Vector2d(3.0, 2.0));
  CHECK(acc.count() == 2);
  CHECK(acc.mean().isApprox(Eigen::Vector2d(2.0, 1.0)));
  Eigen::Matrix2d expect;
  expect << 2.0, 2.0, 2.0, 2.0;
  CHECK(acc.covariance().isApprox(expect));

  const Eigen::Vector2d m0 = Eigen::Vector2d::Zero(), m1(3.0, 4.0);
  const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  CHECK(gaussian_w2(m0, I, m0, I) == doctest::Approx(0.0).scale(1.0));
  CHECK(gaussian_w2(m0, I, m1, I) == doctest::Approx(5.0));
  // isotropic: sqrt(p) |sqrt(a) - sqrt(b)|
  CHECK(gaussian_w2(m0, 4.0 * I, m0, I) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("swap summary") {
  SampleTrace t;
  t.dim = 1;
  for (int k = 1; k <= 10; ++k)
    for (int c = 0; c < 2; ++c) t.rows.push_back({k, c, c ? 10.0 : 1.0, State::Zero(1), 0.0, k <= 3, 0.03});
  CHECK(swap_summary(t).swap_acceptance_rate == doctest::Approx(0.3));
  for (auto &r : t.rows) r.swapped = false;
  CHECK(swap_summary(t).swap_acceptance_rate == 0.0);
  for (auto &r : t.rows) r.swapped = true;
  CHECK(swap_summary(t).swap_acceptance_rate == 1.0);
  SampleTrace empty;
  CHECK(swap_summary(empty).swap_acceptance_rate == 0.0);
}
