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
#include "fresgld/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace fresgld;

namespace {

// Plain pdf sum, no log-sum-exp.
double mixture_pdf(double x) {
  auto npdf = [](double x, double m, double s) {
    return std::exp(-0.5 * (x - m) * (x - m) / (s * s)) / (s * std::sqrt(2.0 * std::numbers::pi));
  };
  return 0.4 * npdf(x, -4.0, 0.7) + 0.6 * npdf(x, 3.0, 0.5);
}

State s1(double x) {
  State s(1);
  s[0] = x;
  return s;
}

}  // namespace

TEST_CASE("mixture energy matches the direct pdf") {
  const GaussianMixture1D m;
  CHECK(m.energy(3.0) == doctest::Approx(-std::log(mixture_pdf(3.0))).epsilon(1e-12));
  CHECK(m.energy(3.0) == doctest::Approx(0.7366169764).epsilon(1e-9));
  CHECK(m.energy(-4.0) == doctest::Approx(-std::log(0.4 / (0.7 * std::sqrt(2.0 * std::numbers::pi)))).epsilon(1e-12));
  CHECK(m.energy(-4.0) == doctest::Approx(1.4785543211).epsilon(1e-9));
  for (double x = -10.0; x <= 10.0; x += 0.37)
    CHECK(m.energy(x) == doctest::Approx(-std::log(mixture_pdf(x))).epsilon(1e-10));
  CHECK(gaussian_mixture_energy(1.5) == m.energy(1.5));
}

TEST_CASE("mixture energy stays finite far in the tails") {
  const GaussianMixture1D m;
  CHECK(std::isfinite(m.energy(60.0)));
  CHECK(std::isfinite(m.energy(-60.0)));
  CHECK(std::isfinite(m.gradient(60.0)));
  CHECK(m.gradient(60.0) > 0.0);
  CHECK(m.gradient(-60.0) < 0.0);
}

TEST_CASE("mixture density integrates to one") {
  const GaussianMixture1D m;
  double acc = 0.0;
  const double h = 1e-3;
  for (double x = -15.0; x < 15.0; x += h) acc += m.density(x) * h;
  CHECK(acc == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(m.cdf(0.0) == doctest::Approx(0.4).epsilon(1e-6));
}

TEST_CASE("mixture gradient matches finite differences") {
  const GaussianMixture1D m;
  CHECK(std::abs(m.gradient(-4.0)) < 1e-9);
  CHECK(std::abs(m.gradient(3.0)) < 1e-9);
  Stream rng(7);
  for (int i = 0; i < 200; ++i) {
    const double x = -8.0 + 16.0 * rng.uniform();
    const double h = 1e-5;
    const double fd = (m.energy(x + h) - m.energy(x - h)) / (2.0 * h);
    CHECK(m.gradient(x) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    CHECK(m.gradient(s1(x))[0] == m.gradient(x));
  }
}

TEST_CASE("quadratic energy") {
  const QuadraticEnergy q(2, 2.0);
  CHECK(q.energy(State::Zero(2)) == 0.0);
  CHECK(q.energy(Eigen::Vector2d(1.0, 1.0)) == 2.0);
  CHECK(q.gradient(Eigen::Vector2d(1.0, 0.0)) == Eigen::Vector2d(2.0, 0.0));
  CHECK_THROWS(QuadraticEnergy(0, 1.0));
}

TEST_CASE("zero noise returns exact values") {
  auto base = std::make_shared<GaussianMixture1D>();
  NoisyEnergyModel model(base, NoiseSpec::zero(1), 1, 2);
  for (double x : {-3.0, 0.1, 2.9}) {
    CHECK(model.noisy_energy(s1(x)) == base->energy(x));
    CHECK(model.noisy_gradient(s1(x))[0] == base->gradient(x));
  }
  CHECK(model.energy_evaluations() == 3);
  CHECK(model.gradient_evaluations() == 3);
}

TEST_CASE("constant energy noise has the stated moments") {
  auto base = std::make_shared<GaussianMixture1D>();
  NoisyEnergyModel model(base, NoiseSpec::constant(1, 1.0, 2.0), 11, 12);
  const State theta = s1(0.5);
  const double u = base->energy(0.5);
  const int n = 1'000'000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = model.noisy_energy(theta) - u;
    sum += e;
    sq += e * e;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 3.3e-3);
  CHECK(sd == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("gradient noise uses the factor") {
  auto base = std::make_shared<QuadraticEnergy>(2, 1.0);
  NoisyEnergyModel model(base, NoiseSpec::constant(2, 0.0, 2.0), 3, 4);
  const Eigen::Vector2d theta(1.0, -1.0);
  const Eigen::Vector2d zeta(1.0, 0.5);
  CHECK(model.noisy_gradient_with(theta, zeta).isApprox(theta + 2.0 * zeta));

  Eigen::Matrix2d f;
  f << 1.0, 0.0, 0.5, 2.0;
  NoisyEnergyModel full(base, NoiseSpec::constant_matrix(0.0, f), 3, 4);
  CHECK(full.noisy_gradient_with(theta, zeta).isApprox(theta + f * zeta));
  CHECK(full.gradient_factor(theta) == f);
}

TEST_CASE("state dependent noise") {
  CHECK(logistic(0.0) == 0.5);
  const auto s = logistic_state_factor(1, 5.0);
  CHECK(s(s1(0.0))(0, 0) == doctest::Approx(2.5));
  CHECK(s(s1(50.0))(0, 0) == doctest::Approx(5.0));
  auto base = std::make_shared<GaussianMixture1D>();
  const auto sigma = logistic_energy_sd(base, 1.5);
  const double u = base->energy(1.0);
  CHECK(sigma(s1(1.0)) == doctest::Approx(1.5 * std::exp(u) / (1.0 + std::exp(u))));
  CHECK(std::isfinite(sigma(s1(40.0))));
  CHECK(sigma(s1(40.0)) == doctest::Approx(1.5));
}

TEST_CASE("named seeds are stable and distinct") {
  static_assert(derive_seed(1, "low/inject") == derive_seed(1, "low/inject"));
  CHECK(derive_seed(1, "low/inject") != derive_seed(1, "high/inject"));
  CHECK(derive_seed(1, "swap") != derive_seed(2, "swap"));
  Stream a(5), b(5);
  for (int i = 0; i < 10; ++i) CHECK(a.normal() == b.normal());
}
