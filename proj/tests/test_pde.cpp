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
#include "fresgld/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace fresgld;

namespace {

Eigen::Vector2d rotate_about(const Eigen::Vector2d &p, const Eigen::Vector2d &c, double angle) {
  const Eigen::Vector2d d = p - c;
  return c + Eigen::Vector2d(std::cos(angle) * d.x() - std::sin(angle) * d.y(),
                             std::sin(angle) * d.x() + std::cos(angle) * d.y());
}

}  // namespace

TEST_CASE("heat parameters") {
  const HeatModelParams p;
  CHECK(p.beta() == doctest::Approx(1.0 / (2.0 * std::numbers::pi * 0.01)));
  CHECK(p.alpha() == doctest::Approx(0.02));
  CHECK(p.r_star() == doctest::Approx(0.2));
  HeatModelParams bad;
  bad.sensor = {1.2, 0.5};
  CHECK_THROWS(bad.validate());
  bad = {};
  bad.h = -1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("forward solution") {
  const HeatModelParams p;
  const Eigen::Vector2d x0(0.5, 0.5);
  CHECK(forward_solution(p, x0, x0, 0.0) == doctest::Approx(15.91549).epsilon(1e-6));
  const double direct = 1.0 / (2.0 * std::numbers::pi * 0.01) * std::exp(-0.04 / 0.02) * std::exp(-0.03);
  CHECK(forward_solution(p, x0, p.sensor, 0.03) == doctest::Approx(direct).epsilon(1e-14));
  CHECK(direct == doctest::Approx(2.09027).epsilon(1e-5));
  const Eigen::Vector2d x(0.31, 0.77);
  CHECK(forward_solution(p, x0, x, 0.4) ==
        doctest::Approx(forward_solution(p, x0, x, 0.0) * std::exp(-0.4)).epsilon(1e-15));
  CHECK(forward_solution(p, x0, rotate_about(x, x0, 1.1), 0.1) ==
        doctest::Approx(forward_solution(p, x0, x, 0.1)).epsilon(1e-13));
  CHECK_THROWS(forward_solution(p, x0, x, -1.0));
}

TEST_CASE("posterior energy at known points") {
  const HeatModelParams p;
  const PdePosterior post(p, 0.1);
  CHECK(post.energy(p.x0_true) == doctest::Approx(0.0).scale(1.0));
  const double residual = p.beta() * std::exp(-0.03) * (1.0 - std::exp(-2.0));
  CHECK(residual == doctest::Approx(13.35485).epsilon(1e-6));
  CHECK(post.energy(p.sensor) == doctest::Approx(residual * residual / (2.0 * 0.01)).epsilon(1e-12));
  CHECK(post.energy(Eigen::Vector2d(0.3, 0.3)) == doctest::Approx(post.energy(p.x0_true)).scale(1.0));
}

TEST_CASE("posterior energy is rotation invariant about the sensor") {
  const HeatModelParams p;
  const PdePosterior post(p, 0.1);
  Stream rng(3);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d x(rng.uniform(), rng.uniform());
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    const double e = post.energy(x);
    CHECK(std::abs(post.energy(rotate_about(x, p.sensor, angle)) - e) <= 1e-12 * std::max(1.0, e));
    // reflection across the sensor
    CHECK(post.energy(2.0 * p.sensor - x) == doctest::Approx(e).epsilon(1e-12));
  }
}

TEST_CASE("posterior gradient") {
  const HeatModelParams p;
  const PdePosterior post(p, 0.1);
  CHECK(post.gradient(p.x0_true).norm() < 1e-10);
  Stream rng(4);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d x(rng.uniform(), rng.uniform());
    const Eigen::Vector2d g = post.gradient(x);
    const Eigen::Vector2d radial = (x - p.sensor).normalized();
    const Eigen::Vector2d tangent(-radial.y(), radial.x());
    CHECK(std::abs(g.dot(tangent)) <= 1e-10 * std::max(1.0, g.norm()));
    for (int k = 0; k < 2; ++k) {
      const double h = 1e-6;
      Eigen::Vector2d a = x, b = x;
      a[k] += h;
      b[k] -= h;
      const double fd = (post.energy(a) - post.energy(b)) / (2.0 * h);
      CHECK(std::abs(g[k] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("arm setups") {
  const auto s = make_pde_arm(PdeArm::s_resgld);
  const auto f = make_pde_arm(PdeArm::f_resgld);
  const auto l = make_pde_arm(PdeArm::l_resgld);
  CHECK(s.energy_noise_sd == 0.1);
  CHECK(s.gradient_noise_sd == 0.1);
  CHECK(f.energy_noise_sd == 0.8);
  CHECK(f.gradient_noise_sd == 2.0);
  CHECK(l.energy_noise_sd == 0.8);
  CHECK(l.gradient_noise_sd == 2.0);
  for (const auto &a : {s, f, l}) {
    CHECK(a.tau_low == 0.08);
    CHECK(a.tau_high == 0.5);
  }
  CHECK(f.sampler == SamplerKind::f_resgld);
  CHECK(s.sampler == SamplerKind::resgld);
  CHECK(l.sampler == SamplerKind::resgld);
  CHECK(pde_arm_from_string("f") == PdeArm::f_resgld);
  CHECK(pde_arm_from_string(to_string(PdeArm::l_resgld)) == PdeArm::l_resgld);
  CHECK_THROWS(pde_arm_from_string("x"));
}

TEST_CASE("iqoi metrics") {
  const HeatModelParams p;
  std::vector<Eigen::VectorXd> ring, point;
  for (int i = 0; i < 360; ++i) {
    const double a = 2.0 * std::numbers::pi * (i + 0.5) / 360.0;
    ring.push_back(p.sensor + 0.2 * Eigen::Vector2d(std::cos(a), std::sin(a)));
    point.push_back(p.x0_true);
  }
  const auto r = iqoi_metrics(ring, p);
  CHECK(r.annulus_coverage == 1.0);
  CHECK(r.angular_bins_occupied == 36);
  const auto q = iqoi_metrics(point, p);
  CHECK(q.annulus_coverage == 1.0);
  CHECK(q.angular_bins_occupied == 1);
  CHECK_THROWS(iqoi_metrics({}, p));

  // uniform on the unit square: oracle is a direct geometric count
  Stream rng(9);
  std::vector<Eigen::VectorXd> uni;
  const int n = 200000;
  int inside = 0;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d x(rng.uniform(), rng.uniform());
    uni.push_back(x);
    const double d = std::hypot(x.x() - 0.3, x.y() - 0.5);
    inside += (d >= 0.15 && d <= 0.25) ? 1 : 0;
  }
  const auto u = iqoi_metrics(uni, p, "uniform");
  CHECK(u.annulus_coverage == doctest::Approx(static_cast<double>(inside) / n).epsilon(1e-12));
  CHECK(u.annulus_coverage == doctest::Approx(2.0 * std::numbers::pi * 0.2 * 0.1).epsilon(0.02));
  CHECK(u.to_json().find("\"arm\"") != std::string::npos);
}
