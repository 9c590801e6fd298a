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
#include "fresgld/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace fresgld;

TEST_CASE("kde kernels agree") {
  Stream rng(1);
  std::vector<double> s(5000), g(300), a(g.size()), b(g.size());
  for (auto &x : s) x = rng.normal();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -4.0 + 8.0 * i / (g.size() - 1);
  kernels::kde_serial(s, g, 0.3, a);
  kernels::kde_parallel(s, g, 0.3, b);
  CHECK(a == b);
}

TEST_CASE("rbf kernels agree") {
  Stream rng(2);
  std::vector<Eigen::VectorXd> in, q;
  for (int i = 0; i < 80; ++i) in.push_back(rng.normal_vector(3));
  for (int i = 0; i < 40; ++i) q.push_back(rng.normal_vector(3));
  const auto ga = kernels::rbf_gram_serial(in, 0.7);
  const auto gb = kernels::rbf_gram_parallel(in, 0.7);
  CHECK(ga == gb);
  CHECK(ga(3, 3) == 1.0);
  CHECK(ga(1, 2) == doctest::Approx(std::exp(-(in[1] - in[2]).squaredNorm() / (2.0 * 0.49))));
  const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(80, -1.0, 1.0);
  CHECK(kernels::rbf_predict_serial(in, w, 0.7, q) == kernels::rbf_predict_parallel(in, w, 0.7, q));
}

TEST_CASE("monte carlo means are thread-count independent") {
  auto draw = [](Stream &r) { return std::exp(0.5 * r.normal()); };
  const auto a = kernels::mc_mean_serial(draw, 300000, 42);
  const auto b = kernels::mc_mean_parallel(draw, 300000, 42);
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
  CHECK(a.count == 300000);
  CHECK(std::abs(a.mean - std::exp(0.125)) < 4.0 * a.std_error);
}
