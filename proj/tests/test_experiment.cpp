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

#include "fresgld/experiment.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace fresgld;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small_mixture(const std::string &dir) {
  ExperimentConfig c = preset("paper-mixture-fixed");
  c.name = "small";
  c.n_steps = 400;
  c.burn_in = 100;
  c.n_retained = 200;
  c.seeds = {1, 2};
  c.output_dir = dir;
  return c;
}

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("fresgld_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string field_of(const std::string &json) {
  try {
    (void)config_from_json(json);
  } catch (const ConfigError &e) {
    return e.field();
  }
  return "<none>";
}

const char *kMinimal = R"({"target": {"kind": "mixture"}, "sampler": "f_resgld", "temperatures": [1, 10],
  "eta": 0.03, "n_steps": 100, "n_retained": 50, "seeds": [1]})";

}  // namespace

TEST_CASE("minimal config and defaults") {
  const auto c = config_from_json(kMinimal);
  CHECK(c.burn_in == 20);
  CHECK(c.variance.kind == VarianceKind::known);
  CHECK(c.eta == std::vector<double>{0.03});
  CHECK(c.swap_a == 1.0);
}

TEST_CASE("config round trip") {
  for (const auto &name : preset_names()) {
    const auto c = preset(name);
    CHECK_NOTHROW(c.validate());
    CHECK(config_from_json(config_to_json(c)) == c);
  }
  auto c = small_mixture("x");
  c.eta = {0.05, 0.04, 0.03};
  c.target.kind = TargetKind::quadratic;
  c.target.dim = 3;
  c.target.curvature = 2.0;
  c.target.initial_position = {1.0, 2.0, 3.0};
  c.variance.kind = VarianceKind::kernel_ridge;
  c.variance.krr.bandwidth = 0.7;
  c.swap_a1 = 0.25;
  c.swap_a2 = 0.75;
  c.emit_gnuplot_script = true;
  CHECK(config_from_json(config_to_json(c)) == c);
}

TEST_CASE("config errors name the field") {
  CHECK(field_of("{") == "<root>");
  CHECK(field_of(R"({"target": {"kind": "mixture"}})") == "sampler");
  std::string bad = kMinimal;
  CHECK(field_of(bad.replace(bad.find("[1, 10]"), 7, "[10, 1]")) == "temperatures");
  bad = kMinimal;
  CHECK(field_of(bad.replace(bad.find("\"n_retained\": 50"), 16, "\"n_retained\": 99")) == "n_retained");
  bad = kMinimal;
  CHECK(field_of(bad.replace(bad.find("[1]"), 3, "[]")) == "seeds");
  bad = kMinimal;
  CHECK(field_of(bad.replace(bad.find("\"mixture\""), 9, "\"mixture\", \"colour\": 1")) == "target.colour");
  bad = kMinimal;
  CHECK(field_of(bad.replace(bad.find("\"f_resgld\""), 10, "\"hmc\"")) == "sampler");
  bad = kMinimal;
  CHECK(field_of(bad.replace(bad.find("\"seeds\""), 7, "\"variance_estimator\": {\"kind\": \"magic\"}, \"seeds\"")) ==
        "variance_estimator.kind");
  CHECK_THROWS_AS(preset("paper-nothing"), ConfigError);
}

TEST_CASE("presets hold the reference settings") {
  const auto f = preset("paper-mixture-fixed");
  CHECK(f.tau_low == 1.0);
  CHECK(f.tau_high == 10.0);
  CHECK(f.eta == std::vector<double>{0.03});
  CHECK(f.n_retained == 1000);
  CHECK(f.noise_low.energy.scale == 1.0);
  CHECK(f.noise_high.energy.scale == 3.0);
  CHECK(f.noise_low.gradient.scale == 2.0);
  CHECK(f.noise_high.gradient.scale == 5.0);
  const auto s = preset("paper-mixture-statedep");
  CHECK(s.noise_low.gradient.kind == NoiseChannel::Kind::logistic_state);
  CHECK(s.noise_low.gradient.scale == 5.0);
  CHECK(s.noise_low.energy.kind == NoiseChannel::Kind::logistic_energy);
  CHECK(s.noise_low.energy.scale == 1.5);
  const auto p = preset("paper-pde-l");
  CHECK(p.sampler == RunSampler::resgld);
  CHECK(p.tau_low == 0.08);
  CHECK(p.tau_high == 0.5);
  CHECK(p.noise_low.energy.scale == 0.8);
  CHECK(p.noise_low.gradient.scale == 2.0);
  CHECK(p.n_steps == 48000);
}

TEST_CASE("runs are deterministic and write the expected files") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  auto ca = small_mixture(a.string());
  auto cb = small_mixture(b.string());
  ca.emit_gnuplot_script = cb.emit_gnuplot_script = true;
  const auto ra = run_experiment(ca);
  run_experiment(cb);
  CHECK(ra.all_ok());
  for (const char *f : {"trace_seed1.csv", "samples_seed2.csv", "kde_seed1.csv", "metrics_seed2.json", "metrics.json",
                        "plot.gp"}) {
    INFO(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  REQUIRE(fs::exists(a / "config.json"));
  CHECK(ra.seeds[0].retained.size() == 200);
  CHECK(ra.seeds[0].metrics.has_w2);
  CHECK(load_config(a / "config.json") == ca);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("step too large is recorded per seed") {
  auto c = small_mixture("unused");
  c.eta = {0.1};  // 2 tau_1 / s_1^2 = 0.5 is fine, 2 tau_2 / s_2^2 = 0.8 is fine; raise s instead
  c.noise_low.gradient.scale = 10.0;
  const auto r = run_experiment(c, false);
  CHECK_FALSE(r.all_ok());
  CHECK(r.seeds[0].error.find("step") != std::string::npos);
  CHECK(r.scores().empty());
}

TEST_CASE("compare") {
  auto c = small_mixture("unused");
  const auto same = compare({c, c}, false);
  for (double d : same.variants[1].paired_difference) CHECK(d == 0.0);
  CHECK(same.variants.size() == 2);

  auto other = c;
  other.sampler = RunSampler::resgld;
  const auto rec = compare({c, other}, false);
  CHECK((rec.variants[0].rank + rec.variants[1].rank) == 3);
  CHECK(rec.to_json().find("\"variants\"") != std::string::npos);

  auto pde = preset("paper-pde-f");
  pde.seeds = c.seeds;
  CHECK_THROWS_AS(compare({c, pde}, false), std::invalid_argument);
  CHECK_THROWS_AS(compare({c}, false), std::invalid_argument);
}

TEST_CASE("output directory override") {
  auto c = small_mixture("plain");
  CHECK(resolve_output_dir(c) == fs::path("plain"));
  setenv("FRESGLD_OUTPUT_DIR", "/tmp/elsewhere", 1);
  CHECK(resolve_output_dir(c) == fs::path("/tmp/elsewhere/small"));
  unsetenv("FRESGLD_OUTPUT_DIR");
}

TEST_CASE("quadratic and single chain runs") {
  auto c = small_mixture("unused");
  c.target.kind = TargetKind::quadratic;
  c.target.dim = 2;
  c.sampler = RunSampler::sgld;
  const auto r = run_experiment(c, false);
  REQUIRE(r.all_ok());
  CHECK(r.seeds[0].metrics.has_w2);
  CHECK_FALSE(r.seeds[0].density.has_value());
  CHECK(r.seeds[0].trace.swap_attempts == 0);
}
