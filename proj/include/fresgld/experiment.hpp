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

#ifndef FRESGLD_EXPERIMENT_HPP
#define FRESGLD_EXPERIMENT_HPP

// Declarative experiment runner: builds targets, noise, estimators and the
// sampler from an ExperimentConfig, runs every seed, and writes plot-ready
// CSV files plus JSON metrics.

#include "fresgld/diagnostics.hpp"
#include "fresgld/pde.hpp"
#include "fresgld/samplers.hpp"
#include "fresgld/variance.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fresgld {

// Invalid configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string &field, const std::string &what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string &field() const { return field_; }

 private:
  std::string field_;
};

enum class TargetKind { mixture, quadratic, pde };
enum class RunSampler { ld, sgld, reld, resgld, m_resgld, f_resgld };

std::string to_string(TargetKind kind);
std::string to_string(RunSampler kind);

struct TargetConfig {
  TargetKind kind = TargetKind::mixture;
  int dim = 1;                 // quadratic only
  double curvature = 1.0;      // quadratic only
  HeatModelParams heat;        // pde only
  double obs_noise_sd = 0.1;   // pde only
  std::vector<double> initial_position;  // empty: target default

  bool operator==(const TargetConfig &o) const;
};

// One noise channel: constant sd, or a logistic in the state / energy.
struct NoiseChannel {
  enum class Kind { constant, logistic_state, logistic_energy };
  Kind kind = Kind::constant;
  double scale = 0.0;

  bool operator==(const NoiseChannel &) const = default;
};

struct ChainNoiseConfig {
  NoiseChannel energy;    // constant or logistic_energy
  NoiseChannel gradient;  // constant or logistic_state

  bool operator==(const ChainNoiseConfig &) const = default;
};

struct VarianceConfig {
  VarianceKind kind = VarianceKind::known;
  int n_draws = 10;
  KrrOptions krr;

  bool operator==(const VarianceConfig &o) const;
};

struct ExperimentConfig {
  std::string name;
  TargetConfig target;
  RunSampler sampler = RunSampler::f_resgld;
  double tau_low = 1.0;
  double tau_high = 10.0;
  std::vector<double> eta{0.03};  // one value: constant; more: per-step sequence
  std::int64_t n_steps = 10000;
  std::int64_t n_retained = 1000;
  std::int64_t burn_in = 2000;
  ChainNoiseConfig noise_low;
  ChainNoiseConfig noise_high;
  VarianceConfig variance;
  double swap_a = 1.0;
  double swap_a1 = 0.5;
  double swap_a2 = 0.5;
  bool clamp_noise = false;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";
  bool emit_gnuplot_script = false;

  bool operator==(const ExperimentConfig &) const = default;

  std::string label() const;
  void validate() const;
};

ExperimentConfig config_from_json(const std::string &text);
std::string config_to_json(const ExperimentConfig &config);
ExperimentConfig load_config(const std::filesystem::path &path);

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string &name);

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  SampleTrace trace;
  std::vector<State> retained;  // low-temperature samples after burn-in
  RunMetrics metrics;
  std::optional<IqoiMetrics> iqoi;  // pde target
  std::optional<DensityEstimate> density;  // one-dimensional targets
  std::vector<KrrModel> krr_models;  // fitted kernel-ridge models of the low chain
};

// Runs one seed in memory. Sampler errors are captured in the result.
SeedResult run_seed(const ExperimentConfig &config, std::uint64_t seed);

struct ExperimentResult {
  std::filesystem::path output_dir;
  std::vector<SeedResult> seeds;

  TargetKind target = TargetKind::mixture;

  bool all_ok() const;
  // seed_score over the successful seeds.
  std::vector<double> scores() const;
};

// Seeds run in parallel; each seed's run is single-threaded. Output files are
// seed-suffixed. The FRESGLD_OUTPUT_DIR environment variable overrides
// config.output_dir.
ExperimentResult run_experiment(const ExperimentConfig &config, bool write_outputs = true);

struct VariantSummary {
  std::string label;
  std::vector<double> scores;  // per seed; lower is better
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> paired_difference;  // this minus the first variant, per seed
  int rank = 0;
};

struct ComparisonRecord {
  TargetKind target;
  std::string metric;
  std::vector<std::uint64_t> seeds;
  std::vector<VariantSummary> variants;  // in input order

  std::string to_json() const;
};

// Score per seed: W2 to truth, or for pde -(angular bins + annulus coverage)
// so that lower is better everywhere.
double seed_score(TargetKind target, const SeedResult &result);

ComparisonRecord compare(const std::vector<ExperimentConfig> &configs, bool write_outputs = true);

std::filesystem::path resolve_output_dir(const ExperimentConfig &config);

}  // namespace fresgld

#endif  // FRESGLD_EXPERIMENT_HPP
