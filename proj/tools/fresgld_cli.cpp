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

// Command-line front end: run, compare, preset, diag.

#include "fresgld/diagnostics.hpp"
#include "fresgld/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSamplerError = 2;

// First column of a CSV file; a non-numeric first line is taken as a header.
std::vector<double> read_column(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw fresgld::ConfigError(path, "cannot open");
  std::vector<double> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::string cell = line.substr(0, line.find(','));
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      out.push_back(v);
    } catch (const std::exception &) {
      if (!first) throw fresgld::ConfigError(path, "non-numeric value '" + cell + "'");
    }
    first = false;
  }
  if (out.empty()) throw fresgld::ConfigError(path, "no samples");
  return out;
}

void print_summary(const fresgld::ExperimentResult &r) {
  for (const auto &s : r.seeds) {
    if (!s.ok) {
      std::printf("seed %llu  FAILED  %s\n", static_cast<unsigned long long>(s.seed), s.error.c_str());
      continue;
    }
    std::printf("seed %llu  score %.6g  swap_rate %.4f\n", static_cast<unsigned long long>(s.seed),
                fresgld::seed_score(r.target, s), s.metrics.swap_acceptance_rate);
  }
  std::printf("outputs in %s\n", r.output_dir.string().c_str());
}

int run_config(const fresgld::ExperimentConfig &config) {
  const auto result = fresgld::run_experiment(config);
  print_summary(result);
  return result.all_ok() ? kOk : kSamplerError;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Replica-exchange stochastic gradient Langevin samplers"};
  app.require_subcommand(1);

  std::string config_path;
  auto *run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("config", config_path, "config file")->required();

  std::vector<std::string> compare_paths;
  std::string compare_out;
  auto *cmp = app.add_subcommand("compare", "Run several configs on shared seeds and rank them");
  cmp->add_option("configs", compare_paths, "config files")->required()->expected(2, -1);
  cmp->add_option("-o,--output", compare_out, "write the comparison record to this file");

  std::string preset_name;
  bool preset_print = false;
  auto *pre = app.add_subcommand("preset", "Run a built-in preset (or print its config)");
  pre->add_option("name", preset_name, "preset name")->required();
  pre->add_flag("--print", preset_print, "print the preset config and exit");
  pre->footer([] {
    std::string s = "Presets:";
    for (const auto &n : fresgld::preset_names()) s += " " + n;
    return s;
  }());

  std::string file_a, file_b;
  auto *diag = app.add_subcommand("diag", "Diagnostics on sample files");
  diag->require_subcommand(1);
  auto *w2 = diag->add_subcommand("w2", "W2 distance between the first columns of two CSV files");
  w2->add_option("file_a", file_a)->required();
  w2->add_option("file_b", file_b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return run_config(fresgld::load_config(config_path));
    if (*pre) {
      const auto config = fresgld::preset(preset_name);
      if (preset_print) {
        std::cout << fresgld::config_to_json(config);
        return kOk;
      }
      return run_config(config);
    }
    if (*cmp) {
      std::vector<fresgld::ExperimentConfig> configs;
      for (const auto &p : compare_paths) configs.push_back(fresgld::load_config(p));
      fresgld::ComparisonRecord record;
      try {
        record = fresgld::compare(configs);
      } catch (const std::invalid_argument &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
      }
      const std::string text = record.to_json();
      if (!compare_out.empty()) {
        std::ofstream(compare_out) << text;
      }
      std::cout << text;
      for (const auto &v : record.variants)
        for (double s : v.scores)
          if (std::isnan(s)) return kSamplerError;
      return kOk;
    }
    if (*w2) {
      const auto a = read_column(file_a);
      const auto b = read_column(file_b);
      std::printf("%.17g\n", fresgld::wasserstein2_1d(a, b));
      return kOk;
    }
  } catch (const fresgld::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fresgld::StepTooLarge &e) {
    std::cerr << "sampler error: " << e.what() << "\n";
    return kSamplerError;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSamplerError;
  }
  return kOk;
}
