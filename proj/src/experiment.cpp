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

#include "fresgld/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace fresgld {

using nlohmann::json;

namespace {

// Heat-source presets. With a 0.1 misfit scale the curvature across the
// iQoI circle is about 1.7e5, so no usable step is stable; a unit misfit scale
// keeps eta * curvature near 0.2.
constexpr double kPdeDefaultStep = 1e-4;
constexpr double kPdePresetObsNoise = 1.0;

// ---------------------------------------------------------------------------
// Enum names

const char *variance_name(VarianceKind k) {
  switch (k) {
    case VarianceKind::known: return "known";
    case VarianceKind::running_constant: return "running_constant";
    case VarianceKind::kernel_ridge: return "kernel_ridge";
  }
  return "?";
}

const char *channel_name(NoiseChannel::Kind k) {
  switch (k) {
    case NoiseChannel::Kind::constant: return "constant";
    case NoiseChannel::Kind::logistic_state: return "logistic_state";
    case NoiseChannel::Kind::logistic_energy: return "logistic_energy";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Strict JSON reading with field paths in every error.

class Reader {
 public:
  Reader(const json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string &key) const {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json &at(const std::string &key) const {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(field(key), "missing required field");
    return j_.at(key);
  }

  double number(const std::string &key) const {
    const auto &v = at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }

  double number_or(const std::string &key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::int64_t integer(const std::string &key) const {
    const auto &v = at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<std::int64_t>();
  }

  std::int64_t integer_or(const std::string &key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::string string(const std::string &key) const {
    const auto &v = at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }

  std::string string_or(const std::string &key, std::string fallback) const {
    return has(key) ? string(key) : fallback;
  }

  bool boolean_or(const std::string &key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto &v = at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::vector<double> numbers(const std::string &key) const {
    const auto &v = at(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError(field(key), "expected a number or an array of numbers");
    std::vector<double> out;
    for (const auto &e : v) {
      if (!e.is_number()) throw ConfigError(field(key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  Reader child(const std::string &key) const { return Reader(at(key), field(key)); }

  void reject_unknown() const {
    for (const auto &[key, _] : j_.items())
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown field");
  }

 private:
  const json &j_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

NoiseChannel read_channel(const Reader &r, bool energy) {
  NoiseChannel c;
  const std::string kind = r.string_or("kind", "constant");
  if (kind == "constant")
    c.kind = NoiseChannel::Kind::constant;
  else if (energy && kind == "logistic_energy")
    c.kind = NoiseChannel::Kind::logistic_energy;
  else if (!energy && kind == "logistic_state")
    c.kind = NoiseChannel::Kind::logistic_state;
  else
    throw ConfigError(r.field("kind"), "unsupported noise kind '" + kind + "'");
  c.scale = r.number("scale");
  if (c.scale < 0.0) throw ConfigError(r.field("scale"), "must be non-negative");
  r.reject_unknown();
  return c;
}

ChainNoiseConfig read_chain_noise(const Reader &r) {
  ChainNoiseConfig n;
  n.energy = read_channel(r.child("energy"), true);
  n.gradient = read_channel(r.child("gradient"), false);
  r.reject_unknown();
  return n;
}

json channel_json(const NoiseChannel &c) { return {{"kind", channel_name(c.kind)}, {"scale", c.scale}}; }

json chain_noise_json(const ChainNoiseConfig &n) {
  return {{"energy", channel_json(n.energy)}, {"gradient", channel_json(n.gradient)}};
}

std::vector<double> vec(const Eigen::Vector2d &v) { return {v.x(), v.y()}; }

Eigen::Vector2d point2(const Reader &r, const std::string &key) {
  const auto v = r.numbers(key);
  if (v.size() != 2) throw ConfigError(r.field(key), "expected two coordinates");
  return {v[0], v[1]};
}

// ---------------------------------------------------------------------------
// Building blocks of a run

std::shared_ptr<const EnergyModel> make_target(const TargetConfig &t) {
  switch (t.kind) {
    case TargetKind::mixture: return std::make_shared<GaussianMixture1D>();
    case TargetKind::quadratic: return std::make_shared<QuadraticEnergy>(t.dim, t.curvature);
    case TargetKind::pde: return std::make_shared<PdePosterior>(t.heat, t.obs_noise_sd);
  }
  throw std::logic_error("unknown target");
}

NoiseSpec make_noise(const ChainNoiseConfig &n, const std::shared_ptr<const EnergyModel> &model) {
  const Eigen::Index p = model->dim();
  NoiseSpec spec = NoiseSpec::constant(p, n.energy.kind == NoiseChannel::Kind::constant ? n.energy.scale : 0.0,
                                       n.gradient.kind == NoiseChannel::Kind::constant ? n.gradient.scale : 0.0);
  if (n.energy.kind == NoiseChannel::Kind::logistic_energy) {
    spec.energy_sd = logistic_energy_sd(model, n.energy.scale);
    spec.kind = NoiseKind::state_dependent;
  }
  if (n.gradient.kind == NoiseChannel::Kind::logistic_state) {
    spec.gradient_factor = logistic_state_factor(p, n.gradient.scale);
    spec.kind = NoiseKind::state_dependent;
  }
  return spec;
}

VarianceEstimator make_estimator(const VarianceConfig &v, Eigen::Index dim, const NoiseSpec &noise,
                                 std::uint64_t probe_seed) {
  switch (v.kind) {
    case VarianceKind::known: return VarianceEstimator::known(dim, noise);
    case VarianceKind::running_constant: return VarianceEstimator::running_constant(dim, v.n_draws, probe_seed);
    case VarianceKind::kernel_ridge: return VarianceEstimator::kernel_ridge(dim, v.n_draws, v.krr, probe_seed);
  }
  throw std::logic_error("unknown variance kind");
}

State initial_position(const TargetConfig &t, Eigen::Index dim) {
  if (!t.initial_position.empty())
    return Eigen::Map<const Eigen::VectorXd>(t.initial_position.data(), dim);
  if (t.kind == TargetKind::pde) return Eigen::Vector2d(0.7, 0.7);
  return State::Zero(dim);
}

// Quantile of pi_tau for a one-dimensional energy, tabulated by the
// trapezoid rule on [lo, hi] and inverted by linear interpolation.
QuantileFunction tabulated_quantile(const EnergyModel &model, double tau, double lo, double hi, int n) {
  std::vector<double> x(static_cast<std::size_t>(n)), logp(x.size()), cdf(x.size(), 0.0);
  double lmax = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    x[i] = lo + (hi - lo) * i / (n - 1);
    State s(1);
    s[0] = x[i];
    logp[i] = -model.energy(s) / tau;
    lmax = std::max(lmax, logp[i]);
  }
  for (int i = 1; i < n; ++i)
    cdf[i] = cdf[i - 1] + 0.5 * (std::exp(logp[i] - lmax) + std::exp(logp[i - 1] - lmax)) * (x[i] - x[i - 1]);
  for (auto &c : cdf) c /= cdf.back();
  return [x = std::move(x), cdf = std::move(cdf)](double u) {
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.begin()) return x.front();
    if (it == cdf.end()) return x.back();
    const auto i = static_cast<std::size_t>(it - cdf.begin());
    const double t = (u - cdf[i - 1]) / (cdf[i] - cdf[i - 1]);
    return x[i - 1] + t * (x[i] - x[i - 1]);
  };
}

std::vector<double> coordinate(const std::vector<State> &samples, Eigen::Index i) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto &s : samples) out.push_back(s[i]);
  return out;
}

double mean_of(const std::vector<double> &v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double> &v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string samples_csv(const std::vector<State> &samples, Eigen::Index dim) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < dim; ++i) os << (i ? "," : "") << "theta_" << i;
  os << '\n';
  char buf[40];
  for (const auto &s : samples) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", s[i]);
      os << (i ? "," : "") << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::string gnuplot_script(const ExperimentConfig &config, const std::vector<std::uint64_t> &seeds) {
  std::ostringstream os;
  os << "set datafile separator ','\nset key autotitle columnhead\n";
  if (config.target.kind == TargetKind::pde || config.target.dim > 1) {
    os << "set size square\nplot ";
    for (std::size_t i = 0; i < seeds.size(); ++i)
      os << (i ? ", \\\n     " : "") << "'samples_seed" << seeds[i] << ".csv' using 1:2 with dots";
  } else {
    os << "plot ";
    for (std::size_t i = 0; i < seeds.size(); ++i)
      os << (i ? ", \\\n     " : "") << "'kde_seed" << seeds[i] << ".csv' using 1:2 with lines";
  }
  os << "\npause -1\n";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::mixture: return "mixture";
    case TargetKind::quadratic: return "quadratic";
    case TargetKind::pde: return "pde";
  }
  return "?";
}

std::string to_string(RunSampler kind) {
  switch (kind) {
    case RunSampler::ld: return "ld";
    case RunSampler::sgld: return "sgld";
    case RunSampler::reld: return "reld";
    case RunSampler::resgld: return "resgld";
    case RunSampler::m_resgld: return "m_resgld";
    case RunSampler::f_resgld: return "f_resgld";
  }
  return "?";
}

bool TargetConfig::operator==(const TargetConfig &o) const {
  return kind == o.kind && dim == o.dim && curvature == o.curvature && heat.h == o.heat.h &&
         heat.terminal_time == o.heat.terminal_time && heat.sensor == o.heat.sensor &&
         heat.x0_true == o.heat.x0_true && obs_noise_sd == o.obs_noise_sd &&
         initial_position == o.initial_position;
}

bool VarianceConfig::operator==(const VarianceConfig &o) const {
  return kind == o.kind && n_draws == o.n_draws && krr.n_train == o.krr.n_train &&
         krr.bandwidth == o.krr.bandwidth && krr.ridge == o.krr.ridge;
}

std::string ExperimentConfig::label() const {
  if (!name.empty()) return name;
  std::string l = to_string(sampler);
  if (sampler == RunSampler::f_resgld) l += std::string("_") + variance_name(variance.kind);
  return l;
}

void ExperimentConfig::validate() const {
  if (!(tau_low > 0.0) || !(tau_high > tau_low))
    throw ConfigError("temperatures", "must satisfy tau_2 > tau_1 > 0");
  if (eta.empty()) throw ConfigError("eta", "must not be empty");
  for (double e : eta)
    if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("eta", "step sizes must be positive");
  if (n_steps < 1) throw ConfigError("n_steps", "must be >= 1");
  if (burn_in < 0 || burn_in >= n_steps) throw ConfigError("burn_in", "must lie in [0, n_steps)");
  if (n_retained < 1 || n_retained > n_steps - burn_in)
    throw ConfigError("n_retained", "must lie in [1, n_steps - burn_in]");
  if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (!(swap_a > 0.0)) throw ConfigError("swap.a", "must be positive");
  if (swap_a1 < 0.0 || swap_a2 < 0.0 || std::abs(swap_a1 + swap_a2 - 1.0) > 1e-12)
    throw ConfigError("swap", "a1 and a2 must be non-negative and sum to 1");
  if (variance.n_draws < 2) throw ConfigError("variance_estimator.n_draws", "must be >= 2");
  if (variance.krr.n_train < 1) throw ConfigError("variance_estimator.n_train", "must be >= 1");
  if (!(variance.krr.ridge > 0.0)) throw ConfigError("variance_estimator.ridge", "must be positive");
  switch (target.kind) {
    case TargetKind::mixture:
      break;
    case TargetKind::quadratic:
      if (target.dim < 1) throw ConfigError("target.dim", "must be >= 1");
      if (!(target.curvature > 0.0)) throw ConfigError("target.curvature", "must be positive");
      break;
    case TargetKind::pde:
      try {
        target.heat.validate();
      } catch (const std::invalid_argument &e) {
        throw ConfigError("target", e.what());
      }
      if (!(target.obs_noise_sd > 0.0)) throw ConfigError("target.obs_noise_sd", "must be positive");
      break;
  }
  const int dim = target.kind == TargetKind::mixture ? 1 : target.kind == TargetKind::pde ? 2 : target.dim;
  if (!target.initial_position.empty() && static_cast<int>(target.initial_position.size()) != dim)
    throw ConfigError("target.initial_position", "dimension does not match the target");
}

ExperimentConfig config_from_json(const std::string &text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  const Reader r(root, "");
  ExperimentConfig c;
  c.name = r.string_or("name", "");

  {
    const Reader t = r.child("target");
    const std::string kind = t.string("kind");
    if (kind == "mixture")
      c.target.kind = TargetKind::mixture;
    else if (kind == "quadratic")
      c.target.kind = TargetKind::quadratic;
    else if (kind == "pde")
      c.target.kind = TargetKind::pde;
    else
      throw ConfigError(t.field("kind"), "unknown target '" + kind + "'");
    if (c.target.kind == TargetKind::quadratic) {
      c.target.dim = static_cast<int>(t.integer_or("dim", 1));
      c.target.curvature = t.number_or("curvature", 1.0);
    }
    if (c.target.kind == TargetKind::pde) {
      c.target.heat.h = t.number_or("h", 0.1);
      c.target.heat.terminal_time = t.number_or("terminal_time", 0.03);
      if (t.has("sensor")) c.target.heat.sensor = point2(t, "sensor");
      if (t.has("x0_true")) c.target.heat.x0_true = point2(t, "x0_true");
      c.target.obs_noise_sd = t.number_or("obs_noise_sd", c.target.obs_noise_sd);
    }
    if (t.has("initial_position")) c.target.initial_position = t.numbers("initial_position");
    t.reject_unknown();
  }

  {
    const std::string s = r.string("sampler");
    if (s == "ld") c.sampler = RunSampler::ld;
    else if (s == "sgld") c.sampler = RunSampler::sgld;
    else if (s == "reld") c.sampler = RunSampler::reld;
    else if (s == "resgld") c.sampler = RunSampler::resgld;
    else if (s == "m_resgld") c.sampler = RunSampler::m_resgld;
    else if (s == "f_resgld") c.sampler = RunSampler::f_resgld;
    else throw ConfigError("sampler", "unknown sampler '" + s + "'");
  }

  const auto temps = r.numbers("temperatures");
  if (temps.size() != 2) throw ConfigError("temperatures", "expected [tau_1, tau_2]");
  c.tau_low = temps[0];
  c.tau_high = temps[1];
  c.eta = r.numbers("eta");
  c.n_steps = r.integer("n_steps");
  c.n_retained = r.integer("n_retained");
  c.burn_in = r.integer_or("burn_in", c.n_steps / 5);

  if (r.has("noise")) {
    const Reader n = r.child("noise");
    c.noise_low = read_chain_noise(n.child("low"));
    c.noise_high = read_chain_noise(n.child("high"));
    n.reject_unknown();
  }

  if (r.has("variance_estimator")) {
    const Reader v = r.child("variance_estimator");
    const std::string kind = v.string("kind");
    if (kind == "known") c.variance.kind = VarianceKind::known;
    else if (kind == "running_constant") c.variance.kind = VarianceKind::running_constant;
    else if (kind == "kernel_ridge") c.variance.kind = VarianceKind::kernel_ridge;
    else throw ConfigError(v.field("kind"), "unknown estimator '" + kind + "'");
    c.variance.n_draws = static_cast<int>(v.integer_or("n_draws", 10));
    c.variance.krr.n_train = static_cast<int>(v.integer_or("n_train", 100));
    c.variance.krr.bandwidth = v.number_or("bandwidth", 0.0);
    c.variance.krr.ridge = v.number_or("ridge", 1e-3);
    v.reject_unknown();
  }

  if (r.has("swap")) {
    const Reader s = r.child("swap");
    c.swap_a = s.number_or("a", 1.0);
    c.swap_a1 = s.number_or("a1", 0.5);
    c.swap_a2 = s.number_or("a2", 0.5);
    s.reject_unknown();
  }

  c.clamp_noise = r.boolean_or("clamp_noise", false);
  {
    const auto &seeds = r.at("seeds");
    if (!seeds.is_array()) throw ConfigError("seeds", "expected an array of integers");
    c.seeds.clear();
    for (const auto &s : seeds) {
      if (!s.is_number_unsigned()) throw ConfigError("seeds", "expected non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  c.output_dir = r.string_or("output_dir", "out");
  c.emit_gnuplot_script = r.boolean_or("emit_gnuplot_script", false);
  r.reject_unknown();
  c.validate();
  return c;
}

std::string config_to_json(const ExperimentConfig &c) {
  json j;
  if (!c.name.empty()) j["name"] = c.name;
  json t;
  t["kind"] = to_string(c.target.kind);
  if (c.target.kind == TargetKind::quadratic) {
    t["dim"] = c.target.dim;
    t["curvature"] = c.target.curvature;
  }
  if (c.target.kind == TargetKind::pde) {
    t["h"] = c.target.heat.h;
    t["terminal_time"] = c.target.heat.terminal_time;
    t["sensor"] = vec(c.target.heat.sensor);
    t["x0_true"] = vec(c.target.heat.x0_true);
    t["obs_noise_sd"] = c.target.obs_noise_sd;
  }
  if (!c.target.initial_position.empty()) t["initial_position"] = c.target.initial_position;
  j["target"] = t;
  j["sampler"] = to_string(c.sampler);
  j["temperatures"] = {c.tau_low, c.tau_high};
  j["eta"] = c.eta.size() == 1 ? json(c.eta.front()) : json(c.eta);
  j["n_steps"] = c.n_steps;
  j["n_retained"] = c.n_retained;
  j["burn_in"] = c.burn_in;
  j["noise"] = {{"low", chain_noise_json(c.noise_low)}, {"high", chain_noise_json(c.noise_high)}};
  j["variance_estimator"] = {{"kind", variance_name(c.variance.kind)},
                             {"n_draws", c.variance.n_draws},
                             {"n_train", c.variance.krr.n_train},
                             {"bandwidth", c.variance.krr.bandwidth},
                             {"ridge", c.variance.krr.ridge}};
  j["swap"] = {{"a", c.swap_a}, {"a1", c.swap_a1}, {"a2", c.swap_a2}};
  j["clamp_noise"] = c.clamp_noise;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["emit_gnuplot_script"] = c.emit_gnuplot_script;
  return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str());
}

// ---------------------------------------------------------------------------
// Presets

std::vector<std::string> preset_names() {
  return {"paper-mixture-fixed", "paper-mixture-statedep", "paper-pde-s", "paper-pde-f", "paper-pde-l"};
}

ExperimentConfig preset(const std::string &name) {
  ExperimentConfig c;
  c.name = name;
  c.output_dir = "out/" + name;
  c.seeds.resize(20);
  std::iota(c.seeds.begin(), c.seeds.end(), std::uint64_t{1});

  if (name == "paper-mixture-fixed" || name == "paper-mixture-statedep") {
    c.target.kind = TargetKind::mixture;
    c.sampler = RunSampler::f_resgld;
    c.tau_low = 1.0;
    c.tau_high = 10.0;
    c.eta = {0.03};
    c.swap_a = 1.0 / 0.03;  // swap probability min(1, S)
    c.n_steps = 5000;
    c.burn_in = c.n_steps / 5;
    c.n_retained = 1000;
    if (name == "paper-mixture-fixed") {
      c.noise_low = {{NoiseChannel::Kind::constant, 1.0}, {NoiseChannel::Kind::constant, 2.0}};
      c.noise_high = {{NoiseChannel::Kind::constant, 3.0}, {NoiseChannel::Kind::constant, 5.0}};
      c.variance.kind = VarianceKind::running_constant;
    } else {
      const ChainNoiseConfig n{{NoiseChannel::Kind::logistic_energy, 1.5},
                               {NoiseChannel::Kind::logistic_state, 5.0}};
      c.noise_low = c.noise_high = n;
      c.variance.kind = VarianceKind::kernel_ridge;
    }
    return c;
  }

  if (name == "paper-pde-s" || name == "paper-pde-f" || name == "paper-pde-l") {
    const PdeArmSetup arm = make_pde_arm(pde_arm_from_string(name.substr(10)));
    c.target.kind = TargetKind::pde;
    c.target.obs_noise_sd = kPdePresetObsNoise;
    c.sampler = arm.sampler == SamplerKind::f_resgld ? RunSampler::f_resgld : RunSampler::resgld;
    c.tau_low = arm.tau_low;
    c.tau_high = arm.tau_high;
    c.eta = {kPdeDefaultStep};
    c.n_steps = 48000;
    c.burn_in = 0;
    c.n_retained = c.n_steps;
    c.noise_low = c.noise_high = {{NoiseChannel::Kind::constant, arm.energy_noise_sd},
                                  {NoiseChannel::Kind::constant, arm.gradient_noise_sd}};
    c.variance.kind = VarianceKind::known;
    c.seeds = {1, 2, 3};
    return c;
  }
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Running

std::filesystem::path resolve_output_dir(const ExperimentConfig &config) {
  if (const char *env = std::getenv("FRESGLD_OUTPUT_DIR"); env != nullptr && *env != '\0')
    return std::filesystem::path(env) / (config.name.empty() ? config.label() : config.name);
  return config.output_dir;
}

SeedResult run_seed(const ExperimentConfig &config, std::uint64_t seed) {
  config.validate();
  SeedResult result;
  result.seed = seed;

  const auto target = make_target(config.target);
  const Eigen::Index dim = target->dim();
  const std::array<const ChainNoiseConfig *, 2> noise_cfg{&config.noise_low, &config.noise_high};
  const std::array<const char *, 2> chain_name{"low", "high"};

  std::vector<NoisyEnergyModel> models;
  std::vector<VarianceEstimator> estimators;
  std::vector<ChainState> chains;
  const std::array<double, 2> temps{config.tau_low, config.tau_high};
  for (int l = 0; l < 2; ++l) {
    const std::string prefix = chain_name[l];
    NoiseSpec noise = make_noise(*noise_cfg[l], target);
    estimators.push_back(make_estimator(config.variance, dim, noise, derive_seed(seed, prefix + "/probe")));
    models.emplace_back(target, std::move(noise), derive_seed(seed, prefix + "/gradient"),
                        derive_seed(seed, prefix + "/energy"));
    chains.push_back(ChainState{initial_position(config.target, dim), temps[l], 0,
                                Stream(derive_seed(seed, prefix + "/inject"))});
  }

  const StepSchedule schedule =
      config.eta.size() == 1 ? StepSchedule::constant(config.eta.front()) : StepSchedule::sequence(config.eta);
  RunOptions options;
  options.clamp_noise = config.clamp_noise;
  if (config.target.kind == TargetKind::pde) options.reflect = Box{Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones()};

  try {
    if (config.sampler == RunSampler::ld || config.sampler == RunSampler::sgld) {
      const ChainKind kind = config.sampler == RunSampler::ld ? ChainKind::ld : ChainKind::sgld;
      result.trace = run_single_chain(chains[0], models[0], nullptr, kind, schedule, config.n_steps, options);
    } else {
      SwapRule rule;
      rule.kind = config.sampler == RunSampler::reld       ? SamplerKind::reld
                  : config.sampler == RunSampler::resgld   ? SamplerKind::resgld
                  : config.sampler == RunSampler::m_resgld ? SamplerKind::m_resgld
                                                           : SamplerKind::f_resgld;
      rule.a = config.swap_a;
      rule.a1 = config.swap_a1;
      rule.a2 = config.swap_a2;
      ReplicaPair pair(std::move(chains[0]), std::move(chains[1]), rule, derive_seed(seed, "swap"));
      std::array<NoisyEnergyModel, 2> model_pair{std::move(models[0]), std::move(models[1])};
      std::array<VarianceEstimator, 2> estimator_pair{std::move(estimators[0]), std::move(estimators[1])};
      result.trace = run_replica_exchange(pair, model_pair, estimator_pair, schedule, config.n_steps, options);
      result.krr_models = estimator_pair[0].krr_models();
    }
  } catch (const StepTooLarge &e) {
    result.ok = false;
    result.error = e.what();
    return result;
  } catch (const NonFiniteState &e) {
    result.ok = false;
    result.error = e.what();
    return result;
  }

  auto retained = result.trace.positions(0, config.burn_in);
  retained.resize(static_cast<std::size_t>(std::min<std::int64_t>(config.n_retained,
                                                                   static_cast<std::int64_t>(retained.size()))));
  result.retained = std::move(retained);
  result.metrics = swap_summary(result.trace);
  result.metrics.sample_count = static_cast<std::int64_t>(result.retained.size());

  switch (config.target.kind) {
    case TargetKind::mixture: {
      const auto xs = coordinate(result.retained, 0);
      const QuantileFunction q = config.tau_low == 1.0
                                     ? mixture_quantile(GaussianMixture1D())
                                     : tabulated_quantile(*target, config.tau_low, -40.0, 40.0, 400001);
      result.metrics.w2_to_truth = wasserstein2_vs_target(xs, q);
      result.metrics.has_w2 = true;
      break;
    }
    case TargetKind::quadratic: {
      const double sd = std::sqrt(config.tau_low / config.target.curvature);
      double acc = 0.0;
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double w = wasserstein2_vs_target(coordinate(result.retained, i), gaussian_quantile(0.0, sd));
        acc += w * w;
      }
      result.metrics.w2_to_truth = std::sqrt(acc);
      result.metrics.has_w2 = true;
      break;
    }
    case TargetKind::pde:
      result.iqoi = iqoi_metrics(result.retained, config.target.heat, config.label());
      break;
  }
  if (dim == 1 && result.retained.size() >= 2) {
    const auto xs = coordinate(result.retained, 0);
    const double h = silverman_bandwidth(xs);
    result.density = kde(xs, default_grid(xs, h), h);
  }
  return result;
}

bool ExperimentResult::all_ok() const {
  return std::all_of(seeds.begin(), seeds.end(), [](const SeedResult &s) { return s.ok; });
}

std::vector<double> ExperimentResult::scores() const {
  std::vector<double> out;
  for (const auto &s : seeds)
    if (s.ok) out.push_back(seed_score(target, s));
  return out;
}

double seed_score(TargetKind target, const SeedResult &result) {
  if (!result.ok) return std::numeric_limits<double>::quiet_NaN();
  if (target == TargetKind::pde) return -(result.iqoi->angular_bins_occupied + result.iqoi->annulus_coverage);
  return result.metrics.w2_to_truth;
}

ExperimentResult run_experiment(const ExperimentConfig &config, bool write_outputs) {
  config.validate();
  ExperimentResult result;
  result.target = config.target.kind;
  result.output_dir = resolve_output_dir(config);
  result.seeds.resize(config.seeds.size());
  const auto n = static_cast<std::int64_t>(config.seeds.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < n; ++i) result.seeds[i] = run_seed(config, config.seeds[i]);

  if (!write_outputs) return result;
  std::filesystem::create_directories(result.output_dir);
  const auto &dir = result.output_dir;
  write_text(dir / "config.json", config_to_json(config));

  json aggregate;
  aggregate["name"] = config.label();
  aggregate["target"] = to_string(config.target.kind);
  json per_seed = json::array();
  for (const auto &s : result.seeds) {
    const std::string suffix = "_seed" + std::to_string(s.seed);
    json entry;
    entry["seed"] = s.seed;
    entry["ok"] = s.ok;
    if (!s.ok) {
      entry["error"] = s.error;
      per_seed.push_back(entry);
      write_text(dir / ("metrics" + suffix + ".json"), entry.dump(2) + "\n");
      continue;
    }
    {
      std::ostringstream os;
      s.trace.write_csv(os);
      write_text(dir / ("trace" + suffix + ".csv"), os.str());
    }
    write_text(dir / ("samples" + suffix + ".csv"), samples_csv(s.retained, s.trace.dim));
    if (s.density) {
      std::ostringstream os;
      s.density->write_csv(os);
      write_text(dir / ("kde" + suffix + ".csv"), os.str());
    }
    for (std::size_t m = 0; m < s.krr_models.size(); ++m)
      write_text(dir / ("krr" + suffix + "_model" + std::to_string(m) + ".json"), krr_to_json(s.krr_models[m]) + "\n");
    json metrics = json::parse(s.metrics.to_json());
    metrics["seed"] = s.seed;
    if (s.iqoi) metrics["iqoi"] = json::parse(s.iqoi->to_json());
    write_text(dir / ("metrics" + suffix + ".json"), metrics.dump(2) + "\n");
    entry["w2_to_truth"] = s.metrics.has_w2 ? json(s.metrics.w2_to_truth) : json(nullptr);
    entry["swap_acceptance_rate"] = s.metrics.swap_acceptance_rate;
    if (s.iqoi) {
      entry["annulus_coverage"] = s.iqoi->annulus_coverage;
      entry["angular_bins_occupied"] = s.iqoi->angular_bins_occupied;
    }
    per_seed.push_back(entry);
  }
  aggregate["seeds"] = per_seed;
  if (config.target.kind == TargetKind::pde) {
    std::vector<double> annulus, bins;
    for (const auto &s : result.seeds)
      if (s.ok) {
        annulus.push_back(s.iqoi->annulus_coverage);
        bins.push_back(s.iqoi->angular_bins_occupied);
      }
    aggregate["annulus_coverage_mean"] = mean_of(annulus);
    aggregate["annulus_coverage_sd"] = sd_of(annulus);
    aggregate["angular_bins_mean"] = mean_of(bins);
    aggregate["angular_bins_sd"] = sd_of(bins);
  } else {
    const auto w = result.scores();
    aggregate["w2_mean"] = mean_of(w);
    aggregate["w2_sd"] = sd_of(w);
  }
  aggregate["failed_seeds"] = std::count_if(result.seeds.begin(), result.seeds.end(),
                                            [](const SeedResult &s) { return !s.ok; });
  write_text(dir / "metrics.json", aggregate.dump(2) + "\n");
  if (config.emit_gnuplot_script) write_text(dir / "plot.gp", gnuplot_script(config, config.seeds));
  return result;
}

std::string ComparisonRecord::to_json() const {
  json j;
  j["target"] = fresgld::to_string(target);
  j["metric"] = metric;
  j["seeds"] = seeds;
  json vs = json::array();
  for (const auto &v : variants) {
    vs.push_back({{"label", v.label},
                  {"rank", v.rank},
                  {"mean", v.mean},
                  {"sd", v.sd},
                  {"scores", v.scores},
                  {"paired_difference_vs_first", v.paired_difference}});
  }
  j["variants"] = vs;
  return j.dump(2) + "\n";
}

ComparisonRecord compare(const std::vector<ExperimentConfig> &configs, bool write_outputs) {
  if (configs.size() < 2) throw std::invalid_argument("compare needs at least two configs");
  for (const auto &c : configs) {
    if (c.target.kind != configs.front().target.kind)
      throw std::invalid_argument("compare: configs target different problems");
    if (c.seeds != configs.front().seeds) throw std::invalid_argument("compare: configs use different seeds");
  }
  ComparisonRecord record;
  record.target = configs.front().target.kind;
  record.metric = record.target == TargetKind::pde ? "-(angular_bins + annulus_coverage)" : "w2_to_truth";
  record.seeds = configs.front().seeds;

  for (const auto &c : configs) {
    const ExperimentResult r = run_experiment(c, write_outputs);
    VariantSummary v;
    v.label = c.label();
    for (const auto &s : r.seeds) v.scores.push_back(seed_score(record.target, s));
    v.mean = mean_of(v.scores);
    v.sd = sd_of(v.scores);
    record.variants.push_back(std::move(v));
  }
  const auto &base = record.variants.front().scores;
  for (auto &v : record.variants) {
    v.paired_difference.resize(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) v.paired_difference[i] = v.scores[i] - base[i];
  }
  std::vector<std::size_t> order(record.variants.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = record.variants[a].mean, mb = record.variants[b].mean;
    if (std::isnan(ma)) return false;
    if (std::isnan(mb)) return true;
    return ma < mb;
  });
  for (std::size_t r = 0; r < order.size(); ++r) record.variants[order[r]].rank = static_cast<int>(r + 1);
  return record;
}

}  // namespace fresgld
