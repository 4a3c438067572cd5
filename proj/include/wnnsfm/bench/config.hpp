// Copyright 2026 The wnnsfm Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Experiment configuration: `key = value` text, `#` comments.

#pragma once

#include <wnnsfm/admm.hpp>
#include <wnnsfm/bench/synth.hpp>
#include <wnnsfm/lm.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wnnsfm::bench {

/// Malformed or inconsistent configuration (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Mode { kLrRecovery, kNrsfm, kOracle, kSynth, kCompare };
enum class Pipeline { kCombined, kAdmm, kLm };

inline Mode parse_mode(const std::string& s) {
  if (s == "lr-recovery") return Mode::kLrRecovery;
  if (s == "nrsfm") return Mode::kNrsfm;
  if (s == "oracle") return Mode::kOracle;
  if (s == "synth") return Mode::kSynth;
  if (s == "compare") return Mode::kCompare;
  throw ConfigError("unknown mode '" + s +
                    "' (lr-recovery|nrsfm|oracle|synth|compare)");
}

inline std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kLrRecovery: return "lr-recovery";
    case Mode::kNrsfm: return "nrsfm";
    case Mode::kOracle: return "oracle";
    case Mode::kSynth: return "synth";
    case Mode::kCompare: return "compare";
  }
  return "?";
}

inline Pipeline parse_pipeline(const std::string& s) {
  if (s == "combined") return Pipeline::kCombined;
  if (s == "admm") return Pipeline::kAdmm;
  if (s == "lm") return Pipeline::kLm;
  throw ConfigError("unknown pipeline '" + s + "' (combined|admm|lm)");
}

inline std::string pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::kCombined: return "combined";
    case Pipeline::kAdmm: return "admm";
    case Pipeline::kLm: return "lm";
  }
  return "?";
}

/// All experiment settings. Unset optionals take mode-dependent defaults
/// (see resolve_* in experiment.hpp).
struct ExperimentConfig {
  Mode mode = Mode::kLrRecovery;
  std::string observations;  // empty: generate from the synth keys
  std::string rotations;
  std::string ground_truth;
  std::optional<double> eta;
  /// nuclear | truncated | linear | zero | weight-rule | explicit
  std::optional<std::string> schedule;
  std::optional<double> mu;
  std::optional<Index> free;
  std::vector<double> weights;  // schedule = explicit
  std::optional<Index> p;
  Index K = 2;
  double xi = 5e-3;
  double eps = 1e-8;
  Pipeline pipeline = Pipeline::kCombined;
  std::optional<bool> normalize;
  bool timing = true;  // false: elapsed_s column is 0
  std::uint64_t seed = 1;
  std::string out = "out";
  AdmmConfig admm;
  LmConfig lm;
  SynthSpec synth;
  std::vector<double> oracle_sigma{3.0, 1.0};
  std::vector<double> oracle_weights{1.0, 2.0};
  Index oracle_trials = 1000;
  bool oracle_exhaustive = true;
  Index compare_seeds = 5;
  std::vector<double> compare_etas{0.05, 0.95};

  /// Applies one `key = value` setting.
  void set(const std::string& key, const std::string& value);
  void apply_preset(const std::string& name);
};

namespace detail_cfg {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a real, got '" + v + "'");
  }
}

inline Index to_index(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<Index>(x);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an unsigned integer, got '" +
                      v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& key,
                                   const std::string& v) {
  std::vector<double> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = v.find(',', start);
    const std::string item = trim(v.substr(start, pos - start));
    if (!item.empty()) out.push_back(to_real(key, item));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

}  // namespace detail_cfg

inline void ExperimentConfig::apply_preset(const std::string& name) {
  namespace ps = presets;
  if (name == "recovery-near-perspective") {
    eta = 0.05;
  } else if (name == "recovery-near-affine") {
    eta = 0.95;
  } else if (name == "nrsfm-weight-rule") {
    mode = Mode::kNrsfm;
    K = ps::kNrsfmK;
    eta = ps::kNrsfmEta;
    schedule = "weight-rule";
    xi = ps::kNrsfmXi;
  } else if (name == "nrsfm-nuclear") {
    mode = Mode::kNrsfm;
    K = ps::kNrsfmK;
    eta = ps::kNrsfmEta;
    schedule = "nuclear";
    mu = ps::kNrsfmNuclear;
  } else if (name == "nrsfm-orthographic") {
    mode = Mode::kNrsfm;
    K = ps::kNrsfmK;
    eta = 1.0;
    schedule = "weight-rule";
    xi = ps::kNrsfmXi;
    synth.camera = Camera::kOrthographic;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
}

inline void ExperimentConfig::set(const std::string& key,
                                  const std::string& value) {
  using namespace detail_cfg;
  const std::string& v = value;
  if (key == "preset") apply_preset(v);
  else if (key == "mode") mode = parse_mode(v);
  else if (key == "observations") observations = v;
  else if (key == "rotations") rotations = v;
  else if (key == "ground_truth") ground_truth = v;
  else if (key == "eta") eta = to_real(key, v);
  else if (key == "schedule") schedule = v;
  else if (key == "mu") mu = to_real(key, v);
  else if (key == "free") free = to_index(key, v);
  else if (key == "weights") weights = to_list(key, v);
  else if (key == "p") p = to_index(key, v);
  else if (key == "K") K = to_index(key, v);
  else if (key == "xi") xi = to_real(key, v);
  else if (key == "eps") eps = to_real(key, v);
  else if (key == "pipeline") pipeline = parse_pipeline(v);
  else if (key == "normalize") normalize = to_bool(key, v);
  else if (key == "timing") {
    if (v == "wall") timing = true;
    else if (v == "off") timing = false;
    else throw ConfigError("key 'timing': expected wall|off, got '" + v + "'");
  }
  else if (key == "seed") seed = to_u64(key, v);
  else if (key == "out") out = v;
  else if (key == "eval_frame") synth.eval_frame = to_index(key, v);
  else if (key == "admm.rho") admm.rho = to_real(key, v);
  else if (key == "admm.rho_growth") admm.rho_growth = to_real(key, v);
  else if (key == "admm.rho_max") admm.rho_max = to_real(key, v);
  else if (key == "admm.max_iters") admm.max_iters = to_index(key, v);
  else if (key == "admm.primal_tol") admm.primal_tol = to_real(key, v);
  else if (key == "admm.dual_tol") admm.dual_tol = to_real(key, v);
  else if (key == "admm.stall_window") admm.stall_window = to_index(key, v);
  else if (key == "admm.stall_tol") admm.stall_tol = to_real(key, v);
  else if (key == "lm.lambda0") lm.lambda0 = to_real(key, v);
  else if (key == "lm.alpha") lm.alpha = to_real(key, v);
  else if (key == "lm.max_iters") lm.max_iters = to_index(key, v);
  else if (key == "lm.rel_tol") lm.rel_tol = to_real(key, v);
  else if (key == "lm.max_rejects") lm.max_rejects = to_index(key, v);
  else if (key == "lm.min_gain") lm.min_gain = to_real(key, v);
  else if (key == "synth.frames") synth.frames = to_index(key, v);
  else if (key == "synth.points") synth.points = to_index(key, v);
  else if (key == "synth.noise") synth.noise_std = to_real(key, v);
  else if (key == "synth.missing") synth.missing_fraction = to_real(key, v);
  else if (key == "synth.camera") {
    try {
      synth.camera = parse_camera(v);
    } catch (const ParameterError& e) {
      throw ConfigError(e.what());
    }
  }
  else if (key == "synth.depth_offset") synth.depth_offset = to_real(key, v);
  else if (key == "synth.deformation") synth.deformation = to_real(key, v);
  else if (key == "oracle.sigma") oracle_sigma = to_list(key, v);
  else if (key == "oracle.weights") oracle_weights = to_list(key, v);
  else if (key == "oracle.trials") oracle_trials = to_index(key, v);
  else if (key == "oracle.exhaustive") oracle_exhaustive = to_bool(key, v);
  else if (key == "compare.seeds") compare_seeds = to_index(key, v);
  else if (key == "compare.etas") compare_etas = to_list(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Parses `key = value` lines. A `preset` line is applied where it
/// appears, so later keys override it. Repeated keys are an error.
inline ExperimentConfig parse_config(std::istream& in,
                                     ExperimentConfig cfg = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body =
        detail_cfg::trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = detail_cfg::trim(body.substr(0, eq));
    const std::string value = detail_cfg::trim(body.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh)
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" +
                        key + "' repeats line " + std::to_string(it->second));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path,
                                    ExperimentConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  return parse_config(in, std::move(cfg));
}

}  // namespace wnnsfm::bench
