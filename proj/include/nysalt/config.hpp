#pragma once

// Declarative experiment configuration: one JSON document drives every
// subcommand. Named presets carry the benchmark defaults (m = 3, omega = 50,
// h = 1e-4, gamma = 0.01, sigma = 0.05).

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nysalt/integrators.hpp"
#include "nysalt/io.hpp"
#include "nysalt/models.hpp"

namespace nysalt {

struct ExperimentConfig {
  // model
  std::string model_type = "fpu";  // "fpu" | "linear"
  int fpu_m = 3;
  double fpu_omega = 50.0;
  double linear_omega_sq = 2500.0;

  // dynamics mode
  std::string mode = "deterministic";  // "deterministic" | "stochastic"
  double gamma = 0.01;
  double sigma = 0.05;

  // data generation
  std::string generator = "nystrom";  // "nystrom" | "stochastic-nystrom" | "baoab"
  double generator_b1 = 0.5;
  double generator_beta1 = 0.5;
  double h = 1e-4;
  long gap = 200;
  std::vector<long> gap_list;  // optional sweep for analyze/infer
  double t_train = 0.5;
  double t_test = 0.5;
  std::size_t num_trajectories = 100;
  std::uint64_t seed = 1;

  // initial conditions: "nearly-harmonic" (stiff-spring sampling) or
  // "stationary" (uniform draws from one long equilibrium run)
  std::string initial = "nearly-harmonic";
  double long_run_time = 2500.0;
  double long_run_h = 1e-3;

  // simulation parameters (cmd_simulate)
  double theta_b1 = 0.5;
  double theta_beta1 = 0.5;

  std::string out_dir = "out";
  unsigned threads = 1;

  bool stochastic() const { return mode == "stochastic"; }
  LangevinParams langevin() const {
    return stochastic() ? LangevinParams(gamma, sigma) : LangevinParams(0.0, 0.0);
  }
  double delta() const { return static_cast<double>(gap) * h; }

  void validate() const {
    if (model_type != "fpu" && model_type != "linear")
      throw std::invalid_argument("config: model must be 'fpu' or 'linear'");
    if (mode != "deterministic" && mode != "stochastic")
      throw std::invalid_argument("config: mode must be 'deterministic' or 'stochastic'");
    if (!(h > 0.0)) throw std::invalid_argument("config: h must be > 0");
    if (gap < 1) throw std::invalid_argument("config: gap must be a positive integer");
    for (long g : gap_list)
      if (g < 1) throw std::invalid_argument("config: gap_list entries must be >= 1");
    if (num_trajectories < 1)
      throw std::invalid_argument("config: num_trajectories must be >= 1");
    if (!(t_train > 0.0) || !(t_test > 0.0))
      throw std::invalid_argument("config: training/test horizons must be > 0");
    if (initial != "nearly-harmonic" && initial != "stationary")
      throw std::invalid_argument("config: initial must be 'nearly-harmonic' or 'stationary'");
    if (generator != "nystrom" && generator != "stochastic-nystrom" && generator != "baoab")
      throw std::invalid_argument("config: unknown generator '" + generator + "'");
  }
};

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = {{"type", c.model_type},
                {"m", c.fpu_m},
                {"omega", c.fpu_omega},
                {"Omega", c.linear_omega_sq}};
  j["mode"] = c.mode;
  j["langevin"] = {{"gamma", c.gamma}, {"sigma", c.sigma}};
  j["data"] = {{"generator", c.generator},
               {"generator_b1", c.generator_b1},
               {"generator_beta1", c.generator_beta1},
               {"h", c.h},
               {"gap", c.gap},
               {"gap_list", c.gap_list},
               {"t_train", c.t_train},
               {"t_test", c.t_test},
               {"num_trajectories", c.num_trajectories},
               {"initial", c.initial},
               {"long_run_time", c.long_run_time},
               {"long_run_h", c.long_run_h}};
  j["theta"] = {{"b1", c.theta_b1}, {"beta1", c.theta_beta1}};
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["threads"] = c.threads;
  return j;
}

template <class T>
void maybe_get(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    maybe_get(m, "type", c.model_type);
    maybe_get(m, "m", c.fpu_m);
    maybe_get(m, "omega", c.fpu_omega);
    maybe_get(m, "Omega", c.linear_omega_sq);
  }
  maybe_get(j, "mode", c.mode);
  if (j.contains("langevin")) {
    maybe_get(j.at("langevin"), "gamma", c.gamma);
    maybe_get(j.at("langevin"), "sigma", c.sigma);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    maybe_get(d, "generator", c.generator);
    maybe_get(d, "generator_b1", c.generator_b1);
    maybe_get(d, "generator_beta1", c.generator_beta1);
    maybe_get(d, "h", c.h);
    maybe_get(d, "gap", c.gap);
    maybe_get(d, "gap_list", c.gap_list);
    maybe_get(d, "t_train", c.t_train);
    maybe_get(d, "t_test", c.t_test);
    maybe_get(d, "num_trajectories", c.num_trajectories);
    maybe_get(d, "initial", c.initial);
    maybe_get(d, "long_run_time", c.long_run_time);
    maybe_get(d, "long_run_h", c.long_run_h);
  }
  if (j.contains("theta")) {
    maybe_get(j.at("theta"), "b1", c.theta_b1);
    maybe_get(j.at("theta"), "beta1", c.theta_beta1);
  }
  maybe_get(j, "seed", c.seed);
  maybe_get(j, "out_dir", c.out_dir);
  maybe_get(j, "threads", c.threads);
  return c;
}

// Benchmark presets.
inline ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  if (name == "fpu-det") {
    // deterministic FPU defaults: Verlet-generated training data at h = 1e-4
    c.model_type = "fpu";
    c.mode = "deterministic";
    c.generator = "nystrom";
    c.h = 1e-4;
    c.gap = 200;
    c.t_train = 0.5;
    c.t_test = 0.5;
    c.num_trajectories = 100;
  } else if (name == "fpu-langevin") {
    c.model_type = "fpu";
    c.mode = "stochastic";
    c.generator = "baoab";
    c.gamma = 0.01;
    c.sigma = 0.05;
    c.h = 1e-4;
    c.gap = 200;
    c.t_train = 1.0;
    c.t_test = 1.0;
    c.num_trajectories = 512;
    c.initial = "stationary";
  } else if (name == "linear") {
    c.model_type = "linear";
    c.mode = "deterministic";
    c.linear_omega_sq = 2500.0;
    c.gamma = 0.0;
    c.h = 1e-4;
    c.gap = 200;  // delta = 0.02
  } else {
    throw std::invalid_argument("unknown preset '" + name +
                                "' (available: fpu-det, fpu-langevin, linear)");
  }
  return c;
}

}  // namespace nysalt
