#pragma once

// On-disk formats: CSV trajectories (`t, q1..qd, p1..pd[, xi1..xid]`, one
// row per coarse time), JSON ensemble manifests, and FitResult JSON.
// Doubles are written with %.17g so re-reading reproduces them bit for bit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nysalt/datagen.hpp"
#include "nysalt/inference.hpp"
#include "nysalt/state.hpp"

namespace nysalt {

using json = nlohmann::json;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// FNV-1a over the canonical (sorted-key) JSON dump; stable across runs.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

inline std::string json_hash(const json& j) { return fnv1a_hex(j.dump()); }

// --- trajectory CSV ---------------------------------------------------------

// Noise rows describe the increment over [t_i, t_{i+1}); the final row has
// no following interval and carries zeros in the xi columns.
inline void write_trajectory_csv(const std::string& path, const std::vector<double>& times,
                                 const std::vector<State>& states,
                                 const std::vector<std::vector<double>>* noise = nullptr) {
  if (times.size() != states.size())
    throw std::invalid_argument("write_trajectory_csv: times/states mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trajectory_csv: cannot open " + path);
  const std::size_t d = states.empty() ? 0 : states.front().dim();
  out << "t";
  for (std::size_t k = 1; k <= d; ++k) out << ",q" << k;
  for (std::size_t k = 1; k <= d; ++k) out << ",p" << k;
  if (noise)
    for (std::size_t k = 1; k <= d; ++k) out << ",xi" << k;
  out << "\n";
  for (std::size_t i = 0; i < states.size(); ++i) {
    out << format_double(times[i]);
    for (double v : states[i].q) out << ',' << format_double(v);
    for (double v : states[i].p) out << ',' << format_double(v);
    if (noise) {
      if (i < noise->size())
        for (double v : (*noise)[i]) out << ',' << format_double(v);
      else
        for (std::size_t k = 0; k < d; ++k) out << ",0";
    }
    out << "\n";
  }
}

struct TrajectoryFile {
  std::vector<double> times;
  std::vector<State> states;
  std::vector<std::vector<double>> noise;  // empty when the file has no xi columns
};

inline TrajectoryFile read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_trajectory_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_trajectory_csv: empty file " + path);
  std::size_t columns = 1;
  for (char c : line) columns += (c == ',');
  const bool has_noise = line.find(",xi1") != std::string::npos;
  const std::size_t d = has_noise ? (columns - 1) / 3 : (columns - 1) / 2;
  if (columns != (has_noise ? 1 + 3 * d : 1 + 2 * d))
    throw std::runtime_error("read_trajectory_csv: unexpected column count in " + path);
  TrajectoryFile tf;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<double> vals;
    vals.reserve(columns);
    while (std::getline(row, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
    if (vals.size() != columns)
      throw std::runtime_error("read_trajectory_csv: ragged row in " + path);
    tf.times.push_back(vals[0]);
    State s(std::vector<double>(vals.begin() + 1, vals.begin() + 1 + d),
            std::vector<double>(vals.begin() + 1 + d, vals.begin() + 1 + 2 * d));
    tf.states.push_back(std::move(s));
    if (has_noise)
      tf.noise.emplace_back(vals.begin() + 1 + 2 * d, vals.begin() + 1 + 3 * d);
  }
  if (has_noise && !tf.noise.empty()) tf.noise.pop_back();  // last row carries no increment
  return tf;
}

// --- ensemble directory ------------------------------------------------------

inline json scheme_to_json(const SchemeSpec& s) {
  json j;
  switch (s.kind) {
    case SchemeSpec::Kind::nystrom: j["kind"] = "nystrom"; break;
    case SchemeSpec::Kind::stochastic_nystrom: j["kind"] = "stochastic-nystrom"; break;
    case SchemeSpec::Kind::baoab: j["kind"] = "baoab"; break;
  }
  j["b1"] = s.params.b1;
  j["beta1"] = s.params.beta1;
  j["gamma"] = s.langevin.gamma;
  j["sigma"] = s.langevin.sigma;
  j["step"] = s.step;
  return j;
}

inline SchemeSpec scheme_from_json(const json& j) {
  SchemeSpec s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "nystrom")
    s.kind = SchemeSpec::Kind::nystrom;
  else if (kind == "stochastic-nystrom")
    s.kind = SchemeSpec::Kind::stochastic_nystrom;
  else if (kind == "baoab")
    s.kind = SchemeSpec::Kind::baoab;
  else
    throw std::invalid_argument("unknown scheme kind: " + kind);
  s.params = {j.at("b1").get<double>(), j.at("beta1").get<double>()};
  s.langevin = LangevinParams(j.at("gamma").get<double>(), j.at("sigma").get<double>());
  s.step = j.at("step").get<double>();
  return s;
}

inline std::string trajectory_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "traj_%05zu.csv", index);
  return buf;
}

// Writes one CSV per trajectory plus manifest.json describing the run.
inline void write_ensemble(const std::string& dir, const TrajectoryEnsemble& ens,
                           json manifest_extra = json::object()) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const bool stochastic = ens.stochastic();
  for (std::size_t m = 0; m < ens.num_trajectories(); ++m)
    write_trajectory_csv(dir + "/" + trajectory_filename(m), ens.times, ens.states[m],
                         stochastic ? &ens.noise[m] : nullptr);
  json manifest = manifest_extra;
  manifest["format"] = "nysalt-ensemble-v1";
  manifest["num_trajectories"] = ens.num_trajectories();
  manifest["num_transitions"] = ens.num_transitions();
  manifest["h"] = ens.meta.h;
  manifest["gap"] = ens.meta.gap;
  manifest["delta"] = ens.delta();
  manifest["seed"] = ens.meta.seed;
  manifest["dim"] = ens.meta.dim;
  manifest["scheme"] = scheme_to_json(ens.meta.generator);
  manifest["stochastic"] = stochastic;
  std::ofstream out(dir + "/manifest.json");
  if (!out) throw std::runtime_error("write_ensemble: cannot open manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

inline TrajectoryEnsemble read_ensemble(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw std::runtime_error("read_ensemble: no manifest.json in " + dir);
  json manifest = json::parse(in);
  TrajectoryEnsemble ens;
  ens.meta.h = manifest.at("h").get<double>();
  ens.meta.gap = manifest.at("gap").get<long>();
  ens.meta.seed = manifest.at("seed").get<std::uint64_t>();
  ens.meta.dim = manifest.at("dim").get<std::size_t>();
  ens.meta.generator = scheme_from_json(manifest.at("scheme"));
  const std::size_t m_count = manifest.at("num_trajectories").get<std::size_t>();
  const bool stochastic = manifest.at("stochastic").get<bool>();
  for (std::size_t m = 0; m < m_count; ++m) {
    TrajectoryFile tf = read_trajectory_csv(dir + "/" + trajectory_filename(m));
    if (m == 0) ens.times = tf.times;
    ens.states.push_back(std::move(tf.states));
    if (stochastic) ens.noise.push_back(std::move(tf.noise));
    ens.first_bad.push_back(first_nonfinite(ens.states.back()));
  }
  return ens;
}

// --- fit results -------------------------------------------------------------

inline json fit_to_json(const FitResult& fit, const std::string& data_hash = "") {
  json j;
  j["theta"] = {{"b1", fit.theta.b1}, {"beta1", fit.theta.beta1}};
  j["loss"] = fit.loss;
  j["iterations"] = fit.iterations;
  j["gradient_norm"] = fit.gradient_norm;
  j["converged"] = fit.converged;
  json starts = json::array();
  for (const auto& s : fit.starts) starts.push_back({{"b1", s.b1}, {"beta1", s.beta1}});
  j["optimizer"] = {{"method", "projected-bfgs-multistart"},
                    {"pg_tol", fit.pg_tol},
                    {"max_iterations", fit.max_iterations},
                    {"starts", starts}};
  if (!data_hash.empty()) j["data_manifest_hash"] = data_hash;
  return j;
}

inline FitResult fit_from_json(const json& j) {
  FitResult fit;
  fit.theta = {j.at("theta").at("b1").get<double>(), j.at("theta").at("beta1").get<double>()};
  fit.loss = j.at("loss").get<double>();
  fit.iterations = j.at("iterations").get<int>();
  fit.gradient_norm = j.at("gradient_norm").get<double>();
  fit.converged = j.at("converged").get<bool>();
  return fit;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_json_file: cannot open " + path);
  out << j.dump(2) << "\n";
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_json_file: cannot open " + path);
  return json::parse(in);
}

// CSV writer for aligned columns of doubles.
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
}

}  // namespace nysalt
