#pragma once

// Subcommand implementations behind the command-line tool. Each command is
// a pure function of the configuration plus explicit inputs, writes plain
// CSV/JSON under the output directory, and returns a process exit code:
// 0 success, 2 configuration error, 3 fatal numerical divergence.

#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "nysalt/config.hpp"
#include "nysalt/experiments.hpp"
#include "nysalt/io.hpp"
#include "nysalt/version.hpp"

namespace nysalt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDivergence = 3;

namespace detail {

inline json run_manifest(const ExperimentConfig& c) {
  json config = config_to_json(c);
  json manifest;
  manifest["config"] = config;
  manifest["config_hash"] = json_hash(config);
  manifest["code_version"] = kVersion;
  manifest["seed"] = c.seed;
  return manifest;
}

inline SchemeSpec generator_from_config(const ExperimentConfig& c) {
  SchemeSpec s;
  if (c.generator == "nystrom")
    s.kind = SchemeSpec::Kind::nystrom;
  else if (c.generator == "stochastic-nystrom")
    s.kind = SchemeSpec::Kind::stochastic_nystrom;
  else
    s.kind = SchemeSpec::Kind::baoab;
  s.params = {c.generator_b1, c.generator_beta1};
  s.langevin = c.langevin();
  s.step = c.h;
  if (c.stochastic() && s.kind == SchemeSpec::Kind::nystrom)
    throw std::invalid_argument("config: stochastic mode needs a stochastic generator");
  if (!c.stochastic() && s.kind != SchemeSpec::Kind::nystrom)
    throw std::invalid_argument("config: deterministic mode needs the nystrom generator");
  return s;
}

inline InitialSampler initial_sampler_from_config(const ExperimentConfig& c,
                                                  const FpuModel& model) {
  if (c.initial == "stationary") {
    const auto pool =
        stationary_pool(model, c.langevin(), c.long_run_time, c.long_run_h, c.seed);
    return stationary_initial_sampler(pool, c.seed);
  }
  return fpu_initial_sampler(model, c.seed);
}

}  // namespace detail

// generate: write an ensemble of coarse-grid training/test trajectories.
inline int cmd_generate(const ExperimentConfig& c) {
  c.validate();
  if (c.model_type != "fpu") {
    std::cerr << "generate: only the fpu model produces trajectory ensembles\n";
    return kExitConfigError;
  }
  const FpuModel model(c.fpu_m, c.fpu_omega);
  const SchemeSpec generator = detail::generator_from_config(c);
  const std::size_t n_fine = static_cast<std::size_t>(std::llround(c.t_train / c.h));
  if (n_fine % static_cast<std::size_t>(c.gap) != 0) {
    std::cerr << "generate: gap must divide t_train / h = " << n_fine << "\n";
    return kExitConfigError;
  }
  const InitialSampler ics = detail::initial_sampler_from_config(c, model);
  const TrajectoryEnsemble ens =
      generate_ensemble(model, generator, ics, c.num_trajectories,
                        n_fine / static_cast<std::size_t>(c.gap), c.gap, c.seed, c.threads);
  write_ensemble(c.out_dir, ens, detail::run_manifest(c));
  std::cout << "wrote " << ens.num_trajectories() << " trajectories ("
            << ens.num_transitions() << " coarse steps, delta = "
            << format_double(ens.delta()) << ") to " << c.out_dir << "\n";
  return kExitOk;
}

// infer: fit (b1, beta1) from a stored ensemble.
inline int cmd_infer(const ExperimentConfig& c, const std::string& data_dir) {
  c.validate();
  if (c.model_type != "fpu") {
    std::cerr << "infer: trajectory inference is defined for the fpu model\n";
    return kExitConfigError;
  }
  const FpuModel model(c.fpu_m, c.fpu_omega);
  TrajectoryEnsemble ens;
  try {
    ens = read_ensemble(data_dir);
  } catch (const std::exception& e) {
    std::cerr << "infer: " << e.what() << "\n";
    return kExitConfigError;
  }
  const LossMode mode = c.stochastic() ? LossMode::stochastic : LossMode::deterministic;
  if (mode == LossMode::stochastic && !ens.stochastic()) {
    std::cerr << "infer: stochastic mode but the ensemble carries no noise columns\n";
    return kExitConfigError;
  }
  for (long bad : ens.first_bad)
    if (bad >= 0) {
      std::cerr << "infer: non-finite state in training data (coarse index " << bad << ")\n";
      return kExitDivergence;
    }
  FitOptions opts;
  opts.threads = c.threads;
  const FitResult fit = estimate(model, ens, mode, opts);
  std::filesystem::create_directories(c.out_dir);
  const json manifest = read_json_file(data_dir + "/manifest.json");
  json out = fit_to_json(fit, json_hash(manifest));
  out["run"] = detail::run_manifest(c);
  write_json_file(c.out_dir + "/fit.json", out);
  std::cout << "fitted b1 = " << format_double(fit.theta.b1)
            << ", beta1 = " << format_double(fit.theta.beta1)
            << " (loss " << format_double(fit.loss) << ", "
            << (fit.converged ? "converged" : "NOT converged") << ")\n";
  return kExitOk;
}

// simulate: run the coarse-step scheme and write trajectory + stiff-energy CSV.
inline int cmd_simulate(const ExperimentConfig& c, const NystromParams& theta) {
  c.validate();
  if (c.model_type != "fpu") {
    std::cerr << "simulate: defined for the fpu model\n";
    return kExitConfigError;
  }
  const FpuModel model(c.fpu_m, c.fpu_omega);
  const double delta = c.delta();
  const std::size_t n_coarse = static_cast<std::size_t>(std::llround(c.t_test / delta));
  const InitialSampler ics = detail::initial_sampler_from_config(c, model);
  const SchemeSpec scheme = coarse_scheme(theta, delta, c.langevin(), c.stochastic());
  const TrajectoryEnsemble ens = generate_ensemble(model, scheme, ics, c.num_trajectories,
                                                   n_coarse, 1, c.seed, c.threads);
  std::filesystem::create_directories(c.out_dir);
  write_ensemble(c.out_dir, ens, detail::run_manifest(c));
  // per-trajectory stiff-energy decomposition of the first trajectory
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < ens.states[0].size(); ++i) {
    const EnergyDecomposition e = model.stiff_energies(ens.states[0][i]);
    std::vector<double> row = {ens.times[i]};
    row.insert(row.end(), e.per_spring.begin(), e.per_spring.end());
    row.push_back(e.total);
    rows.push_back(std::move(row));
  }
  std::vector<std::string> header = {"t"};
  for (int j = 1; j <= c.fpu_m; ++j) header.push_back("I" + std::to_string(j));
  header.push_back("I");
  write_csv(c.out_dir + "/energies.csv", header, rows);
  bool diverged = false;
  for (std::size_t m = 0; m < ens.num_trajectories(); ++m)
    if (ens.first_bad[m] >= 0) {
      diverged = true;
      std::cout << "trajectory " << m << " diverged at coarse step " << ens.first_bad[m]
                << " (t = " << format_double(ens.times[static_cast<std::size_t>(
                                 ens.first_bad[m])])
                << ")\n";
    }
  if (!diverged) std::cout << "all " << ens.num_trajectories() << " trajectories finite\n";
  return kExitOk;
}

// analyze: compare a test ensemble against a reference on the same grid.
inline int cmd_analyze(const ExperimentConfig& c, const std::string& reference_dir,
                       const std::string& test_dir) {
  c.validate();
  if (c.model_type != "fpu") {
    std::cerr << "analyze: defined for the fpu model\n";
    return kExitConfigError;
  }
  const FpuModel model(c.fpu_m, c.fpu_omega);
  TrajectoryEnsemble reference, test;
  try {
    reference = read_ensemble(reference_dir);
    test = read_ensemble(test_dir);
  } catch (const std::exception& e) {
    std::cerr << "analyze: " << e.what() << "\n";
    return kExitConfigError;
  }
  for (const auto& ens : {std::cref(reference), std::cref(test)})
    for (long bad : ens.get().first_bad)
      if (bad >= 0) {
        std::cerr << "analyze: non-finite states in input (coarse index " << bad << ")\n";
        return kExitDivergence;
      }
  if (reference.num_trajectories() != test.num_trajectories() ||
      reference.num_transitions() != test.num_transitions()) {
    std::cerr << "analyze: ensembles are not aligned\n";
    return kExitConfigError;
  }
  std::filesystem::create_directories(c.out_dir);

  json summary;
  summary["run"] = detail::run_manifest(c);
  const double delta = reference.delta();

  // relative RMSE of total stiff energy
  std::vector<std::vector<double>> rmse_rows;
  std::vector<double> per_traj;
  for (std::size_t m = 0; m < reference.num_trajectories(); ++m) {
    ScalarSeries ref, tst;
    for (std::size_t i = 1; i < reference.states[m].size(); ++i) {
      ref.times.push_back(reference.times[i]);
      ref.values.push_back(model.total_stiff_energy(reference.states[m][i]));
      tst.times.push_back(test.times[i]);
      tst.values.push_back(model.total_stiff_energy(test.states[m][i]));
    }
    per_traj.push_back(relative_rmse(ref, tst));
    rmse_rows.push_back({static_cast<double>(m), per_traj.back()});
  }
  write_csv(c.out_dir + "/rel_rmse.csv", {"trajectory", "rel_rmse"}, rmse_rows);
  summary["avg_rel_rmse_I"] = avg_relative_rmse(per_traj);

  // L1 energy-transition and phase-angle errors, averaged over trajectories
  {
    std::vector<std::vector<double>> rows;
    const std::size_t n = reference.states[0].size();
    for (std::size_t i = 0; i < n; ++i) {
      double e_sum = 0.0, a_sum = 0.0;
      for (std::size_t m = 0; m < reference.num_trajectories(); ++m) {
        const auto er = model.stiff_energies(reference.states[m][i]);
        const auto et = model.stiff_energies(test.states[m][i]);
        double l1 = 0.0;
        for (std::size_t j = 0; j < er.per_spring.size(); ++j)
          l1 += std::abs(et.per_spring[j] - er.per_spring[j]);
        e_sum += l1 * delta / er.total;
        if (c.fpu_m == 3) {
          const PhaseAngles ar = phase_angles(er), at = phase_angles(et);
          a_sum += (std::abs(at.theta - ar.theta) + std::abs(at.phi - ar.phi)) * delta;
        }
      }
      const double inv_m = 1.0 / static_cast<double>(reference.num_trajectories());
      rows.push_back({reference.times[i], e_sum * inv_m, a_sum * inv_m});
    }
    write_csv(c.out_dir + "/l1_errors.csv", {"t", "energy_l1", "angle_l1"}, rows);
  }

  // ACF and PDF of total stiff energy
  const double max_lag = std::min(1.0, reference.times.back());
  const SchemeStatistics ref_stats = energy_statistics(model, reference, max_lag);
  const SchemeStatistics test_stats = energy_statistics(model, test, max_lag);
  {
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 0; k < ref_stats.acf.times.size(); ++k)
      rows.push_back(
          {ref_stats.acf.times[k], ref_stats.acf.values[k], test_stats.acf.values[k]});
    write_csv(c.out_dir + "/acf.csv", {"tau", "acf_reference", "acf_test"}, rows);
    const auto centers = ref_stats.pdf.bin_centers();
    std::vector<std::vector<double>> pdf_rows;
    for (std::size_t b = 0; b < centers.size(); ++b)
      pdf_rows.push_back({centers[b], ref_stats.pdf.masses[b], test_stats.pdf.masses[b]});
    write_csv(c.out_dir + "/pdf.csv", {"bin_center", "mass_reference", "mass_test"},
              pdf_rows);
  }
  summary["acf_rmse"] = series_rmse(ref_stats.acf, test_stats.acf);
  summary["pdf_tvd"] = tvd(ref_stats.pdf, test_stats.pdf);

  // optional gap sweep: one summary row per requested down-sampling
  if (!c.gap_list.empty()) {
    std::vector<std::vector<double>> rows;
    for (long g : c.gap_list) {
      if (g % reference.meta.gap != 0) {
        std::cerr << "analyze: sweep gap " << g << " is not a multiple of the data gap\n";
        return kExitConfigError;
      }
      const long factor = g / reference.meta.gap;
      const TrajectoryEnsemble r = downsample_ensemble(reference, factor);
      const TrajectoryEnsemble t = downsample_ensemble(test, factor);
      rows.push_back({static_cast<double>(g), r.delta(),
                      avg_rel_rmse_total_energy(model, r, t)});
    }
    write_csv(c.out_dir + "/gap_sweep.csv", {"gap", "delta", "avg_rel_rmse_I"}, rows);
  }

  write_json_file(c.out_dir + "/metrics.json", summary);
  std::cout << "avg rel RMSE of I: " << format_double(summary["avg_rel_rmse_I"].get<double>())
            << ", ACF RMSE: " << format_double(summary["acf_rmse"].get<double>())
            << ", PDF TVD: " << format_double(summary["pdf_tvd"].get<double>()) << "\n";
  return kExitOk;
}

// linear: closed-form analysis table for the 1-D linear system.
inline int cmd_linear(const ExperimentConfig& c) {
  c.validate();
  const double omega_sq =
      (c.model_type == "linear") ? c.linear_omega_sq : c.fpu_omega * c.fpu_omega;
  const double gamma = c.stochastic() ? c.gamma : 0.0;
  const double delta = c.delta();
  std::filesystem::create_directories(c.out_dir);

  const NystromParams opt = optimal_linear_params(delta, omega_sq, gamma);
  std::vector<std::vector<double>> rows;
  auto push_row = [&rows](const LinearAnalysisRow& r) {
    rows.push_back({r.b1, r.beta1, r.delta, r.omega_sq, r.gamma, r.loss, r.delta_star});
  };
  push_row(linear_row(opt, delta, omega_sq, gamma));
  push_row(linear_row(kVerlet, delta, omega_sq, gamma));
  if (gamma > 0.0)
    for (double scale : {0.0, 0.5, 2.0, 4.0}) {
      const double g = gamma * scale;
      push_row(linear_row(optimal_linear_params(delta, omega_sq, g), delta, omega_sq, g));
    }
  write_csv(c.out_dir + "/linear.csv",
            {"b1", "beta1", "delta", "Omega", "gamma", "loss", "delta_star"}, rows);

  json out;
  out["run"] = detail::run_manifest(c);
  out["optimal"] = {{"b1", opt.b1}, {"beta1", opt.beta1}};
  out["delta_star_optimal"] = max_stable_step(opt, omega_sq);
  out["delta_star_verlet"] = max_stable_step(kVerlet, omega_sq);
  out["f_leading_minimizer"] = [] {
    const NystromParams f_min = f_leading_minimizer();
    return json{{"b1", f_min.b1}, {"beta1", f_min.beta1}};
  }();
  write_json_file(c.out_dir + "/linear.json", out);
  std::cout << "optimal (b1, beta1) = (" << format_double(opt.b1) << ", "
            << format_double(opt.beta1) << "), delta* = "
            << format_double(out["delta_star_optimal"].get<double>()) << "\n";
  return kExitOk;
}

}  // namespace nysalt
