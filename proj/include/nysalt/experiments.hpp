#pragma once

// Experiment drivers shared by the command-line tool and the acceptance
// suite: training-data generation, per-step-size fits, accuracy sweeps
// against fine references, the large-step stability demonstration, and the
// long-time statistics comparison for the stochastic model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nysalt/datagen.hpp"
#include "nysalt/inference.hpp"
#include "nysalt/integrators.hpp"
#include "nysalt/linear_analysis.hpp"
#include "nysalt/metrics.hpp"
#include "nysalt/models.hpp"

namespace nysalt {

// Total stiff energy I(t) per trajectory.
inline std::vector<std::vector<double>> total_energy_series(const FpuModel& model,
                                                            const TrajectoryEnsemble& ens) {
  std::vector<std::vector<double>> out(ens.num_trajectories());
  for (std::size_t m = 0; m < ens.num_trajectories(); ++m) {
    out[m].reserve(ens.states[m].size());
    for (const auto& s : ens.states[m]) out[m].push_back(model.total_stiff_energy(s));
  }
  return out;
}

// Average over trajectories of the relative RMSE of I(t), test vs reference
// on the same coarse grid. The shared initial point (identical by
// construction) is excluded.
inline double avg_rel_rmse_total_energy(const FpuModel& model,
                                        const TrajectoryEnsemble& reference,
                                        const TrajectoryEnsemble& test) {
  if (reference.num_trajectories() != test.num_trajectories() ||
      reference.num_transitions() != test.num_transitions())
    throw std::invalid_argument("avg_rel_rmse_total_energy: ensembles not aligned");
  std::vector<double> per_traj;
  per_traj.reserve(reference.num_trajectories());
  for (std::size_t m = 0; m < reference.num_trajectories(); ++m) {
    ScalarSeries ref, tst;
    for (std::size_t i = 1; i < reference.states[m].size(); ++i) {
      ref.times.push_back(reference.times[i]);
      ref.values.push_back(model.total_stiff_energy(reference.states[m][i]));
      tst.times.push_back(test.times[i]);
      tst.values.push_back(model.total_stiff_energy(test.states[m][i]));
    }
    per_traj.push_back(relative_rmse(ref, tst));
  }
  return avg_relative_rmse(per_traj);
}

// Scheme run at the coarse step: one "fine" step of size delta per coarse
// sample. Stochastic runs draw fresh noise with the exact coarse-step OU
// variance, which is precisely the inferred-scheme update rule.
inline SchemeSpec coarse_scheme(const NystromParams& theta, double delta,
                                const LangevinParams& lp = {}, bool stochastic = false) {
  SchemeSpec s;
  s.kind = stochastic ? SchemeSpec::Kind::stochastic_nystrom : SchemeSpec::Kind::nystrom;
  s.params = theta;
  s.langevin = lp;
  s.step = delta;
  return s;
}

inline SchemeSpec baoab_scheme(double step, const LangevinParams& lp) {
  SchemeSpec s;
  s.kind = SchemeSpec::Kind::baoab;
  s.langevin = lp;
  s.step = step;
  return s;
}

inline SchemeSpec fine_verlet(double h) {
  SchemeSpec s;
  s.kind = SchemeSpec::Kind::nystrom;
  s.params = kVerlet;
  s.step = h;
  return s;
}

// --- deterministic FPU studies ----------------------------------------------

struct GapFit {
  long gap = 0;
  double delta = 0.0;
  FitResult fit;
};

// Fits theta at each requested gap from one fine training ensemble kept at
// the smallest gap and down-sampled per target (every gap must be a
// multiple of gaps.front() for the reuse to be exact).
inline std::vector<GapFit> fit_per_gap(const FpuModel& model, const SchemeSpec& generator,
                                       const std::vector<long>& gaps, double t_train,
                                       std::size_t n_traj, std::uint64_t seed,
                                       LossMode mode, const FitOptions& opts) {
  if (gaps.empty()) throw std::invalid_argument("fit_per_gap: no gaps");
  const long base = gaps.front();
  const std::size_t n_fine =
      static_cast<std::size_t>(std::llround(t_train / generator.step));
  for (long g : gaps)
    if (g % base != 0 || g <= 0)
      throw std::invalid_argument("fit_per_gap: gaps must be positive multiples of the first");
  InitialSampler ics = fpu_initial_sampler(model, seed);
  const TrajectoryEnsemble base_ens = generate_ensemble(
      model, generator, ics, n_traj, n_fine / static_cast<std::size_t>(base), base, seed,
      opts.threads);
  std::vector<GapFit> out;
  out.reserve(gaps.size());
  for (long g : gaps) {
    const TrajectoryEnsemble ens =
        (g == base) ? base_ens : downsample_ensemble(base_ens, g / base);
    GapFit row;
    row.gap = g;
    row.delta = ens.delta();
    row.fit = estimate(model, ens, mode, opts);
    out.push_back(std::move(row));
  }
  return out;
}

struct AccuracyRow {
  long gap = 0;
  double delta = 0.0;
  NystromParams theta;
  double nysalt_err = 0.0;
  double verlet_err = 0.0;
};

// Accuracy against a fine reference over [0, T_test] for a sweep of gaps:
// for each gap, theta is fitted at that step from training data, then
// NySALT and Verlet run at delta = gap * h from the same initial conditions
// as the reference.
inline std::vector<AccuracyRow> deterministic_accuracy_study(
    const FpuModel& model, double h, const std::vector<long>& gaps, double t_train,
    std::size_t m_train, double t_test, std::size_t m_test, std::uint64_t seed,
    const FitOptions& opts) {
  const std::vector<GapFit> fits =
      fit_per_gap(model, fine_verlet(h), gaps, t_train, m_train, seed,
                  LossMode::deterministic, opts);
  const std::uint64_t test_seed = seed ^ 0x5DEECE66Dull;
  InitialSampler test_ics = fpu_initial_sampler(model, test_seed);
  std::vector<AccuracyRow> rows;
  for (const GapFit& gf : fits) {
    const std::size_t n_coarse =
        static_cast<std::size_t>(std::llround(t_test / gf.delta));
    const TrajectoryEnsemble reference =
        generate_ensemble(model, fine_verlet(h), test_ics, m_test, n_coarse, gf.gap,
                          test_seed, opts.threads);
    const TrajectoryEnsemble nysalt =
        generate_ensemble(model, coarse_scheme(gf.fit.theta, gf.delta), test_ics, m_test,
                          n_coarse, 1, test_seed, opts.threads);
    const TrajectoryEnsemble verlet =
        generate_ensemble(model, coarse_scheme(kVerlet, gf.delta), test_ics, m_test,
                          n_coarse, 1, test_seed, opts.threads);
    AccuracyRow row;
    row.gap = gf.gap;
    row.delta = gf.delta;
    row.theta = gf.fit.theta;
    row.nysalt_err = avg_rel_rmse_total_energy(model, reference, nysalt);
    row.verlet_err = avg_rel_rmse_total_energy(model, reference, verlet);
    rows.push_back(row);
  }
  return rows;
}

struct StabilityDemo {
  NystromParams theta;           // fitted at delta = gap * h
  long verlet_bad_index = -1;    // first non-finite coarse index of the Verlet run
  double verlet_bad_time = -1.0;
  bool nysalt_finite = false;
  double max_rel_energy_drift = 0.0;  // max_t |I(t) - I(0)| / I(0) for NySALT
};

// Large-step run at delta = gap * h (the Verlet linear-stability limit when
// gap * h = 2 / omega): Verlet is expected to blow up almost immediately
// while the fitted scheme stays bounded.
inline StabilityDemo stability_demo(const FpuModel& model, double h, long gap,
                                    double t_train, std::size_t m_train, double t_verlet,
                                    double t_nysalt, std::uint64_t seed,
                                    const FitOptions& opts) {
  const std::vector<GapFit> fits = fit_per_gap(model, fine_verlet(h), {gap}, t_train,
                                               m_train, seed, LossMode::deterministic, opts);
  const double delta = fits.front().delta;
  StabilityDemo demo;
  demo.theta = fits.front().fit.theta;

  const std::uint64_t demo_seed = seed ^ 0xA5A5A5A5ull;
  InitialSampler ics = fpu_initial_sampler(model, demo_seed);
  const std::size_t n_verlet = static_cast<std::size_t>(std::llround(t_verlet / delta));
  const TrajectoryEnsemble verlet = generate_ensemble(
      model, coarse_scheme(kVerlet, delta), ics, 1, n_verlet, 1, demo_seed, 1);
  demo.verlet_bad_index = verlet.first_bad[0];
  if (demo.verlet_bad_index >= 0)
    demo.verlet_bad_time = verlet.times[static_cast<std::size_t>(demo.verlet_bad_index)];

  const std::size_t n_nysalt = static_cast<std::size_t>(std::llround(t_nysalt / delta));
  const TrajectoryEnsemble nysalt = generate_ensemble(
      model, coarse_scheme(demo.theta, delta), ics, 1, n_nysalt, 1, demo_seed, 1);
  demo.nysalt_finite = nysalt.first_bad[0] < 0;
  if (demo.nysalt_finite) {
    const double initial = model.total_stiff_energy(nysalt.states[0][0]);
    for (const auto& s : nysalt.states[0]) {
      const double drift = std::abs(model.total_stiff_energy(s) - initial) / initial;
      demo.max_rel_energy_drift = std::max(demo.max_rel_energy_drift, drift);
    }
  }
  return demo;
}

// --- stochastic FPU machinery -------------------------------------------------

// Stationary initial-condition pool from a single long BAOAB run.
inline std::vector<State> stationary_pool(const FpuModel& model, const LangevinParams& lp,
                                          double total_time, double h, std::uint64_t seed) {
  CounterRng ic_rng(seed, 0, RngPurpose::initial_condition);
  const State start = model.sample_initial(ic_rng, 0);
  return generate_long_run(model, lp, start, total_time, h, seed);
}

inline InitialSampler stationary_initial_sampler(const std::vector<State>& pool,
                                                 std::uint64_t seed) {
  CounterRng rng(seed, 1, RngPurpose::resampling);
  return [pool, rng](std::uint64_t traj) {
    return pool[rng.uniform_index(traj, pool.size())];
  };
}

struct SchemeStatistics {
  ScalarSeries acf;
  Histogram pdf;
};

// ACF of the total stiff energy over lags [0, max_lag] and its pooled
// empirical distribution on 100 bins over [0, 1].
inline SchemeStatistics energy_statistics(const FpuModel& model,
                                          const TrajectoryEnsemble& ens, double max_lag,
                                          std::size_t n_bins = 100, double lo = 0.0,
                                          double hi = 1.0) {
  SchemeStatistics stats;
  const auto series = total_energy_series(model, ens);
  stats.acf = acf(series, max_lag, ens.delta());
  std::vector<double> pooled;
  pooled.reserve(series.size() * series.front().size());
  for (const auto& s : series) pooled.insert(pooled.end(), s.begin(), s.end());
  stats.pdf = empirical_pdf(pooled, n_bins, lo, hi);
  return stats;
}

// --- linear-analysis table -----------------------------------------------------

struct LinearAnalysisRow {
  double b1, beta1, delta, omega_sq, gamma, loss, delta_star;
};

inline LinearAnalysisRow linear_row(const NystromParams& theta, double delta,
                                    double omega_sq, double gamma) {
  return {theta.b1,  theta.beta1,
          delta,     omega_sq,
          gamma,     linear_loss(theta, delta, omega_sq, gamma),
          max_stable_step(theta, omega_sq)};
}

}  // namespace nysalt
