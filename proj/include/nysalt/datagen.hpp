#pragma once

// Trajectory data generation: fine-grid reference runs, down-sampling to
// coarse grids, coarsening of the Brownian increments to the exact OU
// increment over a coarse step, and initial-condition sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "nysalt/integrators.hpp"
#include "nysalt/models.hpp"
#include "nysalt/parallel.hpp"
#include "nysalt/rng.hpp"
#include "nysalt/state.hpp"

namespace nysalt {

struct EnsembleMeta {
  SchemeSpec generator;
  double h = 0.0;       // fine step of the generator
  long gap = 1;         // coarse step = gap * h, gap a positive integer
  std::uint64_t seed = 0;
  std::size_t dim = 0;
};

// M trajectories sampled on the coarse grid t_i = i * gap * h, optionally
// paired with the coarsened noise increments xi_{t_i} over [t_i, t_{i+1}).
struct TrajectoryEnsemble {
  std::vector<double> times;                            // N_t + 1
  std::vector<std::vector<State>> states;               // M x (N_t + 1)
  std::vector<std::vector<std::vector<double>>> noise;  // M x N_t x d
  std::vector<long> first_bad;                          // first non-finite coarse index, -1 if none
  EnsembleMeta meta;

  std::size_t num_trajectories() const { return states.size(); }
  std::size_t num_transitions() const {
    return states.empty() ? 0 : states.front().size() - 1;
  }
  bool stochastic() const { return !noise.empty(); }
  double delta() const { return static_cast<double>(meta.gap) * meta.h; }
};

// Deterministic per-trajectory initial-condition source.
using InitialSampler = std::function<State(std::uint64_t traj_index)>;

inline InitialSampler fpu_initial_sampler(const FpuModel& model, std::uint64_t seed) {
  return [model, seed](std::uint64_t traj) {
    CounterRng rng(seed, traj, RngPurpose::initial_condition);
    return model.sample_initial(rng, 0);
  };
}

inline InitialSampler fixed_initial_sampler(State s) {
  return [s](std::uint64_t) { return s; };
}

// M states drawn uniformly with replacement from a stored long run.
inline std::vector<State> sample_stationary_initial(const std::vector<State>& long_run,
                                                    std::size_t count,
                                                    const CounterRng& rng) {
  if (long_run.empty())
    throw std::invalid_argument("sample_stationary_initial: empty trajectory");
  std::vector<State> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(long_run[rng.uniform_index(i, long_run.size())]);
  return out;
}

inline InitialSampler list_initial_sampler(std::vector<State> states) {
  return [states = std::move(states)](std::uint64_t traj) {
    if (traj >= states.size())
      throw std::invalid_argument("list_initial_sampler: trajectory index out of range");
    return states[traj];
  };
}

namespace detail {

// Advances `s` by one fine step of the generator. `normals` holds the d
// standard normals recorded for this step (ignored by the deterministic
// scheme). BAOAB keeps g(q) across steps through `cached_force`.
template <class Model>
inline void generator_step(State& s, const SchemeSpec& gen, const NystromCoefficients& c,
                           const Model& model, const std::vector<double>& normals,
                           double noise_sd, StepWorkspace& w,
                           std::vector<double>& scaled_noise,
                           std::vector<double>& cached_force) {
  switch (gen.kind) {
    case SchemeSpec::Kind::nystrom:
      nystrom_step(s, c, gen.step, model, w);
      break;
    case SchemeSpec::Kind::stochastic_nystrom:
      for (std::size_t i = 0; i < normals.size(); ++i)
        scaled_noise[i] = noise_sd * normals[i];
      stochastic_nystrom_step(s, c, gen.langevin, gen.step, model, scaled_noise, w);
      break;
    case SchemeSpec::Kind::baoab:
      baoab_step(s, gen.langevin, gen.step, model, normals, w, &cached_force);
      break;
  }
}

}  // namespace detail

template <class Model>
struct FineResult {
  std::vector<State> states;                      // n_steps + 1
  std::vector<std::vector<double>> increments;    // n_steps x d, standard normals R
  long first_bad = -1;
};

// Iterates the chosen stepper from `initial` for n_steps of size spec.step.
// For stochastic generators the scaled Brownian increments
// R_j = (W_{jh} - W_{(j-1)h}) / sqrt(h) are recorded as standard normals;
// the j-th fine step consumes exactly R_j.
template <class Model>
FineResult<Model> generate_fine(const Model& model, const SchemeSpec& spec,
                                const State& initial, std::size_t n_steps,
                                const CounterRng& rng) {
  spec.validate();
  check_dim(model.dim(), initial.dim(), "generate_fine");
  FineResult<Model> out;
  out.states.reserve(n_steps + 1);
  out.states.push_back(initial);
  const bool stochastic = spec.stochastic();
  const NystromCoefficients coeffs =
      (spec.kind == SchemeSpec::Kind::baoab) ? derive_coefficients(kVerlet)
                                             : derive_coefficients(spec.params);
  const double noise_sd = ou_noise_stddev(spec.langevin, spec.step);
  const std::size_t d = model.dim();
  State s = initial;
  StepWorkspace w;
  std::vector<double> normals(d, 0.0), scaled(d, 0.0), cached;
  if (stochastic) out.increments.reserve(n_steps);
  for (std::size_t j = 0; j < n_steps; ++j) {
    if (stochastic) {
      rng.fill_normal(j, normals);
      out.increments.push_back(normals);
    }
    detail::generator_step(s, spec, coeffs, model, normals, noise_sd, w, scaled, cached);
    out.states.push_back(s);
  }
  out.first_bad = first_nonfinite(out.states);
  return out;
}

// Keeps every gap-th state including index 0; gap must divide n_steps.
inline std::vector<State> downsample(const std::vector<State>& fine, long gap) {
  if (gap < 1) throw std::invalid_argument("downsample: gap must be >= 1");
  const std::size_t n_steps = fine.size() - 1;
  if (fine.empty() || n_steps % static_cast<std::size_t>(gap) != 0)
    throw std::invalid_argument("downsample: gap must divide the number of steps");
  std::vector<State> coarse;
  coarse.reserve(n_steps / gap + 1);
  for (std::size_t i = 0; i < fine.size(); i += static_cast<std::size_t>(gap))
    coarse.push_back(fine[i]);
  return coarse;
}

// Exact OU increment over a coarse block, built from the per-fine-step
// standard normals of that block:
//   xi = sigma sqrt((1 - e^{-2 gamma h}) / (2 gamma)) sum_j e^{-gamma (Gap - j) h} R_j.
// The weight e^{-gamma (Gap - j) h} keeps xi pathwise consistent with the
// Brownian path that produced R (the later increments decay least), so the
// same path can drive both a fine reference and the coarse scheme.
// gamma = 0 reduces to sigma sqrt(h) sum_j R_j.
inline std::vector<std::vector<double>> coarsen_noise(
    const std::vector<std::vector<double>>& increments, const LangevinParams& lp,
    double h, long gap) {
  if (gap < 1) throw std::invalid_argument("coarsen_noise: gap must be >= 1");
  if (increments.size() % static_cast<std::size_t>(gap) != 0)
    throw std::invalid_argument("coarsen_noise: gap must divide the number of increments");
  const std::size_t n_blocks = increments.size() / static_cast<std::size_t>(gap);
  const double sd = ou_noise_stddev(lp, h);
  const double decay = std::exp(-lp.gamma * h);
  std::vector<std::vector<double>> xi(n_blocks);
  std::size_t idx = 0;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    std::vector<double> acc(increments[idx].size(), 0.0);
    for (long j = 0; j < gap; ++j, ++idx) {
      const auto& r = increments[idx];
      check_dim(acc.size(), r.size(), "coarsen_noise");
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] = decay * acc[k] + r[k];
    }
    for (double& v : acc) v *= sd;
    xi[b] = std::move(acc);
  }
  return xi;
}

// Streams fine steps and keeps only the coarse grid: states every gap-th
// fine step plus, for stochastic generators, the coarsened increment of
// each block. Trajectories are independent (one counter-based RNG stream
// per trajectory) and the result is bit-identical for any thread count.
template <class Model>
TrajectoryEnsemble generate_ensemble(const Model& model, const SchemeSpec& generator,
                                     const InitialSampler& initial, std::size_t M,
                                     std::size_t n_coarse, long gap, std::uint64_t seed,
                                     unsigned threads = 1) {
  generator.validate();
  if (gap < 1) throw std::invalid_argument("generate_ensemble: gap must be >= 1");
  const bool stochastic = generator.stochastic();
  const std::size_t d = model.dim();
  const double h = generator.step;

  TrajectoryEnsemble ens;
  ens.meta = EnsembleMeta{generator, h, gap, seed, d};
  ens.times.resize(n_coarse + 1);
  for (std::size_t i = 0; i <= n_coarse; ++i)
    ens.times[i] = static_cast<double>(static_cast<long>(i) * gap) * h;
  ens.states.assign(M, {});
  if (stochastic) ens.noise.assign(M, {});
  ens.first_bad.assign(M, -1);

  const NystromCoefficients coeffs =
      (generator.kind == SchemeSpec::Kind::baoab) ? derive_coefficients(kVerlet)
                                                  : derive_coefficients(generator.params);
  const double noise_sd = ou_noise_stddev(generator.langevin, h);
  const double decay = std::exp(-generator.langevin.gamma * h);

  parallel_for(M, threads, [&](std::size_t m) {
    CounterRng rng(seed, m, RngPurpose::path_noise);
    State s = initial(m);
    check_dim(d, s.dim(), "generate_ensemble initial state");
    auto& traj = ens.states[m];
    traj.reserve(n_coarse + 1);
    traj.push_back(s);
    StepWorkspace w;
    std::vector<double> normals(d, 0.0), scaled(d, 0.0), cached, acc(d, 0.0);
    if (stochastic) ens.noise[m].reserve(n_coarse);
    std::uint64_t fine_index = 0;
    for (std::size_t i = 0; i < n_coarse; ++i) {
      if (stochastic) std::fill(acc.begin(), acc.end(), 0.0);
      for (long j = 0; j < gap; ++j, ++fine_index) {
        if (stochastic) {
          rng.fill_normal(fine_index, normals);
          for (std::size_t k = 0; k < d; ++k) acc[k] = decay * acc[k] + normals[k];
        }
        detail::generator_step(s, generator, coeffs, model, normals, noise_sd, w,
                               scaled, cached);
      }
      traj.push_back(s);
      if (stochastic) {
        std::vector<double> xi(d);
        for (std::size_t k = 0; k < d; ++k) xi[k] = noise_sd * acc[k];
        ens.noise[m].push_back(std::move(xi));
      }
    }
    ens.first_bad[m] = first_nonfinite(traj);
  });
  return ens;
}

// Reduces an ensemble to every factor-th coarse state. Noise increments are
// recombined so the result is exactly the ensemble that direct generation
// at gap * factor would have produced from the same Brownian paths.
inline TrajectoryEnsemble downsample_ensemble(const TrajectoryEnsemble& ens, long factor) {
  if (factor < 1) throw std::invalid_argument("downsample_ensemble: factor must be >= 1");
  if (factor == 1) return ens;
  const std::size_t n = ens.num_transitions();
  if (n % static_cast<std::size_t>(factor) != 0)
    throw std::invalid_argument("downsample_ensemble: factor must divide the grid");
  TrajectoryEnsemble out;
  out.meta = ens.meta;
  out.meta.gap = ens.meta.gap * factor;
  const std::size_t n_out = n / static_cast<std::size_t>(factor);
  out.times.resize(n_out + 1);
  for (std::size_t i = 0; i <= n_out; ++i)
    out.times[i] = static_cast<double>(static_cast<long>(i) * out.meta.gap) * out.meta.h;
  out.states.resize(ens.states.size());
  out.first_bad.assign(ens.states.size(), -1);
  if (ens.stochastic()) out.noise.resize(ens.noise.size());
  const double delta = ens.delta();
  const double decay = std::exp(-ens.meta.generator.langevin.gamma * delta);
  for (std::size_t m = 0; m < ens.states.size(); ++m) {
    auto& traj = out.states[m];
    traj.reserve(n_out + 1);
    for (std::size_t i = 0; i < ens.states[m].size(); i += static_cast<std::size_t>(factor))
      traj.push_back(ens.states[m][i]);
    if (ens.stochastic()) {
      auto& xi_out = out.noise[m];
      xi_out.reserve(n_out);
      const std::size_t d = ens.meta.dim;
      for (std::size_t b = 0; b < n_out; ++b) {
        std::vector<double> acc(d, 0.0);
        for (long j = 0; j < factor; ++j) {
          const auto& xi = ens.noise[m][b * factor + j];
          for (std::size_t k = 0; k < d; ++k) acc[k] = decay * acc[k] + xi[k];
        }
        xi_out.push_back(std::move(acc));
      }
    }
    out.first_bad[m] = first_nonfinite(traj);
  }
  return out;
}

// Single long equilibrium run used as the stationary initial-condition pool.
// Generated with BAOAB; the first burn_in fraction is discarded and states
// are recorded every record_stride steps.
template <class Model>
std::vector<State> generate_long_run(const Model& model, const LangevinParams& lp,
                                     const State& initial, double total_time, double h,
                                     std::uint64_t seed, double burn_in = 0.1,
                                     std::size_t record_stride = 100) {
  const std::size_t n_steps = static_cast<std::size_t>(std::llround(total_time / h));
  const std::size_t skip = static_cast<std::size_t>(burn_in * static_cast<double>(n_steps));
  const std::size_t d = model.dim();
  CounterRng rng(seed, 0, RngPurpose::path_noise);
  State s = initial;
  StepWorkspace w;
  std::vector<double> normals(d, 0.0), cached;
  std::vector<State> recorded;
  recorded.reserve((n_steps - skip) / record_stride + 1);
  for (std::size_t j = 0; j < n_steps; ++j) {
    rng.fill_normal(j, normals);
    baoab_step(s, lp, h, model, normals, w, &cached);
    if (j >= skip && (j - skip) % record_stride == 0) recorded.push_back(s);
  }
  return recorded;
}

}  // namespace nysalt
