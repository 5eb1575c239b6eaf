#pragma once

// Evaluation statistics for the benchmark studies: relative RMSE of the
// stiff energy, L1 energy-transition and phase-angle errors, the ensemble
// autocovariance function, empirical distributions, and total variation
// distance. All reductions are permutation-invariant over trajectories.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "nysalt/models.hpp"

namespace nysalt {

struct ScalarSeries {
  std::vector<double> times;
  std::vector<double> values;

  void validate() const {
    if (times.size() != values.size())
      throw std::invalid_argument("ScalarSeries: times/values length mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1]))
        throw std::invalid_argument("ScalarSeries: times must be strictly increasing");
  }
};

inline void check_aligned(const ScalarSeries& a, const ScalarSeries& b) {
  a.validate();
  b.validate();
  if (a.times.size() != b.times.size())
    throw std::invalid_argument("series must be aligned on the same grid");
}

// sqrt( (1/N) sum_i ((ref_i - test_i) / ref_i)^2 ). A zero reference value
// makes the ratio undefined and is reported with its index.
inline double relative_rmse(const ScalarSeries& reference, const ScalarSeries& test) {
  check_aligned(reference, test);
  double sum = 0.0;
  const std::size_t n = reference.values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double ref = reference.values[i];
    if (ref == 0.0)
      throw std::invalid_argument("relative_rmse: zero reference value at index " +
                                  std::to_string(i));
    const double r = (ref - test.values[i]) / ref;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

inline double avg_relative_rmse(const std::vector<double>& per_trajectory) {
  if (per_trajectory.empty())
    throw std::invalid_argument("avg_relative_rmse: empty list");
  double sum = 0.0;
  for (double v : per_trajectory) sum += v;
  return sum / static_cast<double>(per_trajectory.size());
}

// Pointwise L1 error of the per-spring energies, normalized by the
// reference total and scaled by the coarse step:
//   Err(t_i) = delta / I_ref(t_i) * sum_j |I_j_test - I_j_ref|.
inline ScalarSeries l1_energy_error(const std::vector<double>& times,
                                    const std::vector<EnergyDecomposition>& reference,
                                    const std::vector<EnergyDecomposition>& test,
                                    double delta) {
  if (times.size() != reference.size() || times.size() != test.size())
    throw std::invalid_argument("l1_energy_error: series must be aligned");
  ScalarSeries out;
  out.times = times;
  out.values.resize(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (reference[i].per_spring.size() != test[i].per_spring.size())
      throw std::invalid_argument("l1_energy_error: spring count mismatch");
    if (reference[i].total == 0.0)
      throw std::invalid_argument("l1_energy_error: zero reference energy at index " +
                                  std::to_string(i));
    double sum = 0.0;
    for (std::size_t j = 0; j < reference[i].per_spring.size(); ++j)
      sum += std::abs(test[i].per_spring[j] - reference[i].per_spring[j]);
    out.values[i] = sum * delta / reference[i].total;
  }
  return out;
}

struct PhaseAngles {
  double theta;  // arccos(sqrt(I3 / I)), in [0, pi/2]
  double phi;    // arctan(sqrt(I2 / I1)), in [0, pi/2]; I1 = 0 maps to pi/2
};

inline PhaseAngles phase_angles(const EnergyDecomposition& e) {
  if (e.per_spring.size() != 3)
    throw std::invalid_argument("phase_angles: defined for m = 3 springs");
  if (!(e.total > 0.0)) throw std::invalid_argument("phase_angles: total energy must be > 0");
  PhaseAngles a;
  double ratio = std::sqrt(e.per_spring[2] / e.total);
  ratio = std::min(1.0, std::max(0.0, ratio));
  a.theta = std::acos(ratio);
  constexpr double half_pi = 1.5707963267948966;
  a.phi = (e.per_spring[0] == 0.0)
              ? half_pi
              : std::atan(std::sqrt(e.per_spring[1] / e.per_spring[0]));
  return a;
}

// |theta_test - theta_ref| delta + |phi_test - phi_ref| delta, pointwise.
inline ScalarSeries l1_angle_error(const std::vector<double>& times,
                                   const std::vector<PhaseAngles>& reference,
                                   const std::vector<PhaseAngles>& test, double delta) {
  if (times.size() != reference.size() || times.size() != test.size())
    throw std::invalid_argument("l1_angle_error: series must be aligned");
  ScalarSeries out;
  out.times = times;
  out.values.resize(times.size());
  for (std::size_t i = 0; i < times.size(); ++i)
    out.values[i] = (std::abs(test[i].theta - reference[i].theta) +
                     std::abs(test[i].phi - reference[i].phi)) *
                    delta;
  return out;
}

// Ensemble autocovariance of a scalar observable at lags tau = k delta:
//   ACF(k delta) = mean_{m,i} v_i v_{i+k} - mean_{m,i} v_i * mean_{m,i} v_{i+k},
// averaged over trajectories and admissible time origins. The two means are
// lag-split (each computed over its own index set); callers remove burn-in.
inline ScalarSeries acf(const std::vector<std::vector<double>>& series, double max_lag,
                        double delta) {
  if (series.empty() || series.front().empty())
    throw std::invalid_argument("acf: empty ensemble");
  const std::size_t n = series.front().size();
  for (const auto& s : series)
    if (s.size() != n) throw std::invalid_argument("acf: ragged ensemble");
  const std::size_t max_k = static_cast<std::size_t>(std::floor(max_lag / delta + 1e-9));
  if (max_k >= n) throw std::invalid_argument("acf: max_lag exceeds the series span");
  ScalarSeries out;
  out.times.resize(max_k + 1);
  out.values.resize(max_k + 1);
  for (std::size_t k = 0; k <= max_k; ++k) {
    double sum_xy = 0.0, sum_x = 0.0, sum_y = 0.0;
    std::size_t count = 0;
    for (const auto& s : series) {
      for (std::size_t i = 0; i + k < n; ++i) {
        sum_xy += s[i] * s[i + k];
        sum_x += s[i];
        sum_y += s[i + k];
        ++count;
      }
    }
    const double c = static_cast<double>(count);
    out.times[k] = static_cast<double>(k) * delta;
    out.values[k] = sum_xy / c - (sum_x / c) * (sum_y / c);
  }
  return out;
}

// Histogram over equal-width bins: left-closed bins, final bin right-closed.
// Masses are counts / total samples, so their sum is the in-range fraction;
// out-of-range samples are counted separately, never silently dropped.
struct Histogram {
  double lo = 0.0, hi = 1.0;
  std::vector<double> masses;
  std::size_t total_samples = 0;
  std::size_t out_of_range = 0;

  std::vector<double> bin_centers() const {
    std::vector<double> c(masses.size());
    const double width = (hi - lo) / static_cast<double>(masses.size());
    for (std::size_t i = 0; i < masses.size(); ++i)
      c[i] = lo + (static_cast<double>(i) + 0.5) * width;
    return c;
  }
};

inline Histogram empirical_pdf(const std::vector<double>& samples, std::size_t n_bins,
                               double lo, double hi) {
  if (n_bins < 1) throw std::invalid_argument("empirical_pdf: n_bins must be >= 1");
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("empirical_pdf: range must be finite and nonempty");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  h.masses.assign(n_bins, 0.0);
  h.total_samples = samples.size();
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (double v : samples) {
    if (v < lo || v > hi || !std::isfinite(v)) {
      ++h.out_of_range;
      continue;
    }
    std::size_t bin = (v == hi) ? n_bins - 1
                                : static_cast<std::size_t>((v - lo) / width);
    if (bin >= n_bins) bin = n_bins - 1;
    h.masses[bin] += 1.0;
  }
  if (!samples.empty())
    for (double& m : h.masses) m /= static_cast<double>(samples.size());
  return h;
}

// Total variation distance: half the L1 distance between the mass vectors.
inline double tvd(const Histogram& p, const Histogram& q) {
  if (p.masses.size() != q.masses.size() || p.lo != q.lo || p.hi != q.hi)
    throw std::invalid_argument("tvd: histograms use different binning");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.masses.size(); ++i)
    sum += std::abs(p.masses[i] - q.masses[i]);
  return 0.5 * sum;
}

// RMSE between two aligned curves (used for ACF comparisons).
inline double series_rmse(const ScalarSeries& a, const ScalarSeries& b) {
  check_aligned(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(a.values.size()));
}

}  // namespace nysalt
