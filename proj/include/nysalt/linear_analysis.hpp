#pragma once

// Closed-form machinery for the 1-D linear Hamiltonian/Langevin systems:
// exact and Nystrom one-step propagator matrices, the matrix-discrepancy
// loss with Sigma = diag(1, Omega^2), optimal parameters, the leading-order
// objective f(b1, beta1), linear-stability windows, and the Monte-Carlo
// local strong-order check against the exact solution.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nysalt/inference.hpp"
#include "nysalt/integrators.hpp"
#include "nysalt/models.hpp"
#include "nysalt/rng.hpp"

namespace nysalt {

// One-step matrix of the Nystrom scheme on q'' = -Omega q:
//   B = [ 1 - z/2 + z^2 beta2 a21,         delta (1 - z (beta1 c1 + beta2 c2) + z^2 beta2 a21 c1)
//        -delta Omega (1 - z b2 a21),      1 - z/2 + z^2 b2 a21 c1 ]
// with z = delta^2 Omega and the derived tableau.
inline Mat2 nystrom_propagator(const NystromParams& t, double delta, double omega_sq) {
  const NystromCoefficients c = derive_coefficients(t);
  const double z = delta * delta * omega_sq;
  return {1.0 - 0.5 * z + z * z * c.beta2 * c.a21,
          delta * (1.0 - z * (c.beta1 * c.c1 + c.beta2 * c.c2) + z * z * c.beta2 * c.a21 * c.c1),
          -delta * omega_sq * (1.0 - z * c.b2 * c.a21),
          1.0 - 0.5 * z + z * z * c.b2 * c.a21 * c.c1};
}

// exp(A_gamma delta) for A_gamma = [0 1; -Omega -gamma], in closed form for
// the underdamped, overdamped and critically damped cases.
inline Mat2 exact_propagator(double omega_sq, double gamma, double delta) {
  if (!(omega_sq > 0.0)) throw std::invalid_argument("exact_propagator: Omega must be > 0");
  if (gamma < 0.0) throw std::invalid_argument("exact_propagator: gamma must be >= 0");
  const double mu = -0.5 * gamma;
  const double disc = 0.25 * gamma * gamma - omega_sq;  // (gamma/2)^2 - Omega
  double cc, sc;                                        // cos-like and sinc-like factors
  const double tol = 1e-12 * omega_sq;
  if (disc < -tol) {
    const double nu = std::sqrt(-disc);
    cc = std::cos(nu * delta);
    sc = std::sin(nu * delta) / nu;
  } else if (disc > tol) {
    const double s = std::sqrt(disc);
    cc = std::cosh(s * delta);
    sc = std::sinh(s * delta) / s;
  } else {
    // critical damping limit of both branches
    cc = 1.0 + 0.5 * disc * delta * delta;
    sc = delta * (1.0 + disc * delta * delta / 6.0);
  }
  const double scale = std::exp(mu * delta);
  // exp(A delta) = e^{mu delta} (cc I + sc (A - mu I))
  return {scale * (cc + sc * 0.5 * gamma), scale * sc, scale * (-omega_sq * sc),
          scale * (cc - sc * 0.5 * gamma)};
}

// B with the OU contraction of the momentum row: diag(1, e^{-gamma delta}) B.
inline Mat2 stochastic_propagator(const NystromParams& t, double delta, double omega_sq,
                                  double gamma) {
  Mat2 b = nystrom_propagator(t, delta, omega_sq);
  const double decay = std::exp(-gamma * delta);
  b[2] *= decay;
  b[3] *= decay;
  return b;
}

// || e^{A_gamma delta} - B ||^2_{Sigma^-1} with Sigma = diag(1, Omega^2):
// trace norm Tr(Y^T Sigma^-1 Y), i.e. the momentum row is weighted 1/Omega^2.
inline double linear_loss(const NystromParams& t, double delta, double omega_sq,
                          double gamma = 0.0) {
  const Mat2 exact = exact_propagator(omega_sq, gamma, delta);
  const Mat2 b = stochastic_propagator(t, delta, omega_sq, gamma);
  const double y0 = exact[0] - b[0], y1 = exact[1] - b[1];
  const double y2 = exact[2] - b[2], y3 = exact[3] - b[3];
  return y0 * y0 + y1 * y1 + (y2 * y2 + y3 * y3) / (omega_sq * omega_sq);
}

// Leading-order objective of the step-size expansion of the loss:
//   f(b1, beta1) = (6 beta1^2/b1 + 6 beta2^2/b2 - 2)^2 + (6 b2 beta1 - 6 b1 beta2 - 1)^2
// with beta2 = 1/2 - beta1, b2 = 1 - b1. The loss behaves like
// (delta^6 / 36) Omega^2 f as delta -> 0, which is why the minimizer is
// step-size and Omega independent.
inline double f_leading(const NystromParams& t) {
  const double b2 = 1.0 - t.b1;
  const double beta2 = 0.5 - t.beta1;
  const double g1 = 6.0 * t.beta1 * t.beta1 / t.b1 + 6.0 * beta2 * beta2 / b2 - 2.0;
  const double g2 = 6.0 * b2 * t.beta1 - 6.0 * t.b1 * beta2 - 1.0;
  return g1 * g1 + g2 * g2;
}

namespace detail {

inline Objective2 fd_objective(const std::function<double(const Vec2&)>& f,
                               double eps = 1e-6) {
  return [f, eps](const Vec2& x, Vec2* grad) {
    if (grad) {
      for (int k = 0; k < 2; ++k) {
        Vec2 plus = x, minus = x;
        plus[k] += eps;
        minus[k] -= eps;
        (*grad)[k] = (f(plus) - f(minus)) / (2.0 * eps);
      }
    }
    return f(x);
  };
}

}  // namespace detail

// Grid scan of f over the box followed by a quasi-Newton polish.
inline NystromParams f_leading_minimizer(double grid_step = 1e-3) {
  Vec2 best = {0.5, 0.4};
  double best_val = f_leading({best[0], best[1]});
  for (double b1 = grid_step; b1 < 1.0; b1 += grid_step) {
    for (double beta1 = 0.0; beta1 <= 0.5 + 1e-15; beta1 += grid_step) {
      const double v = f_leading({b1, std::min(beta1, 0.5)});
      if (v < best_val) {
        best_val = v;
        best = {b1, std::min(beta1, 0.5)};
      }
    }
  }
  const Box2 box{{1e-4, 0.0}, {1.0 - 1e-4, 0.5}};
  const auto obj = detail::fd_objective(
      [](const Vec2& x) { return f_leading({x[0], x[1]}); }, 1e-7);
  const OptimizeResult r = projected_bfgs(obj, best, box, 1e-12, 200);
  return {r.x[0], r.x[1]};
}

// Numeric 2-D minimization of the exact matrix-discrepancy loss over the
// parameter box, multi-start as in the data-driven fit.
inline NystromParams optimal_linear_params(double delta, double omega_sq,
                                           double gamma = 0.0) {
  const auto obj = detail::fd_objective(
      [delta, omega_sq, gamma](const Vec2& x) {
        return linear_loss({x[0], x[1]}, delta, omega_sq, gamma);
      },
      1e-7);
  FitOptions opts;
  opts.theta0 = {0.5, 0.5};
  opts.pg_tol = 1e-13;
  const FitResult fit = fit_box_constrained(obj, opts);
  return fit.theta;
}

// Half-trace of the Nystrom propagator as a function of z = delta^2 Omega:
// a(z) = 1 - z/2 + C z^2 / 2 with C = a21 (beta2 + b2 c1). Since det B = 1,
// the step is linearly stable exactly where |a(z)| <= 1.
inline double stability_half_trace(const NystromCoefficients& c, double z) {
  const double curv = c.a21 * (c.beta2 + c.b2 * c.c1);
  return 1.0 - 0.5 * z + 0.5 * curv * z * z;
}

// Largest step of linear stability: delta* = sqrt(z*/Omega) where z* is the
// end of the connected stability interval containing z = 0. The scan walks
// z upward until |a(z)| > 1 and bisects the crossing; any disconnected
// re-entrant stability band beyond the first crossing is ignored, since
// consistent time stepping lives in the first interval.
inline double max_stable_step(const NystromParams& t, double omega_sq,
                              double z_scan_step = 1e-3, double z_max = 1e3) {
  const NystromCoefficients c = derive_coefficients(t);
  auto excess = [&](double z) { return std::abs(stability_half_trace(c, z)) - 1.0; };
  double lo = 0.0, hi = -1.0;
  for (double z = z_scan_step; z <= z_max; z += z_scan_step) {
    if (excess(z) > 0.0) {
      hi = z;
      break;
    }
    lo = z;
  }
  if (hi < 0.0) return std::sqrt(z_max / omega_sq);  // stable over the whole scan
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (excess(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return std::sqrt(0.5 * (lo + hi) / omega_sq);
}

// All maximal intervals of z in [0, z_max] with |a(z)| <= 1, bisected to
// high accuracy. Exposes the re-entrant stability bands.
inline std::vector<std::pair<double, double>> stability_intervals(
    const NystromParams& t, double z_max, double z_scan_step = 1e-3) {
  const NystromCoefficients c = derive_coefficients(t);
  auto stable = [&](double z) { return std::abs(stability_half_trace(c, z)) <= 1.0; };
  auto refine = [&](double a, double b) {  // stability flips between a and b
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (a + b);
      if (stable(mid) == stable(a))
        a = mid;
      else
        b = mid;
    }
    return 0.5 * (a + b);
  };
  std::vector<std::pair<double, double>> intervals;
  bool inside = stable(0.0);
  double start = 0.0;
  double prev = 0.0;
  for (double z = z_scan_step; z <= z_max + 0.5 * z_scan_step; z += z_scan_step) {
    const bool s = stable(z);
    if (s && !inside) start = refine(prev, z);
    if (!s && inside) intervals.emplace_back(start, refine(prev, z));
    inside = s;
    prev = z;
  }
  if (inside) intervals.emplace_back(start, z_max);
  return intervals;
}

// ---------------------------------------------------------------------------
// Local strong order of the stochastic scheme on the linear Langevin system.

struct StrongOrderResult {
  std::vector<double> deltas;
  std::vector<double> rms_errors;
  double slope = 0.0;
};

struct StrongOrderOptions {
  std::array<double, 2> x0 = {0.002, 0.1};  // shared initial state
  std::size_t substeps = 400;               // fine sub-grid per coarse step
  std::uint64_t seed = 12345;
};

// Monte-Carlo RMS one-step error between the stochastic Nystrom step driven
// by the pathwise-coarsened increment and the exact solution
// X_delta = e^{A_gamma delta} X_0 + sigma int e^{A_gamma (delta-s)} e2 dW_s
// integrated on the same Brownian path (midpoint quadrature on the fine
// sub-grid). Errors use the Sigma = diag(1, Omega^2) weighting of the loss.
// Returns the least-squares slope of log(error) against log(delta).
inline StrongOrderResult local_strong_order_check(const NystromParams& t, double omega_sq,
                                                  double gamma, double sigma,
                                                  const std::vector<double>& delta_list,
                                                  std::size_t n_samples,
                                                  const StrongOrderOptions& opts = {}) {
  StrongOrderResult out;
  out.deltas = delta_list;
  const LangevinParams lp(gamma, sigma);
  for (const double delta : delta_list) {
    const std::size_t nsub = opts.substeps;
    const double h = delta / static_cast<double>(nsub);
    const Mat2 scheme = stochastic_propagator(t, delta, omega_sq, gamma);
    const Mat2 exact = exact_propagator(omega_sq, gamma, delta);
    // per-substep kernels: exact-solution quadrature column and OU weight
    std::vector<double> wq(nsub), wp(nsub), w_ou(nsub);
    const double sqrt_h = std::sqrt(h);
    const double sd_h = ou_noise_stddev(lp, h);
    for (std::size_t j = 0; j < nsub; ++j) {
      const double s_mid = (static_cast<double>(j) + 0.5) * h;
      const Mat2 e = exact_propagator(omega_sq, gamma, delta - s_mid);
      wq[j] = sigma * sqrt_h * e[1];  // column 2 of e^{A_gamma (delta - s)}
      wp[j] = sigma * sqrt_h * e[3];
      w_ou[j] = sd_h * std::exp(-gamma * (static_cast<double>(nsub - 1 - j)) * h);
    }
    const std::array<double, 2> exact_mean = mat2_apply(exact, opts.x0);
    const std::array<double, 2> scheme_mean = mat2_apply(scheme, opts.x0);
    double sq_sum = 0.0;
    for (std::size_t n = 0; n < n_samples; ++n) {
      CounterRng rng(opts.seed, n, RngPurpose::monte_carlo);
      double noise_q = 0.0, noise_p = 0.0, xi = 0.0;
      for (std::size_t j = 0; j < nsub; ++j) {
        const double r = rng.normal(j, 0);
        noise_q += wq[j] * r;
        noise_p += wp[j] * r;
        xi += w_ou[j] * r;
      }
      const double dq = exact_mean[0] + noise_q - scheme_mean[0];
      const double dp = exact_mean[1] + noise_p - (scheme_mean[1] + xi);
      const double dp_w = dp / omega_sq;  // Sigma^-1 weighting of the momentum row
      sq_sum += dq * dq + dp_w * dp_w;
    }
    out.rms_errors.push_back(std::sqrt(sq_sum / static_cast<double>(n_samples)));
  }
  out.slope = loglog_slope(out.deltas, out.rms_errors);
  return out;
}

}  // namespace nysalt
