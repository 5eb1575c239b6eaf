#pragma once

// One-step prediction losses for the flow-map fit, their analytic
// gradients in (b1, beta1), the diagonal weight matrix, and the
// box-constrained minimization that produces the fitted parameters.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "nysalt/datagen.hpp"
#include "nysalt/integrators.hpp"
#include "nysalt/parallel.hpp"
#include "nysalt/state.hpp"

namespace nysalt {

enum class LossMode { deterministic, stochastic };

class DegenerateDataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Diagonal of Sigma, the per-coordinate normalization of the residuals.
// Deterministic mode: mean entrywise square of (X_{i+1} - X_i) / delta.
// Stochastic mode: mean entrywise square of (X_{i+1} - X_i), no division.
struct WeightMatrix {
  std::vector<double> diag;  // length 2d, ordered (q..., p...)
};

inline WeightMatrix weight_matrix(const TrajectoryEnsemble& ens, LossMode mode) {
  const std::size_t n_t = ens.num_transitions();
  if (ens.num_trajectories() == 0 || n_t == 0)
    throw std::invalid_argument("weight_matrix: ensemble has no transitions");
  const std::size_t d = ens.states.front().front().dim();
  WeightMatrix w;
  w.diag.assign(2 * d, 0.0);
  const double scale = (mode == LossMode::deterministic) ? 1.0 / ens.delta() : 1.0;
  std::size_t count = 0;
  for (const auto& traj : ens.states) {
    for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        const double dq = (traj[i + 1].q[k] - traj[i].q[k]) * scale;
        const double dp = (traj[i + 1].p[k] - traj[i].p[k]) * scale;
        w.diag[k] += dq * dq;
        w.diag[d + k] += dp * dp;
      }
      ++count;
    }
  }
  for (auto& v : w.diag) v /= static_cast<double>(count);
  for (std::size_t k = 0; k < w.diag.size(); ++k)
    if (!(w.diag[k] > 0.0))
      throw DegenerateDataError("weight_matrix: frozen coordinate " + std::to_string(k));
  return w;
}

using Vec2 = std::array<double, 2>;  // (d/db1, d/dbeta1)

namespace detail {

// Shared per-sample machinery for the loss and its Appendix-style gradient.
// All derivative formulas only need Jacobian-vector products of the force.
template <class Model>
struct SampleEval {
  const Model& model;
  double delta;
  std::size_t d;
  StepWorkspace w;
  std::vector<double> u1, u2, dk1_b, dk1_be, v2, dk2_b, dk2_be;

  SampleEval(const Model& m, double dt) : model(m), delta(dt), d(m.dim()) {}

  // Advances the stage values for state (q,p); result left in w.k1/w.k2 and
  // step images sq/sp.
  void stages(const NystromCoefficients& c, const State& s, std::vector<double>& sq,
              std::vector<double>& sp) {
    u1.resize(d);
    u2.resize(d);
    for (std::size_t k = 0; k < d; ++k) u1[k] = s.q[k] + delta * c.c1 * s.p[k];
    model.force(u1, w.k1);
    for (std::size_t k = 0; k < d; ++k)
      u2[k] = s.q[k] + delta * c.c2 * s.p[k] + delta * delta * c.a21 * w.k1[k];
    model.force(u2, w.k2);
    sq.resize(d);
    sp.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      sq[k] = s.q[k] + delta * s.p[k] +
              delta * delta * (c.beta1 * w.k1[k] + c.beta2 * w.k2[k]);
      sp[k] = s.p[k] + delta * (c.b1 * w.k1[k] + c.b2 * w.k2[k]);
    }
  }

  // d(step image)/d(b1, beta1) at the same state; stages() must have run.
  void stage_derivatives(const NystromCoefficients& c, const State& s,
                         std::vector<double>& dsq_b, std::vector<double>& dsq_be,
                         std::vector<double>& dsp_b, std::vector<double>& dsp_be) {
    const double dt = delta;
    dk1_b.resize(d);
    dk1_be.resize(d);
    v2.resize(d);
    dk2_b.resize(d);
    dk2_be.resize(d);
    // dc1/db1 = beta1/b1^2, dc1/dbeta1 = -1/b1
    for (std::size_t k = 0; k < d; ++k) v2[k] = dt * s.p[k] * (c.beta1 / (c.b1 * c.b1));
    model.force_jvp(u1, v2, dk1_b);
    for (std::size_t k = 0; k < d; ++k) v2[k] = -dt * s.p[k] / c.b1;
    model.force_jvp(u1, v2, dk1_be);
    // dc2/db1 = -beta2/b2^2, da21/db1 = -beta2/b2^2
    for (std::size_t k = 0; k < d; ++k)
      v2[k] = -dt * s.p[k] * (c.beta2 / (c.b2 * c.b2)) +
              dt * dt * (c.a21 * dk1_b[k] - w.k1[k] * (c.beta2 / (c.b2 * c.b2)));
    model.force_jvp(u2, v2, dk2_b);
    // dc2/dbeta1 = 1/b2, da21/dbeta1 = 1/b2
    for (std::size_t k = 0; k < d; ++k)
      v2[k] = dt * s.p[k] / c.b2 + dt * dt * (c.a21 * dk1_be[k] + w.k1[k] / c.b2);
    model.force_jvp(u2, v2, dk2_be);
    dsq_b.resize(d);
    dsq_be.resize(d);
    dsp_b.resize(d);
    dsp_be.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      dsq_b[k] = dt * dt * (c.beta1 * dk1_b[k] + c.beta2 * dk2_b[k]);
      dsq_be[k] = dt * dt * (w.k1[k] - w.k2[k] + c.beta1 * dk1_be[k] + c.beta2 * dk2_be[k]);
      dsp_b[k] = dt * (w.k1[k] - w.k2[k] + c.b1 * dk1_b[k] + c.b2 * dk2_b[k]);
      dsp_be[k] = dt * (c.b1 * dk1_be[k] + c.b2 * dk2_be[k]);
    }
  }
};

}  // namespace detail

// Bundles an ensemble with its model and weight matrix and evaluates the
// selected loss (and gradient) at any admissible theta. Reductions are
// per-trajectory, summed in trajectory order, so results do not depend on
// the thread count.
template <class Model>
class InferenceProblem {
 public:
  InferenceProblem(const Model& model, const TrajectoryEnsemble& ens, LossMode mode,
                   const WeightMatrix& sigma, unsigned threads = 1)
      : model_(model), ens_(ens), mode_(mode), threads_(threads) {
    if (mode == LossMode::stochastic && !ens.stochastic())
      throw std::invalid_argument("InferenceProblem: stochastic loss needs noise data");
    const std::size_t d = model.dim();
    if (sigma.diag.size() != 2 * d)
      throw std::invalid_argument("InferenceProblem: Sigma dimension mismatch");
    inv_sigma_.resize(2 * d);
    for (std::size_t k = 0; k < 2 * d; ++k) inv_sigma_[k] = 1.0 / sigma.diag[k];
    decay_ = std::exp(-ens.meta.generator.langevin.gamma * ens.delta());
  }

  double value(const NystromParams& theta) const { return evaluate(theta, nullptr); }

  double value_and_gradient(const NystromParams& theta, Vec2& grad) const {
    return evaluate(theta, &grad);
  }

  LossMode mode() const { return mode_; }

 private:
  double evaluate(const NystromParams& theta, Vec2* grad) const {
    const NystromCoefficients c = derive_coefficients(theta);
    const std::size_t m_count = ens_.num_trajectories();
    const std::size_t n_t = ens_.num_transitions();
    const std::size_t d = model_.dim();
    const double delta = ens_.delta();
    std::vector<double> partial_loss(m_count, 0.0);
    std::vector<Vec2> partial_grad(grad ? m_count : 0, Vec2{0.0, 0.0});

    parallel_for(m_count, threads_, [&](std::size_t m) {
      detail::SampleEval<Model> ev(model_, delta);
      std::vector<double> sq, sp, rq(d), rp(d);
      std::vector<double> dsq_b, dsq_be, dsp_b, dsp_be;
      double loss_sum = 0.0;
      Vec2 grad_sum = {0.0, 0.0};
      const auto& traj = ens_.states[m];
      for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
        ev.stages(c, traj[i], sq, sp);
        if (mode_ == LossMode::deterministic) {
          // residual (S(X_i) - X_{i+1}) / delta, Sigma^-1-weighted
          for (std::size_t k = 0; k < d; ++k) {
            rq[k] = (sq[k] - traj[i + 1].q[k]) / delta;
            rp[k] = (sp[k] - traj[i + 1].p[k]) / delta;
          }
        } else {
          // residual (X_i + delta F_theta(X_i, xi_i)) - X_{i+1}; the OU part
          // scales the momentum stage by e^{-gamma delta} and adds xi
          const auto& xi = ens_.noise[m][i];
          for (std::size_t k = 0; k < d; ++k) {
            rq[k] = sq[k] - traj[i + 1].q[k];
            rp[k] = decay_ * sp[k] + xi[k] - traj[i + 1].p[k];
          }
        }
        for (std::size_t k = 0; k < d; ++k)
          loss_sum += rq[k] * rq[k] * inv_sigma_[k] + rp[k] * rp[k] * inv_sigma_[d + k];
        if (grad) {
          ev.stage_derivatives(c, traj[i], dsq_b, dsq_be, dsp_b, dsp_be);
          const double qscale = (mode_ == LossMode::deterministic) ? 1.0 / delta : 1.0;
          const double pscale =
              (mode_ == LossMode::deterministic) ? 1.0 / delta : decay_;
          for (std::size_t k = 0; k < d; ++k) {
            const double wq = 2.0 * rq[k] * inv_sigma_[k] * qscale;
            const double wp = 2.0 * rp[k] * inv_sigma_[d + k] * pscale;
            grad_sum[0] += wq * dsq_b[k] + wp * dsp_b[k];
            grad_sum[1] += wq * dsq_be[k] + wp * dsp_be[k];
          }
        }
      }
      partial_loss[m] = loss_sum;
      if (grad) partial_grad[m] = grad_sum;
    });

    const double norm = 1.0 / (static_cast<double>(m_count) * static_cast<double>(n_t));
    double total = 0.0;
    for (double v : partial_loss) total += v;
    if (grad) {
      Vec2 g = {0.0, 0.0};
      for (const auto& pg : partial_grad) {
        g[0] += pg[0];
        g[1] += pg[1];
      }
      (*grad)[0] = g[0] * norm;
      (*grad)[1] = g[1] * norm;
    }
    return total * norm;
  }

  const Model& model_;
  const TrajectoryEnsemble& ens_;
  LossMode mode_;
  unsigned threads_;
  std::vector<double> inv_sigma_;
  double decay_ = 1.0;
};

template <class Model>
double loss_deterministic(const NystromParams& theta, const Model& model,
                          const TrajectoryEnsemble& ens, const WeightMatrix& sigma,
                          unsigned threads = 1) {
  return InferenceProblem<Model>(model, ens, LossMode::deterministic, sigma, threads)
      .value(theta);
}

template <class Model>
double loss_stochastic(const NystromParams& theta, const Model& model,
                       const TrajectoryEnsemble& ens, const WeightMatrix& sigma,
                       unsigned threads = 1) {
  return InferenceProblem<Model>(model, ens, LossMode::stochastic, sigma, threads)
      .value(theta);
}

template <class Model>
Vec2 loss_gradient(const NystromParams& theta, const Model& model,
                   const TrajectoryEnsemble& ens, const WeightMatrix& sigma,
                   LossMode mode, unsigned threads = 1) {
  Vec2 g;
  InferenceProblem<Model>(model, ens, mode, sigma, threads).value_and_gradient(theta, g);
  return g;
}

// ---------------------------------------------------------------------------
// Projected quasi-Newton on a 2-D box.

struct Box2 {
  Vec2 lo, hi;
};

using Objective2 = std::function<double(const Vec2&, Vec2* grad)>;

struct OptimizeResult {
  Vec2 x{};
  double value = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double pg_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
};

namespace detail {

inline Vec2 project(const Vec2& x, const Box2& box) {
  Vec2 out;
  for (int k = 0; k < 2; ++k)
    out[k] = std::min(std::max(x[k], box.lo[k]), box.hi[k]);
  return out;
}

inline double projected_gradient_norm(const Vec2& x, const Vec2& g, const Box2& box) {
  Vec2 step = project({x[0] - g[0], x[1] - g[1]}, box);
  return std::max(std::abs(step[0] - x[0]), std::abs(step[1] - x[1]));
}

}  // namespace detail

// BFGS with projection onto the box and a backtracking Armijo line search.
// The problem is two-dimensional and smooth, which keeps this simple method
// reliable; the projection makes the box constraint trivial.
inline OptimizeResult projected_bfgs(const Objective2& objective, Vec2 x0, const Box2& box,
                                     double pg_tol = 1e-8, int max_iter = 200) {
  OptimizeResult res;
  Vec2 x = detail::project(x0, box);
  Vec2 g;
  double fx = objective(x, &g);
  std::array<double, 4> h_inv = {1.0, 0.0, 0.0, 1.0};
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const double pg = detail::projected_gradient_norm(x, g, box);
    if (pg <= pg_tol) {
      res.converged = true;
      break;
    }
    Vec2 dir = {-(h_inv[0] * g[0] + h_inv[1] * g[1]),
                -(h_inv[2] * g[0] + h_inv[3] * g[1])};
    if (dir[0] * g[0] + dir[1] * g[1] >= 0.0) {
      h_inv = {1.0, 0.0, 0.0, 1.0};
      dir = {-g[0], -g[1]};
    }
    double alpha = 1.0;
    Vec2 x_new = x;
    double f_new = fx;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = detail::project({x[0] + alpha * dir[0], x[1] + alpha * dir[1]}, box);
      const Vec2 delta = {x_new[0] - x[0], x_new[1] - x[1]};
      if (std::abs(delta[0]) == 0.0 && std::abs(delta[1]) == 0.0) break;
      f_new = objective(x_new, nullptr);
      const double decrease = g[0] * delta[0] + g[1] * delta[1];
      if (f_new <= fx + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;  // no admissible decrease left at this scale
    Vec2 g_new;
    objective(x_new, &g_new);
    const Vec2 s = {x_new[0] - x[0], x_new[1] - x[1]};
    const Vec2 y = {g_new[0] - g[0], g_new[1] - g[1]};
    const double sy = s[0] * y[0] + s[1] * y[1];
    const double s_norm = std::sqrt(s[0] * s[0] + s[1] * s[1]);
    const double y_norm = std::sqrt(y[0] * y[0] + y[1] * y[1]);
    if (sy > 1e-12 * s_norm * y_norm) {
      const double rho = 1.0 / sy;
      // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      const std::array<double, 4> a = {1.0 - rho * s[0] * y[0], -rho * s[0] * y[1],
                                       -rho * s[1] * y[0], 1.0 - rho * s[1] * y[1]};
      std::array<double, 4> ah = {a[0] * h_inv[0] + a[1] * h_inv[2],
                                  a[0] * h_inv[1] + a[1] * h_inv[3],
                                  a[2] * h_inv[0] + a[3] * h_inv[2],
                                  a[2] * h_inv[1] + a[3] * h_inv[3]};
      h_inv = {ah[0] * a[0] + ah[1] * a[1] + rho * s[0] * s[0],
               ah[0] * a[2] + ah[1] * a[3] + rho * s[0] * s[1],
               ah[2] * a[0] + ah[3] * a[1] + rho * s[1] * s[0],
               ah[2] * a[2] + ah[3] * a[3] + rho * s[1] * s[1]};
    }
    x = x_new;
    fx = f_new;
    g = g_new;
  }
  res.x = x;
  res.value = fx;
  res.iterations = iter;
  res.pg_norm = detail::projected_gradient_norm(x, g, box);
  res.converged = res.converged || res.pg_norm <= pg_tol;
  return res;
}

// ---------------------------------------------------------------------------
// Fitting.

struct FitOptions {
  NystromParams theta0{0.5, 0.5};  // Verlet
  double pg_tol = 1e-8;
  int max_iterations = 200;
  bool multistart = true;
  double b1_margin = 1e-4;  // keeps b1 off the open-interval endpoints
  unsigned threads = 1;
};

struct FitResult {
  NystromParams theta{};
  double loss = std::numeric_limits<double>::infinity();
  int iterations = 0;
  double gradient_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  // optimizer provenance, recorded for auditability
  double pg_tol = 0.0;
  int max_iterations = 0;
  std::vector<NystromParams> starts;
};

// Multi-start list: requested start, center of the box, and four inset
// corners. Guards against a non-unique or flat minimizer.
inline std::vector<NystromParams> fit_starts(const NystromParams& theta0, bool multistart) {
  std::vector<NystromParams> starts = {theta0};
  if (multistart) {
    const NystromParams extra[] = {
        {0.5, 0.25}, {0.1, 0.05}, {0.9, 0.05}, {0.1, 0.45}, {0.9, 0.45}};
    for (const auto& t : extra) {
      bool dup = false;
      for (const auto& have : starts)
        dup = dup || (std::abs(have.b1 - t.b1) < 1e-12 && std::abs(have.beta1 - t.beta1) < 1e-12);
      if (!dup) starts.push_back(t);
    }
  }
  return starts;
}

inline FitResult fit_box_constrained(const Objective2& objective, const FitOptions& opts) {
  const Box2 box{{opts.b1_margin, 0.0}, {1.0 - opts.b1_margin, 0.5}};
  FitResult best;
  best.pg_tol = opts.pg_tol;
  best.max_iterations = opts.max_iterations;
  best.starts = fit_starts(opts.theta0, opts.multistart);
  for (const auto& start : best.starts) {
    const OptimizeResult r = projected_bfgs(objective, {start.b1, start.beta1}, box,
                                            opts.pg_tol, opts.max_iterations);
    if (r.value < best.loss) {
      best.theta = {r.x[0], r.x[1]};
      best.loss = r.value;
      best.iterations = r.iterations;
      best.gradient_norm = r.pg_norm;
      best.converged = r.converged;
    }
  }
  return best;
}

// Box-constrained local minimizer of the selected loss over the parameter
// box. Deterministic given (data, options): fixed start list, ordered
// reductions, no randomness.
template <class Model>
FitResult estimate(const Model& model, const TrajectoryEnsemble& ens, LossMode mode,
                   const FitOptions& opts = {}) {
  const WeightMatrix sigma = weight_matrix(ens, mode);
  return estimate(model, ens, mode, sigma, opts);
}

template <class Model>
FitResult estimate(const Model& model, const TrajectoryEnsemble& ens, LossMode mode,
                   const WeightMatrix& sigma, const FitOptions& opts) {
  InferenceProblem<Model> problem(model, ens, mode, sigma, opts.threads);
  Objective2 objective = [&problem](const Vec2& x, Vec2* grad) {
    const NystromParams theta{x[0], x[1]};
    if (grad) {
      Vec2 g;
      const double v = problem.value_and_gradient(theta, g);
      *grad = g;
      return v;
    }
    return problem.value(theta);
  };
  return fit_box_constrained(objective, opts);
}

// ---------------------------------------------------------------------------
// Convergence of the estimator in the number of trajectories.

using EnsembleFactory =
    std::function<TrajectoryEnsemble(std::size_t n_traj, std::uint64_t seed)>;

struct ConvergenceStudy {
  std::vector<std::size_t> m_list;
  std::vector<double> mean_error;  // mean |theta_M - theta_ref| over repeats
  NystromParams reference{};
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool slope_defined = false;
};

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double nd = static_cast<double>(n);
  return (nd * sxy - sx * sy) / (nd * sxx - sx * sx);
}

// Fits a reference estimator on reference_M fresh trajectories, then for
// each M in m_list fits `repeats` independent ensembles of size M and
// averages |theta_M - theta_ref|. When every error is at round-off level
// (self-generated data) the slope is reported as undefined.
template <class Model>
ConvergenceStudy convergence_study(const Model& model, const EnsembleFactory& make,
                                   LossMode mode, const std::vector<std::size_t>& m_list,
                                   std::size_t reference_M, int repeats,
                                   std::uint64_t seed, const FitOptions& opts = {}) {
  for (std::size_t i = 1; i < m_list.size(); ++i)
    if (m_list[i] <= m_list[i - 1])
      throw std::invalid_argument("convergence_study: M list must be ascending");
  if (!m_list.empty() && reference_M <= m_list.back())
    throw std::invalid_argument("convergence_study: reference_M must exceed max(M)");

  ConvergenceStudy out;
  out.m_list = m_list;
  const TrajectoryEnsemble ref_ens = make(reference_M, seed);
  const FitResult ref = estimate(model, ref_ens, mode, opts);
  out.reference = ref.theta;

  out.mean_error.resize(m_list.size(), 0.0);
  for (std::size_t i = 0; i < m_list.size(); ++i) {
    double err_sum = 0.0;
    for (int r = 0; r < repeats; ++r) {
      const std::uint64_t sub_seed =
          seed ^ (0x9E3779B97F4A7C15ull * (i * 1000 + static_cast<std::size_t>(r) + 1));
      const TrajectoryEnsemble ens = make(m_list[i], sub_seed);
      const FitResult fit = estimate(model, ens, mode, opts);
      const double db = fit.theta.b1 - ref.theta.b1;
      const double dbe = fit.theta.beta1 - ref.theta.beta1;
      err_sum += std::sqrt(db * db + dbe * dbe);
    }
    out.mean_error[i] = err_sum / static_cast<double>(repeats);
  }

  double max_err = 0.0;
  for (double e : out.mean_error) max_err = std::max(max_err, e);
  if (max_err > 1e-6 && m_list.size() >= 2) {
    std::vector<double> ms(m_list.begin(), m_list.end());
    out.slope = loglog_slope(ms, out.mean_error);
    out.slope_defined = true;
  }
  return out;
}

}  // namespace nysalt
