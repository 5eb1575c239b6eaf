#pragma once

// The parametric explicit 2-stage symplectic Nystrom step, its splitting
// with an exact Ornstein-Uhlenbeck solve for Langevin dynamics, and the
// BAOAB baseline. Steppers are pure functions of their inputs; blow-up is
// returned as non-finite state, never trapped, so stability experiments
// can observe divergence.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nysalt/models.hpp"
#include "nysalt/state.hpp"

namespace nysalt {

// Free parameters theta = (b1, beta1) of the family, restricted to the box
// (0,1) x [0, 1/2]. Everything else in the tableau is derived.
struct NystromParams {
  double b1 = 0.5;
  double beta1 = 0.5;
};

// Verlet is the (1/2, 1/2) member; there is no separate code path for it.
inline constexpr NystromParams kVerlet{0.5, 0.5};

struct NystromCoefficients {
  double b1, b2, beta1, beta2, c1, c2, a21;
};

inline bool in_theta_box(const NystromParams& t) {
  return t.b1 > 0.0 && t.b1 < 1.0 && t.beta1 >= 0.0 && t.beta1 <= 0.5;
}

// Fills in the full tableau from (b1, beta1):
//   b1 + b2 = 1,  beta1 + beta2 = 1/2,  c_i = 1 - beta_i / b_i,
//   a21 = b1 (c2 - c1),  a11 = a12 = a22 = 0.
// These identities make the step explicit, consistent and symplectic for
// every admissible (b1, beta1).
inline NystromCoefficients derive_coefficients(const NystromParams& t) {
  if (!in_theta_box(t))
    throw std::domain_error("derive_coefficients: (b1, beta1) outside (0,1) x [0, 1/2]");
  NystromCoefficients c;
  c.b1 = t.b1;
  c.b2 = 1.0 - t.b1;
  c.beta1 = t.beta1;
  c.beta2 = 0.5 - t.beta1;
  c.c1 = 1.0 - c.beta1 / c.b1;
  c.c2 = 1.0 - c.beta2 / c.b2;
  c.a21 = c.b1 * (c.c2 - c.c1);
  return c;
}

// Scratch buffers so inner loops do not allocate.
struct StepWorkspace {
  std::vector<double> stage_q, k1, k2;
};

// One explicit 2-stage Nystrom step of size dt:
//   k1 = g(q + dt c1 p)
//   k2 = g(q + dt c2 p + dt^2 a21 k1)
//   q' = q + dt p + dt^2 (beta1 k1 + beta2 k2)
//   p' = p + dt (b1 k1 + b2 k2)
// Exactly two force evaluations; no reuse across steps (c1 != 0 in general).
template <class Model>
void nystrom_step(State& s, const NystromCoefficients& c, double dt, const Model& model,
                  StepWorkspace& w) {
  const std::size_t d = s.dim();
  w.stage_q.resize(d);
  for (std::size_t i = 0; i < d; ++i) w.stage_q[i] = s.q[i] + dt * c.c1 * s.p[i];
  model.force(w.stage_q, w.k1);
  for (std::size_t i = 0; i < d; ++i)
    w.stage_q[i] = s.q[i] + dt * c.c2 * s.p[i] + dt * dt * c.a21 * w.k1[i];
  model.force(w.stage_q, w.k2);
  for (std::size_t i = 0; i < d; ++i) {
    s.q[i] += dt * s.p[i] + dt * dt * (c.beta1 * w.k1[i] + c.beta2 * w.k2[i]);
    s.p[i] += dt * (c.b1 * w.k1[i] + c.b2 * w.k2[i]);
  }
}

template <class Model>
State nystrom_step(const State& s, const NystromCoefficients& c, double dt,
                   const Model& model) {
  State out = s;
  StepWorkspace w;
  nystrom_step(out, c, dt, model, w);
  return out;
}

// Exact OU update of the momentum: p' = exp(-gamma dt) p + xi. The caller
// supplies xi, distributed N(0, sigma^2 (1 - e^{-2 gamma dt})/(2 gamma) I)
// for the exact solve (see ou_noise_stddev).
inline void ou_step(std::vector<double>& p, const LangevinParams& lp, double dt,
                    const std::vector<double>& xi) {
  check_dim(p.size(), xi.size(), "ou_step");
  const double decay = std::exp(-lp.gamma * dt);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = decay * p[i] + xi[i];
}

// Splitting step for Langevin dynamics: a full Nystrom step of the
// Hamiltonian part followed by the exact OU solve on the momentum.
template <class Model>
void stochastic_nystrom_step(State& s, const NystromCoefficients& c,
                             const LangevinParams& lp, double dt, const Model& model,
                             const std::vector<double>& xi, StepWorkspace& w) {
  nystrom_step(s, c, dt, model, w);
  ou_step(s.p, lp, dt, xi);
}

template <class Model>
State stochastic_nystrom_step(const State& s, const NystromCoefficients& c,
                              const LangevinParams& lp, double dt, const Model& model,
                              const std::vector<double>& xi) {
  State out = s;
  StepWorkspace w;
  stochastic_nystrom_step(out, c, lp, dt, model, xi, w);
  return out;
}

// BAOAB step (Leimkuhler-Matthews ordering) with the exact OU solve in the
// O substep. One standard-normal vector per step: the O substep applies
// p <- e^{-gamma h} p + ou_noise_stddev(lp, h) * noise.
// When cached_force is non-null it must hold g(q) at entry and receives
// g(q') at exit, saving one force evaluation per step in trajectory loops.
template <class Model>
void baoab_step(State& s, const LangevinParams& lp, double h, const Model& model,
                const std::vector<double>& noise, StepWorkspace& w,
                std::vector<double>* cached_force = nullptr) {
  const std::size_t d = s.dim();
  check_dim(d, noise.size(), "baoab_step");
  if (cached_force != nullptr && cached_force->size() == d) {
    w.k1 = *cached_force;
  } else {
    model.force(s.q, w.k1);
  }
  const double half = 0.5 * h;
  for (std::size_t i = 0; i < d; ++i) s.p[i] += half * w.k1[i];  // B
  for (std::size_t i = 0; i < d; ++i) s.q[i] += half * s.p[i];   // A
  const double decay = std::exp(-lp.gamma * h);                  // O
  const double sd = ou_noise_stddev(lp, h);
  for (std::size_t i = 0; i < d; ++i) s.p[i] = decay * s.p[i] + sd * noise[i];
  for (std::size_t i = 0; i < d; ++i) s.q[i] += half * s.p[i];   // A
  model.force(s.q, w.k2);
  for (std::size_t i = 0; i < d; ++i) s.p[i] += half * w.k2[i];  // B
  if (cached_force != nullptr) *cached_force = w.k2;
}

template <class Model>
State baoab_step(const State& s, const LangevinParams& lp, double h, const Model& model,
                 const std::vector<double>& noise) {
  State out = s;
  StepWorkspace w;
  baoab_step(out, lp, h, model, noise, w);
  return out;
}

// || (grad phi)^T J (grad phi) - J ||_max for one Nystrom step phi, with
// J = [0 I; -I 0] and grad phi from central finite differences. Zero (up
// to FD error) certifies symplecticity of the step at this state.
template <class Model>
double symplecticity_defect(const NystromCoefficients& c, double dt, const Model& model,
                            const State& s, double fd_eps = 1e-6) {
  const std::size_t d = s.dim();
  const std::size_t n = 2 * d;
  std::vector<double> jac(n * n);  // row-major, columns indexed by input coordinate
  StepWorkspace w;
  for (std::size_t col = 0; col < n; ++col) {
    State plus = s, minus = s;
    double& vp = (col < d) ? plus.q[col] : plus.p[col - d];
    double& vm = (col < d) ? minus.q[col] : minus.p[col - d];
    vp += fd_eps;
    vm -= fd_eps;
    nystrom_step(plus, c, dt, model, w);
    nystrom_step(minus, c, dt, model, w);
    for (std::size_t row = 0; row < n; ++row) {
      const double fp = (row < d) ? plus.q[row] : plus.p[row - d];
      const double fm = (row < d) ? minus.q[row] : minus.p[row - d];
      jac[row * n + col] = (fp - fm) / (2.0 * fd_eps);
    }
  }
  // M^T J M - J, exploiting the block form of J
  double defect = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double sum = 0.0;
      for (std::size_t k = 0; k < d; ++k)
        sum += jac[k * n + a] * jac[(k + d) * n + b] - jac[(k + d) * n + a] * jac[k * n + b];
      const double target = (a < d && b == a + d) ? 1.0 : ((b < d && a == b + d) ? -1.0 : 0.0);
      defect = std::max(defect, std::abs(sum - target));
    }
  }
  return defect;
}

// Which stepper generates a trajectory, with its parameters and step size.
struct SchemeSpec {
  enum class Kind { nystrom, stochastic_nystrom, baoab };
  Kind kind = Kind::nystrom;
  NystromParams params{0.5, 0.5};
  LangevinParams langevin{};
  double step = 0.0;

  bool stochastic() const { return kind != Kind::nystrom; }
  void validate() const {
    if (!(step > 0.0)) throw std::invalid_argument("SchemeSpec: step must be > 0");
    if (kind != Kind::baoab) derive_coefficients(params);
  }
};

}  // namespace nysalt
