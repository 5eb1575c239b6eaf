#pragma once

// Benchmark dynamical systems: the Fermi-Pasta-Ulam chain of alternating
// soft quartic and stiff harmonic springs, and the 1-D linear oscillator.
// Both expose force(), force_jvp() (Jacobian-vector product of the force)
// and hamiltonian(); Langevin variants reuse the same force fields.

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "nysalt/rng.hpp"
#include "nysalt/state.hpp"

namespace nysalt {

// Friction/diffusion pair of the Langevin dynamics dp = (g(q) - gamma p)dt + sigma dW.
// gamma == 0 is allowed; all noise formulas use their gamma -> 0 limits.
struct LangevinParams {
  double gamma = 0.0;
  double sigma = 0.0;

  LangevinParams() = default;
  LangevinParams(double gamma_in, double sigma_in) : gamma(gamma_in), sigma(sigma_in) {
    if (gamma < 0.0) throw std::invalid_argument("LangevinParams: gamma must be >= 0");
    if (sigma < 0.0) throw std::invalid_argument("LangevinParams: sigma must be >= 0");
  }
};

// Standard deviation of the exact OU increment over a step of length dt:
// sigma * sqrt((1 - exp(-2 gamma dt)) / (2 gamma)), with the gamma -> 0 limit
// sigma * sqrt(dt). Uses expm1 so tiny gamma*dt stays accurate.
inline double ou_noise_stddev(const LangevinParams& lp, double dt) {
  if (lp.sigma == 0.0) return 0.0;
  if (lp.gamma == 0.0) return lp.sigma * std::sqrt(dt);
  return lp.sigma * std::sqrt(-std::expm1(-2.0 * lp.gamma * dt) / (2.0 * lp.gamma));
}

// Per-spring stiff energies I_j and their total I.
struct EnergyDecomposition {
  std::vector<double> per_spring;
  double total = 0.0;
};

// Scaled stiff-spring coordinates: x0/x1 are the scaled displacement and
// expansion of each stiff spring, y0/y1 the matching velocities.
struct StiffCoordinates {
  std::vector<double> x0, x1, y0, y1;
};

class FpuModel {
 public:
  FpuModel(int m, double omega) : m_(m), omega_(omega) {
    if (m < 1) throw std::invalid_argument("FpuModel: m must be >= 1");
    if (!(omega > 0.0)) throw std::invalid_argument("FpuModel: omega must be > 0");
  }

  int springs() const { return m_; }
  double omega() const { return omega_; }
  std::size_t dim() const { return static_cast<std::size_t>(2 * m_); }

  // g(q) = -grad V(q), fixed ends q_0 = q_{2m+1} = 0.
  void force(const std::vector<double>& q, std::vector<double>& g) const {
    check_dim(dim(), q.size(), "FpuModel::force");
    g.resize(q.size());
    const double w2h = 0.5 * omega_ * omega_;
    for (int i = 1; i <= m_; ++i) {
      const double q_odd = q[2 * i - 2];   // q_{2i-1}
      const double q_even = q[2 * i - 1];  // q_{2i}
      const double q_prev = (i == 1) ? 0.0 : q[2 * i - 3];              // q_{2i-2}
      const double q_next = (i == m_) ? 0.0 : q[2 * i];                 // q_{2i+1}
      const double stiff = w2h * (q_even - q_odd);
      const double soft_left = q_odd - q_prev;
      const double soft_right = q_next - q_even;
      g[2 * i - 2] = stiff - 4.0 * soft_left * soft_left * soft_left;
      g[2 * i - 1] = -stiff + 4.0 * soft_right * soft_right * soft_right;
    }
  }

  // out = (grad g)(q) * v; grad g = -hess V is block tridiagonal.
  void force_jvp(const std::vector<double>& q, const std::vector<double>& v,
                 std::vector<double>& out) const {
    check_dim(dim(), q.size(), "FpuModel::force_jvp");
    check_dim(dim(), v.size(), "FpuModel::force_jvp");
    out.resize(q.size());
    const double w2h = 0.5 * omega_ * omega_;
    for (int i = 1; i <= m_; ++i) {
      const double q_odd = q[2 * i - 2];
      const double q_even = q[2 * i - 1];
      const double q_prev = (i == 1) ? 0.0 : q[2 * i - 3];
      const double q_next = (i == m_) ? 0.0 : q[2 * i];
      const double v_odd = v[2 * i - 2];
      const double v_even = v[2 * i - 1];
      const double v_prev = (i == 1) ? 0.0 : v[2 * i - 3];
      const double v_next = (i == m_) ? 0.0 : v[2 * i];
      const double soft_left = q_odd - q_prev;
      const double soft_right = q_next - q_even;
      out[2 * i - 2] = w2h * (v_even - v_odd) -
                       12.0 * soft_left * soft_left * (v_odd - v_prev);
      out[2 * i - 1] = -w2h * (v_even - v_odd) +
                       12.0 * soft_right * soft_right * (v_next - v_even);
    }
  }

  double potential(const std::vector<double>& q) const {
    check_dim(dim(), q.size(), "FpuModel::potential");
    double stiff = 0.0, soft = 0.0;
    for (int i = 1; i <= m_; ++i) {
      const double diff = q[2 * i - 1] - q[2 * i - 2];
      stiff += diff * diff;
    }
    for (int i = 0; i <= m_; ++i) {
      const double left = (i == 0) ? 0.0 : q[2 * i - 1];   // q_{2i}
      const double right = (i == m_) ? 0.0 : q[2 * i];     // q_{2i+1}
      const double diff = right - left;
      const double d2 = diff * diff;
      soft += d2 * d2;
    }
    return 0.25 * omega_ * omega_ * stiff + soft;
  }

  double kinetic(const std::vector<double>& p) const {
    check_dim(dim(), p.size(), "FpuModel::kinetic");
    double sum = 0.0;
    for (double v : p) sum += v * v;
    return 0.5 * sum;
  }

  double hamiltonian(const State& s) const { return kinetic(s.p) + potential(s.q); }

  StiffCoordinates stiff_coordinates(const State& s) const {
    check_dim(dim(), s.dim(), "FpuModel::stiff_coordinates");
    StiffCoordinates c;
    c.x0.resize(m_);
    c.x1.resize(m_);
    c.y0.resize(m_);
    c.y1.resize(m_);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < m_; ++i) {
      const double q_odd = s.q[2 * i], q_even = s.q[2 * i + 1];
      const double p_odd = s.p[2 * i], p_even = s.p[2 * i + 1];
      c.x0[i] = (q_even + q_odd) * inv_sqrt2;
      c.x1[i] = (q_even - q_odd) * inv_sqrt2;
      c.y0[i] = (p_even + p_odd) * inv_sqrt2;
      c.y1[i] = (p_even - p_odd) * inv_sqrt2;
    }
    return c;
  }

  // Inverse of the orthogonal change of variables above.
  State from_stiff_coordinates(const StiffCoordinates& c) const {
    if (static_cast<int>(c.x0.size()) != m_ || static_cast<int>(c.x1.size()) != m_ ||
        static_cast<int>(c.y0.size()) != m_ || static_cast<int>(c.y1.size()) != m_)
      throw std::invalid_argument("FpuModel::from_stiff_coordinates: size mismatch");
    State s(dim());
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < m_; ++i) {
      s.q[2 * i] = (c.x0[i] - c.x1[i]) * inv_sqrt2;
      s.q[2 * i + 1] = (c.x0[i] + c.x1[i]) * inv_sqrt2;
      s.p[2 * i] = (c.y0[i] - c.y1[i]) * inv_sqrt2;
      s.p[2 * i + 1] = (c.y0[i] + c.y1[i]) * inv_sqrt2;
    }
    return s;
  }

  // I_j = (y1_j^2 + omega^2 x1_j^2) / 2, the harmonic energy of the j-th
  // stiff spring; total I is the main observable of the benchmark.
  EnergyDecomposition stiff_energies(const State& s) const {
    const StiffCoordinates c = stiff_coordinates(s);
    EnergyDecomposition e;
    e.per_spring.resize(m_);
    for (int j = 0; j < m_; ++j) {
      e.per_spring[j] = 0.5 * (c.y1[j] * c.y1[j] + omega_ * omega_ * c.x1[j] * c.x1[j]);
      e.total += e.per_spring[j];
    }
    return e;
  }

  double total_stiff_energy(const State& s) const { return stiff_energies(s).total; }

  // Nearly-harmonic initial condition: x0 = y0 = 1, x1 = 1/omega + zeta,
  // y1 = 1 + eta with zeta, eta ~ N(0,1)/omega.
  State sample_initial(const CounterRng& rng, std::uint64_t draw_index) const {
    StiffCoordinates c;
    c.x0.assign(m_, 1.0);
    c.y0.assign(m_, 1.0);
    c.x1.resize(m_);
    c.y1.resize(m_);
    for (int i = 0; i < m_; ++i) {
      const auto z = rng.normal_pair(draw_index, static_cast<std::uint32_t>(i));
      c.x1[i] = 1.0 / omega_ + z[0] / omega_;
      c.y1[i] = 1.0 + z[1] / omega_;
    }
    return from_stiff_coordinates(c);
  }
};

// q'' = -Omega q in d dimensions (d = 1 matches the closed-form analysis).
class LinearModel {
 public:
  explicit LinearModel(double omega_sq, std::size_t dim = 1) : omega_sq_(omega_sq), dim_(dim) {
    if (!(omega_sq > 0.0)) throw std::invalid_argument("LinearModel: Omega must be > 0");
    if (dim < 1) throw std::invalid_argument("LinearModel: dim must be >= 1");
  }

  double omega_sq() const { return omega_sq_; }
  std::size_t dim() const { return dim_; }

  void force(const std::vector<double>& q, std::vector<double>& g) const {
    check_dim(dim_, q.size(), "LinearModel::force");
    g.resize(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) g[i] = -omega_sq_ * q[i];
  }

  void force_jvp(const std::vector<double>& q, const std::vector<double>& v,
                 std::vector<double>& out) const {
    check_dim(dim_, q.size(), "LinearModel::force_jvp");
    check_dim(dim_, v.size(), "LinearModel::force_jvp");
    out.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = -omega_sq_ * v[i];
  }

  double hamiltonian(const State& s) const {
    check_dim(dim_, s.dim(), "LinearModel::hamiltonian");
    double sum = 0.0;
    for (std::size_t i = 0; i < dim_; ++i)
      sum += 0.5 * s.p[i] * s.p[i] + 0.5 * omega_sq_ * s.q[i] * s.q[i];
    return sum;
  }

 private:
  double omega_sq_;
  std::size_t dim_;
};

// Drift matrices of the 1-D linear system, row-major 2x2:
// A = [0 1; -Omega 0], A_gamma = [0 1; -Omega -gamma].
using Mat2 = std::array<double, 4>;

inline Mat2 mat2_mul(const Mat2& a, const Mat2& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
          a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

inline std::array<double, 2> mat2_apply(const Mat2& m, const std::array<double, 2>& v) {
  return {m[0] * v[0] + m[1] * v[1], m[2] * v[0] + m[3] * v[1]};
}

inline double mat2_det(const Mat2& m) { return m[0] * m[3] - m[1] * m[2]; }

inline std::pair<Mat2, Mat2> linear_matrices(double omega_sq, double gamma) {
  if (!(omega_sq > 0.0)) throw std::invalid_argument("linear_matrices: Omega must be > 0");
  if (gamma < 0.0) throw std::invalid_argument("linear_matrices: gamma must be >= 0");
  const Mat2 a = {0.0, 1.0, -omega_sq, 0.0};
  const Mat2 a_gamma = {0.0, 1.0, -omega_sq, -gamma};
  return {a, a_gamma};
}

}  // namespace nysalt
