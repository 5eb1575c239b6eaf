#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nysalt/models.hpp"
#include "nysalt/rng.hpp"
#include "oracles.hpp"

using namespace nysalt;

namespace {

State random_state(const FpuModel& model, std::uint64_t seed, double scale = 1.0) {
  CounterRng rng(seed, 0, RngPurpose::monte_carlo);
  State s(model.dim());
  for (std::size_t i = 0; i < model.dim(); ++i) {
    s.q[i] = scale * rng.normal(i, 0) / model.omega();
    s.p[i] = scale * rng.normal(i, 2);
  }
  return s;
}

}  // namespace

TEST_CASE("force vanishes at the origin", "[models]") {
  const FpuModel model(3, 50.0);
  std::vector<double> q(model.dim(), 0.0), g;
  model.force(q, g);
  for (double v : g) REQUIRE(v == 0.0);
}

TEST_CASE("force matches finite differences of -V at random states", "[models]") {
  const FpuModel model(3, 50.0);
  for (int trial = 0; trial < 100; ++trial) {
    const State s = random_state(model, 100 + trial);
    std::vector<double> g;
    model.force(s.q, g);
    const auto fd = oracles::fd_gradient(
        [&](const std::vector<double>& q) { return -model.potential(q); }, s.q, 1e-5);
    for (std::size_t i = 0; i < g.size(); ++i) {
      REQUIRE(std::abs(g[i] - fd[i]) < 1e-6 * (1.0 + std::abs(g[i])));
    }
  }
}

TEST_CASE("single-spring force agrees with the hand expansion", "[models]") {
  // m = 1, omega = 1, q = (1, 1): the stiff difference vanishes and only the
  // boundary quartic terms contribute: g = (-4, -4).
  const FpuModel model(1, 1.0);
  std::vector<double> g;
  model.force({1.0, 1.0}, g);
  REQUIRE(g[0] == Catch::Approx(-4.0).margin(1e-14));
  REQUIRE(g[1] == Catch::Approx(-4.0).margin(1e-14));
}

TEST_CASE("force rejects wrong dimensions", "[models]") {
  const FpuModel model(3, 50.0);
  std::vector<double> q(5, 0.0), g;
  REQUIRE_THROWS_AS(model.force(q, g), std::invalid_argument);
  REQUIRE_THROWS_AS(model.hamiltonian(State(5)), std::invalid_argument);
}

TEST_CASE("force_jvp matches finite differences of the force", "[models]") {
  const FpuModel model(3, 50.0);
  CounterRng rng(77, 0, RngPurpose::monte_carlo);
  for (int trial = 0; trial < 20; ++trial) {
    const State s = random_state(model, 500 + trial);
    std::vector<double> v(model.dim());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = rng.normal(trial * 100 + i, 1);
    std::vector<double> jv;
    model.force_jvp(s.q, v, jv);
    const double eps = 1e-6;
    std::vector<double> qp = s.q, qm = s.q, gp, gm;
    for (std::size_t i = 0; i < v.size(); ++i) {
      qp[i] += eps * v[i];
      qm[i] -= eps * v[i];
    }
    model.force(qp, gp);
    model.force(qm, gm);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double fd = (gp[i] - gm[i]) / (2.0 * eps);
      REQUIRE(jv[i] == Catch::Approx(fd).margin(1e-4).epsilon(1e-5));
    }
  }
}

TEST_CASE("hamiltonian of the zero state is zero", "[models]") {
  const FpuModel model(3, 50.0);
  REQUIRE(model.hamiltonian(State(model.dim())) == 0.0);
}

TEST_CASE("hamiltonian agrees when computed through stiff coordinates", "[models]") {
  const FpuModel model(3, 50.0);
  // nearly-harmonic initial state with the randomness switched off
  StiffCoordinates c;
  c.x0.assign(3, 1.0);
  c.y0.assign(3, 1.0);
  c.x1.assign(3, 1.0 / model.omega());
  c.y1.assign(3, 1.0);
  const State s = model.from_stiff_coordinates(c);
  const double direct = model.hamiltonian(s);
  // K + V split through the transformed variables: the stiff quadratic part
  // is exactly the total stiff energy, the rest is kinetic (y0) + quartic
  double via_coords = model.stiff_energies(s).total;
  for (double y : c.y0) via_coords += 0.5 * y * y;
  double quartic = 0.0;
  {
    const int m = model.springs();
    for (int i = 0; i <= m; ++i) {
      const double left = (i == 0) ? 0.0 : s.q[2 * i - 1];
      const double right = (i == m) ? 0.0 : s.q[2 * i];
      const double diff = right - left;
      quartic += diff * diff * diff * diff;
    }
  }
  via_coords += quartic;
  REQUIRE(direct == Catch::Approx(via_coords).epsilon(1e-12));
}

TEST_CASE("hamiltonian is invariant under the sign flip", "[models]") {
  const FpuModel model(3, 50.0);
  const State s = random_state(model, 9);
  State flipped = s;
  for (double& v : flipped.q) v = -v;
  for (double& v : flipped.p) v = -v;
  REQUIRE(model.hamiltonian(s) == Catch::Approx(model.hamiltonian(flipped)).epsilon(1e-14));
}

TEST_CASE("energy is nearly conserved along a fine leapfrog trajectory", "[models]") {
  const FpuModel model(3, 50.0);
  CounterRng rng(11, 0, RngPurpose::initial_condition);
  State s = model.sample_initial(rng, 0);
  const double h0 = model.hamiltonian(s);
  const double h = 1e-6;
  double max_drift = 0.0;
  for (int step = 0; step < 100000; ++step) {
    s = oracles::verlet_step(s, h, model);
    max_drift = std::max(max_drift, std::abs(model.hamiltonian(s) - h0) / h0);
  }
  REQUIRE(max_drift < 1e-6);
}

TEST_CASE("stiff coordinates of the zero state vanish", "[models]") {
  const FpuModel model(3, 50.0);
  const StiffCoordinates c = model.stiff_coordinates(State(model.dim()));
  for (int i = 0; i < 3; ++i) {
    REQUIRE(c.x0[i] == 0.0);
    REQUIRE(c.x1[i] == 0.0);
    REQUIRE(c.y0[i] == 0.0);
    REQUIRE(c.y1[i] == 0.0);
  }
}

TEST_CASE("equal displacements give zero expansion", "[models]") {
  const FpuModel model(2, 10.0);
  State s(model.dim());
  const double a = 0.7;
  for (std::size_t i = 0; i < model.dim(); ++i) s.q[i] = a;
  const StiffCoordinates c = model.stiff_coordinates(s);
  for (int i = 0; i < 2; ++i) {
    REQUIRE(c.x1[i] == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(c.x0[i] == Catch::Approx(a * std::sqrt(2.0)).epsilon(1e-14));
  }
}

TEST_CASE("stiff coordinates round-trip and preserve the norm", "[models]") {
  const FpuModel model(3, 50.0);
  const State s = random_state(model, 21);
  const StiffCoordinates c = model.stiff_coordinates(s);
  const State back = model.from_stiff_coordinates(c);
  double norm_state = 0.0, norm_coords = 0.0;
  for (std::size_t i = 0; i < model.dim(); ++i) {
    REQUIRE(back.q[i] == Catch::Approx(s.q[i]).margin(1e-14));
    REQUIRE(back.p[i] == Catch::Approx(s.p[i]).margin(1e-14));
    norm_state += s.q[i] * s.q[i] + s.p[i] * s.p[i];
  }
  for (int i = 0; i < 3; ++i)
    norm_coords += c.x0[i] * c.x0[i] + c.x1[i] * c.x1[i] + c.y0[i] * c.y0[i] +
                   c.y1[i] * c.y1[i];
  REQUIRE(norm_state == Catch::Approx(norm_coords).epsilon(1e-13));
}

TEST_CASE("stiff energies at the reference initial condition", "[models]") {
  const FpuModel model(3, 50.0);
  REQUIRE(model.stiff_energies(State(model.dim())).total == 0.0);
  StiffCoordinates c;
  c.x0.assign(3, 1.0);
  c.y0.assign(3, 1.0);
  c.x1.assign(3, 1.0 / model.omega());
  c.y1.assign(3, 1.0);
  const EnergyDecomposition e = model.stiff_energies(model.from_stiff_coordinates(c));
  for (double i_j : e.per_spring) REQUIRE(i_j == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE(e.total == Catch::Approx(3.0).epsilon(1e-12));
  double sum = 0.0;
  for (double i_j : e.per_spring) sum += i_j;
  REQUIRE(e.total == Catch::Approx(sum).epsilon(1e-12));
}

TEST_CASE("fine trajectory shows near-constant I with slow energy exchange", "[models]") {
  const FpuModel model(3, 50.0);
  CounterRng rng(3, 0, RngPurpose::initial_condition);
  State s = model.sample_initial(rng, 0);
  const double h = 1e-4;
  const double i0 = model.total_stiff_energy(s);
  double i_min = i0, i_max = i0;
  double j1_min = model.stiff_energies(s).per_spring[0];
  double j1_max = j1_min;
  for (int step = 1; step <= 500000; ++step) {  // T = 50, the slow time scale
    s = oracles::verlet_step(s, h, model);
    const EnergyDecomposition e = model.stiff_energies(s);
    i_min = std::min(i_min, e.total);
    i_max = std::max(i_max, e.total);
    j1_min = std::min(j1_min, e.per_spring[0]);
    j1_max = std::max(j1_max, e.per_spring[0]);
  }
  REQUIRE((i_max - i_min) / i0 < 0.2);       // total stiff energy nearly conserved
  REQUIRE((j1_max - j1_min) / i0 > 0.2);     // but individual springs trade energy
}

TEST_CASE("model parameter validation", "[models]") {
  REQUIRE_THROWS_AS(FpuModel(0, 50.0), std::invalid_argument);
  REQUIRE_THROWS_AS(FpuModel(3, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(LangevinParams(-1.0, 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(LangevinParams(0.1, -1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(LinearModel(0.0), std::invalid_argument);
}

TEST_CASE("linear drift matrices", "[models]") {
  const auto [a, a_gamma] = linear_matrices(2500.0, 0.0);
  REQUIRE(a == a_gamma);
  REQUIRE(a[0] == 0.0);
  REQUIRE(a[1] == 1.0);
  REQUIRE(a[2] == -2500.0);
  REQUIRE(a[3] == 0.0);
  REQUIRE_THROWS_AS(linear_matrices(-1.0, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(linear_matrices(1.0, -0.5), std::invalid_argument);
}
