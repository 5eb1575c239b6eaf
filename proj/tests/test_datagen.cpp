#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nysalt/datagen.hpp"
#include "nysalt/metrics.hpp"
#include "nysalt/models.hpp"

using namespace nysalt;

namespace {

struct ZeroForce {
  std::size_t d;
  std::size_t dim() const { return d; }
  void force(const std::vector<double>& q, std::vector<double>& g) const {
    g.assign(q.size(), 0.0);
  }
  void force_jvp(const std::vector<double>&, const std::vector<double>& v,
                 std::vector<double>& out) const {
    out.assign(v.size(), 0.0);
  }
};

SchemeSpec verlet_spec(double h) {
  SchemeSpec s;
  s.kind = SchemeSpec::Kind::nystrom;
  s.params = kVerlet;
  s.step = h;
  return s;
}

SchemeSpec stochastic_spec(double h, double gamma, double sigma) {
  SchemeSpec s;
  s.kind = SchemeSpec::Kind::stochastic_nystrom;
  s.params = kVerlet;
  s.langevin = LangevinParams(gamma, sigma);
  s.step = h;
  return s;
}

}  // namespace

TEST_CASE("initial-condition sampling is deterministic per seed", "[datagen]") {
  const FpuModel model(3, 50.0);
  const InitialSampler a = fpu_initial_sampler(model, 42);
  const InitialSampler b = fpu_initial_sampler(model, 42);
  const State s1 = a(7), s2 = b(7);
  REQUIRE(s1.q == s2.q);
  REQUIRE(s1.p == s2.p);
  const State s3 = a(8);
  REQUIRE(s1.q != s3.q);
}

TEST_CASE("sampled expansions have the right mean", "[datagen]") {
  const FpuModel model(3, 50.0);
  const InitialSampler sample = fpu_initial_sampler(model, 1234);
  const std::size_t n = 100000;
  double sum_x1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const StiffCoordinates c = model.stiff_coordinates(sample(i));
    sum_x1 += c.x1[0];
  }
  const double mean = sum_x1 / static_cast<double>(n);
  const double target = 1.0 / model.omega();
  const double band = 3.0 / (model.omega() * std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(mean - target) < band);
}

TEST_CASE("stationary resampling", "[datagen]") {
  const CounterRng rng(9, 0, RngPurpose::resampling);
  SECTION("empty pool is rejected") {
    REQUIRE_THROWS_AS(sample_stationary_initial({}, 3, rng), std::invalid_argument);
  }
  SECTION("single-state pool returns that state") {
    const State s({1.0, 2.0}, {3.0, 4.0});
    const auto picks = sample_stationary_initial({s}, 1, rng);
    REQUIRE(picks.size() == 1);
    REQUIRE(picks[0].q == s.q);
  }
  SECTION("fixed seed reproduces the index sequence") {
    std::vector<State> pool;
    for (int i = 0; i < 50; ++i) pool.push_back(State({double(i)}, {0.0}));
    const auto a = sample_stationary_initial(pool, 20, rng);
    const auto b = sample_stationary_initial(pool, 20, CounterRng(9, 0, RngPurpose::resampling));
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].q == b[i].q);
  }
  SECTION("resampled energies reproduce the pool distribution") {
    const FpuModel model(1, 10.0);
    std::vector<State> pool;
    CounterRng pool_rng(77, 0, RngPurpose::monte_carlo);
    for (int i = 0; i < 2000; ++i) {
      State s(model.dim());
      for (std::size_t k = 0; k < model.dim(); ++k) {
        s.q[k] = 0.1 * pool_rng.normal(i, 2 * k);
        s.p[k] = pool_rng.normal(i, 2 * k + 1);
      }
      pool.push_back(std::move(s));
    }
    const auto draws = sample_stationary_initial(pool, 10000, rng);
    std::vector<double> pool_i, draw_i;
    for (const auto& s : pool) pool_i.push_back(model.total_stiff_energy(s));
    for (const auto& s : draws) draw_i.push_back(model.total_stiff_energy(s));
    const Histogram hp = empirical_pdf(pool_i, 30, 0.0, 5.0);
    const Histogram hd = empirical_pdf(draw_i, 30, 0.0, 5.0);
    REQUIRE(tvd(hp, hd) < 0.05);
  }
}

TEST_CASE("generate_fine basics", "[datagen]") {
  const FpuModel model(3, 50.0);
  const CounterRng rng(3, 0, RngPurpose::path_noise);
  const InitialSampler ics = fpu_initial_sampler(model, 3);
  const State initial = ics(0);
  SECTION("zero steps returns only the initial state") {
    const auto fine = generate_fine(model, verlet_spec(1e-4), initial, 0, rng);
    REQUIRE(fine.states.size() == 1);
    REQUIRE(fine.increments.empty());
  }
  SECTION("energy drift stays small over T = 0.5 at h = 1e-4") {
    const auto fine = generate_fine(model, verlet_spec(1e-4), initial, 5000, rng);
    const double h0 = model.hamiltonian(fine.states.front());
    const double h1 = model.hamiltonian(fine.states.back());
    REQUIRE(std::abs(h1 - h0) / h0 < 1e-4);
    REQUIRE(fine.first_bad == -1);
  }
  SECTION("degenerate noise reproduces the deterministic path bitwise") {
    const auto det = generate_fine(model, verlet_spec(1e-3), initial, 200, rng);
    const auto sto = generate_fine(model, stochastic_spec(1e-3, 0.0, 0.0), initial, 200, rng);
    REQUIRE(sto.increments.size() == 200);
    for (std::size_t i = 0; i < det.states.size(); ++i) {
      REQUIRE(det.states[i].q == sto.states[i].q);
      REQUIRE(det.states[i].p == sto.states[i].p);
    }
  }
}

TEST_CASE("downsample keeps every gap-th state", "[datagen]") {
  std::vector<State> fine;
  for (int i = 0; i <= 12; ++i) fine.push_back(State({double(i)}, {0.0}));
  SECTION("gap one is the identity") {
    const auto coarse = downsample(fine, 1);
    REQUIRE(coarse.size() == fine.size());
  }
  SECTION("gap equal to the step count keeps the endpoints") {
    const auto coarse = downsample(fine, 12);
    REQUIRE(coarse.size() == 2);
    REQUIRE(coarse[0].q[0] == 0.0);
    REQUIRE(coarse[1].q[0] == 12.0);
  }
  SECTION("output length") {
    const auto coarse = downsample(fine, 4);
    REQUIRE(coarse.size() == 12 / 4 + 1);
    REQUIRE(coarse[1].q[0] == 4.0);
  }
  SECTION("non-divisible gap is rejected") {
    REQUIRE_THROWS_AS(downsample(fine, 5), std::invalid_argument);
  }
}

TEST_CASE("noise coarsening", "[datagen]") {
  const LangevinParams lp(0.8, 0.3);
  const double h = 0.01;
  SECTION("a single increment keeps unit weight") {
    // pathwise form: the latest fine increment enters undamped
    const std::vector<std::vector<double>> r = {{1.7}};
    const auto xi = coarsen_noise(r, lp, h, 1);
    REQUIRE(xi.size() == 1);
    REQUIRE(xi[0][0] == Catch::Approx(ou_noise_stddev(lp, h) * 1.7).epsilon(1e-15));
  }
  SECTION("weights decay with the age of the increment") {
    const std::vector<std::vector<double>> r = {{1.0}, {0.0}, {0.0}};
    const auto xi = coarsen_noise(r, lp, h, 3);
    const double expected = ou_noise_stddev(lp, h) * std::exp(-lp.gamma * 2.0 * h);
    REQUIRE(xi[0][0] == Catch::Approx(expected).epsilon(1e-13));
  }
  SECTION("zero diffusion gives zero increments") {
    const std::vector<std::vector<double>> r = {{1.0}, {-2.0}};
    const auto xi = coarsen_noise(r, LangevinParams(0.5, 0.0), h, 2);
    REQUIRE(xi[0][0] == 0.0);
  }
  SECTION("length mismatch is rejected") {
    const std::vector<std::vector<double>> r = {{1.0}, {2.0}, {3.0}};
    REQUIRE_THROWS_AS(coarsen_noise(r, lp, h, 2), std::invalid_argument);
  }
  SECTION("block variance matches the exact OU increment variance") {
    const LangevinParams params(0.5, 0.4);
    const long gap = 20;
    const double fine_h = 0.005;
    const double delta = gap * fine_h;
    CounterRng rng(314, 0, RngPurpose::monte_carlo);
    const std::size_t blocks = 100000;
    double sum = 0.0, sum_sq = 0.0;
    std::vector<std::vector<double>> r(gap, std::vector<double>(1));
    for (std::size_t b = 0; b < blocks; ++b) {
      for (long j = 0; j < gap; ++j) r[j][0] = rng.normal(b * gap + j, 0);
      const double xi = coarsen_noise(r, params, fine_h, gap)[0][0];
      sum += xi;
      sum_sq += xi * xi;
    }
    const double var = sum_sq / blocks - (sum / blocks) * (sum / blocks);
    const double target =
        params.sigma * params.sigma * (-std::expm1(-2.0 * params.gamma * delta)) /
        (2.0 * params.gamma);
    const double band = 3.0 * target * std::sqrt(2.0 / static_cast<double>(blocks));
    REQUIRE(std::abs(var - target) < band);
  }
  SECTION("gamma -> 0 limit accumulates plain Brownian increments") {
    const std::vector<std::vector<double>> r = {{1.0}, {2.0}, {3.0}};
    const auto xi = coarsen_noise(r, LangevinParams(0.0, 2.0), 0.25, 3);
    REQUIRE(xi[0][0] == Catch::Approx(2.0 * std::sqrt(0.25) * 6.0).epsilon(1e-14));
  }
}

TEST_CASE("ensembles are bit-reproducible across seeds and threads", "[datagen]") {
  const FpuModel model(3, 50.0);
  const SchemeSpec gen = stochastic_spec(1e-3, 0.01, 0.05);
  const InitialSampler ics = fpu_initial_sampler(model, 5);
  const auto a = generate_ensemble(model, gen, ics, 6, 10, 5, 5, 1);
  const auto b = generate_ensemble(model, gen, ics, 6, 10, 5, 5, 1);
  const auto c = generate_ensemble(model, gen, ics, 6, 10, 5, 5, 4);
  REQUIRE(a.num_trajectories() == 6);
  REQUIRE(a.num_transitions() == 10);
  for (std::size_t m = 0; m < 6; ++m)
    for (std::size_t i = 0; i <= 10; ++i) {
      REQUIRE(a.states[m][i].q == b.states[m][i].q);
      REQUIRE(a.states[m][i].q == c.states[m][i].q);
      REQUIRE(a.states[m][i].p == c.states[m][i].p);
    }
  for (std::size_t m = 0; m < 6; ++m)
    for (std::size_t i = 0; i < 10; ++i) REQUIRE(a.noise[m][i] == c.noise[m][i]);
}

TEST_CASE("coarse grid times are exact multiples", "[datagen]") {
  const FpuModel model(3, 50.0);
  const auto ens = generate_ensemble(model, verlet_spec(1e-4), fpu_initial_sampler(model, 1),
                                     2, 8, 25, 1, 1);
  for (std::size_t i = 0; i <= 8; ++i)
    REQUIRE(ens.times[i] == static_cast<double>(static_cast<long>(i) * 25) * 1e-4);
  REQUIRE(ens.delta() == 25 * 1e-4);
  REQUIRE(!ens.stochastic());
}

TEST_CASE("momentum residual recovers the coarsened increment exactly", "[datagen]") {
  // With no force, one coarse block of the generator satisfies
  // p_{i+1} = e^{-gamma delta} p_i + xi_i pathwise for both stochastic
  // generators, so the stored noise must reproduce the residual.
  const ZeroForce model{2};
  const double h = 0.01, gamma = 0.3, sigma = 0.7;
  const long gap = 8;
  const double delta = gap * h;
  for (const auto kind :
       {SchemeSpec::Kind::stochastic_nystrom, SchemeSpec::Kind::baoab}) {
    SchemeSpec gen;
    gen.kind = kind;
    gen.langevin = LangevinParams(gamma, sigma);
    gen.step = h;
    State init(2);
    init.p = {1.0, -0.5};
    const auto ens = generate_ensemble(model, gen, fixed_initial_sampler(init), 50, 100,
                                       gap, 99, 1);
    const double decay = std::exp(-gamma * delta);
    double max_residual_gap = 0.0;
    double var_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t m = 0; m < ens.num_trajectories(); ++m)
      for (std::size_t i = 0; i < ens.num_transitions(); ++i)
        for (std::size_t k = 0; k < 2; ++k) {
          const double residual =
              ens.states[m][i + 1].p[k] - decay * ens.states[m][i].p[k];
          max_residual_gap =
              std::max(max_residual_gap, std::abs(residual - ens.noise[m][i][k]));
          var_sum += residual * residual;
          ++count;
        }
    REQUIRE(max_residual_gap < 1e-12);
    const double target =
        sigma * sigma * (-std::expm1(-2.0 * gamma * delta)) / (2.0 * gamma);
    // 10^4 residuals: the variance estimate concentrates within a few percent
    REQUIRE(var_sum / static_cast<double>(count) ==
            Catch::Approx(target).epsilon(0.05));
  }
}

TEST_CASE("ensemble down-sampling matches direct generation", "[datagen]") {
  const FpuModel model(3, 50.0);
  const SchemeSpec gen = stochastic_spec(1e-3, 0.2, 0.05);
  const InitialSampler ics = fpu_initial_sampler(model, 7);
  const auto fine = generate_ensemble(model, gen, ics, 3, 12, 5, 7, 1);
  const auto direct = generate_ensemble(model, gen, ics, 3, 4, 15, 7, 1);
  const auto derived = downsample_ensemble(fine, 3);
  REQUIRE(derived.num_transitions() == 4);
  REQUIRE(derived.meta.gap == 15);
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t i = 0; i <= 4; ++i)
      for (std::size_t k = 0; k < model.dim(); ++k) {
        REQUIRE(derived.states[m][i].q[k] == direct.states[m][i].q[k]);
        REQUIRE(derived.states[m][i].p[k] == direct.states[m][i].p[k]);
      }
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t k = 0; k < model.dim(); ++k)
        REQUIRE(derived.noise[m][i][k] ==
                Catch::Approx(direct.noise[m][i][k]).margin(1e-15).epsilon(1e-12));
  }
}

TEST_CASE("long equilibrium runs stay finite and lose the transient", "[datagen]") {
  const FpuModel model(3, 50.0);
  const LangevinParams lp(0.5, 0.3);
  CounterRng ic(1, 0, RngPurpose::initial_condition);
  const auto pool =
      generate_long_run(model, lp, model.sample_initial(ic, 0), 50.0, 1e-3, 2, 0.1, 50);
  REQUIRE(pool.size() == 900);
  for (const auto& s : pool) REQUIRE(s.finite());
}
