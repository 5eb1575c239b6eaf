#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nysalt/cli_commands.hpp"
#include "nysalt/config.hpp"
#include "nysalt/io.hpp"

using namespace nysalt;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("nysalt_test_" + std::to_string(std::rand()) + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const {
    return (sub.empty() ? path : path / sub).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NYSALT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("trajectory CSV round trip is bit exact", "[io]") {
  TempDir dir;
  std::vector<double> times = {0.0, 0.1, 0.2};
  std::vector<State> states;
  for (int i = 0; i < 3; ++i)
    states.push_back(State({0.1234567890123456789 * (i + 1), -2.0 / 3.0 * i},
                           {1e-17 * (i + 1), 3.0 + i}));
  std::vector<std::vector<double>> noise = {{0.5, -0.25}, {1.0 / 3.0, 2e-8}};
  const std::string path = dir.str("traj.csv");
  write_trajectory_csv(path, times, states, &noise);
  const TrajectoryFile tf = read_trajectory_csv(path);
  REQUIRE(tf.times == times);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(tf.states[i].q == states[i].q);
    REQUIRE(tf.states[i].p == states[i].p);
  }
  REQUIRE(tf.noise == noise);
}

TEST_CASE("CSV column schema", "[io]") {
  TempDir dir;
  std::vector<double> times = {0.0, 0.1};
  std::vector<State> states = {State(3), State(3)};
  const std::string det = dir.str("det.csv");
  const std::string sto = dir.str("sto.csv");
  std::vector<std::vector<double>> noise = {{0.0, 0.0, 0.0}};
  write_trajectory_csv(det, times, states);
  write_trajectory_csv(sto, times, states, &noise);
  std::ifstream din(det), sin(sto);
  std::string dhead, shead;
  std::getline(din, dhead);
  std::getline(sin, shead);
  REQUIRE(dhead == "t,q1,q2,q3,p1,p2,p3");
  REQUIRE(shead == "t,q1,q2,q3,p1,p2,p3,xi1,xi2,xi3");
  // 1 + 2d columns without noise, 1 + 3d with
  REQUIRE(std::count(dhead.begin(), dhead.end(), ',') == 6);
  REQUIRE(std::count(shead.begin(), shead.end(), ',') == 9);
}

TEST_CASE("ensemble round trip", "[io]") {
  TempDir dir;
  const FpuModel model(3, 50.0);
  SchemeSpec gen;
  gen.kind = SchemeSpec::Kind::stochastic_nystrom;
  gen.langevin = LangevinParams(0.01, 0.05);
  gen.step = 1e-3;
  const auto ens = generate_ensemble(model, gen, fpu_initial_sampler(model, 4), 3, 5, 4,
                                     4, 1);
  write_ensemble(dir.str("ens"), ens);
  const TrajectoryEnsemble back = read_ensemble(dir.str("ens"));
  REQUIRE(back.num_trajectories() == 3);
  REQUIRE(back.num_transitions() == 5);
  REQUIRE(back.meta.gap == 4);
  REQUIRE(back.delta() == ens.delta());
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t i = 0; i <= 5; ++i) {
      REQUIRE(back.states[m][i].q == ens.states[m][i].q);
      REQUIRE(back.states[m][i].p == ens.states[m][i].p);
    }
    for (std::size_t i = 0; i < 5; ++i) REQUIRE(back.noise[m][i] == ens.noise[m][i]);
  }
}

TEST_CASE("fit result JSON round trip", "[io]") {
  FitResult fit;
  fit.theta = {0.499, 0.403};
  fit.loss = 1.25e-7;
  fit.iterations = 17;
  fit.gradient_norm = 3e-9;
  fit.converged = true;
  const json j = fit_to_json(fit, "abc123");
  const FitResult back = fit_from_json(j);
  REQUIRE(back.theta.b1 == fit.theta.b1);
  REQUIRE(back.theta.beta1 == fit.theta.beta1);
  REQUIRE(back.loss == fit.loss);
  REQUIRE(back.converged);
  REQUIRE(j.at("data_manifest_hash") == "abc123");
  REQUIRE(j.at("optimizer").contains("starts"));
}

TEST_CASE("config round trip and presets", "[io]") {
  ExperimentConfig c = preset_config("fpu-langevin");
  c.seed = 99;
  c.gap_list = {10, 20};
  const ExperimentConfig back = config_from_json(config_to_json(c));
  REQUIRE(back.mode == "stochastic");
  REQUIRE(back.seed == 99);
  REQUIRE(back.gap_list == c.gap_list);
  REQUIRE(back.num_trajectories == 512);
  REQUIRE(back.initial == "stationary");
  REQUIRE_THROWS_AS(preset_config("nope"), std::invalid_argument);
  ExperimentConfig bad = preset_config("fpu-det");
  bad.mode = "sideways";
  REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("generate command writes a reproducible ensemble", "[io]") {
  TempDir dir;
  ExperimentConfig c = preset_config("fpu-det");
  c.num_trajectories = 2;
  c.h = 1e-3;
  c.gap = 20;
  c.t_train = 0.1;  // 5 coarse steps
  c.seed = 7;
  c.out_dir = dir.str("a");
  REQUIRE(cmd_generate(c) == kExitOk);
  REQUIRE(fs::exists(dir.str("a") + "/manifest.json"));
  REQUIRE(fs::exists(dir.str("a") + "/traj_00000.csv"));
  REQUIRE(fs::exists(dir.str("a") + "/traj_00001.csv"));
  c.out_dir = dir.str("b");
  REQUIRE(cmd_generate(c) == kExitOk);
  REQUIRE(slurp(dir.str("a") + "/traj_00000.csv") == slurp(dir.str("b") + "/traj_00000.csv"));
  REQUIRE(slurp(dir.str("a") + "/traj_00001.csv") == slurp(dir.str("b") + "/traj_00001.csv"));

  // stochastic mode emits xi columns
  ExperimentConfig s = preset_config("fpu-langevin");
  s.num_trajectories = 1;
  s.h = 1e-3;
  s.gap = 10;
  s.t_train = 0.05;
  s.initial = "nearly-harmonic";  // skip the long equilibrium run in this smoke test
  s.out_dir = dir.str("c");
  REQUIRE(cmd_generate(s) == kExitOk);
  std::ifstream in(dir.str("c") + "/traj_00000.csv");
  std::string head;
  std::getline(in, head);
  REQUIRE(head.find("xi1") != std::string::npos);
}

TEST_CASE("infer command recovers self-generated parameters", "[io]") {
  TempDir dir;
  ExperimentConfig c = preset_config("fpu-det");
  c.num_trajectories = 6;
  c.h = 0.005;
  c.gap = 1;
  c.t_train = 0.1;
  c.generator_b1 = 0.45;
  c.generator_beta1 = 0.43;
  c.seed = 13;
  c.out_dir = dir.str("data");
  REQUIRE(cmd_generate(c) == kExitOk);
  c.out_dir = dir.str("fit");
  REQUIRE(cmd_infer(c, dir.str("data")) == kExitOk);
  const json fit = read_json_file(dir.str("fit") + "/fit.json");
  REQUIRE(fit.at("theta").at("b1").get<double>() == Catch::Approx(0.45).margin(1e-5));
  REQUIRE(fit.at("theta").at("beta1").get<double>() == Catch::Approx(0.43).margin(1e-5));
  REQUIRE(fit.contains("data_manifest_hash"));
}

TEST_CASE("infer command rejects missing noise in stochastic mode", "[io]") {
  TempDir dir;
  ExperimentConfig c = preset_config("fpu-det");
  c.num_trajectories = 2;
  c.h = 0.005;
  c.gap = 2;
  c.t_train = 0.05;
  c.out_dir = dir.str("data");
  REQUIRE(cmd_generate(c) == kExitOk);
  ExperimentConfig s = c;
  s.mode = "stochastic";
  s.out_dir = dir.str("fit");
  REQUIRE(cmd_infer(s, dir.str("data")) == kExitConfigError);
}

TEST_CASE("simulate and analyze commands", "[io]") {
  TempDir dir;
  ExperimentConfig c = preset_config("fpu-det");
  c.num_trajectories = 3;
  c.h = 1e-3;
  c.gap = 10;
  c.t_test = 0.2;
  c.seed = 5;

  // reference: fine Verlet kept on the coarse grid
  c.generator_b1 = 0.5;
  c.generator_beta1 = 0.5;
  c.t_train = c.t_test;
  c.out_dir = dir.str("ref");
  REQUIRE(cmd_generate(c) == kExitOk);

  // test run: the coarse-step scheme via simulate
  ExperimentConfig sim = c;
  sim.gap = 10;
  sim.h = 1e-3;  // delta = gap * h = 0.01
  sim.out_dir = dir.str("test");
  REQUIRE(cmd_simulate(sim, {0.5, 0.4}) == kExitOk);
  REQUIRE(fs::exists(dir.str("test") + "/energies.csv"));

  // the two grids differ (reference delta = 0.01 over 20 steps, test the
  // same): analyze compares them
  ExperimentConfig ana = c;
  ana.out_dir = dir.str("metrics");
  REQUIRE(cmd_analyze(ana, dir.str("ref"), dir.str("test")) == kExitOk);
  REQUIRE(fs::exists(dir.str("metrics") + "/metrics.json"));
  const json metrics = read_json_file(dir.str("metrics") + "/metrics.json");
  REQUIRE(metrics.at("avg_rel_rmse_I").get<double>() >= 0.0);

  // identical inputs give zero errors
  ExperimentConfig self = c;
  self.out_dir = dir.str("metrics_self");
  REQUIRE(cmd_analyze(self, dir.str("ref"), dir.str("ref")) == kExitOk);
  const json self_metrics = read_json_file(dir.str("metrics_self") + "/metrics.json");
  REQUIRE(self_metrics.at("avg_rel_rmse_I").get<double>() == 0.0);
  REQUIRE(self_metrics.at("pdf_tvd").get<double>() == 0.0);
}

TEST_CASE("simulate reports divergence with the first bad index", "[io]") {
  TempDir dir;
  ExperimentConfig c = preset_config("fpu-det");
  c.num_trajectories = 1;
  c.h = 1e-4;
  c.gap = 400;  // delta = 2 / omega, the Verlet stability edge
  c.t_test = 2.0;
  c.seed = 3;
  c.out_dir = dir.str("blowup");
  REQUIRE(cmd_simulate(c, {0.5, 0.5}) == kExitOk);
  const TrajectoryEnsemble ens = read_ensemble(dir.str("blowup"));
  REQUIRE(ens.first_bad[0] >= 0);
}

TEST_CASE("linear command emits the analysis table", "[io]") {
  TempDir dir;
  ExperimentConfig c = preset_config("linear");
  c.out_dir = dir.str("lin");
  REQUIRE(cmd_linear(c) == kExitOk);
  const json out = read_json_file(dir.str("lin") + "/linear.json");
  REQUIRE(out.at("optimal").at("b1").get<double>() == Catch::Approx(0.5).margin(0.01));
  REQUIRE(out.at("optimal").at("beta1").get<double>() == Catch::Approx(0.40).margin(0.01));
  const double ratio = out.at("delta_star_optimal").get<double>() /
                       out.at("delta_star_verlet").get<double>();
  REQUIRE(ratio == Catch::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-6));
  REQUIRE(fs::exists(dir.str("lin") + "/linear.csv"));
}

TEST_CASE("command-line binary smoke test", "[io]") {
  TempDir dir;
  SECTION("version and bad arguments") {
    REQUIRE(run_cli("--version") == 0);
    REQUIRE(run_cli("fly --config nowhere.json") != 0);
  }
  SECTION("generate and infer through the binary") {
    ExperimentConfig c = preset_config("fpu-det");
    c.num_trajectories = 2;
    c.h = 0.005;
    c.gap = 1;
    c.t_train = 0.05;
    c.generator_b1 = 0.45;
    c.generator_beta1 = 0.43;
    write_json_file(dir.str("config.json"), config_to_json(c));
    REQUIRE(run_cli("--config " + dir.str("config.json") + " --out " + dir.str("data") +
                    " generate") == 0);
    REQUIRE(run_cli("--config " + dir.str("config.json") + " --out " + dir.str("fit") +
                    " infer --data " + dir.str("data")) == 0);
    const json fit = read_json_file(dir.str("fit") + "/fit.json");
    REQUIRE(fit.at("theta").at("b1").get<double>() == Catch::Approx(0.45).margin(1e-4));
    // re-running from the emitted manifest reproduces the data bit for bit
    REQUIRE(run_cli("--config " + dir.str("data") + "/manifest.json --out " +
                    dir.str("data2") + " generate") == 0);
    REQUIRE(slurp(dir.str("data") + "/traj_00000.csv") ==
            slurp(dir.str("data2") + "/traj_00000.csv"));
    // config errors exit with code 2
    ExperimentConfig bad = c;
    bad.gap = 7;  // does not divide t_train / h = 10
    write_json_file(dir.str("bad.json"), config_to_json(bad));
    REQUIRE(run_cli("--config " + dir.str("bad.json") + " --out " + dir.str("x") +
                    " generate") == 2);
  }
}
