#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "support/test_helpers.hpp"
#include "ttcontrol/checkpoint.hpp"
#include "ttcontrol/config.hpp"
#include "ttcontrol/csv.hpp"

using Eigen::Index;

namespace {

std::string message_of(const std::function<void()>& thrower) {
  try {
    thrower();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("a full config file parses into every field") {
  const std::string text = R"(# run description
[problem]
dimension = 6          # grid nodes
sigma = 0.5
gamma = 0.2
terminal_weight = 1.5
cubic = false

[solver]
method = "hybrid"
horizon = 0.2
tau = 0.002
micro_steps = 4
basis_size = 5
ranks = [2, 3, 3, 3, 2]
samples = 1200
delta_tol = 1e-5
delta_reg = 1e-9
hard_point_weight = 1e8
hybrid_period = 7
warmup_bellman_steps = 3
max_policy_iterations = 12
seed = 42
als_sweeps = 15
als_tol = 1e-9
resample_each_interval = true
interp = "linear"
checkpoint_interval = 50

[evaluate]
initial_conditions = 30
kind = "constant"
seed = 9
sim_tau = 0.0005
integrator = "rk4"
open_loop = false
open_loop_max_iterations = 200
open_loop_tolerance = 1e-7
traces = 4
)";
  const ttc::RunConfig config = ttc::parse_run_config(text);
  CHECK(config.dimension == 6);
  CHECK(config.sigma == 0.5);
  CHECK(config.gamma == 0.2);
  CHECK(config.terminal_weight == 1.5);
  CHECK_FALSE(config.cubic);

  CHECK(config.solver.method == ttc::Method::hybrid);
  CHECK(config.solver.horizon == 0.2);
  CHECK(config.solver.tau == 0.002);
  CHECK(config.solver.micro_steps == 4);
  CHECK(config.solver.basis_size == 5);
  CHECK(config.solver.ranks == std::vector<Index>{2, 3, 3, 3, 2});
  CHECK(config.solver.samples == 1200);
  CHECK(config.solver.delta_tol == 1e-5);
  CHECK(config.solver.delta_reg == 1e-9);
  CHECK(config.solver.hard_point_weight == 1e8);
  CHECK(config.solver.hybrid_period == 7);
  CHECK(config.solver.warmup_bellman_steps == 3);
  CHECK(config.solver.max_policy_iterations == 12);
  CHECK(config.solver.seed == 42);
  CHECK(config.solver.als_sweeps == 15);
  CHECK(config.solver.als_tol == 1e-9);
  CHECK(config.solver.resample_each_interval);
  CHECK(config.solver.interp == ttc::InterpMode::linear);
  CHECK(config.solver.checkpoint_interval == 50);

  CHECK(config.evaluate.initial_conditions == 30);
  CHECK(config.evaluate.kind == ttc::ICKind::constant);
  CHECK(config.evaluate.seed == 9);
  CHECK(config.evaluate.sim_tau == 0.0005);
  CHECK(config.evaluate.integrator == ttc::Integrator::rk4);
  CHECK_FALSE(config.evaluate.open_loop);
  CHECK(config.evaluate.open_loop_max_iterations == 200);
  CHECK(config.evaluate.open_loop_tolerance == 1e-7);
  CHECK(config.evaluate.traces == 4);
}

TEST_CASE("an empty config yields the documented defaults") {
  const ttc::RunConfig config = ttc::parse_run_config("");
  CHECK(config.dimension == 12);
  CHECK(config.cubic);
  CHECK(config.solver.method == ttc::Method::dlra);
  CHECK(config.solver.horizon == 0.3);
  CHECK(config.solver.samples == 16200);
  CHECK(config.solver.ranks == ttc::default_ranks(12, 9));
  CHECK(config.evaluate.kind == ttc::ICKind::poly);
}

TEST_CASE("default_ranks follows the 3-5-3 pattern with feasibility clamps") {
  CHECK(ttc::default_ranks(12, 9) ==
        std::vector<Index>{3, 5, 5, 5, 5, 5, 5, 5, 5, 5, 3});
  CHECK(ttc::default_ranks(3, 9) == std::vector<Index>{3, 3});
  CHECK(ttc::default_ranks(4, 9) == std::vector<Index>{3, 5, 3});
  CHECK(ttc::default_ranks(5, 3) == std::vector<Index>{3, 5, 5, 3});
  // A tiny basis caps the boundary bonds at the mode size.
  CHECK(ttc::default_ranks(4, 3)[0] == 3);
  CHECK_THROWS_AS(ttc::default_ranks(1, 9), ttc::config_error);
}

TEST_CASE("parse errors carry one-based line numbers") {
  CHECK(message_of([] { ttc::parse_run_config("[problem]\ndimensio = 3\n"); })
            .find("line 2") != std::string::npos);
  CHECK(message_of([] { ttc::parse_run_config("[solver]\ntau = 0.1\ntau = 0.2\n"); })
            .find("line 3") != std::string::npos);
  CHECK(message_of([] { ttc::parse_run_config("[nope]\n"); }).find("line 1") !=
        std::string::npos);
  CHECK(message_of([] { ttc::parse_run_config("dimension = 3\n"); }).find("line 1") !=
        std::string::npos);
  CHECK(message_of([] { ttc::parse_run_config("[problem]\ndimension = abc\n"); })
            .find("line 2") != std::string::npos);
  CHECK(message_of([] { ttc::parse_run_config("[solver]\nmethod = \"nope\"\n"); })
            .find("line 2") != std::string::npos);
  CHECK(message_of([] { ttc::parse_run_config("[solver]\nmethod = \"dlra\n"); })
            .find("line 2") != std::string::npos);
  CHECK_THROWS_AS(ttc::parse_run_config("[problem]\ndimension = 2\n"), ttc::config_error);
  CHECK_THROWS_AS(ttc::parse_run_config("[problem]\ngamma = 0\n"), ttc::config_error);
  CHECK_THROWS_AS(
      ttc::parse_run_config("[problem]\ndimension = 12\n[solver]\nranks = [3, 3]\n"),
      ttc::config_error);
}

TEST_CASE("load_run_config prefixes the file name and survives a round trip") {
  const auto path = temp_file("ttcontrol_config_roundtrip.toml");
  {
    std::ofstream out(path);
    out << "[problem]\ndimension = 6\n[solver]\nhorizon = 0.1\ntau = 0.001\n";
  }
  const ttc::RunConfig config = ttc::load_run_config(path.string());
  CHECK(config.dimension == 6);
  CHECK(config.solver.horizon == 0.1);
  std::filesystem::remove(path);

  const std::string missing = (temp_file("ttcontrol_no_such_file.toml")).string();
  CHECK(message_of([&] { ttc::load_run_config(missing); }).find("ttcontrol_no_such_file") !=
        std::string::npos);
}

TEST_CASE("make_problem wires the benchmark with the solver horizon") {
  ttc::RunConfig config = ttc::parse_run_config(
      "[problem]\ndimension = 6\ncubic = false\n[solver]\nhorizon = 0.25\n");
  const ttc::ControlProblem problem = ttc::make_problem(config);
  CHECK(problem.d == 6);
  CHECK(problem.horizon == 0.25);
  const auto inst = ttc::make_benchmark_instance(6, 1.0, 0.1, 1.0);
  CHECK(tth::rel_err(problem.terminal_weights, Eigen::VectorXd(inst.q_diag)) < 1e-14);
}

TEST_CASE("enum name helpers") {
  CHECK(std::string(ttc::interp_name(ttc::InterpMode::linear)) == "linear");
  CHECK(std::string(ttc::interp_name(ttc::InterpMode::piecewise_constant)) == "constant");
  CHECK(std::string(ttc::integrator_name(ttc::Integrator::rk4)) == "rk4");
  CHECK(std::string(ttc::integrator_name(ttc::Integrator::euler)) == "euler");
  CHECK(std::string(ttc::ic_kind_name(ttc::ICKind::poly)) == "poly");
  CHECK(std::string(ttc::ic_kind_name(ttc::ICKind::constant)) == "constant");
}

TEST_CASE("tensor and path checkpoints round-trip bit for bit") {
  const ttc::TensorTrain tt = tth::random_tt({3, 4, 3}, {2, 3}, 77);
  std::stringstream buf;
  ttc::write_tensor(buf, tt);
  const ttc::TensorTrain back = ttc::read_tensor(buf);
  REQUIRE(back.order() == tt.order());
  for (Index mu = 0; mu < tt.order(); ++mu) CHECK(back.core(mu) == tt.core(mu));

  ttc::ValueFunctionPath path;
  path.times = {0.0, 0.05, 0.1};
  path.mode = ttc::InterpMode::linear;
  for (int i = 0; i < 3; ++i)
    path.tensors.push_back(tth::random_tt({3, 4, 3}, {2, 3}, 80 + static_cast<unsigned>(i)));

  std::stringstream first, second;
  ttc::write_path(first, path);
  ttc::write_path(second, path);
  CHECK(first.str() == second.str());  // serialization is deterministic

  const ttc::ValueFunctionPath loaded = ttc::read_path(first);
  CHECK(loaded.times == path.times);
  CHECK(loaded.mode == path.mode);
  REQUIRE(loaded.tensors.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (Index mu = 0; mu < 3; ++mu)
      CHECK(loaded.tensors[i].core(mu) == path.tensors[i].core(mu));
}

TEST_CASE("checkpoint files reject corruption loudly") {
  const auto good = temp_file("ttcontrol_ckpt_good.vfp");
  ttc::ValueFunctionPath path;
  path.times = {0.0, 0.1};
  path.tensors = {tth::random_tt({3, 3}, {2}, 5), tth::random_tt({3, 3}, {2}, 6)};
  ttc::save_path(good.string(), path);
  const ttc::ValueFunctionPath loaded = ttc::load_path(good.string());
  CHECK(loaded.times == path.times);

  CHECK_THROWS_AS(ttc::load_path(temp_file("ttcontrol_ckpt_missing.vfp").string()),
                  ttc::numeric_error);

  const auto garbage = temp_file("ttcontrol_ckpt_garbage.vfp");
  {
    std::ofstream out(garbage, std::ios::binary);
    out << "not a checkpoint at all";
  }
  CHECK_THROWS_AS(ttc::load_path(garbage.string()), ttc::numeric_error);

  // Truncate the good file mid-tensor.
  std::string bytes;
  {
    std::ifstream in(good, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    bytes = ss.str();
  }
  const auto cut = temp_file("ttcontrol_ckpt_cut.vfp");
  {
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(ttc::load_path(cut.string()), ttc::numeric_error);

  std::filesystem::remove(good);
  std::filesystem::remove(garbage);
  std::filesystem::remove(cut);
}

TEST_CASE("csv writer and reader agree on awkward fields") {
  CHECK(ttc::csv_escape("plain") == "plain");
  CHECK(ttc::csv_escape("a,b") == "\"a,b\"");
  CHECK(ttc::csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(ttc::csv_escape("line\nbreak") == "\"line\nbreak\"");

  std::stringstream out;
  ttc::write_csv_row(out, {"id", "a,b", "say \"hi\"", "", "1.5"});
  ttc::write_csv_row(out, {"2", "x", "y", "z", "0.25"});
  std::stringstream in(out.str());
  const auto rows = ttc::read_csv(in);
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0].size() == 5);
  CHECK(rows[0][1] == "a,b");
  CHECK(rows[0][2] == "say \"hi\"");
  CHECK(rows[0][3] == "");
  CHECK(rows[1][4] == "0.25");

  std::stringstream crlf("a,b\r\nc,d\r\n");
  const auto dos = ttc::read_csv(crlf);
  REQUIRE(dos.size() == 2);
  CHECK(dos[0][1] == "b");
  CHECK(dos[1][0] == "c");

  std::stringstream stray("a,b\"c,d\n");
  CHECK_THROWS_AS(ttc::read_csv(stray), ttc::numeric_error);
  std::stringstream open_quote("a,\"unterminated\n");
  CHECK_THROWS_AS(ttc::read_csv(open_quote), ttc::numeric_error);
}

TEST_CASE("csv numbers round-trip at full precision") {
  CHECK(ttc::csv_number(0.0) == "0");
  CHECK(ttc::csv_number(0.1) == "0.1");
  CHECK(ttc::csv_number(-2.5) == "-2.5");
  const double third = 1.0 / 3.0;
  CHECK(std::stod(ttc::csv_number(third)) == third);
  const double awkward = 1.2345678901234567e-13;
  CHECK(std::stod(ttc::csv_number(awkward)) == awkward);
  CHECK(ttc::csv_fixed(3.14159, 2) == "3.14");
  CHECK(ttc::csv_fixed(2.0, 3) == "2.000");
}
