#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "support/test_helpers.hpp"
#include "ttcontrol/baselines.hpp"
#include "ttcontrol/hjb_solver.hpp"

using ttc::ControlProblem;
using ttc::Method;
using ttc::SolverConfig;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ControlProblem lq_problem(Index d) { return ttc::build_benchmark(d, 1.0, 0.1, 1.0, false); }

SolverConfig small_config() {
  SolverConfig config;
  config.horizon = 0.004;
  config.tau = 0.002;
  config.micro_steps = 2;
  config.ranks = {2, 2};
  config.basis_size = 4;
  config.samples = 300;
  config.delta_tol = 1e-2;
  config.max_policy_iterations = 3;
  config.warmup_bellman_steps = 0;
  config.seed = 7;
  return config;
}

ttc::RiccatiPath benchmark_riccati(Index d, double horizon) {
  const auto inst = ttc::make_benchmark_instance(d, 1.0, 0.1, 1.0);
  return ttc::solve_dre(inst.a_mat, inst.g_vec, MatrixXd(inst.q_diag.asDiagonal()), 0.1, 1.0,
                        horizon, 1e-5);
}

}  // namespace

TEST_CASE("hybrid_schedule follows the warmup and reset rules") {
  CHECK_THROWS_AS(ttc::hybrid_schedule(0, 0, 0), ttc::config_error);

  for (Index j = 0; j < 20; ++j) CHECK(ttc::hybrid_schedule(j, 1, 0) == Method::bellman);

  for (Index j = 0; j < 300; ++j) CHECK(ttc::hybrid_schedule(j, 1000, 0) == Method::dlra);

  Index bellman_count = 0;
  for (Index j = 0; j < 300; ++j)
    if (ttc::hybrid_schedule(j, 10, 0) == Method::bellman) ++bellman_count;
  CHECK(bellman_count == 30);

  // Warmup adds its own Bellman steps; j = 9 is both warmup and scheduled.
  bellman_count = 0;
  for (Index j = 0; j < 300; ++j)
    if (ttc::hybrid_schedule(j, 10, 10) == Method::bellman) ++bellman_count;
  CHECK(bellman_count == 39);

  CHECK(ttc::hybrid_schedule(0, 10, 0) == Method::dlra);
  CHECK(ttc::hybrid_schedule(9, 10, 0) == Method::bellman);
  CHECK(ttc::hybrid_schedule(3, 10, 5) == Method::bellman);
}

TEST_CASE("method_name strings") {
  CHECK(std::string(ttc::method_name(Method::dlra)) == "dlra");
  CHECK(std::string(ttc::method_name(Method::bellman)) == "bellman");
  CHECK(std::string(ttc::method_name(Method::hybrid)) == "hybrid");
}

TEST_CASE("solve_value_function rejects inconsistent configuration") {
  const ControlProblem problem = lq_problem(3);

  SolverConfig bad_grid = small_config();
  bad_grid.tau = 0.003;  // does not divide the horizon
  CHECK_THROWS_AS(ttc::solve_value_function(problem, bad_grid), ttc::config_error);

  SolverConfig bad_horizon = small_config();
  bad_horizon.horizon = 0.0;
  CHECK_THROWS_AS(ttc::solve_value_function(problem, bad_horizon), ttc::config_error);

  SolverConfig bad_ranks = small_config();
  bad_ranks.ranks = {2, 2, 2};
  CHECK_THROWS_AS(ttc::solve_value_function(problem, bad_ranks), ttc::config_error);

  SolverConfig bad_basis = small_config();
  bad_basis.basis_size = 2;  // cannot represent the quadratic terminal
  CHECK_THROWS_AS(ttc::solve_value_function(problem, bad_basis), ttc::config_error);

  ControlProblem no_terminal_form = lq_problem(3);
  no_terminal_form.terminal_weights = VectorXd();
  CHECK_THROWS_AS(ttc::solve_value_function(no_terminal_form, small_config()),
                  ttc::config_error);
}

TEST_CASE("solved path carries the grid, the mode and the exact terminal") {
  const ControlProblem problem = lq_problem(3);
  SolverConfig config = small_config();
  config.interp = ttc::InterpMode::linear;
  const auto result = ttc::solve_value_function(problem, config);

  REQUIRE(result.path.times.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(result.path.times[i] == doctest::Approx(0.002 * static_cast<double>(i)));
  CHECK(result.path.mode == ttc::InterpMode::linear);
  REQUIRE(result.path.tensors.size() == 3);
  REQUIRE(result.diagnostics.size() == 2);

  const ttc::BasisSet basis =
      ttc::BasisSet::build(4, problem.domain_lo, problem.domain_hi, ttc::BasisKind::h2_orthonormal);
  const MatrixXd probes = ttc::sample_domain(3, 20, 12);
  for (Index k = 0; k < probes.rows(); ++k) {
    const VectorXd x = probes.row(k);
    const double want = problem.terminal(x);
    CHECK(tth::rel_err(ttc::eval_value(result.path.tensors.back(), basis, x), want) < 1e-10);
  }
  // The pinned origin keeps the value surface anchored at V(t, 0) = 0.
  CHECK(std::abs(ttc::path_value(result.path, basis, 0.0, VectorXd::Zero(3))) < 1e-6);
}

TEST_CASE("low-rank flow reproduces the Riccati value on the linear instance") {
  const Index d = 3;
  const ControlProblem problem = lq_problem(d);
  SolverConfig config;
  config.horizon = 0.005;
  config.tau = 0.005;
  config.micro_steps = 10;
  config.ranks = {3, 3};
  config.basis_size = 4;
  config.samples = 1500;
  config.delta_tol = 1e-9;
  config.max_policy_iterations = 10;
  config.warmup_bellman_steps = 0;
  config.method = Method::dlra;
  config.seed = 3;

  const auto result = ttc::solve_value_function(problem, config);
  for (const auto& diag : result.diagnostics) CHECK(diag.fit_residual < 1e-6);

  const auto riccati = benchmark_riccati(d, config.horizon);
  const ttc::BasisSet basis =
      ttc::BasisSet::build(4, -2.0, 2.0, ttc::BasisKind::h2_orthonormal);
  const MatrixXd probes = ttc::sample_domain(d, 60, 21);
  double err = 0.0, move = 0.0;
  for (Index k = 0; k < probes.rows(); ++k) {
    const VectorXd x = probes.row(k);
    const double got = ttc::eval_value(result.path.tensors.front(), basis, x);
    const double want = riccati.value(0.0, x);
    err += std::abs(got - want);
    move += std::abs(riccati.value(0.0, x) - riccati.value(config.horizon, x));
  }
  err /= static_cast<double>(probes.rows());
  move /= static_cast<double>(probes.rows());
  CHECK(move > 1e-2);       // the value actually evolved over the interval
  CHECK(err < 0.05 * move); // and the flow tracked it, not just the terminal
  CHECK(err < 2e-3);
}

TEST_CASE("Bellman regression reproduces the Riccati value on the linear instance") {
  const Index d = 3;
  const ControlProblem problem = lq_problem(d);
  SolverConfig config;
  config.horizon = 0.005;
  config.tau = 0.005;
  config.micro_steps = 10;
  config.ranks = {3, 3};
  config.basis_size = 4;
  config.samples = 1500;
  config.delta_tol = 1e-9;
  config.max_policy_iterations = 10;
  config.method = Method::bellman;
  config.seed = 3;

  const auto result = ttc::solve_value_function(problem, config);
  const auto riccati = benchmark_riccati(d, config.horizon);
  const ttc::BasisSet basis =
      ttc::BasisSet::build(4, -2.0, 2.0, ttc::BasisKind::h2_orthonormal);
  const MatrixXd probes = ttc::sample_domain(d, 60, 22);
  double err = 0.0;
  for (Index k = 0; k < probes.rows(); ++k) {
    const VectorXd x = probes.row(k);
    err += std::abs(ttc::eval_value(result.path.tensors.front(), basis, x) -
                    riccati.value(0.0, x));
  }
  err /= static_cast<double>(probes.rows());
  CHECK(err < 2e-3);
}

TEST_CASE("an infinite tolerance stops after a single policy iteration") {
  const ControlProblem problem = ttc::build_benchmark(3, 1.0, 0.1, 1.0, true);
  SolverConfig config = small_config();
  config.delta_tol = std::numeric_limits<double>::infinity();
  const auto result = ttc::solve_value_function(problem, config);
  for (const auto& diag : result.diagnostics) {
    CHECK(diag.iterations == 1);
    CHECK(diag.converged);
  }
}

TEST_CASE("the iteration cap keeps the best iterate and flags it") {
  const ControlProblem problem = ttc::build_benchmark(3, 1.0, 0.1, 1.0, true);
  SolverConfig config = small_config();
  config.delta_tol = 1e-300;
  config.max_policy_iterations = 2;
  const auto result = ttc::solve_value_function(problem, config);
  for (const auto& diag : result.diagnostics) {
    CHECK_FALSE(diag.converged);
    CHECK(diag.iterations >= 1);
    CHECK(diag.iterations <= 2);
  }
}

TEST_CASE("solver dispatch honors warmup and the hybrid schedule") {
  const ControlProblem problem = ttc::build_benchmark(3, 1.0, 0.1, 1.0, true);

  SolverConfig warm = small_config();
  warm.method = Method::dlra;
  warm.warmup_bellman_steps = 10;  // exceeds the two intervals
  auto result = ttc::solve_value_function(problem, warm);
  for (const auto& diag : result.diagnostics) CHECK(diag.method == Method::bellman);

  SolverConfig pure = small_config();
  pure.method = Method::dlra;
  result = ttc::solve_value_function(problem, pure);
  for (const auto& diag : result.diagnostics) CHECK(diag.method == Method::dlra);

  SolverConfig hybrid = small_config();
  hybrid.horizon = 0.012;
  hybrid.method = Method::hybrid;
  hybrid.hybrid_period = 2;
  hybrid.warmup_bellman_steps = 1;
  result = ttc::solve_value_function(problem, hybrid);
  REQUIRE(result.diagnostics.size() == 6);
  const Method want[6] = {Method::bellman, Method::bellman, Method::dlra,
                          Method::bellman, Method::dlra,    Method::bellman};
  for (std::size_t j = 0; j < 6; ++j) {
    CHECK(result.diagnostics[j].method == want[j]);
    CHECK(result.diagnostics[j].interval == static_cast<Index>(5 - j));
  }
}

TEST_CASE("solves are deterministic for a fixed seed") {
  const ControlProblem problem = ttc::build_benchmark(3, 1.0, 0.1, 1.0, true);
  SolverConfig config = small_config();
  config.method = Method::hybrid;
  config.hybrid_period = 2;
  config.warmup_bellman_steps = 1;
  const auto a = ttc::solve_value_function(problem, config);
  const auto b = ttc::solve_value_function(problem, config);
  REQUIRE(a.path.tensors.size() == b.path.tensors.size());
  for (std::size_t i = 0; i < a.path.tensors.size(); ++i) {
    const auto& ta = a.path.tensors[i];
    const auto& tb = b.path.tensors[i];
    REQUIRE(ta.order() == tb.order());
    for (Index mu = 0; mu < ta.order(); ++mu) CHECK(ta.core(mu) == tb.core(mu));
  }
}

TEST_CASE("resampling per interval changes the fitted surrogate") {
  const ControlProblem problem = ttc::build_benchmark(3, 1.0, 0.1, 1.0, true);
  SolverConfig config = small_config();
  const auto fixed = ttc::solve_value_function(problem, config);
  config.resample_each_interval = true;
  const auto fresh = ttc::solve_value_function(problem, config);

  const ttc::BasisSet basis =
      ttc::BasisSet::build(4, -2.0, 2.0, ttc::BasisKind::h2_orthonormal);
  VectorXd x(3);
  x << 0.8, -0.4, 1.1;
  const double a = ttc::eval_value(fixed.path.tensors.front(), basis, x);
  const double b = ttc::eval_value(fresh.path.tensors.front(), basis, x);
  CHECK(a != b);
}

TEST_CASE("dlra_interval_solver returns ascending micro nodes ending at the terminal") {
  const ControlProblem problem = lq_problem(3);
  SolverConfig config = small_config();
  config.samples = 200;
  config.ranks = {3, 3};
  const ttc::BasisSet basis =
      ttc::BasisSet::build(4, -2.0, 2.0, ttc::BasisKind::h2_orthonormal);
  const ttc::TensorTrain terminal =
      ttc::build_quadratic_tt(basis, problem.terminal_weights, 0.0);
  ttc::IntervalTask task;
  task.index = 0;
  task.t_left = 0.0;
  task.t_right = config.tau;
  const MatrixXd samples = ttc::sample_domain(3, config.samples, 5);
  double residual = -1.0;
  const auto nodes = ttc::dlra_interval_solver(problem, basis, terminal,
                                               ttc::constant_controller(0.0), task, samples,
                                               config, residual);
  REQUIRE(nodes.size() == 3);
  CHECK(residual >= 0.0);
  VectorXd x(3);
  x << 0.4, 1.2, -0.7;
  CHECK(ttc::eval_value(nodes.back(), basis, x) ==
        doctest::Approx(ttc::eval_value(terminal, basis, x)).epsilon(1e-13));
  // Earlier nodes differ from the terminal: the flow moved.
  CHECK(std::abs(ttc::eval_value(nodes.front(), basis, x) -
                 ttc::eval_value(terminal, basis, x)) > 1e-8);
}
