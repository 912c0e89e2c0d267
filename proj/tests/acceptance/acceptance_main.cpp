// Acceptance harness: each criterion prints exactly one [PASS]/[FAIL] line
// with the measured numbers, and the process exits nonzero if any selected
// criterion fails. Criteria are selected by integer arguments (default: all).
// The paper-scale solve is shared between criteria 4 and 7.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "support/test_helpers.hpp"
#include "ttcontrol/baselines.hpp"
#include "ttcontrol/config.hpp"
#include "ttcontrol/driver.hpp"
#include "ttcontrol/hjb_solver.hpp"
#include "ttcontrol/tangent_regression.hpp"

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::string strf(const char* format, ...) {
  va_list args;
  va_start(args, format);
  char buf[768];
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void progress(const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<VectorXd> basis_rows(const ttc::BasisSet& basis, const VectorXd& x) {
  std::vector<VectorXd> rows;
  for (Index i = 0; i < x.size(); ++i) rows.push_back(basis.eval(x(i)).first);
  return rows;
}

// ---------------------------------------------------------------------------
// Criterion 1: dense-oracle agreement of the TT algebra.
// ---------------------------------------------------------------------------

Outcome criterion1() {
  const std::vector<Index> modes{4, 4, 4, 4};
  const std::vector<Index> ranks{3, 3, 3};
  const ttc::TensorTrain tt = tth::random_tt(modes, ranks, 101);
  const VectorXd dense = tth::to_dense(tt);
  const ttc::BasisSet basis = ttc::BasisSet::build(4, -2.0, 2.0, ttc::BasisKind::h2_orthonormal);

  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  const auto random_state = [&] {
    VectorXd x(4);
    for (Index i = 0; i < 4; ++i) x(i) = uni(rng);
    return x;
  };

  VectorXd got(25), want(25);
  for (Index k = 0; k < 25; ++k) {
    const VectorXd x = random_state();
    const auto rows = basis_rows(basis, x);
    got(k) = ttc::evaluate(tt, rows);
    want(k) = tth::dense_eval(dense, rows);
  }
  const double e_eval = tth::rel_err(got, want);

  const ttc::TensorTrain other = tth::random_tt(modes, {2, 3, 2}, 103);
  const double e_dot = tth::rel_err(ttc::dot(tt, other), dense.dot(tth::to_dense(other)));

  double e_orth = 0.0;
  for (Index mu = 1; mu <= 4; ++mu)
    e_orth = std::max(e_orth, tth::rel_err(tth::to_dense(ttc::orthogonalize(tt, mu)), dense));

  const double e_trunc = tth::rel_err(tth::to_dense(ttc::truncate(tt, {2, 2, 2})),
                                      tth::dense_truncate(dense, modes, {2, 2, 2}));

  const ttc::TensorTrain ref = ttc::orthogonalize(tt, 4);
  const ttc::TangentFrame frame = ttc::build_frame(ref);
  std::normal_distribution<double> normal;
  ttc::TangentVector tangent;
  tangent.reference = ref;
  for (Index mu = 0; mu < 4; ++mu) {
    MatrixXd delta(ref.core(mu).rows(), ref.core(mu).cols());
    for (Index c = 0; c < delta.cols(); ++c)
      for (Index r = 0; r < delta.rows(); ++r) delta(r, c) = normal(rng);
    tangent.deltas.push_back(delta);
  }
  const double step = 0.37;
  const double e_add =
      tth::rel_err(tth::to_dense(ttc::tangent_add(tangent, step)),
                   VectorXd(tth::to_dense(ref) + step * tth::tangent_to_dense(tangent)));

  // Design-matrix consistency: rows evaluate the unpacked gauged tangent.
  VectorXd coeffs(frame.cols());
  for (Index i = 0; i < coeffs.size(); ++i) coeffs(i) = normal(rng);
  const VectorXd tau_dense = tth::tangent_to_dense(ttc::unpack_coefficients(frame, coeffs));
  MatrixXd samples(30, 4);
  for (Index k = 0; k < 30; ++k) samples.row(k) = random_state().transpose();
  const MatrixXd design = ttc::assemble_design(frame, basis, samples);
  VectorXd tau_want(30);
  for (Index k = 0; k < 30; ++k)
    tau_want(k) = tth::dense_eval(tau_dense, basis_rows(basis, samples.row(k)));
  const double e_design = tth::rel_err(VectorXd(design * coeffs), tau_want);

  // Planted-coefficient recovery through the full least-squares path.
  ttc::RegressionProblem problem;
  problem.samples.resize(300, 4);
  problem.targets.resize(300);
  for (Index k = 0; k < 300; ++k) {
    const VectorXd x = random_state();
    problem.samples.row(k) = x.transpose();
    problem.targets(k) = tth::dense_eval(tau_dense, basis_rows(basis, x));
  }
  const ttc::TangentFitResult fit = ttc::tangent_fit(frame, basis, problem);
  const double e_fit = tth::rel_err(fit.coefficients, coeffs);

  const bool pass = e_eval < 1e-12 && e_dot < 1e-12 && e_orth < 1e-12 && e_trunc < 1e-12 &&
                    e_add < 1e-12 && e_design < 1e-12 && e_fit < 1e-8;
  return {pass,
          strf("evaluate %.1e, dot %.1e, orthogonalize %.1e, truncate %.1e, tangent_add %.1e, "
               "design %.1e (bars 1e-12); coefficient recovery %.1e (bar 1e-8)",
               e_eval, e_dot, e_orth, e_trunc, e_add, e_design, e_fit)};
}

// ---------------------------------------------------------------------------
// Criterion 2: structural invariants.
// ---------------------------------------------------------------------------

Outcome criterion2() {
  const std::vector<Index> modes{4, 4, 4, 4};
  const std::vector<Index> ranks{3, 3, 3};
  const ttc::TensorTrain ref = ttc::orthogonalize(tth::random_tt(modes, ranks, 201), 4);
  const ttc::TangentFrame frame = ttc::build_frame(ref);
  double e_gauge = 0.0;
  for (Index mu = 0; mu + 1 < 4; ++mu) {
    const MatrixXd& q = frame.complements[static_cast<std::size_t>(mu)];
    e_gauge = std::max(e_gauge, (ref.core(mu).transpose() * q).cwiseAbs().maxCoeff());
    e_gauge = std::max(
        e_gauge,
        MatrixXd(q.transpose() * q - MatrixXd::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff());
  }

  const ttc::BasisSet paper_basis =
      ttc::BasisSet::build(9, -2.0, 2.0, ttc::BasisKind::h2_orthonormal);
  const double e_gram =
      (tth::h2_gram(paper_basis) - MatrixXd::Identity(9, 9)).cwiseAbs().maxCoeff();

  const ttc::BasisSet b4 = ttc::BasisSet::build(4, -2.0, 2.0, ttc::BasisKind::h2_orthonormal);
  const ttc::TensorTrain value = tth::random_tt({4, 4, 4, 4}, {2, 3, 2}, 202);
  std::mt19937_64 rng(203);
  std::uniform_real_distribution<double> uni(-1.5, 1.5);
  double e_grad = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    VectorXd x(4);
    for (Index i = 0; i < 4; ++i) x(i) = uni(rng);
    const VectorXd grad = ttc::eval_gradient(value, b4, x);
    const VectorXd fd = tth::fd_gradient(
        [&](const VectorXd& y) { return ttc::eval_value(value, b4, y); }, x, 1e-6);
    e_grad = std::max(e_grad, tth::rel_err(grad, fd));
  }

  const ttc::ControlProblem rod = ttc::build_benchmark(6, 1.0, 0.1, 1.0, true);
  std::normal_distribution<double> normal;
  VectorXd u(5), x0(6);
  for (Index k = 0; k < 5; ++k) u(k) = normal(rng);
  for (Index i = 0; i < 6; ++i) x0(i) = 0.5 * normal(rng);
  VectorXd adjoint;
  ttc::open_loop_cost(rod, u, x0, 0.01, &adjoint);
  const VectorXd fd_u = tth::fd_gradient(
      [&](const VectorXd& v) { return ttc::open_loop_cost(rod, v, x0, 0.01); }, u, 1e-6);
  const double e_adj = tth::rel_err(adjoint, fd_u);

  const std::vector<Index> paper_modes(12, 9);
  const Index dim = ttc::tangent_dim(paper_modes, ttc::default_ranks(12, 9));

  const bool pass =
      e_gauge < 1e-12 && e_gram < 1e-8 && e_grad < 1e-6 && e_adj < 1e-4 && dim == 1881;
  return {pass, strf("gauge %.1e (bar 1e-12), basis Gram %.1e (bar 1e-8), gradient-vs-FD %.1e "
                     "(bar 1e-6), adjoint-vs-FD %.1e (bar 1e-4), tangent_dim %lld (want 1881)",
                     e_gauge, e_gram, e_grad, e_adj, static_cast<long long>(dim))};
}

// ---------------------------------------------------------------------------
// Criterion 3: linear-quadratic end-to-end oracle.
// ---------------------------------------------------------------------------

Outcome criterion3() {
  const Index d = 6;
  const double gamma = 0.1, horizon = 0.1;
  const ttc::ControlProblem problem = ttc::build_benchmark(d, 1.0, gamma, 1.0, false);
  const auto inst = ttc::make_benchmark_instance(d, 1.0, gamma, 1.0);
  const auto riccati = ttc::solve_dre(inst.a_mat, inst.g_vec, MatrixXd(inst.q_diag.asDiagonal()),
                                      gamma, 1.0, horizon, 1e-5);

  ttc::SolverConfig base;
  base.horizon = horizon;
  base.tau = 1e-3;
  base.micro_steps = 32;
  base.ranks = {3, 4, 4, 4, 3};
  base.basis_size = 4;
  base.samples = 3600;
  base.delta_tol = 1e-6;
  base.max_policy_iterations = 6;
  base.seed = 5;
  base.interp = ttc::InterpMode::linear;
  base.log = progress;

  const ttc::BasisSet basis =
      ttc::BasisSet::build(4, problem.domain_lo, problem.domain_hi, ttc::BasisKind::h2_orthonormal);
  const MatrixXd probe_x = ttc::sample_domain(d, 100, 31);
  std::mt19937_64 trng(32);
  std::uniform_real_distribution<double> tuni(0.0, horizon);
  std::vector<double> probe_t(100);
  for (double& t : probe_t) t = tuni(trng);

  const auto ics = ttc::sample_initial_conditions(ttc::ICKind::poly, 20, d, 3);
  const ttc::Controller lqr = ttc::lqr_controller(riccati, inst.g_vec, gamma);

  struct Variant {
    const char* label;
    ttc::Method method;
    Index warmup;
  };
  const Variant variants[3] = {{"dlra", ttc::Method::dlra, 0},
                               {"bellman", ttc::Method::bellman, 10},
                               {"hybrid", ttc::Method::hybrid, 10}};
  bool pass = true;
  std::string detail;
  for (const Variant& variant : variants) {
    ttc::SolverConfig config = base;
    config.method = variant.method;
    config.warmup_bellman_steps = variant.warmup;
    const auto result = ttc::solve_value_function(problem, config);

    double mean_rel = 0.0, max_rel = 0.0;
    for (Index k = 0; k < 100; ++k) {
      const VectorXd x = probe_x.row(k);
      const double got = ttc::path_value(result.path, basis, probe_t[k], x);
      const double want = riccati.value(probe_t[k], x);
      const double rel = std::abs(got - want) / std::max(std::abs(want), 1e-6);
      mean_rel += rel;
      max_rel = std::max(max_rel, rel);
    }
    mean_rel /= 100.0;

    ttc::FeedbackLaw law;
    law.path = &result.path;
    law.basis = &basis;
    law.gamma = gamma;
    law.g = problem.g;
    const ttc::Controller feedback = ttc::make_controller(law);
    double max_dev = 0.0;
    for (const VectorXd& x0 : ics) {
      const double c_fb = ttc::simulate_closed_loop(problem, feedback, x0, 0.0, horizon, 1e-3).cost;
      const double c_lqr = ttc::simulate_closed_loop(problem, lqr, x0, 0.0, horizon, 1e-3).cost;
      max_dev = std::max(max_dev, std::abs(c_fb - c_lqr) / c_lqr);
    }
    pass = pass && mean_rel < 1e-3 && max_dev < 1e-3;
    detail += strf("%s%s value mean %.1e max %.1e cost dev %.1e", detail.empty() ? "" : "; ",
                   variant.label, mean_rel, max_rel, max_dev);
  }
  return {pass, detail + " (bars: value mean 1e-3, cost dev 1e-3)"};
}

// ---------------------------------------------------------------------------
// Criteria 4 and 7 share the paper-scale solve.
// ---------------------------------------------------------------------------

struct PaperSolve {
  ttc::RunConfig config;
  ttc::SolveResult result;
  double wall = 0.0;
};

const PaperSolve& paper_solve() {
  static std::optional<PaperSolve> cached;
  if (!cached) {
    PaperSolve run;
    run.config.solver.ranks = ttc::default_ranks(12, 9);
    run.config.solver.max_policy_iterations = 6;
    run.config.solver.log = progress;
    run.config.evaluate.initial_conditions = 112;
    run.config.evaluate.traces = 0;
    const ttc::ControlProblem problem = ttc::make_problem(run.config);
    const auto start = std::chrono::steady_clock::now();
    run.result = ttc::solve_value_function(problem, run.config.solver);
    run.wall = seconds_since(start);
    progress(strf("paper solve finished in %.1f s", run.wall));
    cached = std::move(run);
  }
  return *cached;
}

Outcome criterion4() {
  const PaperSolve& run = paper_solve();
  std::filesystem::create_directories("acceptance_artifacts");
  const ttc::EvaluationSummary summary =
      ttc::run_evaluation(run.config, run.result.path, "acceptance_artifacts", "paper_");
  const double gap = (summary.feedback_mean_cost - summary.open_loop_mean_cost) /
                     summary.open_loop_mean_cost;
  const bool pass = summary.counted >= 100 && gap <= 0.01 &&
                    summary.lqr_mean_cost > summary.feedback_mean_cost;
  return {pass, strf("gap to open loop %.3f%% (bar 1%%), dlra %.4f, open loop %.4f, lqr %.4f, "
                     "%lld of %lld ICs counted",
                     100.0 * gap, summary.feedback_mean_cost, summary.open_loop_mean_cost,
                     summary.lqr_mean_cost, static_cast<long long>(summary.counted),
                     static_cast<long long>(summary.counted + summary.omitted))};
}

Outcome criterion7() {
  const PaperSolve& run = paper_solve();
  std::vector<double> backward, residual;
  for (const auto& diag : run.result.diagnostics) {
    if (diag.method != ttc::Method::dlra) continue;
    backward.push_back(run.config.solver.horizon -
                       static_cast<double>(diag.interval) * run.config.solver.tau);
    residual.push_back(diag.fit_residual);
  }
  if (backward.size() < 3) return {false, "fewer than 3 dlra intervals in the paper solve"};
  const double rho = tth::spearman(backward, residual);
  return {rho > 0.0, strf("Spearman(fit residual, backward time) = %.3f over %zu dlra intervals "
                          "(bar > 0)",
                          rho, backward.size())};
}

// ---------------------------------------------------------------------------
// Criterion 5: degree-4 degradation and the hybrid rescue.
// ---------------------------------------------------------------------------

Outcome criterion5() {
  ttc::RunConfig shared;
  shared.solver.basis_size = 5;
  shared.solver.samples = 9000;
  shared.solver.ranks = ttc::default_ranks(12, 5);
  shared.solver.max_policy_iterations = 6;
  shared.solver.log = progress;

  const ttc::ControlProblem problem = ttc::make_problem(shared);
  const double horizon = shared.solver.horizon;

  ttc::RunConfig dlra_config = shared;
  dlra_config.solver.method = ttc::Method::dlra;
  const auto dlra_run = ttc::solve_value_function(problem, dlra_config.solver);
  ttc::RunConfig hybrid_config = shared;
  hybrid_config.solver.method = ttc::Method::hybrid;
  const auto hybrid_run = ttc::solve_value_function(problem, hybrid_config.solver);

  const ttc::BasisSet basis = ttc::BasisSet::build(
      shared.solver.basis_size, problem.domain_lo, problem.domain_hi, ttc::BasisKind::h2_orthonormal);
  const auto law_of = [&](const ttc::ValueFunctionPath& path) {
    ttc::FeedbackLaw law;
    law.path = &path;
    law.basis = &basis;
    law.gamma = problem.gamma;
    law.g = problem.g;
    return ttc::make_controller(law);
  };
  const ttc::Controller dlra_fb = law_of(dlra_run.path);
  const ttc::Controller hybrid_fb = law_of(hybrid_run.path);

  const auto inst = ttc::make_benchmark_instance(12, shared.sigma, shared.gamma,
                                                 shared.terminal_weight);
  const auto riccati = ttc::solve_dre(inst.a_mat, inst.g_vec, MatrixXd(inst.q_diag.asDiagonal()),
                                      shared.gamma, shared.terminal_weight, horizon, 1e-3);
  const auto ics = ttc::sample_initial_conditions(ttc::ICKind::poly, 100, 12, 1);

  double sum_dlra = 0.0, sum_hybrid = 0.0, sum_open = 0.0;
  Index counted = 0;
  for (const VectorXd& x0 : ics) {
    double c_dlra = 0.0, c_hybrid = 0.0;
    bool ok = true;
    try {
      c_dlra = ttc::simulate_closed_loop(problem, dlra_fb, x0, 0.0, horizon, 1e-3).cost;
      c_hybrid = ttc::simulate_closed_loop(problem, hybrid_fb, x0, 0.0, horizon, 1e-3).cost;
    } catch (const ttc::numeric_error&) {
      ok = false;
    }
    if (!ok || !std::isfinite(c_dlra) || !std::isfinite(c_hybrid)) continue;
    const auto open = ttc::open_loop_optimize(problem, x0, horizon, 1e-3, 400, 1e-8, &riccati,
                                              &inst.g_vec);
    if (!open.converged || !std::isfinite(open.cost)) continue;
    sum_dlra += c_dlra;
    sum_hybrid += c_hybrid;
    sum_open += open.cost;
    ++counted;
  }
  if (counted < 50) return {false, strf("only %lld of 100 ICs usable", static_cast<long long>(counted))};

  const double mean_dlra = sum_dlra / static_cast<double>(counted);
  const double mean_hybrid = sum_hybrid / static_cast<double>(counted);
  const double mean_open = sum_open / static_cast<double>(counted);
  const double gap_dlra = (mean_dlra - mean_open) / mean_open;
  const double gap_hybrid = (mean_hybrid - mean_open) / mean_open;
  const bool pass = gap_dlra > 0.10 && gap_hybrid < 0.01 && mean_dlra > mean_hybrid;
  return {pass, strf("deg-4 gaps: dlra %.1f%% (bar > 10%%), hybrid %.2f%% (bar < 1%%); means "
                     "dlra %.4f > hybrid %.4f? %s; open loop %.4f over %lld ICs",
                     100.0 * gap_dlra, 100.0 * gap_hybrid, mean_dlra, mean_hybrid,
                     mean_dlra > mean_hybrid ? "yes" : "no", mean_open,
                     static_cast<long long>(counted))};
}

// ---------------------------------------------------------------------------
// Criterion 6: low-rank flow beats trajectory regression on wall time.
// ---------------------------------------------------------------------------

Outcome criterion6() {
  ttc::RunConfig shared;
  shared.solver.horizon = 0.03;
  shared.solver.ranks = ttc::default_ranks(12, 9);
  shared.solver.max_policy_iterations = 6;
  shared.solver.warmup_bellman_steps = 0;
  shared.solver.log = progress;
  const ttc::ControlProblem problem = ttc::make_problem(shared);

  ttc::SolverConfig dlra_config = shared.solver;
  dlra_config.method = ttc::Method::dlra;
  auto start = std::chrono::steady_clock::now();
  ttc::solve_value_function(problem, dlra_config);
  const double dlra_wall = seconds_since(start);

  ttc::SolverConfig bellman_config = shared.solver;
  bellman_config.method = ttc::Method::bellman;
  start = std::chrono::steady_clock::now();
  ttc::solve_value_function(problem, bellman_config);
  const double bellman_wall = seconds_since(start);

  const double ratio = dlra_wall / bellman_wall;
  return {ratio < 0.35, strf("dlra %.1f s vs bellman %.1f s, ratio %.3f (bar < 0.35)", dlra_wall,
                             bellman_wall, ratio)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int id = std::atoi(argv[i]);
    if (id < 1 || id > 7) {
      std::fprintf(stderr, "unknown criterion '%s' (want 1..7)\n", argv[i]);
      return 2;
    }
    selected.insert(id);
  }
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7};

  Outcome (*const runners[7])() = {criterion1, criterion2, criterion3, criterion4,
                                   criterion5, criterion6, criterion7};
  int failures = 0;
  for (int id : selected) {
    Outcome outcome;
    try {
      outcome = runners[id - 1]();
    } catch (const std::exception& e) {
      outcome = {false, strf("exception: %s", e.what())};
    }
    std::printf("[%s] criterion %d: %s\n", outcome.pass ? "PASS" : "FAIL", id,
                outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
