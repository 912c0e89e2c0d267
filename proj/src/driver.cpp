#include "ttcontrol/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "ttcontrol/baselines.hpp"
#include "ttcontrol/checkpoint.hpp"
#include "ttcontrol/common.hpp"
#include "ttcontrol/csv.hpp"
#include "ttcontrol/hjb_solver.hpp"
#include "ttcontrol/ocp.hpp"

namespace fs = std::filesystem;

namespace ttc {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::ofstream open_output(const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw numeric_error("cannot open output file '" + file.string() + "'");
  return out;
}

//! One state-and-control sample per integration step: the state at the step's
//! left node and the control applied over the step.
void write_trace_csv(const fs::path& file, const SimulationResult& sim, double t0, double tau) {
  std::ofstream out = open_output(file);
  std::vector<std::string> header{"t", "u"};
  for (Eigen::Index k = 0; k < sim.trajectory.cols(); ++k) {
    header.push_back("x_" + std::to_string(k + 1));
  }
  write_csv_row(out, header);
  for (Eigen::Index step = 0; step < sim.controls.size(); ++step) {
    std::vector<std::string> row{csv_number(t0 + tau * static_cast<double>(step)),
                                 csv_number(sim.controls(step))};
    for (Eigen::Index k = 0; k < sim.trajectory.cols(); ++k) {
      row.push_back(csv_number(sim.trajectory(step, k)));
    }
    write_csv_row(out, row);
  }
}

struct ControllerRun {
  double cost = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  double wall = 0.0;
  SimulationResult sim;  // trajectory kept for trace emission
};

ControllerRun timed_simulation(const ControlProblem& problem, const Controller& u,
                               const Eigen::VectorXd& x0, double horizon, double tau,
                               Integrator method) {
  ControllerRun run;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    run.sim = simulate_closed_loop(problem, u, x0, 0.0, horizon, tau, method);
    run.cost = run.sim.cost;
    run.converged = std::isfinite(run.cost);
  } catch (const numeric_error&) {
    // diverged trajectory; the row stays flagged
  }
  run.wall = seconds_since(t0);
  return run;
}

double mean_of(const std::vector<double>& values, const std::vector<bool>& counted) {
  double sum = 0.0;
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!counted[i]) continue;
    sum += values[i];
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

SolveSummary run_solve(const RunConfig& config, const std::string& out_dir,
                       const std::string& prefix, ValueFunctionPath* path_out) {
  const ControlProblem problem = make_problem(config);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  const fs::path checkpoint_file = out / (prefix + "value_path.vfp");

  SolverConfig solver = config.solver;
  solver.log = [](const std::string& line) { std::printf("%s\n", line.c_str()); };
  double hook_wall = 0.0;
  if (solver.checkpoint_interval > 0) {
    const fs::path partial = out / (prefix + "value_path.partial.vfp");
    solver.checkpoint_hook = [partial, &hook_wall](const ValueFunctionPath& solved,
                                                   Eigen::Index) {
      const auto t0 = std::chrono::steady_clock::now();
      save_path(partial.string(), solved);
      hook_wall += seconds_since(t0);
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  SolveResult result = solve_value_function(problem, solver);
  const double wall = seconds_since(t0) - hook_wall;

  save_path(checkpoint_file.string(), result.path);

  {
    std::ofstream csv = open_output(out / (prefix + "diagnostics.csv"));
    write_csv_row(csv, {"interval", "method", "iterations", "metric", "fit_residual",
                        "dropped_samples", "converged", "wall_time"});
    for (const IntervalDiagnostics& diag : result.diagnostics) {
      write_csv_row(csv, {std::to_string(diag.interval), method_name(diag.method),
                          std::to_string(diag.iterations), csv_number(diag.metric),
                          csv_number(diag.fit_residual), std::to_string(diag.dropped_samples),
                          diag.converged ? "true" : "false", csv_number(diag.wall_time)});
    }
  }

  // Tangent-residual series over the low-rank intervals, as plot data.
  {
    std::ofstream dat = open_output(out / (prefix + "residual_series.dat"));
    dat << "# t_left fit_residual\n";
    for (const IntervalDiagnostics& diag : result.diagnostics) {
      if (diag.method != Method::dlra) continue;
      dat << csv_number(static_cast<double>(diag.interval) * solver.tau) << ' '
          << csv_number(diag.fit_residual) << '\n';
    }
    std::ofstream gp = open_output(out / (prefix + "residual_series.gp"));
    gp << "set xlabel \"t\"\n"
       << "set ylabel \"relative tangent residual\"\n"
       << "set logscale y\n"
       << "plot \"" << prefix << "residual_series.dat\" using 1:2 with lines notitle\n";
  }

  SolveSummary summary;
  summary.checkpoint_file = checkpoint_file.string();
  summary.wall_time = wall;
  summary.intervals = static_cast<Eigen::Index>(result.diagnostics.size());
  if (path_out) *path_out = std::move(result.path);
  return summary;
}

EvaluationSummary run_evaluation(const RunConfig& config, const ValueFunctionPath& path,
                                 const std::string& out_dir, const std::string& prefix) {
  const ControlProblem problem = make_problem(config);
  const EvalConfig& ev = config.evaluate;
  if (path.tensors.empty()) throw config_error("checkpoint contains no value tensors");
  if (path.tensors.front().order() != problem.d) {
    throw config_error("checkpoint dimension " + std::to_string(path.tensors.front().order()) +
                       " does not match config dimension " + std::to_string(problem.d));
  }
  if (path.tensors.front().mode_size(0) != config.solver.basis_size) {
    throw config_error("checkpoint basis size " +
                       std::to_string(path.tensors.front().mode_size(0)) +
                       " does not match config basis_size " +
                       std::to_string(config.solver.basis_size));
  }
  const double horizon = path.times.back();
  if (std::abs(horizon - config.solver.horizon) > 1e-9) {
    throw config_error("checkpoint horizon " + std::to_string(horizon) +
                       " does not match config horizon " + std::to_string(config.solver.horizon));
  }
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  const BasisSet basis = BasisSet::build(config.solver.basis_size, problem.domain_lo,
                                         problem.domain_hi, BasisKind::h2_orthonormal);
  FeedbackLaw law;
  law.path = &path;
  law.basis = &basis;
  law.gamma = problem.gamma;
  law.g = problem.g;
  const Controller feedback = make_controller(law);

  // LQR of the linearization at the origin; also warm-starts the open loop.
  const BenchmarkInstance inst = make_benchmark_instance(config.dimension, config.sigma,
                                                         config.gamma, config.terminal_weight);
  const RiccatiPath riccati =
      solve_dre(inst.a_mat, inst.g_vec, Eigen::MatrixXd(inst.q_diag.asDiagonal()), config.gamma,
                config.terminal_weight, horizon, ev.sim_tau);
  const Controller lqr = lqr_controller(riccati, inst.g_vec, config.gamma);

  const std::vector<Eigen::VectorXd> ics =
      sample_initial_conditions(ev.kind, ev.initial_conditions, problem.d, ev.seed);
  const auto count = static_cast<std::size_t>(ev.initial_conditions);

  std::vector<ControllerRun> fb_runs(count), lqr_runs(count);
  std::vector<OpenLoopSolution> ol_runs(count);
  std::vector<double> ol_walls(count, 0.0);
  parallel_for(count, [&](std::size_t i) {
    const Eigen::VectorXd& x0 = ics[i];
    fb_runs[i] = timed_simulation(problem, feedback, x0, horizon, ev.sim_tau, ev.integrator);
    lqr_runs[i] = timed_simulation(problem, lqr, x0, horizon, ev.sim_tau, ev.integrator);
    if (ev.open_loop) {
      const auto t0 = std::chrono::steady_clock::now();
      ol_runs[i] = open_loop_optimize(problem, x0, horizon, ev.sim_tau,
                                      ev.open_loop_max_iterations, ev.open_loop_tolerance,
                                      &riccati, &inst.g_vec);
      ol_walls[i] = seconds_since(t0);
    }
  });

  // An initial condition enters the aggregates only when every controller
  // finished on it, so the means stay comparable across methods.
  std::vector<bool> counted(count, true);
  std::vector<double> fb_costs(count), lqr_costs(count), ol_costs(count), fb_walls(count),
      lqr_walls(count);
  for (std::size_t i = 0; i < count; ++i) {
    fb_costs[i] = fb_runs[i].cost;
    lqr_costs[i] = lqr_runs[i].cost;
    fb_walls[i] = fb_runs[i].wall;
    lqr_walls[i] = lqr_runs[i].wall;
    ol_costs[i] = ev.open_loop ? ol_runs[i].cost : std::numeric_limits<double>::quiet_NaN();
    counted[i] = fb_runs[i].converged && lqr_runs[i].converged &&
                 (!ev.open_loop || (ol_runs[i].converged && std::isfinite(ol_runs[i].cost)));
  }

  const std::string fb_name = method_name(config.solver.method);
  {
    std::ofstream csv = open_output(out / (prefix + "evaluation_rows.csv"));
    write_csv_row(csv, {"ic_id", "method", "cost", "converged", "wall_time"});
    for (std::size_t i = 0; i < count; ++i) {
      const std::string id = std::to_string(i);
      write_csv_row(csv, {id, fb_name, csv_number(fb_costs[i]),
                          fb_runs[i].converged ? "true" : "false", csv_number(fb_walls[i])});
      write_csv_row(csv, {id, "lqr", csv_number(lqr_costs[i]),
                          lqr_runs[i].converged ? "true" : "false", csv_number(lqr_walls[i])});
      if (ev.open_loop) {
        write_csv_row(csv, {id, "open_loop", csv_number(ol_costs[i]),
                            ol_runs[i].converged && std::isfinite(ol_runs[i].cost) ? "true"
                                                                                  : "false",
                            csv_number(ol_walls[i])});
      }
    }
  }

  EvaluationSummary summary;
  summary.feedback_mean_cost = mean_of(fb_costs, counted);
  summary.lqr_mean_cost = mean_of(lqr_costs, counted);
  summary.open_loop_mean_cost = ev.open_loop ? mean_of(ol_costs, counted)
                                             : std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < count; ++i) {
    if (counted[i]) ++summary.counted;
  }
  summary.omitted = static_cast<Eigen::Index>(count) - summary.counted;

  {
    std::ofstream csv = open_output(out / (prefix + "evaluation_aggregates.csv"));
    write_csv_row(csv, {"method", "mean_cost", "count", "mean_wall_time"});
    write_csv_row(csv, {fb_name, csv_number(summary.feedback_mean_cost),
                        std::to_string(summary.counted), csv_number(mean_of(fb_walls, counted))});
    write_csv_row(csv, {"lqr", csv_number(summary.lqr_mean_cost),
                        std::to_string(summary.counted), csv_number(mean_of(lqr_walls, counted))});
    if (ev.open_loop) {
      write_csv_row(csv, {"open_loop", csv_number(summary.open_loop_mean_cost),
                          std::to_string(summary.counted), csv_number(mean_of(ol_walls, counted))});
    }
  }

  const auto traces = static_cast<std::size_t>(std::min<Eigen::Index>(
      ev.traces, static_cast<Eigen::Index>(count)));
  for (std::size_t i = 0; i < traces; ++i) {
    const std::string id = std::to_string(i);
    if (fb_runs[i].converged) {
      write_trace_csv(out / (prefix + "trace_ic" + id + "_" + fb_name + ".csv"), fb_runs[i].sim,
                      0.0, ev.sim_tau);
    }
    if (lqr_runs[i].converged) {
      write_trace_csv(out / (prefix + "trace_ic" + id + "_lqr.csv"), lqr_runs[i].sim, 0.0,
                      ev.sim_tau);
    }
    if (ev.open_loop && std::isfinite(ol_runs[i].cost)) {
      const SimulationResult sim =
          simulate_closed_loop(problem, sequence_controller(ol_runs[i].u, 0.0, ev.sim_tau),
                               ics[i], 0.0, horizon, ev.sim_tau, Integrator::euler);
      write_trace_csv(out / (prefix + "trace_ic" + id + "_open_loop.csv"), sim, 0.0, ev.sim_tau);
    }
  }

  // Reference trajectory at the constant initial profile x0 = 1.28.
  {
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(problem.d, 1.28);
    const ControllerRun fb = timed_simulation(problem, feedback, x0, horizon, ev.sim_tau,
                                              ev.integrator);
    const ControllerRun lq = timed_simulation(problem, lqr, x0, horizon, ev.sim_tau,
                                              ev.integrator);
    if (fb.converged) {
      write_trace_csv(out / (prefix + "trace_const_" + fb_name + ".csv"), fb.sim, 0.0,
                      ev.sim_tau);
    }
    if (lq.converged) {
      write_trace_csv(out / (prefix + "trace_const_lqr.csv"), lq.sim, 0.0, ev.sim_tau);
    }
    bool ol_traced = false;
    if (ev.open_loop) {
      const OpenLoopSolution sol =
          open_loop_optimize(problem, x0, horizon, ev.sim_tau, ev.open_loop_max_iterations,
                             ev.open_loop_tolerance, &riccati, &inst.g_vec);
      if (std::isfinite(sol.cost)) {
        const SimulationResult sim =
            simulate_closed_loop(problem, sequence_controller(sol.u, 0.0, ev.sim_tau), x0, 0.0,
                                 horizon, ev.sim_tau, Integrator::euler);
        write_trace_csv(out / (prefix + "trace_const_open_loop.csv"), sim, 0.0, ev.sim_tau);
        ol_traced = true;
      }
    }
    std::ofstream gp = open_output(out / (prefix + "controls.gp"));
    gp << "set datafile separator \",\"\n"
       << "set xlabel \"t\"\n"
       << "set ylabel \"u(t)\"\n"
       << "plot \"" << prefix << "trace_const_" << fb_name
       << ".csv\" skip 1 using 1:2 with lines title \"" << fb_name << "\", \\\n"
       << "     \"" << prefix << "trace_const_lqr.csv\" skip 1 using 1:2 with lines title \"lqr\"";
    if (ol_traced) {
      gp << ", \\\n     \"" << prefix
         << "trace_const_open_loop.csv\" skip 1 using 1:2 with lines title \"open loop\"";
    }
    gp << "\n";
  }

  return summary;
}

void cmd_solve(const std::string& config_path, const std::string& out_dir) {
  const RunConfig config = load_run_config(config_path);
  const SolveSummary summary = run_solve(config, out_dir, "");
  std::printf("solve_done intervals=%lld wall=%.2f checkpoint=%s\n",
              static_cast<long long>(summary.intervals), summary.wall_time,
              summary.checkpoint_file.c_str());
}

void cmd_evaluate(const std::string& checkpoint_path, const std::string& config_path,
                  const std::string& out_dir) {
  const RunConfig config = load_run_config(config_path);
  const ValueFunctionPath path = load_path(checkpoint_path);
  const EvaluationSummary summary = run_evaluation(config, path, out_dir, "");
  std::printf("evaluate_done method=%s mean_cost=%.6f lqr_mean_cost=%.6f",
              method_name(config.solver.method), summary.feedback_mean_cost,
              summary.lqr_mean_cost);
  if (config.evaluate.open_loop) {
    std::printf(" open_loop_mean_cost=%.6f", summary.open_loop_mean_cost);
  }
  std::printf(" counted=%lld omitted=%lld\n", static_cast<long long>(summary.counted),
              static_cast<long long>(summary.omitted));
}

void cmd_compare(const std::vector<std::string>& config_paths, const std::string& out_dir) {
  if (config_paths.empty()) throw config_error("compare needs at least one config file");
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  struct Cell {
    std::string name;
    std::string method;
    Eigen::Index degree = 0;
    Eigen::Index dimension = 0;
    double solve_wall = 0.0;
    EvaluationSummary eval;
    bool ok = false;
    std::string error;
  };
  std::vector<Cell> cells;
  std::set<std::string> used_names;

  for (const std::string& config_path : config_paths) {
    Cell cell;
    cell.name = fs::path(config_path).stem().string();
    for (int suffix = 2; !used_names.insert(cell.name).second; ++suffix) {
      cell.name = fs::path(config_path).stem().string() + "_" + std::to_string(suffix);
    }
    try {
      const RunConfig config = load_run_config(config_path);
      cell.method = method_name(config.solver.method);
      cell.degree = config.solver.basis_size - 1;
      cell.dimension = config.dimension;
      ValueFunctionPath path;
      const SolveSummary solve = run_solve(config, out_dir, cell.name + "_", &path);
      cell.solve_wall = solve.wall_time;
      cell.eval = run_evaluation(config, path, out_dir, cell.name + "_");
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.error = e.what();
      std::printf("compare_cell config=%s status=failed error=%s\n", cell.name.c_str(), e.what());
    }
    if (cell.ok) {
      std::printf("compare_cell config=%s status=ok method=%s degree=%lld wall=%.2f "
                  "mean_cost=%.6f\n",
                  cell.name.c_str(), cell.method.c_str(), static_cast<long long>(cell.degree),
                  cell.solve_wall, cell.eval.feedback_mean_cost);
    }
    cells.push_back(std::move(cell));
  }

  {
    std::ofstream csv = open_output(out / "comparison.csv");
    write_csv_row(csv, {"config", "method", "degree", "dimension", "solve_wall_s", "mean_cost",
                        "lqr_mean_cost", "open_loop_mean_cost", "initial_conditions", "status",
                        "error"});
    for (const Cell& cell : cells) {
      if (cell.ok) {
        write_csv_row(csv, {cell.name, cell.method, std::to_string(cell.degree),
                            std::to_string(cell.dimension), csv_fixed(cell.solve_wall, 2),
                            csv_number(cell.eval.feedback_mean_cost),
                            csv_number(cell.eval.lqr_mean_cost),
                            csv_number(cell.eval.open_loop_mean_cost),
                            std::to_string(cell.eval.counted), "ok", ""});
      } else {
        write_csv_row(csv, {cell.name, cell.method, "", "", "", "", "", "", "", "failed",
                            cell.error});
      }
    }
  }

  // Mean cost against polynomial degree, one gnuplot index block per method.
  {
    std::vector<Cell> sorted;
    for (const Cell& cell : cells) {
      if (cell.ok) sorted.push_back(cell);
    }
    std::sort(sorted.begin(), sorted.end(), [](const Cell& a, const Cell& b) {
      return a.method != b.method ? a.method < b.method : a.degree < b.degree;
    });
    std::ofstream dat = open_output(out / "cost_vs_degree.dat");
    std::ofstream gp = open_output(out / "cost_vs_degree.gp");
    gp << "set xlabel \"polynomial degree\"\nset ylabel \"mean cost\"\nplot ";
    std::string method;
    int block = -1;
    for (const Cell& cell : sorted) {
      if (cell.method != method) {
        if (block >= 0) {
          dat << "\n\n";
          gp << ", \\\n     ";
        }
        ++block;
        method = cell.method;
        dat << "# " << method << ": degree mean_cost\n";
        gp << "\"cost_vs_degree.dat\" index " << block << " using 1:2 with linespoints title \""
           << method << "\"";
      }
      dat << cell.degree << ' ' << csv_number(cell.eval.feedback_mean_cost) << '\n';
    }
    gp << "\n";
  }
}

}  // namespace ttc
