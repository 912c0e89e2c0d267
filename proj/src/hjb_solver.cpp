#include "ttcontrol/hjb_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ttcontrol/common.hpp"
#include "ttcontrol/tangent_regression.hpp"

namespace ttc {

const char* method_name(Method method) {
  switch (method) {
    case Method::dlra: return "dlra";
    case Method::bellman: return "bellman";
    default: return "hybrid";
  }
}

Method hybrid_schedule(Eigen::Index j, Eigen::Index m, Eigen::Index warmup) {
  if (m < 1) throw config_error("hybrid period must be at least 1");
  if (j < warmup) return Method::bellman;
  return (j + 1) % m == 0 ? Method::bellman : Method::dlra;
}

namespace {

// Clamps requested interior ranks to representable ones for the mode sizes
// (each bond bounded by the full ranks of both unfoldings).
std::vector<Eigen::Index> clamp_ranks(const std::vector<Eigen::Index>& modes,
                                      std::vector<Eigen::Index> ranks) {
  const auto d = static_cast<Eigen::Index>(modes.size());
  if (static_cast<Eigen::Index>(ranks.size()) != d - 1) {
    throw config_error("got " + std::to_string(ranks.size()) + " interior ranks for order " +
                       std::to_string(d));
  }
  Eigen::Index left = 1;
  for (Eigen::Index mu = 0; mu + 1 < d; ++mu) {
    left = std::min(ranks[static_cast<std::size_t>(mu)], left * modes[static_cast<std::size_t>(mu)]);
    ranks[static_cast<std::size_t>(mu)] = left;
  }
  Eigen::Index right = 1;
  for (Eigen::Index mu = d - 1; mu-- > 0;) {
    right = std::min(ranks[static_cast<std::size_t>(mu)],
                     modes[static_cast<std::size_t>(mu) + 1] * right);
    ranks[static_cast<std::size_t>(mu)] = right;
  }
  for (auto r : ranks) {
    if (r < 1) throw config_error("interior ranks must be at least 1");
  }
  return ranks;
}

// Brings a tensor to exactly the target interior ranks: truncate any bond
// above target, then zero-pad any bond below it.
TensorTrain conform_ranks(const TensorTrain& tt, const std::vector<Eigen::Index>& target) {
  const std::vector<Eigen::Index> current = tt.interior_ranks();
  std::vector<Eigen::Index> shrink(current.size());
  bool need_shrink = false;
  bool need_pad = false;
  for (std::size_t b = 0; b < current.size(); ++b) {
    shrink[b] = std::min(current[b], target[b]);
    need_shrink = need_shrink || shrink[b] < current[b];
    need_pad = need_pad || shrink[b] < target[b];
  }
  TensorTrain out = need_shrink ? truncate(tt, shrink) : tt;
  if (need_pad) out = pad_ranks(out, target);
  return out;
}

double feedback_from_tensor(const ControlProblem& problem, const BasisSet& basis,
                            const TensorTrain& a, double t, const Eigen::VectorXd& x) {
  const Eigen::VectorXd grad = eval_gradient(a, basis, x);
  return -0.5 / problem.gamma * problem.g(t, x).dot(grad);
}

struct IterateData {
  std::vector<TensorTrain> tensors;
  double fit_residual = 0.0;
  Eigen::Index dropped = 0;
};

}  // namespace

std::vector<TensorTrain> dlra_interval_solver(const ControlProblem& problem,
                                              const BasisSet& basis, const TensorTrain& terminal,
                                              const Controller& alpha, const IntervalTask& task,
                                              const Eigen::MatrixXd& samples,
                                              const SolverConfig& config, double& mean_residual) {
  const Eigen::Index micro = std::max<Eigen::Index>(1, config.micro_steps);
  const double tau_micro = (task.t_right - task.t_left) / static_cast<double>(micro);
  if (tau_micro <= 0.0) throw config_error("interval has non-positive length");

  const std::vector<Eigen::Index> target = terminal.interior_ranks();
  const std::vector<Eigen::MatrixXd> tables = tabulate_basis(basis, samples);

  std::vector<TensorTrain> nodes(static_cast<std::size_t>(micro) + 1, terminal);
  TensorTrain current = terminal;
  double residual_sum = 0.0;
  for (Eigen::Index ell = 0; ell < micro; ++ell) {
    // March the time-inverted flow from the interval's right edge to its left;
    // the frozen policy is read at the physical left node of the micro step.
    const double t_hi = task.t_right - static_cast<double>(ell) * tau_micro;
    const double t_lo = t_hi - tau_micro;

    const TensorTrain a = orthogonalize(current, current.order());
    const TangentFrame frame = build_frame(a);
    RegressionProblem rp;
    rp.samples = samples;
    rp.targets = ghjb_targets(problem, a, basis, alpha, t_lo, samples);
    rp.ridge = config.delta_reg;
    rp.hard_points.push_back(
        {Eigen::VectorXd::Zero(problem.d), 0.0, config.hard_point_weight});
    const TangentFitResult fit = tangent_fit(frame, basis, tables, rp);
    residual_sum += fit.rel_residual;

    current = truncate(tangent_add(fit.tangent, tau_micro), target);
    nodes[static_cast<std::size_t>(micro - 1 - ell)] = current;
  }
  mean_residual = residual_sum / static_cast<double>(micro);
  return nodes;
}

TensorTrain bellman_interval_solver(const ControlProblem& problem, const BasisSet& basis,
                                    const ValueFunctionPath& solved, const Controller& alpha,
                                    const IntervalTask& task, const Eigen::MatrixXd& samples,
                                    const TensorTrain& init, const SolverConfig& config,
                                    double& fit_residual, Eigen::Index& dropped) {
  const Eigen::Index span = std::max<Eigen::Index>(1, task.bellman_span);
  const Eigen::Index micro = std::max<Eigen::Index>(1, config.micro_steps);
  const double tau = task.t_right - task.t_left;
  const double tau_micro = tau / static_cast<double>(micro);
  const double t_end = task.t_left + static_cast<double>(span) * tau;
  const std::size_t end_node = path_node_index(solved, t_end + 1e-12);
  if (std::abs(solved.times[end_node] - t_end) > 1e-9) {
    throw shape_error("solved path has no node at the trajectory end time " +
                      std::to_string(t_end));
  }
  const TensorTrain& end_tensor = solved.tensors[end_node];

  // Inside the interval the policy-iteration candidate drives the flow; past
  // its right edge the already-solved feedback law takes over.
  FeedbackLaw solved_law;
  solved_law.path = &solved;
  solved_law.basis = &basis;
  solved_law.gamma = problem.gamma;
  solved_law.g = problem.g;
  const auto policy = [&](double t, const Eigen::VectorXd& x) {
    if (t < task.t_right - 1e-12) return alpha(t, x);
    return feedback_control(solved_law, t, x);
  };

  const Eigen::Index m = samples.rows();
  const Eigen::Index total_steps = span * micro;
  Eigen::VectorXd targets(m);
  std::vector<char> ok(static_cast<std::size_t>(m), 1);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t ks) {
    const auto k = static_cast<Eigen::Index>(ks);
    Eigen::VectorXd x = samples.row(k).transpose();
    double acc = 0.0;
    for (Eigen::Index step = 0; step < total_steps; ++step) {
      const double t = task.t_left + static_cast<double>(step) * tau_micro;
      const double u = policy(t, x);
      acc += tau_micro * (problem.c(t, x) + problem.gamma * u * u);
      x += tau_micro * (problem.f(t, x) + problem.g(t, x) * u);
      if (!x.allFinite()) {
        ok[ks] = 0;
        return;
      }
    }
    const double y = acc + eval_value(end_tensor, basis, x);
    if (!std::isfinite(y)) {
      ok[ks] = 0;
      return;
    }
    targets(k) = y;
  });

  Eigen::Index kept = 0;
  for (Eigen::Index k = 0; k < m; ++k) {
    if (ok[static_cast<std::size_t>(k)]) ++kept;
  }
  dropped = m - kept;
  if (kept == 0) {
    throw numeric_error("all " + std::to_string(m) + " sample trajectories diverged on interval " +
                        std::to_string(task.index));
  }
  RegressionProblem rp;
  rp.samples.resize(kept, problem.d);
  rp.targets.resize(kept);
  Eigen::Index row = 0;
  for (Eigen::Index k = 0; k < m; ++k) {
    if (!ok[static_cast<std::size_t>(k)]) continue;
    rp.samples.row(row) = samples.row(k);
    rp.targets(row) = targets(k);
    ++row;
  }
  rp.ridge = config.delta_reg;
  rp.hard_points.push_back({Eigen::VectorXd::Zero(problem.d), 0.0, config.hard_point_weight});

  const TensorTrain fit =
      als_fit(init, basis, rp, config.als_sweeps, config.delta_reg, config.als_tol);

  Eigen::VectorXd pred(kept);
  parallel_for(static_cast<std::size_t>(kept), [&](std::size_t ks) {
    pred(static_cast<Eigen::Index>(ks)) =
        eval_value(fit, basis, rp.samples.row(static_cast<Eigen::Index>(ks)).transpose());
  });
  const double ynorm = rp.targets.norm();
  fit_residual = (pred - rp.targets).norm() / (ynorm > 0.0 ? ynorm : 1.0);
  return fit;
}

PolicyIterate policy_iteration_interval(const ControlProblem& problem, const BasisSet& basis,
                                        const TensorTrain& terminal, const Controller& alpha_init,
                                        const IntervalTask& task, const Eigen::MatrixXd& samples,
                                        const ValueFunctionPath& solved,
                                        const SolverConfig& config) {
  const bool is_dlra = task.method == Method::dlra;
  const Eigen::Index micro =
      is_dlra ? std::max<Eigen::Index>(1, config.micro_steps) : Eigen::Index{1};
  const Eigen::Index m = samples.rows();
  const double tau_micro = (task.t_right - task.t_left) / static_cast<double>(micro);

  PolicyIterate result;
  result.times.resize(static_cast<std::size_t>(micro) + 1);
  for (Eigen::Index ell = 0; ell <= micro; ++ell) {
    result.times[static_cast<std::size_t>(ell)] =
        task.t_left + static_cast<double>(ell) * tau_micro;
  }

  // Zeroth iterate: the terminal tensor held constant over the interval,
  // carrying alpha_init as its policy.
  IterateData prev;
  prev.tensors.assign(static_cast<std::size_t>(micro) + 1, terminal);

  ValueFunctionPath prev_path;
  prev_path.times = result.times;
  prev_path.mode = InterpMode::piecewise_constant;

  // Cached per-node, per-sample values and policies of the previous iterate.
  Eigen::MatrixXd v_prev(micro, m), a_prev(micro, m);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t ks) {
    const auto k = static_cast<Eigen::Index>(ks);
    const Eigen::VectorXd x = samples.row(k).transpose();
    const double v = eval_value(terminal, basis, x);
    for (Eigen::Index ell = 0; ell < micro; ++ell) {
      v_prev(ell, k) = v;
      a_prev(ell, k) = alpha_init(result.times[static_cast<std::size_t>(ell)], x);
    }
  });

  IterateData best;
  double best_metric = std::numeric_limits<double>::infinity();
  int best_iterations = 0;
  result.converged = false;

  for (int iter = 1; iter <= config.max_policy_iterations; ++iter) {
    // The frozen policy of this iteration is the previous iterate's feedback
    // law; on the first pass that is exactly alpha_init.
    Controller frozen;
    FeedbackLaw prev_law;
    if (iter == 1) {
      frozen = alpha_init;
    } else {
      prev_path.tensors = prev.tensors;
      prev_law.path = &prev_path;
      prev_law.basis = &basis;
      prev_law.gamma = problem.gamma;
      prev_law.g = problem.g;
      frozen = [&prev_law](double t, const Eigen::VectorXd& x) {
        return feedback_control(prev_law, t, x);
      };
    }

    IterateData next;
    if (is_dlra) {
      next.tensors = dlra_interval_solver(problem, basis, terminal, frozen, task, samples,
                                          config, next.fit_residual);
    } else {
      const TensorTrain left =
          bellman_interval_solver(problem, basis, solved, frozen, task, samples,
                                  prev.tensors.front(), config, next.fit_residual, next.dropped);
      next.tensors = {left, terminal};
    }

    // Policy-update metric: mean square change of value and feedback over the
    // interval's new micro nodes and the sample set.
    Eigen::MatrixXd v_next(micro, m), a_next(micro, m);
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t ks) {
      const auto k = static_cast<Eigen::Index>(ks);
      const Eigen::VectorXd x = samples.row(k).transpose();
      for (Eigen::Index ell = 0; ell < micro; ++ell) {
        const TensorTrain& a = next.tensors[static_cast<std::size_t>(ell)];
        v_next(ell, k) = eval_value(a, basis, x);
        a_next(ell, k) = feedback_from_tensor(problem, basis, a,
                                              result.times[static_cast<std::size_t>(ell)], x);
      }
    });
    const double metric = ((v_next - v_prev).squaredNorm() + (a_next - a_prev).squaredNorm()) /
                          static_cast<double>(micro * m);
    if (!std::isfinite(metric)) {
      throw numeric_error("policy iteration metric is not finite on interval " +
                          std::to_string(task.index));
    }
    result.metric_history.push_back(metric);
    result.iterations = iter;

    if (metric < best_metric) {
      best_metric = metric;
      best = next;
      best_iterations = iter;
    }
    prev = std::move(next);
    v_prev.swap(v_next);
    a_prev.swap(a_next);

    if (metric < config.delta_tol) {
      result.converged = true;
      result.metric = metric;
      result.tensors = std::move(prev.tensors);
      result.fit_residual = prev.fit_residual;
      result.dropped_samples = prev.dropped;
      return result;
    }
  }

  // Iteration cap hit: keep the iterate with the smallest metric.
  result.metric = best_metric;
  result.tensors = std::move(best.tensors);
  result.fit_residual = best.fit_residual;
  result.dropped_samples = best.dropped;
  result.iterations = best_iterations;
  return result;
}

SolveResult solve_value_function(const ControlProblem& problem, const SolverConfig& config) {
  if (config.horizon <= 0.0) throw config_error("horizon must be positive");
  if (config.tau <= 0.0) throw config_error("macro step must be positive");
  if (config.delta_tol <= 0.0) throw config_error("policy iteration threshold must be positive");
  if (problem.terminal_weights.size() != problem.d) {
    throw config_error("terminal cost is not in the quadratic form the solver can represent");
  }
  const auto intervals = static_cast<Eigen::Index>(std::llround(config.horizon / config.tau));
  if (intervals < 1 ||
      std::abs(static_cast<double>(intervals) * config.tau - config.horizon) > 1e-12) {
    throw config_error("macro step " + std::to_string(config.tau) +
                       " does not divide the horizon " + std::to_string(config.horizon));
  }

  const BasisSet basis = BasisSet::build(config.basis_size, problem.domain_lo, problem.domain_hi,
                                         BasisKind::h2_orthonormal);
  const std::vector<Eigen::Index> modes(static_cast<std::size_t>(problem.d), config.basis_size);
  const std::vector<Eigen::Index> ranks = clamp_ranks(modes, config.ranks);

  const TensorTrain terminal = conform_ranks(
      build_quadratic_tt(basis, problem.terminal_weights, problem.terminal_offset), ranks);

  SolveResult result;
  result.path.mode = config.interp;
  result.path.times.resize(static_cast<std::size_t>(intervals) + 1);
  for (Eigen::Index i = 0; i <= intervals; ++i) {
    result.path.times[static_cast<std::size_t>(i)] = static_cast<double>(i) * config.tau;
  }
  result.path.tensors.assign(static_cast<std::size_t>(intervals) + 1, terminal);

  Eigen::MatrixXd samples = sample_domain(problem.d, config.samples, config.seed,
                                          problem.domain_lo, problem.domain_hi);

  // Solved suffix of the path, grown from the terminal node leftward; the
  // multi-step Bellman trajectories read their feedback and end values here.
  ValueFunctionPath solved;
  solved.mode = InterpMode::piecewise_constant;
  solved.times = {config.horizon};
  solved.tensors = {terminal};

  Eigen::Index solved_count = 0;
  for (Eigen::Index i = intervals; i-- > 0;) {
    const Eigen::Index j = intervals - 1 - i;  // terminal-side interval counter
    IntervalTask task;
    task.index = i;
    task.t_left = static_cast<double>(i) * config.tau;
    task.t_right = static_cast<double>(i + 1) * config.tau;
    if (config.method == Method::bellman || j < config.warmup_bellman_steps) {
      task.method = Method::bellman;
      task.bellman_span = 1;
    } else if (config.method == Method::dlra) {
      task.method = Method::dlra;
    } else {
      task.method = hybrid_schedule(j, config.hybrid_period, config.warmup_bellman_steps);
      if (task.method == Method::bellman) {
        task.bellman_span = std::min<Eigen::Index>(config.hybrid_period, j + 1);
      }
    }

    if (config.resample_each_interval) {
      samples = sample_domain(problem.d, config.samples, config.seed + 1 + static_cast<std::uint64_t>(j),
                              problem.domain_lo, problem.domain_hi);
    }

    const auto t0 = std::chrono::steady_clock::now();
    PolicyIterate iterate;
    try {
      const TensorTrain& right = result.path.tensors[static_cast<std::size_t>(i) + 1];
      ValueFunctionPath init_path;
      init_path.times = {task.t_right};
      init_path.tensors = {right};
      init_path.mode = InterpMode::piecewise_constant;
      FeedbackLaw init_law;
      init_law.path = &init_path;
      init_law.basis = &basis;
      init_law.gamma = problem.gamma;
      init_law.g = problem.g;
      const Controller alpha_init = [&init_law](double t, const Eigen::VectorXd& x) {
        return feedback_control(init_law, t, x);
      };
      iterate = policy_iteration_interval(problem, basis, right, alpha_init, task, samples,
                                          solved, config);
    } catch (const std::exception& e) {
      throw numeric_error("interval " + std::to_string(i) + " (" + method_name(task.method) +
                          ") failed: " + e.what());
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    result.path.tensors[static_cast<std::size_t>(i)] = iterate.tensors.front();
    solved.times.insert(solved.times.begin(), task.t_left);
    solved.tensors.insert(solved.tensors.begin(), iterate.tensors.front());

    IntervalDiagnostics diag;
    diag.interval = i;
    diag.method = task.method;
    diag.iterations = iterate.iterations;
    diag.metric = iterate.metric;
    diag.fit_residual = iterate.fit_residual;
    diag.dropped_samples = iterate.dropped_samples;
    diag.converged = iterate.converged;
    diag.wall_time = wall;
    result.diagnostics.push_back(diag);

    if (config.log) {
      char line[256];
      std::snprintf(line, sizeof line,
                    "interval=%lld method=%s iterations=%d metric=%.6e residual=%.6e wall=%.3f%s",
                    static_cast<long long>(i), method_name(task.method), iterate.iterations,
                    iterate.metric, iterate.fit_residual, wall,
                    iterate.converged ? "" : " warning=policy_iteration_cap");
      config.log(line);
    }

    ++solved_count;
    if (config.checkpoint_interval > 0 && config.checkpoint_hook &&
        (solved_count % config.checkpoint_interval == 0 || i == 0)) {
      config.checkpoint_hook(solved, i);
    }
  }
  return result;
}

}  // namespace ttc
