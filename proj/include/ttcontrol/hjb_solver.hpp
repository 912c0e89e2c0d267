#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ttcontrol/ocp.hpp"
#include "ttcontrol/poly_basis.hpp"
#include "ttcontrol/tensor_train.hpp"
#include "ttcontrol/value_model.hpp"

//! Backward-in-time HJB synthesis: policy iteration over macro intervals with
//! three interchangeable interval solvers (dynamical low-rank, Bellman
//! trajectory regression, and the hybrid that mixes them on a schedule).
namespace ttc {

enum class Method { dlra, bellman, hybrid };

struct SolverConfig {
  double horizon = 0.3;
  double tau = 0.001;                 // macro step
  Eigen::Index micro_steps = 1;       // micro steps per macro interval (L)
  std::vector<Eigen::Index> ranks;    // interior TT ranks r_1..r_{d-1}
  Eigen::Index basis_size = 9;        // polynomials per dimension (degree + 1)
  Eigen::Index samples = 16200;       // domain samples M
  double delta_tol = 1e-6;            // policy iteration stopping threshold
  double delta_reg = 1e-10;           // ridge weight in both fits
  double hard_point_weight = 1e10;    // weight pinning V(0) = 0
  Method method = Method::dlra;
  Eigen::Index hybrid_period = 10;    // m: Bellman reset period of the hybrid
  Eigen::Index warmup_bellman_steps = 10;
  int max_policy_iterations = 50;
  std::uint64_t seed = 0;
  int als_sweeps = 20;
  double als_tol = 1e-10;
  bool resample_each_interval = false;
  InterpMode interp = InterpMode::piecewise_constant;
  Eigen::Index checkpoint_interval = 0;  // macro intervals between hooks, 0 = off
  std::function<void(const ValueFunctionPath&, Eigen::Index)> checkpoint_hook;
  std::function<void(const std::string&)> log;  // machine-parseable progress lines
};

//! One macro interval as seen by the policy iteration: physical time span,
//! the effective inner solver, and for Bellman updates the number of macro
//! steps the trajectory integral spans (Eq. m-step hybrid reset).
struct IntervalTask {
  Eigen::Index index = 0;  // macro index of the left node
  double t_left = 0.0;
  double t_right = 0.0;
  Method method = Method::dlra;
  Eigen::Index bellman_span = 1;
};

//! Accepted iterate of one interval's policy iteration: tensors on the micro
//! nodes (ascending, last = terminal condition) plus convergence bookkeeping.
struct PolicyIterate {
  std::vector<double> times;
  std::vector<TensorTrain> tensors;
  int iterations = 0;
  double metric = 0.0;                // final policy-update metric
  std::vector<double> metric_history;
  double fit_residual = 0.0;          // mean tangent residual (dlra) or ALS residual
  Eigen::Index dropped_samples = 0;
  bool converged = true;
};

struct IntervalDiagnostics {
  Eigen::Index interval = 0;
  Method method = Method::dlra;
  int iterations = 0;
  double metric = 0.0;
  double fit_residual = 0.0;
  Eigen::Index dropped_samples = 0;
  bool converged = true;
  double wall_time = 0.0;
};

struct SolveResult {
  ValueFunctionPath path;
  std::vector<IntervalDiagnostics> diagnostics;
};

//! Inner solver selection for one terminal-side interval counter j (j = 0 is
//! the interval touching the horizon): Bellman within the warmup and whenever
//! j + 1 is a multiple of m, so every scheduled Bellman update has a full m
//! already-solved macro steps to integrate over; DLRA otherwise.
Method hybrid_schedule(Eigen::Index j, Eigen::Index m, Eigen::Index warmup);

//! One explicit Euler step of the time-inverted GHJB flow per micro step:
//! d-orthogonalize, fit the tangent against the empirical targets, step, and
//! retract back to the configured ranks by TT-SVD. Returns the micro-node
//! tensors ascending in time with the terminal last. mean_residual receives
//! the tangent-fit relative residual averaged over the micro steps.
std::vector<TensorTrain> dlra_interval_solver(const ControlProblem& problem,
                                              const BasisSet& basis, const TensorTrain& terminal,
                                              const Controller& alpha, const IntervalTask& task,
                                              const Eigen::MatrixXd& samples,
                                              const SolverConfig& config, double& mean_residual);

//! Bellman trajectory regression: integrate each sample forward under the
//! frozen policy (the solved path supplies the feedback beyond the current
//! interval on multi-step spans), accumulate the running cost, add the value
//! at the span's end, and fit a rank-r tensor by ALS warm-started at `init`.
//! Samples whose trajectories leave the representable range are dropped.
TensorTrain bellman_interval_solver(const ControlProblem& problem, const BasisSet& basis,
                                    const ValueFunctionPath& solved, const Controller& alpha,
                                    const IntervalTask& task, const Eigen::MatrixXd& samples,
                                    const TensorTrain& init, const SolverConfig& config,
                                    double& fit_residual, Eigen::Index& dropped);

//! Policy iteration on one interval: alternate the configured interval solver
//! under a frozen policy with the feedback update, until the mean-square
//! policy-update metric over new micro nodes and samples drops below
//! delta_tol or the iteration cap is hit (best iterate kept with a warning).
PolicyIterate policy_iteration_interval(const ControlProblem& problem, const BasisSet& basis,
                                        const TensorTrain& terminal, const Controller& alpha_init,
                                        const IntervalTask& task, const Eigen::MatrixXd& samples,
                                        const ValueFunctionPath& solved,
                                        const SolverConfig& config);

//! Backward sweep over all macro intervals from the exact terminal tensor,
//! dispatching methods per config (warmup intervals always use Bellman).
SolveResult solve_value_function(const ControlProblem& problem, const SolverConfig& config);

const char* method_name(Method method);

}  // namespace ttc
