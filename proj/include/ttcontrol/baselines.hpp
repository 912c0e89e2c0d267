#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ttcontrol/ocp.hpp"

//! Comparison controllers: finite-horizon LQR via the backward differential
//! Riccati equation and an adjoint-gradient open-loop optimizer. Both double
//! as numerical oracles for the HJB solver on the linear-quadratic instance.
namespace ttc {

//! Backward Riccati solution on a uniform time grid; the LQR value of the
//! linearized problem is x^T P(t) x.
struct RiccatiPath {
  std::vector<double> times;        // ascending, from t=0 to t=T
  std::vector<Eigen::MatrixXd> p;   // symmetric d x d per node

  //! P(t) by linear interpolation, clamped to the span.
  Eigen::MatrixXd at(double t) const;
  //! x^T P(t) x.
  double value(double t, const Eigen::VectorXd& x) const;
};

//! Integrates -dP/dt = A^T P + P A - (1/gamma) P g g^T P + Q backward from
//! P(T) = c_T Q with RK4 at step tau, symmetrizing every step. Throws
//! numeric_error with the failure time on finite-time blow-up.
RiccatiPath solve_dre(const Eigen::MatrixXd& a_lin, const Eigen::VectorXd& g,
                      const Eigen::MatrixXd& q, double gamma, double terminal_weight, double horizon,
                      double tau);

//! u(t,x) = -(1/gamma) g^T P(t) x.
Controller lqr_controller(const RiccatiPath& riccati, const Eigen::VectorXd& g, double gamma);

struct OpenLoopSolution {
  Eigen::VectorXd u;      // one control per tau step
  double cost = 0.0;
  bool converged = false;
  int iterations = 0;
};

//! Optimizes the discretized control sequence by adjoint-gradient descent
//! with Armijo backtracking, warm-started from the LQR controls when a
//! Riccati path is supplied. The gradient differentiates the same
//! Euler/left-rectangle discretization simulate_closed_loop uses, so the
//! returned cost is exactly the simulated cost of the returned controls.
OpenLoopSolution open_loop_optimize(const ControlProblem& problem, const Eigen::VectorXd& x0,
                                    double horizon, double tau, int max_iters, double tol,
                                    const RiccatiPath* warm_start = nullptr,
                                    const Eigen::VectorXd* warm_g = nullptr);

//! Piecewise-constant playback of an open-loop control sequence on the tau grid.
Controller sequence_controller(const Eigen::VectorXd& u, double t0, double tau);

//! Cost of a fixed control sequence from x0 under the Euler/left-rectangle
//! discretization, optionally with its exact discrete-adjoint gradient; the
//! objective open_loop_optimize descends, exposed for cross-checks. Throws
//! numeric_error when the gradient is requested on a diverging trajectory.
double open_loop_cost(const ControlProblem& problem, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& x0, double tau,
                      Eigen::VectorXd* gradient = nullptr);

}  // namespace ttc
