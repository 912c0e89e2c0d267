#include "ttcontrol/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ttcontrol/common.hpp"

namespace ttc {

Eigen::MatrixXd RiccatiPath::at(double t) const {
  if (times.empty()) throw shape_error("Riccati path is empty");
  if (t <= times.front()) return p.front();
  if (t >= times.back()) return p.back();
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const auto i1 = static_cast<std::size_t>(it - times.begin());
  const std::size_t i0 = i1 - 1;
  const double theta = (t - times[i0]) / (times[i1] - times[i0]);
  return (1.0 - theta) * p[i0] + theta * p[i1];
}

double RiccatiPath::value(double t, const Eigen::VectorXd& x) const {
  return x.dot(at(t) * x);
}

RiccatiPath solve_dre(const Eigen::MatrixXd& a_lin, const Eigen::VectorXd& g,
                      const Eigen::MatrixXd& q, double gamma, double terminal_weight,
                      double horizon, double tau) {
  if (gamma <= 0.0) throw config_error("control weight gamma must be positive");
  const Eigen::Index d = a_lin.rows();
  if (a_lin.cols() != d || g.size() != d || q.rows() != d || q.cols() != d) {
    throw shape_error("Riccati inputs have inconsistent dimensions");
  }
  if (tau <= 0.0) throw config_error("step size must be positive");
  const auto steps = static_cast<Eigen::Index>(std::llround(horizon / tau));
  if (steps < 1 || std::abs(static_cast<double>(steps) * tau - horizon) > 1e-12) {
    throw config_error("step size " + std::to_string(tau) + " does not divide the horizon " +
                       std::to_string(horizon));
  }

  // Substituting s = T - t turns the backward equation into a forward one:
  // dP/ds = A^T P + P A - (1/gamma) P g g^T P + Q.
  const auto rhs = [&](const Eigen::MatrixXd& pm) -> Eigen::MatrixXd {
    return a_lin.transpose() * pm + pm * a_lin - (pm * g) * ((g.transpose() * pm) / gamma) + q;
  };

  RiccatiPath path;
  path.times.resize(static_cast<std::size_t>(steps) + 1);
  path.p.resize(static_cast<std::size_t>(steps) + 1);
  Eigen::MatrixXd pm = terminal_weight * q;
  pm = 0.5 * (pm + pm.transpose().eval());
  path.times[static_cast<std::size_t>(steps)] = horizon;
  path.p[static_cast<std::size_t>(steps)] = pm;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::MatrixXd k1 = rhs(pm);
    const Eigen::MatrixXd k2 = rhs(pm + 0.5 * tau * k1);
    const Eigen::MatrixXd k3 = rhs(pm + 0.5 * tau * k2);
    const Eigen::MatrixXd k4 = rhs(pm + tau * k3);
    pm += tau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    pm = 0.5 * (pm + pm.transpose().eval());
    const double t = horizon - static_cast<double>(k + 1) * tau;
    if (!pm.allFinite() || pm.norm() > 1e12) {
      throw numeric_error("Riccati solution blew up at t = " + std::to_string(t));
    }
    path.times[static_cast<std::size_t>(steps - k - 1)] = t;
    path.p[static_cast<std::size_t>(steps - k - 1)] = pm;
  }
  return path;
}

Controller lqr_controller(const RiccatiPath& riccati, const Eigen::VectorXd& g, double gamma) {
  return [riccati, g, gamma](double t, const Eigen::VectorXd& x) {
    return -g.dot(riccati.at(t) * x) / gamma;
  };
}

Controller sequence_controller(const Eigen::VectorXd& u, double t0, double tau) {
  return [u, t0, tau](double t, const Eigen::VectorXd&) {
    auto k = static_cast<Eigen::Index>(std::floor((t - t0) / tau + 1e-9));
    k = std::clamp<Eigen::Index>(k, 0, u.size() - 1);
    return u(k);
  };
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Forward Euler rollout of a control sequence; returns the discretized cost
// and fills the trajectory. Infinite cost signals a non-finite state, which
// Armijo treats as a rejected step.
double rollout(const ControlProblem& problem, const Eigen::VectorXd& u,
               const Eigen::VectorXd& x0, double t0, double tau, Eigen::MatrixXd& xs) {
  const Eigen::Index steps = u.size();
  xs.resize(steps + 1, problem.d);
  xs.row(0) = x0.transpose();
  Eigen::VectorXd x = x0;
  double cost = 0.0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * tau;
    cost += tau * (problem.c(t, x) + problem.gamma * u(k) * u(k));
    x += tau * (problem.f(t, x) + problem.g(t, x) * u(k));
    if (!x.allFinite()) return kInf;
    xs.row(k + 1) = x.transpose();
  }
  cost += problem.terminal(x);
  return std::isfinite(cost) ? cost : kInf;
}

// Discrete adjoint of the rollout above; the gradient matches central finite
// differences of the discretized cost to machine precision.
Eigen::VectorXd adjoint_gradient(const ControlProblem& problem, const Eigen::VectorXd& u,
                                 const Eigen::MatrixXd& xs, double t0, double tau) {
  const Eigen::Index steps = u.size();
  Eigen::VectorXd grad(steps);
  Eigen::VectorXd lambda = problem.terminal_grad(xs.row(steps).transpose());
  for (Eigen::Index k = steps; k-- > 0;) {
    const double t = t0 + static_cast<double>(k) * tau;
    const Eigen::VectorXd x = xs.row(k).transpose();
    grad(k) = 2.0 * tau * problem.gamma * u(k) + tau * problem.g(t, x).dot(lambda);
    lambda = tau * problem.c_grad(t, x) +
             (Eigen::MatrixXd::Identity(problem.d, problem.d) + tau * problem.df(t, x))
                     .transpose() *
                 lambda;
  }
  return grad;
}

}  // namespace

double open_loop_cost(const ControlProblem& problem, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& x0, double tau, Eigen::VectorXd* gradient) {
  Eigen::MatrixXd xs;
  const double cost = rollout(problem, u, x0, 0.0, tau, xs);
  if (gradient != nullptr) {
    if (!problem.df || !problem.c_grad || !problem.terminal_grad) {
      throw config_error("the gradient needs df, c_grad and terminal_grad callbacks");
    }
    if (!std::isfinite(cost)) {
      throw numeric_error("cannot differentiate a diverging trajectory");
    }
    *gradient = adjoint_gradient(problem, u, xs, 0.0, tau);
  }
  return cost;
}

OpenLoopSolution open_loop_optimize(const ControlProblem& problem, const Eigen::VectorXd& x0,
                                    double horizon, double tau, int max_iters, double tol,
                                    const RiccatiPath* warm_start, const Eigen::VectorXd* warm_g) {
  if (!problem.df || !problem.c_grad || !problem.terminal_grad) {
    throw config_error("open-loop optimization needs df, c_grad and terminal_grad callbacks");
  }
  if (!x0.allFinite()) throw shape_error("initial state is not finite");
  const auto steps = static_cast<Eigen::Index>(std::llround(horizon / tau));
  if (steps < 1 || std::abs(static_cast<double>(steps) * tau - horizon) > 1e-12) {
    throw config_error("step size " + std::to_string(tau) + " does not divide the horizon " +
                       std::to_string(horizon));
  }

  OpenLoopSolution sol;
  sol.u = Eigen::VectorXd::Zero(steps);
  if (warm_start != nullptr && warm_g != nullptr) {
    try {
      const Controller lqr = lqr_controller(*warm_start, *warm_g, problem.gamma);
      const SimulationResult warm =
          simulate_closed_loop(problem, lqr, x0, 0.0, horizon, tau, Integrator::euler);
      sol.u = warm.controls;
    } catch (const numeric_error&) {
      // LQR trajectory blew up; fall back to the zero control start.
    }
  }

  Eigen::MatrixXd xs;
  double cost = rollout(problem, sol.u, x0, 0.0, tau, xs);
  if (!std::isfinite(cost)) {
    sol.u.setZero();
    cost = rollout(problem, sol.u, x0, 0.0, tau, xs);
  }
  if (!std::isfinite(cost)) {
    sol.cost = kInf;
    return sol;
  }

  std::vector<double> history{cost};
  double step = 1.0;
  for (int iter = 1; iter <= max_iters; ++iter) {
    sol.iterations = iter;
    const Eigen::VectorXd grad = adjoint_gradient(problem, sol.u, xs, 0.0, tau);
    if (grad.cwiseAbs().maxCoeff() < tol) {
      sol.converged = true;
      break;
    }
    const double slope = grad.squaredNorm();
    bool accepted = false;
    double s = step;
    Eigen::MatrixXd xs_try;
    for (int bt = 0; bt < 60; ++bt) {
      const Eigen::VectorXd u_try = sol.u - s * grad;
      const double cost_try = rollout(problem, u_try, x0, 0.0, tau, xs_try);
      if (cost_try <= cost - 1e-4 * s * slope) {
        sol.u = u_try;
        cost = cost_try;
        xs.swap(xs_try);
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;
    step = std::min(2.0 * s, 1e3);
    history.push_back(cost);
    const std::size_t len = history.size();
    if (len >= 6) {
      const double drop = history[len - 6] - cost;
      if (drop / std::max(std::abs(cost), 1.0) < tol) {
        sol.converged = true;
        break;
      }
    }
  }
  sol.cost = cost;
  return sol;
}

}  // namespace ttc
