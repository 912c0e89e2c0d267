#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "ttcontrol/poly_basis.hpp"
#include "ttcontrol/tensor_train.hpp"
#include "ttcontrol/value_model.hpp"

//! Optimal-control problem abstraction, the reaction-diffusion benchmark,
//! closed-loop simulation, GHJB target generation and sampling utilities.
namespace ttc {

//! Finite-horizon problem with scalar control:
//! minimize int c(t,x) + gamma u^2 dt + terminal(x(T)) subject to
//! dx/dt = f(t,x) + g(t,x) u.
struct ControlProblem {
  Eigen::Index d = 0;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> f;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> g;
  std::function<double(double, const Eigen::VectorXd&)> c;
  std::function<double(const Eigen::VectorXd&)> terminal;
  //! Derivatives used by the adjoint open-loop optimizer; optional elsewhere.
  std::function<Eigen::MatrixXd(double, const Eigen::VectorXd&)> df;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> c_grad;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> terminal_grad;
  //! Quadratic form of the terminal cost, sum_k w_k x_k^2 + offset, used to
  //! build the exact terminal coefficient tensor; empty when the terminal
  //! cost has no such form.
  Eigen::VectorXd terminal_weights;
  double terminal_offset = 0.0;
  double gamma = 1.0;
  double horizon = 0.0;
  double domain_lo = -2.0;
  double domain_hi = 2.0;
};

//! Finite-difference data behind the benchmark: a heat equation on [-1,1]
//! with Neumann boundary, an unstable cubic reaction term and an actuator
//! supported on |s| <= 0.4, discretized on d grid nodes s_k = -1 + 2(k-1)/(d-1)
//! (1-based k) with spacing h = 2/(d-1).
struct BenchmarkInstance {
  Eigen::Index d = 0;
  double sigma = 1.0;
  double gamma = 0.1;
  double terminal_weight = 1.0;
  double h = 0.0;
  Eigen::MatrixXd a_mat;    // sigma/h^2 tridiagonal with reflecting corner rows
  Eigen::VectorXd g_vec;    // actuator indicator at the grid nodes
  Eigen::VectorXd q_diag;   // spatial quadrature weights, h at every node
};

//! Grid data for the benchmark discretization; d >= 3.
BenchmarkInstance make_benchmark_instance(Eigen::Index d, double sigma, double gamma,
                                          double terminal_weight);

//! Benchmark ControlProblem; `cubic` switches the reaction term, off gives the
//! linear-quadratic instance used by the Riccati cross-checks.
ControlProblem build_benchmark(Eigen::Index d, double sigma, double gamma,
                               double terminal_weight, bool cubic = true);

using Controller = std::function<double(double, const Eigen::VectorXd&)>;

Controller make_controller(const FeedbackLaw& law);
Controller constant_controller(double u);

enum class Integrator { euler, rk4 };

struct SimulationResult {
  Eigen::MatrixXd trajectory;  // (N+1) x d, one state per row
  Eigen::VectorXd controls;    // N
  double cost = 0.0;
};

//! Integrates dx/dt = f + g u from t0 to t1 with step tau (which must divide
//! t1 - t0) and accumulates the cost by the left rectangle rule plus terminal
//! cost. Throws numeric_error with the step index when the state leaves the
//! representable range.
SimulationResult simulate_closed_loop(const ControlProblem& problem, const Controller& u,
                                      const Eigen::VectorXd& x0, double t0, double t1,
                                      double tau, Integrator method = Integrator::euler);

//! Right-hand side targets of the time-inverted generalized HJB equation at
//! the given samples: y_k = grad V(x_k)^T (f + g a) + c + gamma a^2 with
//! V(x) = A phi(x) and a = alpha(t, x_k) the frozen policy. Forward Euler on
//! these targets in inverted time realizes the backward flow.
Eigen::VectorXd ghjb_targets(const ControlProblem& problem, const TensorTrain& a,
                             const BasisSet& basis, const Controller& alpha, double t,
                             const Eigen::MatrixXd& samples);

//! M independent uniform draws from (lo, hi)^d, rows of the result.
Eigen::MatrixXd sample_domain(Eigen::Index d, Eigen::Index m, std::uint64_t seed,
                              double lo = -2.0, double hi = 2.0);

enum class ICKind { poly, constant };

//! Initial conditions on the benchmark grid. poly: x0(s) = (s-1)^2 (s+1)^2 p(s)
//! with random polynomial p, rescaled so the max over [-1,1] (on a 1001-point
//! grid) is 1.9, then sampled at the grid nodes. constant: x0 = c with
//! c ~ Uniform[1,2).
std::vector<Eigen::VectorXd> sample_initial_conditions(ICKind kind, Eigen::Index count,
                                                       Eigen::Index d, std::uint64_t seed);

}  // namespace ttc
