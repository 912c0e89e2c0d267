#include "ttcontrol/ocp.hpp"

#include <cmath>
#include <cstdint>

#include "ttcontrol/common.hpp"

namespace ttc {

BenchmarkInstance make_benchmark_instance(Eigen::Index d, double sigma, double gamma,
                                          double terminal_weight) {
  if (d < 3) {
    throw config_error("benchmark needs at least 3 grid nodes, got " + std::to_string(d));
  }
  if (gamma <= 0.0) {
    throw config_error("control weight gamma must be positive, got " + std::to_string(gamma));
  }
  BenchmarkInstance inst;
  inst.d = d;
  inst.sigma = sigma;
  inst.gamma = gamma;
  inst.terminal_weight = terminal_weight;
  inst.h = 2.0 / static_cast<double>(d - 1);
  const double scale = sigma / (inst.h * inst.h);

  inst.a_mat = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    inst.a_mat(i, i) = -2.0 * scale;
    if (i > 0) inst.a_mat(i, i - 1) = scale;
    if (i + 1 < d) inst.a_mat(i, i + 1) = scale;
  }
  // Neumann boundary by reflection: the ghost node equals the inner neighbor,
  // doubling the off-diagonal entry in the corner rows.
  inst.a_mat(0, 1) = 2.0 * scale;
  inst.a_mat(d - 1, d - 2) = 2.0 * scale;

  inst.g_vec.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double s = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(d - 1);
    inst.g_vec(k) = std::abs(s) <= 0.4 + 1e-12 ? 1.0 : 0.0;
  }
  inst.q_diag = Eigen::VectorXd::Constant(d, inst.h);
  return inst;
}

ControlProblem build_benchmark(Eigen::Index d, double sigma, double gamma,
                               double terminal_weight, bool cubic) {
  const BenchmarkInstance inst = make_benchmark_instance(d, sigma, gamma, terminal_weight);
  ControlProblem problem;
  problem.d = d;
  problem.gamma = gamma;
  const Eigen::MatrixXd a_mat = inst.a_mat;
  if (cubic) {
    problem.f = [a_mat](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return a_mat * x + x.array().cube().matrix();
    };
    problem.df = [a_mat](double, const Eigen::VectorXd& x) -> Eigen::MatrixXd {
      Eigen::MatrixXd jac = a_mat;
      jac.diagonal() += 3.0 * x.array().square().matrix();
      return jac;
    };
  } else {
    problem.f = [a_mat](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return a_mat * x;
    };
    problem.df = [a_mat](double, const Eigen::VectorXd&) -> Eigen::MatrixXd { return a_mat; };
  }
  const Eigen::VectorXd g_vec = inst.g_vec;
  problem.g = [g_vec](double, const Eigen::VectorXd&) { return g_vec; };
  const Eigen::VectorXd q_diag = inst.q_diag;
  problem.c = [q_diag](double, const Eigen::VectorXd& x) {
    return x.cwiseProduct(q_diag).dot(x);
  };
  problem.terminal = [q_diag, terminal_weight](const Eigen::VectorXd& x) {
    return terminal_weight * x.cwiseProduct(q_diag).dot(x);
  };
  problem.c_grad = [q_diag](double, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return 2.0 * x.cwiseProduct(q_diag);
  };
  problem.terminal_grad = [q_diag, terminal_weight](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return 2.0 * terminal_weight * x.cwiseProduct(q_diag);
  };
  problem.terminal_weights = terminal_weight * q_diag;
  problem.terminal_offset = 0.0;
  return problem;
}

Controller make_controller(const FeedbackLaw& law) {
  return [law](double t, const Eigen::VectorXd& x) { return feedback_control(law, t, x); };
}

Controller constant_controller(double u) {
  return [u](double, const Eigen::VectorXd&) { return u; };
}

SimulationResult simulate_closed_loop(const ControlProblem& problem, const Controller& u,
                                      const Eigen::VectorXd& x0, double t0, double t1,
                                      double tau, Integrator method) {
  if (x0.size() != problem.d) {
    throw shape_error("initial state has " + std::to_string(x0.size()) +
                      " entries, problem dimension is " + std::to_string(problem.d));
  }
  if (tau <= 0.0) throw config_error("step size must be positive");
  const double span = t1 - t0;
  const auto steps = static_cast<Eigen::Index>(std::llround(span / tau));
  if (steps < 1 || std::abs(static_cast<double>(steps) * tau - span) > 1e-12) {
    throw config_error("step size " + std::to_string(tau) + " does not divide the horizon " +
                       std::to_string(span));
  }

  const auto rhs = [&](double t, const Eigen::VectorXd& x, double uv) -> Eigen::VectorXd {
    return problem.f(t, x) + problem.g(t, x) * uv;
  };

  SimulationResult result;
  result.trajectory.resize(steps + 1, problem.d);
  result.controls.resize(steps);
  result.trajectory.row(0) = x0.transpose();

  Eigen::VectorXd x = x0;
  double cost = 0.0;
  for (Eigen::Index k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * tau;
    const double uv = u(t, x);
    if (!std::isfinite(uv)) {
      throw numeric_error("control became non-finite at step " + std::to_string(k));
    }
    cost += tau * (problem.c(t, x) + problem.gamma * uv * uv);
    if (method == Integrator::euler) {
      x += tau * rhs(t, x, uv);
    } else {
      const Eigen::VectorXd k1 = rhs(t, x, uv);
      const Eigen::VectorXd k2 = rhs(t + 0.5 * tau, x + 0.5 * tau * k1, uv);
      const Eigen::VectorXd k3 = rhs(t + 0.5 * tau, x + 0.5 * tau * k2, uv);
      const Eigen::VectorXd k4 = rhs(t + tau, x + tau * k3, uv);
      x += tau / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if (!x.allFinite()) {
      throw numeric_error("state became non-finite at step " + std::to_string(k + 1));
    }
    result.trajectory.row(k + 1) = x.transpose();
    result.controls(k) = uv;
  }
  result.cost = cost + problem.terminal(x);
  return result;
}

Eigen::VectorXd ghjb_targets(const ControlProblem& problem, const TensorTrain& a,
                             const BasisSet& basis, const Controller& alpha, double t,
                             const Eigen::MatrixXd& samples) {
  if (samples.cols() != problem.d) {
    throw shape_error("samples have " + std::to_string(samples.cols()) +
                      " columns, problem dimension is " + std::to_string(problem.d));
  }
  const Eigen::Index m = samples.rows();
  Eigen::VectorXd targets(m);
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t ks) {
    const auto k = static_cast<Eigen::Index>(ks);
    const Eigen::VectorXd x = samples.row(k).transpose();
    const Eigen::VectorXd grad = eval_gradient(a, basis, x);
    const double av = alpha(t, x);
    const double y = grad.dot(problem.f(t, x) + problem.g(t, x) * av) + problem.c(t, x) +
                     problem.gamma * av * av;
    targets(k) = y;
  });
  for (Eigen::Index k = 0; k < m; ++k) {
    if (!std::isfinite(targets(k))) {
      throw numeric_error("GHJB target is non-finite at sample " + std::to_string(k));
    }
  }
  return targets;
}

Eigen::MatrixXd sample_domain(Eigen::Index d, Eigen::Index m, std::uint64_t seed, double lo,
                              double hi) {
  if (m < 1) throw config_error("domain sampling needs at least one sample");
  if (!(hi > lo)) throw config_error("domain bounds are empty");
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd samples(m, d);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) {
      samples(k, j) = uniform(rng, lo, hi);
    }
  }
  return samples;
}

std::vector<Eigen::VectorXd> sample_initial_conditions(ICKind kind, Eigen::Index count,
                                                       Eigen::Index d, std::uint64_t seed) {
  if (count < 1) throw config_error("initial condition sampling needs count >= 1");
  if (d < 2) throw config_error("initial condition sampling needs d >= 2");
  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));

  const auto poly_profile = [](const Eigen::VectorXd& coeff, double s) {
    double p = 0.0;
    for (Eigen::Index j = coeff.size(); j-- > 0;) p = p * s + coeff(j);
    const double window = (s - 1.0) * (s - 1.0) * (s + 1.0) * (s + 1.0);
    return window * p;
  };

  for (Eigen::Index i = 0; i < count; ++i) {
    if (kind == ICKind::constant) {
      const double c = uniform(rng, 1.0, 2.0);
      out.push_back(Eigen::VectorXd::Constant(d, c));
      continue;
    }
    Eigen::VectorXd x0(d);
    for (;;) {
      const auto degree = static_cast<Eigen::Index>(uniform_int(rng, 2, 20));
      Eigen::VectorXd coeff(degree + 1);
      for (Eigen::Index j = 0; j <= degree; ++j) coeff(j) = uniform(rng, -1.0, 1.0);
      double peak = 0.0;
      for (int gp = 0; gp <= 1000; ++gp) {
        const double s = -1.0 + 2.0 * static_cast<double>(gp) / 1000.0;
        peak = std::max(peak, std::abs(poly_profile(coeff, s)));
      }
      if (peak < 1e-12) continue;  // degenerate draw, try again
      const double scale = 1.9 / peak;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double s = -1.0 + 2.0 * static_cast<double>(k) / static_cast<double>(d - 1);
        x0(k) = scale * poly_profile(coeff, s);
      }
      break;
    }
    out.push_back(x0);
  }
  return out;
}

}  // namespace ttc
