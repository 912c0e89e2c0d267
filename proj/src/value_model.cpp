#include "ttcontrol/value_model.hpp"

#include <cmath>
#include <cstddef>

#include "ttcontrol/common.hpp"

namespace ttc {

namespace {

// Contract component mu with a per-mode weight row: B = sum_j row(j) U(j), r0 x r1.
Eigen::MatrixXd contract_core(const TensorTrain& tt, Eigen::Index mu,
                              const Eigen::VectorXd& row) {
  const Eigen::MatrixXd& core = tt.core(mu);
  const Eigen::Index r0 = tt.rank(mu);
  const Eigen::Index n = tt.mode_size(mu);
  if (row.size() != n) {
    throw shape_error("value row has " + std::to_string(row.size()) + " entries, mode " +
                      std::to_string(mu + 1) + " expects " + std::to_string(n));
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r0, core.cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    out.noalias() += row(j) * core.middleRows(j * r0, r0);
  }
  return out;
}

void check_rows(const TensorTrain& a, const std::vector<Eigen::VectorXd>& rows,
                const char* what) {
  if (static_cast<Eigen::Index>(rows.size()) != a.order()) {
    throw shape_error(std::string(what) + " count " + std::to_string(rows.size()) +
                      " does not match tensor order " + std::to_string(a.order()));
  }
}

std::vector<Eigen::VectorXd> basis_rows(const BasisSet& basis, const Eigen::VectorXd& x,
                                        bool derivative) {
  std::vector<Eigen::VectorXd> rows(static_cast<std::size_t>(x.size()));
  Eigen::VectorXd val, der;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    basis.eval(x(k), val, der);
    rows[static_cast<std::size_t>(k)] = derivative ? der : val;
  }
  return rows;
}

}  // namespace

double eval_value(const TensorTrain& a, const std::vector<Eigen::VectorXd>& value_rows) {
  check_rows(a, value_rows, "value row");
  return evaluate(a, value_rows);
}

double eval_value(const TensorTrain& a, const BasisSet& basis, const Eigen::VectorXd& x) {
  if (x.size() != a.order()) {
    throw shape_error("state has " + std::to_string(x.size()) + " entries, tensor order is " +
                      std::to_string(a.order()));
  }
  return evaluate(a, basis_rows(basis, x, false));
}

Eigen::VectorXd eval_gradient(const TensorTrain& a,
                              const std::vector<Eigen::VectorXd>& value_rows,
                              const std::vector<Eigen::VectorXd>& deriv_rows) {
  check_rows(a, value_rows, "value row");
  check_rows(a, deriv_rows, "derivative row");
  const Eigen::Index d = a.order();

  // prefix[mu]: 1 x r_mu contraction of components 0..mu-1 with value rows;
  // suffix[mu]: r_mu x 1 contraction of components mu..d-1.
  std::vector<Eigen::RowVectorXd> prefix(static_cast<std::size_t>(d) + 1);
  std::vector<Eigen::VectorXd> suffix(static_cast<std::size_t>(d) + 1);
  prefix[0] = Eigen::RowVectorXd::Ones(1);
  suffix[static_cast<std::size_t>(d)] = Eigen::VectorXd::Ones(1);
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    prefix[static_cast<std::size_t>(mu) + 1] =
        prefix[static_cast<std::size_t>(mu)] *
        contract_core(a, mu, value_rows[static_cast<std::size_t>(mu)]);
  }
  for (Eigen::Index mu = d; mu-- > 0;) {
    suffix[static_cast<std::size_t>(mu)] =
        contract_core(a, mu, value_rows[static_cast<std::size_t>(mu)]) *
        suffix[static_cast<std::size_t>(mu) + 1];
  }

  Eigen::VectorXd grad(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    grad(k) = prefix[static_cast<std::size_t>(k)] *
              contract_core(a, k, deriv_rows[static_cast<std::size_t>(k)]) *
              suffix[static_cast<std::size_t>(k) + 1];
  }
  return grad;
}

Eigen::VectorXd eval_gradient(const TensorTrain& a, const BasisSet& basis,
                              const Eigen::VectorXd& x) {
  if (x.size() != a.order()) {
    throw shape_error("state has " + std::to_string(x.size()) + " entries, tensor order is " +
                      std::to_string(a.order()));
  }
  return eval_gradient(a, basis_rows(basis, x, false), basis_rows(basis, x, true));
}

std::size_t path_node_index(const ValueFunctionPath& path, double t) {
  if (path.times.empty()) throw shape_error("value function path is empty");
  if (t <= path.times.front()) return 0;
  const std::size_t last = path.times.size() - 1;
  if (t >= path.times[last]) return last;
  std::size_t i = 0;
  while (i + 1 <= last && path.times[i + 1] <= t) ++i;
  return i;
}

namespace {

// Resolve t to node indices and a blend weight according to the path mode.
// Piecewise-constant collapses to theta = 0 at the left node.
void locate(const ValueFunctionPath& path, double t, std::size_t& i0, std::size_t& i1,
            double& theta) {
  const std::size_t i = path_node_index(path, t);
  const std::size_t last = path.times.size() - 1;
  if (path.mode == InterpMode::piecewise_constant || i == last) {
    i0 = i1 = i;
    theta = 0.0;
    return;
  }
  i0 = i;
  i1 = i + 1;
  const double span = path.times[i1] - path.times[i0];
  theta = (t - path.times[i0]) / span;
  if (theta < 0.0) theta = 0.0;
  if (theta > 1.0) theta = 1.0;
}

}  // namespace

double path_value(const ValueFunctionPath& path, const BasisSet& basis, double t,
                  const Eigen::VectorXd& x) {
  std::size_t i0, i1;
  double theta;
  locate(path, t, i0, i1, theta);
  const double v0 = eval_value(path.tensors[i0], basis, x);
  if (i1 == i0 || theta == 0.0) return v0;
  const double v1 = eval_value(path.tensors[i1], basis, x);
  return (1.0 - theta) * v0 + theta * v1;
}

Eigen::VectorXd path_gradient(const ValueFunctionPath& path, const BasisSet& basis, double t,
                              const Eigen::VectorXd& x) {
  std::size_t i0, i1;
  double theta;
  locate(path, t, i0, i1, theta);
  Eigen::VectorXd g0 = eval_gradient(path.tensors[i0], basis, x);
  if (i1 == i0 || theta == 0.0) return g0;
  Eigen::VectorXd g1 = eval_gradient(path.tensors[i1], basis, x);
  return (1.0 - theta) * g0 + theta * g1;
}

double feedback_control(const FeedbackLaw& law, double t, const Eigen::VectorXd& x) {
  if (law.path == nullptr || law.path->tensors.empty()) {
    throw shape_error("feedback law has no value function path");
  }
  if (law.basis == nullptr) throw shape_error("feedback law has no basis");
  if (law.gamma <= 0.0) {
    throw config_error("control weight gamma must be positive, got " + std::to_string(law.gamma));
  }
  const Eigen::VectorXd grad = path_gradient(*law.path, *law.basis, t, x);
  const Eigen::VectorXd gv = law.g(t, x);
  if (gv.size() != grad.size()) {
    throw shape_error("control interface returned " + std::to_string(gv.size()) +
                      " entries for state dimension " + std::to_string(grad.size()));
  }
  return -0.5 / law.gamma * gv.dot(grad);
}

TensorTrain build_quadratic_tt(const BasisSet& basis, const Eigen::VectorXd& weights, double c) {
  const Eigen::Index n = static_cast<Eigen::Index>(basis.size());
  if (n < 3) {
    throw shape_error("quadratic construction needs a basis of size >= 3, got " +
                      std::to_string(n));
  }
  const Eigen::Index d = weights.size();
  if (d == 0) throw shape_error("quadratic construction needs at least one dimension");

  const Eigen::VectorXd e = basis.expand([](double) { return 1.0; });
  const Eigen::VectorXd s = basis.expand([](double x) { return x * x; });

  std::vector<Eigen::Index> modes(static_cast<std::size_t>(d), n);
  std::vector<Eigen::MatrixXd> cores(static_cast<std::size_t>(d));
  if (d == 1) {
    cores[0] = weights(0) * s + c * e;
    return TensorTrain::from_cores(modes, std::move(cores));
  }

  cores[0] = Eigen::MatrixXd(n, 2);
  cores[0].col(0) = e;
  cores[0].col(1) = weights(0) * s;
  for (Eigen::Index mu = 1; mu + 1 < d; ++mu) {
    Eigen::MatrixXd core = Eigen::MatrixXd::Zero(2 * n, 2);
    for (Eigen::Index j = 0; j < n; ++j) {
      // Mode slice [[e_j, w s_j], [0, e_j]]: carry the running sum and add w x^2.
      core(2 * j + 0, 0) = e(j);
      core(2 * j + 0, 1) = weights(mu) * s(j);
      core(2 * j + 1, 1) = e(j);
    }
    cores[static_cast<std::size_t>(mu)] = std::move(core);
  }
  Eigen::MatrixXd tail(2 * n, 1);
  for (Eigen::Index j = 0; j < n; ++j) {
    tail(2 * j + 0, 0) = weights(d - 1) * s(j) + c * e(j);
    tail(2 * j + 1, 0) = e(j);
  }
  cores[static_cast<std::size_t>(d) - 1] = std::move(tail);
  return TensorTrain::from_cores(modes, std::move(cores));
}

}  // namespace ttc
