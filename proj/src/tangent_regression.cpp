#include "ttcontrol/tangent_regression.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "ttcontrol/common.hpp"

namespace ttc {

namespace {

// Right unfolding r_{mu-1} x (n*r_mu) as a Map of the left-unfolded buffer.
Eigen::Map<const Eigen::MatrixXd> right_view(const Eigen::MatrixXd& left, Eigen::Index n) {
  const Eigen::Index r0 = left.rows() / n;
  return {left.data(), r0, n * left.cols()};
}

// Reinterpret an r0 x (n*r1) product as the (r0*n) x r1 left unfolding.
Eigen::Map<const Eigen::MatrixXd> as_left_unfolding(const Eigen::MatrixXd& mat, Eigen::Index n) {
  return {mat.data(), mat.rows() * n, mat.cols() / n};
}

// B = sum_j row(j) U(j) for one component in left-unfolded storage.
Eigen::MatrixXd contract_core(const Eigen::MatrixXd& core, Eigen::Index r0,
                              const Eigen::VectorXd& row) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r0, core.cols());
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    out.noalias() += row(j) * core.middleRows(j * r0, r0);
  }
  return out;
}

void require_d_orthogonal(const TensorTrain& u) {
  const Eigen::Index d = u.order();
  for (Eigen::Index mu = 0; mu + 1 < d; ++mu) {
    const Eigen::MatrixXd& core = u.core(mu);
    const Eigen::MatrixXd gram = core.transpose() * core;
    const double err = (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols()))
                           .cwiseAbs()
                           .maxCoeff();
    if (err > 1e-8) {
      throw numeric_error("tangent frame needs a d-orthogonal reference; component " +
                          std::to_string(mu + 1) + " deviates by " + std::to_string(err));
    }
  }
}

// Per-sample interface rows/columns against the reference, using value rows.
struct Interfaces {
  std::vector<Eigen::RowVectorXd> prefix;  // prefix[mu]: 1 x r_mu
  std::vector<Eigen::VectorXd> suffix;     // suffix[mu]: r_mu x 1
};

Interfaces build_interfaces(const TensorTrain& u, const std::vector<Eigen::VectorXd>& rows) {
  const Eigen::Index d = u.order();
  Interfaces f;
  f.prefix.resize(static_cast<std::size_t>(d) + 1);
  f.suffix.resize(static_cast<std::size_t>(d) + 1);
  f.prefix[0] = Eigen::RowVectorXd::Ones(1);
  f.suffix[static_cast<std::size_t>(d)] = Eigen::VectorXd::Ones(1);
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    const Eigen::MatrixXd b =
        contract_core(u.core(mu), u.rank(mu), rows[static_cast<std::size_t>(mu)]);
    f.prefix[static_cast<std::size_t>(mu) + 1] = f.prefix[static_cast<std::size_t>(mu)] * b;
  }
  for (Eigen::Index mu = d; mu-- > 0;) {
    const Eigen::MatrixXd b =
        contract_core(u.core(mu), u.rank(mu), rows[static_cast<std::size_t>(mu)]);
    f.suffix[static_cast<std::size_t>(mu)] = b * f.suffix[static_cast<std::size_t>(mu) + 1];
  }
  return f;
}

// A design row may live inside a column-major matrix, so accept any inner stride.
using RowRef = Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

// One design row: per component mu the block is the gradient of
// tau(W)(x) = sum_mu prefix_mu^T W^mu(phi) suffix_{mu+1} in the gauged
// coefficients. u = vec(prefix^T phi^T) collapses the left rank and mode
// indices exactly like the left unfolding.
void fill_design_row(const TangentFrame& frame, const std::vector<Eigen::VectorXd>& rows,
                     RowRef out) {
  const TensorTrain& ref = frame.reference;
  const Eigen::Index d = ref.order();
  const Interfaces f = build_interfaces(ref, rows);
  Eigen::Index off = 0;
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    const Eigen::Index r0 = ref.rank(mu);
    const Eigen::Index n = ref.mode_size(mu);
    const auto& phi = rows[static_cast<std::size_t>(mu)];
    if (mu + 1 < d && frame.skipped[static_cast<std::size_t>(mu)]) continue;

    Eigen::VectorXd u(r0 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
      u.segment(j * r0, r0) = phi(j) * f.prefix[static_cast<std::size_t>(mu)].transpose();
    }
    if (mu + 1 == d) {
      out.segment(off, u.size()) = u.transpose();
      off += u.size();
      continue;
    }
    const Eigen::MatrixXd& qperp = frame.complements[static_cast<std::size_t>(mu)];
    const Eigen::VectorXd p = qperp.transpose() * u;
    const Eigen::VectorXd& sig = f.suffix[static_cast<std::size_t>(mu) + 1];
    for (Eigen::Index b = 0; b < sig.size(); ++b) {
      out.segment(off + b * p.size(), p.size()) = sig(b) * p.transpose();
    }
    off += p.size() * sig.size();
  }
}

std::vector<Eigen::VectorXd> sample_rows(const std::vector<Eigen::MatrixXd>& tables,
                                         Eigen::Index k) {
  std::vector<Eigen::VectorXd> rows(tables.size());
  for (std::size_t mu = 0; mu < tables.size(); ++mu) {
    rows[mu] = tables[mu].row(k).transpose();
  }
  return rows;
}

std::vector<Eigen::VectorXd> basis_rows(const BasisSet& basis, const Eigen::VectorXd& x) {
  std::vector<Eigen::VectorXd> rows(static_cast<std::size_t>(x.size()));
  Eigen::VectorXd val, der;
  for (Eigen::Index mu = 0; mu < x.size(); ++mu) {
    basis.eval(x(mu), val, der);
    rows[static_cast<std::size_t>(mu)] = val;
  }
  return rows;
}

void check_problem(const TensorTrain& ref, const RegressionProblem& problem) {
  if (problem.samples.rows() < 1) throw shape_error("regression needs at least one sample");
  if (problem.samples.cols() != ref.order()) {
    throw shape_error("samples have " + std::to_string(problem.samples.cols()) +
                      " columns, tensor order is " + std::to_string(ref.order()));
  }
  if (problem.targets.size() != problem.samples.rows()) {
    throw shape_error("got " + std::to_string(problem.targets.size()) + " targets for " +
                      std::to_string(problem.samples.rows()) + " samples");
  }
  for (const auto& hp : problem.hard_points) {
    if (hp.x.size() != ref.order()) throw shape_error("hard point dimension mismatch");
    if (hp.weight < 0.0) throw shape_error("hard point weight must be nonnegative");
  }
}

}  // namespace

Eigen::Index TangentFrame::block_cols(Eigen::Index mu) const {
  const Eigen::Index d = reference.order();
  const Eigen::Index q = reference.rank(mu) * reference.mode_size(mu);
  if (mu + 1 == d) return q;
  if (skipped[static_cast<std::size_t>(mu)]) return 0;
  return (q - reference.rank(mu + 1)) * reference.rank(mu + 1);
}

Eigen::Index TangentFrame::block_offset(Eigen::Index mu) const {
  Eigen::Index off = 0;
  for (Eigen::Index nu = 0; nu < mu; ++nu) off += block_cols(nu);
  return off;
}

Eigen::Index TangentFrame::cols() const { return block_offset(reference.order()); }

TangentFrame build_frame(const TensorTrain& u) {
  require_d_orthogonal(u);
  const Eigen::Index d = u.order();
  TangentFrame frame;
  frame.reference = u;
  frame.complements.resize(static_cast<std::size_t>(d > 0 ? d - 1 : 0));
  frame.skipped.resize(static_cast<std::size_t>(d > 0 ? d - 1 : 0), false);
  for (Eigen::Index mu = 0; mu + 1 < d; ++mu) {
    const Eigen::MatrixXd& core = u.core(mu);
    const Eigen::Index q = core.rows();
    const Eigen::Index r = core.cols();
    if (q == r) {
      frame.skipped[static_cast<std::size_t>(mu)] = true;
      continue;
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(core);
    const Eigen::MatrixXd qfull = qr.householderQ();
    frame.complements[static_cast<std::size_t>(mu)] = qfull.rightCols(q - r);
  }
  return frame;
}

std::vector<Eigen::MatrixXd> tabulate_basis(const BasisSet& basis,
                                            const Eigen::MatrixXd& samples) {
  const Eigen::Index m = samples.rows();
  const Eigen::Index d = samples.cols();
  std::vector<Eigen::MatrixXd> tables(static_cast<std::size_t>(d));
  for (auto& t : tables) t.resize(m, basis.size());
  Eigen::VectorXd val, der;
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index mu = 0; mu < d; ++mu) {
      basis.eval(samples(k, mu), val, der);
      tables[static_cast<std::size_t>(mu)].row(k) = val.transpose();
    }
  }
  return tables;
}

Eigen::MatrixXd assemble_design(const TangentFrame& frame,
                                const std::vector<Eigen::MatrixXd>& value_tables) {
  if (value_tables.size() != static_cast<std::size_t>(frame.reference.order())) {
    throw shape_error("value table count does not match tensor order");
  }
  const Eigen::Index m = value_tables.front().rows();
  Eigen::MatrixXd a(m, frame.cols());
  parallel_for(static_cast<std::size_t>(m), [&](std::size_t k) {
    fill_design_row(frame, sample_rows(value_tables, static_cast<Eigen::Index>(k)),
                    a.row(static_cast<Eigen::Index>(k)));
  });
  return a;
}

Eigen::MatrixXd assemble_design(const TangentFrame& frame, const BasisSet& basis,
                                const Eigen::MatrixXd& samples) {
  return assemble_design(frame, tabulate_basis(basis, samples));
}

TangentVector unpack_coefficients(const TangentFrame& frame, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() != frame.cols()) {
    throw shape_error("coefficient vector has " + std::to_string(coeffs.size()) +
                      " entries, frame expects " + std::to_string(frame.cols()));
  }
  const TensorTrain& ref = frame.reference;
  const Eigen::Index d = ref.order();
  TangentVector tv;
  tv.reference = ref;
  tv.deltas.resize(static_cast<std::size_t>(d));
  Eigen::Index off = 0;
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    const Eigen::Index q = ref.rank(mu) * ref.mode_size(mu);
    const Eigen::Index r1 = ref.rank(mu + 1);
    if (mu + 1 == d) {
      tv.deltas[static_cast<std::size_t>(mu)] =
          Eigen::Map<const Eigen::MatrixXd>(coeffs.data() + off, q, 1);
      off += q;
    } else if (frame.skipped[static_cast<std::size_t>(mu)]) {
      tv.deltas[static_cast<std::size_t>(mu)] = Eigen::MatrixXd::Zero(q, r1);
    } else {
      const Eigen::Index p = q - r1;
      const Eigen::Map<const Eigen::MatrixXd> c(coeffs.data() + off, p, r1);
      tv.deltas[static_cast<std::size_t>(mu)].noalias() =
          frame.complements[static_cast<std::size_t>(mu)] * c;
      off += p * r1;
    }
  }
  return tv;
}

TangentFitResult tangent_fit(const TangentFrame& frame, const BasisSet& basis,
                             const std::vector<Eigen::MatrixXd>& value_tables,
                             const RegressionProblem& problem) {
  check_problem(frame.reference, problem);
  const Eigen::Index m = problem.samples.rows();
  const Eigen::Index cols = frame.cols();
  const Eigen::Index block = 4096;

  // Accumulate the normal equations blockwise so the full design matrix never
  // has to be resident at the production sample counts.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(cols, cols);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(cols);
  Eigen::MatrixXd buf;
  for (Eigen::Index start = 0; start < m; start += block) {
    const Eigen::Index count = std::min(block, m - start);
    buf.resize(count, cols);
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
      const Eigen::Index k = start + static_cast<Eigen::Index>(i);
      fill_design_row(frame, sample_rows(value_tables, k), buf.row(static_cast<Eigen::Index>(i)));
    });
    gram.selfadjointView<Eigen::Lower>().rankUpdate(buf.topRows(count).transpose());
    rhs.noalias() += buf.topRows(count).transpose() * problem.targets.segment(start, count);
  }

  std::vector<Eigen::RowVectorXd> hard_rows;
  hard_rows.reserve(problem.hard_points.size());
  for (const auto& hp : problem.hard_points) {
    Eigen::RowVectorXd row(cols);
    fill_design_row(frame, basis_rows(basis, hp.x), row);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(row.transpose(), hp.weight);
    rhs.noalias() += hp.weight * hp.y * row.transpose();
    hard_rows.push_back(std::move(row));
  }
  gram.diagonal().array() += problem.ridge;

  TangentFitResult result;
  Eigen::VectorXd x;
  Eigen::LLT<Eigen::MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
  if (llt.info() == Eigen::Success) {
    x = llt.solve(rhs);
  } else {
    // Rank-deficient normal equations: fall back to the minimum-norm least
    // squares solution of the stacked weighted system.
    const Eigen::Index hp_count = static_cast<Eigen::Index>(hard_rows.size());
    Eigen::MatrixXd a(m + hp_count, cols);
    Eigen::VectorXd y(m + hp_count);
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t k) {
      fill_design_row(frame, sample_rows(value_tables, static_cast<Eigen::Index>(k)),
                      a.row(static_cast<Eigen::Index>(k)));
    });
    y.head(m) = problem.targets;
    for (Eigen::Index h = 0; h < hp_count; ++h) {
      const double s = std::sqrt(problem.hard_points[static_cast<std::size_t>(h)].weight);
      a.row(m + h) = s * hard_rows[static_cast<std::size_t>(h)];
      y(m + h) = s * problem.hard_points[static_cast<std::size_t>(h)].y;
    }
    x = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(a).solve(y);
    result.degenerate = true;
  }
  if (!x.allFinite()) throw numeric_error("tangent fit produced non-finite coefficients");

  // Residual over the domain rows only; hard points are constraints, not data.
  double res2 = 0.0;
  for (Eigen::Index start = 0; start < m; start += block) {
    const Eigen::Index count = std::min(block, m - start);
    buf.resize(count, cols);
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
      const Eigen::Index k = start + static_cast<Eigen::Index>(i);
      fill_design_row(frame, sample_rows(value_tables, k), buf.row(static_cast<Eigen::Index>(i)));
    });
    res2 += (buf.topRows(count) * x - problem.targets.segment(start, count)).squaredNorm();
  }
  const double ynorm = problem.targets.norm();
  result.rel_residual = std::sqrt(res2) / (ynorm > 0.0 ? ynorm : 1.0);
  result.coefficients = std::move(x);
  result.tangent = unpack_coefficients(frame, result.coefficients);
  return result;
}

TangentFitResult tangent_fit(const TangentFrame& frame, const BasisSet& basis,
                             const RegressionProblem& problem) {
  return tangent_fit(frame, basis, tabulate_basis(basis, problem.samples), problem);
}

double als_delta_update(double delta, double residual_sq, double targets_sq) {
  const double ratio = targets_sq > 0.0 ? residual_sq / targets_sq : 0.0;
  return std::max(0.9, ratio) * delta;
}

namespace {

// Interface stacks used by the ALS sweeps: lstack[mu] holds the left
// contraction of components 0..mu-1 per sample, rstack[mu] the right
// contraction of components mu..d-1.
Eigen::MatrixXd advance_left(const Eigen::MatrixXd& lstack, const Eigen::MatrixXd& phi,
                             const Eigen::MatrixXd& core) {
  const Eigen::Index r0 = lstack.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(lstack.rows(), core.cols());
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    out.noalias() +=
        (lstack.array().colwise() * phi.col(j).array()).matrix() * core.middleRows(j * r0, r0);
  }
  return out;
}

Eigen::MatrixXd advance_right(const Eigen::MatrixXd& rstack, const Eigen::MatrixXd& phi,
                              const Eigen::MatrixXd& core) {
  const Eigen::Index r0 = core.rows() / phi.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rstack.rows(), r0);
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    out.noalias() += (rstack.array().colwise() * phi.col(j).array()).matrix() *
                     core.middleRows(j * r0, r0).transpose();
  }
  return out;
}

struct LocalSolveStats {
  double risk_before = 0.0;
  double risk_after = 0.0;
  double residual_sq = 0.0;
};

// Ridge least squares for one component with the orthogonality center at mu;
// mu-orthogonality of the rest of the train makes the Frobenius penalty on the
// local coefficients equal to the penalty on the whole tensor.
LocalSolveStats update_core(Eigen::MatrixXd& core, const Eigen::MatrixXd& lstack,
                            const Eigen::MatrixXd& rstack, const Eigen::MatrixXd& phi,
                            const Eigen::VectorXd& weights, const Eigen::VectorXd& targets,
                            double delta) {
  const Eigen::Index mtot = phi.rows();
  const Eigen::Index r0 = lstack.cols();
  const Eigen::Index n = phi.cols();
  const Eigen::Index r1 = rstack.cols();
  const Eigen::Index q = r0 * n;

  Eigen::MatrixXd design(mtot, q * r1);
  Eigen::VectorXd u(q);
  for (Eigen::Index k = 0; k < mtot; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) {
      u.segment(j * r0, r0) = (weights(k) * phi(k, j)) * lstack.row(k).transpose();
    }
    for (Eigen::Index b = 0; b < r1; ++b) {
      design.row(k).segment(b * q, q) = rstack(k, b) * u.transpose();
    }
  }

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(q * r1, q * r1);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
  gram.diagonal().array() += delta;
  const Eigen::VectorXd rhs = design.transpose() * targets;

  const Eigen::Map<const Eigen::VectorXd> c_old(core.data(), core.size());
  LocalSolveStats stats;
  stats.risk_before = (design * c_old - targets).squaredNorm() + delta * c_old.squaredNorm();

  Eigen::VectorXd c;
  Eigen::LLT<Eigen::MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
  if (llt.info() == Eigen::Success) {
    c = llt.solve(rhs);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram.selfadjointView<Eigen::Lower>());
    if (ldlt.info() != Eigen::Success) throw numeric_error("ALS local system is not solvable");
    c = ldlt.solve(rhs);
  }
  if (!c.allFinite()) throw numeric_error("ALS produced non-finite coefficients");

  stats.residual_sq = (design * c - targets).squaredNorm();
  stats.risk_after = stats.residual_sq + delta * c.squaredNorm();
  if (stats.risk_after > stats.risk_before * (1.0 + 1e-6) + 1e-9) {
    throw numeric_error("ALS risk increased within a sweep, from " +
                        std::to_string(stats.risk_before) + " to " +
                        std::to_string(stats.risk_after));
  }
  core = Eigen::Map<const Eigen::MatrixXd>(c.data(), q, r1);
  return stats;
}

}  // namespace

TensorTrain als_fit(const TensorTrain& init, const BasisSet& basis,
                    const RegressionProblem& problem, int sweeps_max, double delta0,
                    double tol) {
  check_problem(init, problem);
  const Eigen::Index d = init.order();
  const Eigen::Index n = basis.size();
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    if (init.mode_size(mu) != n) {
      throw shape_error("ALS initial tensor mode sizes do not match the basis");
    }
  }

  const Eigen::Index m = problem.samples.rows();
  const Eigen::Index hp_count = static_cast<Eigen::Index>(problem.hard_points.size());
  const Eigen::Index mtot = m + hp_count;

  std::vector<Eigen::MatrixXd> phi(static_cast<std::size_t>(d));
  {
    std::vector<Eigen::MatrixXd> dom = tabulate_basis(basis, problem.samples);
    for (Eigen::Index mu = 0; mu < d; ++mu) {
      auto& t = phi[static_cast<std::size_t>(mu)];
      t.resize(mtot, n);
      t.topRows(m) = dom[static_cast<std::size_t>(mu)];
    }
    Eigen::VectorXd val, der;
    for (Eigen::Index h = 0; h < hp_count; ++h) {
      const auto& hp = problem.hard_points[static_cast<std::size_t>(h)];
      for (Eigen::Index mu = 0; mu < d; ++mu) {
        basis.eval(hp.x(mu), val, der);
        phi[static_cast<std::size_t>(mu)].row(m + h) = val.transpose();
      }
    }
  }
  Eigen::VectorXd weights = Eigen::VectorXd::Ones(mtot);
  Eigen::VectorXd targets(mtot);
  targets.head(m) = problem.targets;
  for (Eigen::Index h = 0; h < hp_count; ++h) {
    const auto& hp = problem.hard_points[static_cast<std::size_t>(h)];
    weights(m + h) = std::sqrt(hp.weight);
    targets(m + h) = weights(m + h) * hp.y;
  }
  const double targets_sq = targets.squaredNorm();

  TensorTrain start = orthogonalize(init, 1);
  std::vector<Eigen::MatrixXd> cores(static_cast<std::size_t>(d));
  for (Eigen::Index mu = 0; mu < d; ++mu) {
    cores[static_cast<std::size_t>(mu)] = start.core(mu);
    if (cores[static_cast<std::size_t>(mu)].rows() < cores[static_cast<std::size_t>(mu)].cols()) {
      throw rank_error("ALS initial tensor has infeasible ranks");
    }
  }

  std::vector<Eigen::MatrixXd> lstack(static_cast<std::size_t>(d) + 1);
  std::vector<Eigen::MatrixXd> rstack(static_cast<std::size_t>(d) + 1);
  lstack[0] = Eigen::MatrixXd::Ones(mtot, 1);
  rstack[static_cast<std::size_t>(d)] = Eigen::MatrixXd::Ones(mtot, 1);
  for (Eigen::Index mu = d; mu-- > 1;) {
    rstack[static_cast<std::size_t>(mu)] =
        advance_right(rstack[static_cast<std::size_t>(mu) + 1],
                      phi[static_cast<std::size_t>(mu)], cores[static_cast<std::size_t>(mu)]);
  }

  double delta = delta0;
  double prev_rel = -1.0;
  for (int sweep = 0; sweep < sweeps_max; ++sweep) {
    double sweep_residual_sq = 0.0;
    for (Eigen::Index mu = 0; mu < d; ++mu) {
      auto& core = cores[static_cast<std::size_t>(mu)];
      update_core(core, lstack[static_cast<std::size_t>(mu)],
                  rstack[static_cast<std::size_t>(mu) + 1], phi[static_cast<std::size_t>(mu)],
                  weights, targets, delta);
      if (mu + 1 < d) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(core);
        const Eigen::Index keep = core.cols();
        const Eigen::MatrixXd q =
            qr.householderQ() * Eigen::MatrixXd::Identity(core.rows(), keep);
        const Eigen::MatrixXd rfac =
            qr.matrixQR().topRows(keep).triangularView<Eigen::Upper>();
        core = q;
        auto& next = cores[static_cast<std::size_t>(mu) + 1];
        const Eigen::MatrixXd prod = rfac * right_view(next, n);
        next = as_left_unfolding(prod, n);
        lstack[static_cast<std::size_t>(mu) + 1] =
            advance_left(lstack[static_cast<std::size_t>(mu)], phi[static_cast<std::size_t>(mu)],
                         core);
      }
    }
    for (Eigen::Index mu = d; mu-- > 0;) {
      auto& core = cores[static_cast<std::size_t>(mu)];
      const LocalSolveStats stats =
          update_core(core, lstack[static_cast<std::size_t>(mu)],
                      rstack[static_cast<std::size_t>(mu) + 1], phi[static_cast<std::size_t>(mu)],
                      weights, targets, delta);
      if (mu == 0) sweep_residual_sq = stats.residual_sq;
      if (mu > 0) {
        const Eigen::Index r0 = core.rows() / n;
        const Eigen::MatrixXd rv = right_view(core, n);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(rv.transpose());
        const Eigen::MatrixXd qt =
            qr.householderQ() * Eigen::MatrixXd::Identity(rv.cols(), r0);
        const Eigen::MatrixXd rfac = qr.matrixQR().topRows(r0).triangularView<Eigen::Upper>();
        const Eigen::MatrixXd qtt = qt.transpose();
        core = as_left_unfolding(qtt, n);
        cores[static_cast<std::size_t>(mu) - 1] *= rfac.transpose();
        rstack[static_cast<std::size_t>(mu)] =
            advance_right(rstack[static_cast<std::size_t>(mu) + 1],
                          phi[static_cast<std::size_t>(mu)], core);
      }
    }
    if (!std::isfinite(sweep_residual_sq)) throw numeric_error("ALS residual is not finite");
    const double rel =
        std::sqrt(sweep_residual_sq) / (targets_sq > 0.0 ? std::sqrt(targets_sq) : 1.0);
    if (prev_rel >= 0.0 && std::abs(prev_rel - rel) < tol) {
      prev_rel = rel;
      break;
    }
    prev_rel = rel;
    delta = als_delta_update(delta, sweep_residual_sq, targets_sq);
  }

  std::vector<Eigen::Index> modes(static_cast<std::size_t>(d), n);
  TensorTrain fit = TensorTrain::from_cores(modes, std::move(cores), 1);
  return orthogonalize(fit, d);
}

}  // namespace ttc
