#include "ttcontrol/tensor_train.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <sstream>

namespace ttc {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

//! Left rank of a left-unfolded core given its mode size.
Index left_rank(const MatrixXd& core, Index n) { return core.rows() / n; }

//! Right unfolding view r_{mu-1} x (n*r_mu) of a left-unfolded core buffer.
Eigen::Map<const MatrixXd> right_view(const MatrixXd& core, Index n) {
  const Index r0 = left_rank(core, n);
  return {core.data(), r0, n * core.cols()};
}

//! Reinterprets a r0 x (n*r1) product as the left unfolding (r0*n) x r1.
MatrixXd as_left_unfolding(const MatrixXd& m, Index n) {
  return Eigen::Map<const MatrixXd>(m.data(), m.rows() * n, m.cols() / n);
}

//! Left-orthogonalizes core mu in place, absorbing the triangular factor into
//! core mu+1. May shrink the bond to min(r0*n, r1), which is exact.
void left_orth_step(std::vector<MatrixXd>& cores, const std::vector<Index>& modes, Index mu) {
  MatrixXd& left = cores[mu];
  const Index keep = std::min(left.rows(), left.cols());
  Eigen::HouseholderQR<MatrixXd> qr(left);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(left.rows(), keep);
  MatrixXd rfac = qr.matrixQR().topRows(keep).triangularView<Eigen::Upper>();
  left = std::move(q);
  MatrixXd absorbed = rfac * right_view(cores[mu + 1], modes[mu + 1]);
  cores[mu + 1] = as_left_unfolding(absorbed, modes[mu + 1]);
}

//! Right-orthogonalizes core mu in place, absorbing the factor into core mu-1.
void right_orth_step(std::vector<MatrixXd>& cores, const std::vector<Index>& modes, Index mu) {
  MatrixXd rt = right_view(cores[mu], modes[mu]).transpose();
  const Index keep = std::min(rt.rows(), rt.cols());
  Eigen::HouseholderQR<MatrixXd> qr(rt);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(rt.rows(), keep);
  MatrixXd rfac = qr.matrixQR().topRows(keep).triangularView<Eigen::Upper>();
  MatrixXd qt = q.transpose();
  cores[mu] = as_left_unfolding(qt, modes[mu]);
  cores[mu - 1] = cores[mu - 1] * rfac.transpose();
}

//! Flips each singular pair so the first above-noise entry of the left vector
//! is positive, making truncation output and checkpoints reproducible.
void fix_svd_signs(MatrixXd& u, MatrixXd& v) {
  constexpr double kZero = 1e-14;
  for (Index c = 0; c < u.cols(); ++c) {
    for (Index r = 0; r < u.rows(); ++r) {
      if (std::abs(u(r, c)) > kZero) {
        if (u(r, c) < 0) {
          u.col(c) = -u.col(c);
          v.col(c) = -v.col(c);
        }
        break;
      }
    }
  }
}

std::string shape_string(const std::vector<Index>& v) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ")";
  return os.str();
}

}  // namespace

TensorTrain TensorTrain::from_cores(std::vector<Index> mode_sizes,
                                    std::vector<MatrixXd> cores, int tag) {
  if (mode_sizes.empty() || mode_sizes.size() != cores.size())
    throw shape_error("TensorTrain: component count must match mode count and be positive");
  const auto d = static_cast<Index>(cores.size());
  Index prev = 1;
  for (Index mu = 0; mu < d; ++mu) {
    const Index n = mode_sizes[mu];
    if (n < 1) throw shape_error("TensorTrain: mode sizes must be positive");
    if (cores[mu].rows() != prev * n)
      throw shape_error("TensorTrain: component " + std::to_string(mu) +
                        " rows do not match left rank " + std::to_string(prev) +
                        " times mode size " + std::to_string(n));
    prev = cores[mu].cols();
    if (prev < 1) throw shape_error("TensorTrain: ranks must be positive");
  }
  if (prev != 1) throw shape_error("TensorTrain: last component must have right rank 1");
  if (tag < 0 || tag > d) throw shape_error("TensorTrain: orthogonality tag out of range");
  TensorTrain tt;
  tt.mode_sizes_ = std::move(mode_sizes);
  tt.cores_ = std::move(cores);
  tt.orth_tag_ = tag;
  return tt;
}

TensorTrain TensorTrain::zeros(const std::vector<Index>& mode_sizes,
                               const std::vector<Index>& interior_ranks) {
  const auto d = static_cast<Index>(mode_sizes.size());
  if (interior_ranks.size() + 1 != static_cast<std::size_t>(d))
    throw shape_error("TensorTrain: expected " + std::to_string(d - 1) + " interior ranks, got " +
                      std::to_string(interior_ranks.size()));
  std::vector<MatrixXd> cores(d);
  Index prev = 1;
  for (Index mu = 0; mu < d; ++mu) {
    const Index next = mu + 1 < d ? interior_ranks[mu] : 1;
    cores[mu] = MatrixXd::Zero(prev * mode_sizes[mu], next);
    prev = next;
  }
  return from_cores(mode_sizes, std::move(cores));
}

TensorTrain TensorTrain::random(const std::vector<Index>& mode_sizes,
                                const std::vector<Index>& interior_ranks,
                                std::mt19937_64& rng) {
  TensorTrain tt = zeros(mode_sizes, interior_ranks);
  std::normal_distribution<double> normal;
  for (auto& core : tt.cores_)
    for (Index c = 0; c < core.cols(); ++c)
      for (Index r = 0; r < core.rows(); ++r) core(r, c) = normal(rng);
  return tt;
}

Index TensorTrain::rank(Index mu) const {
  if (mu < 0 || mu > order()) throw shape_error("TensorTrain::rank: index out of range");
  return mu == 0 ? 1 : cores_[mu - 1].cols();
}

std::vector<Index> TensorTrain::interior_ranks() const {
  std::vector<Index> r(order() > 0 ? order() - 1 : 0);
  for (Index mu = 0; mu + 1 < order(); ++mu) r[mu] = cores_[mu].cols();
  return r;
}

Index TensorTrain::parameter_count() const {
  Index total = 0;
  for (const auto& core : cores_) total += core.size();
  return total;
}

double evaluate(const TensorTrain& tt, const std::vector<Eigen::VectorXd>& phi_rows) {
  const Index d = tt.order();
  if (static_cast<Index>(phi_rows.size()) != d)
    throw shape_error("evaluate: expected " + std::to_string(d) + " basis rows");
  Eigen::RowVectorXd rho = Eigen::RowVectorXd::Ones(1);
  for (Index mu = 0; mu < d; ++mu) {
    const Index n = tt.mode_size(mu);
    if (phi_rows[mu].size() != n)
      throw shape_error("evaluate: basis row " + std::to_string(mu) + " has length " +
                        std::to_string(phi_rows[mu].size()) + ", expected " + std::to_string(n));
    Eigen::RowVectorXd u = rho * right_view(tt.core(mu), n);
    Eigen::Map<const MatrixXd> slice(u.data(), n, tt.core(mu).cols());
    rho = phi_rows[mu].transpose() * slice;
  }
  return rho(0);
}

TensorTrain orthogonalize(const TensorTrain& tt, Index mu) {
  const Index d = tt.order();
  if (mu < 1 || mu > d) throw shape_error("orthogonalize: core index must be in 1..d");
  std::vector<MatrixXd> cores(d);
  for (Index k = 0; k < d; ++k) cores[k] = tt.core(k);
  const auto& modes = tt.mode_sizes();
  for (Index k = 0; k + 1 < mu; ++k) left_orth_step(cores, modes, k);
  for (Index k = d - 1; k >= mu; --k) right_orth_step(cores, modes, k);
  return TensorTrain::from_cores(modes, std::move(cores), static_cast<int>(mu));
}

TensorTrain truncate(const TensorTrain& tt, const std::vector<Index>& interior_ranks) {
  const Index d = tt.order();
  if (interior_ranks.size() + 1 != static_cast<std::size_t>(d))
    throw shape_error("truncate: expected " + std::to_string(d - 1) + " interior ranks");
  std::vector<Index> target(interior_ranks);
  const auto current = tt.interior_ranks();
  for (Index mu = 0; mu + 1 < d; ++mu) {
    if (target[mu] < 1)
      throw rank_error("truncate: target ranks must be positive, got " + shape_string(target));
    if (target[mu] > current[mu])
      throw rank_error("truncate: target rank " + std::to_string(target[mu]) + " at bond " +
                       std::to_string(mu + 1) + " exceeds representation rank " +
                       std::to_string(current[mu]));
  }
  // Feasibility clamp: r_mu <= r_{mu-1}*n_mu from the left, r_mu <= n_{mu+1}*r_{mu+1}
  // from the right (r_0 = r_d = 1).
  Index bound = 1;
  for (Index mu = 0; mu + 1 < d; ++mu) {
    bound = std::min(target[mu], bound * tt.mode_size(mu));
    target[mu] = bound;
  }
  bound = 1;
  for (Index mu = d - 2; mu >= 0; --mu) {
    bound = std::min(target[mu], bound * tt.mode_size(mu + 1));
    target[mu] = bound;
  }

  TensorTrain one = orthogonalize(tt, 1);
  std::vector<MatrixXd> cores(d);
  for (Index k = 0; k < d; ++k) cores[k] = one.core(k);
  const auto& modes = tt.mode_sizes();
  for (Index mu = 0; mu + 1 < d; ++mu) {
    Eigen::JacobiSVD<MatrixXd> svd(cores[mu], Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Index keep = std::min<Index>(target[mu], svd.singularValues().size());
    MatrixXd u = svd.matrixU().leftCols(keep);
    MatrixXd v = svd.matrixV().leftCols(keep);
    fix_svd_signs(u, v);
    cores[mu] = std::move(u);
    MatrixXd carry = svd.singularValues().head(keep).asDiagonal() * v.transpose();
    MatrixXd absorbed = carry * right_view(cores[mu + 1], modes[mu + 1]);
    cores[mu + 1] = as_left_unfolding(absorbed, modes[mu + 1]);
  }
  return TensorTrain::from_cores(modes, std::move(cores), static_cast<int>(d));
}

TensorTrain tangent_add(const TangentVector& delta, double step) {
  const TensorTrain& u = delta.reference;
  const Index d = u.order();
  if (static_cast<Index>(delta.deltas.size()) != d)
    throw shape_error("tangent_add: delta count does not match order");
  for (Index mu = 0; mu < d; ++mu)
    if (delta.deltas[mu].rows() != u.core(mu).rows() || delta.deltas[mu].cols() != u.core(mu).cols())
      throw shape_error("tangent_add: delta " + std::to_string(mu) +
                        " does not match the reference component shape");
  if (d == 1)
    return TensorTrain::from_cores(u.mode_sizes(), {u.core(0) + step * delta.deltas[0]});

  std::vector<MatrixXd> cores(d);
  // First component: slices [step*W(j), U(j)] with left rank 1.
  {
    const Index n = u.mode_size(0), r1 = u.core(0).cols();
    MatrixXd out(n, 2 * r1);
    out.leftCols(r1) = step * delta.deltas[0];
    out.rightCols(r1) = u.core(0);
    cores[0] = std::move(out);
  }
  // Middle components: slices [[U(j), 0], [step*W(j), U(j)]].
  for (Index mu = 1; mu + 1 < d; ++mu) {
    const Index n = u.mode_size(mu);
    const Index r0 = left_rank(u.core(mu), n), r1 = u.core(mu).cols();
    MatrixXd out = MatrixXd::Zero(2 * r0 * n, 2 * r1);
    for (Index j = 0; j < n; ++j) {
      const auto uj = u.core(mu).middleRows(j * r0, r0);
      const auto wj = delta.deltas[mu].middleRows(j * r0, r0);
      out.block(2 * j * r0, 0, r0, r1) = uj;
      out.block(2 * j * r0 + r0, 0, r0, r1) = step * wj;
      out.block(2 * j * r0 + r0, r1, r0, r1) = uj;
    }
    cores[mu] = std::move(out);
  }
  // Last component: slices [U(j); U(j) + step*W(j)] with right rank 1.
  {
    const Index mu = d - 1;
    const Index n = u.mode_size(mu);
    const Index r0 = left_rank(u.core(mu), n);
    MatrixXd out(2 * r0 * n, 1);
    for (Index j = 0; j < n; ++j) {
      const auto uj = u.core(mu).middleRows(j * r0, r0);
      const auto wj = delta.deltas[mu].middleRows(j * r0, r0);
      out.block(2 * j * r0, 0, r0, 1) = uj;
      out.block(2 * j * r0 + r0, 0, r0, 1) = uj + step * wj;
    }
    cores[mu] = std::move(out);
  }
  return TensorTrain::from_cores(u.mode_sizes(), std::move(cores));
}

Index tangent_dim(const std::vector<Index>& mode_sizes, const std::vector<Index>& interior_ranks) {
  const auto d = static_cast<Index>(mode_sizes.size());
  if (interior_ranks.size() + 1 != static_cast<std::size_t>(d))
    throw shape_error("tangent_dim: expected " + std::to_string(d - 1) + " interior ranks");
  Index total = 0, prev = 1;
  for (Index mu = 0; mu < d; ++mu) {
    const Index next = mu + 1 < d ? interior_ranks[mu] : 1;
    total += prev * mode_sizes[mu] * next;
    prev = next;
  }
  for (const Index r : interior_ranks) total -= r * r;
  return total;
}

double dot(const TensorTrain& a, const TensorTrain& b) {
  const Index d = a.order();
  if (b.order() != d || a.mode_sizes() != b.mode_sizes())
    throw shape_error("dot: mode sizes differ");
  MatrixXd w = MatrixXd::Ones(1, 1);
  for (Index mu = 0; mu < d; ++mu) {
    const Index n = a.mode_size(mu);
    const Index ra0 = left_rank(a.core(mu), n), rb0 = left_rank(b.core(mu), n);
    MatrixXd next = MatrixXd::Zero(a.core(mu).cols(), b.core(mu).cols());
    for (Index j = 0; j < n; ++j)
      next.noalias() += a.core(mu).middleRows(j * ra0, ra0).transpose() * w *
                        b.core(mu).middleRows(j * rb0, rb0);
    w = std::move(next);
  }
  return w(0, 0);
}

double norm(const TensorTrain& tt) { return std::sqrt(std::max(0.0, dot(tt, tt))); }

TensorTrain pad_ranks(const TensorTrain& tt, const std::vector<Index>& interior_ranks) {
  const Index d = tt.order();
  if (interior_ranks.size() + 1 != static_cast<std::size_t>(d))
    throw shape_error("pad_ranks: expected " + std::to_string(d - 1) + " interior ranks");
  const auto current = tt.interior_ranks();
  for (Index mu = 0; mu + 1 < d; ++mu)
    if (interior_ranks[mu] < current[mu])
      throw rank_error("pad_ranks: target rank " + std::to_string(interior_ranks[mu]) +
                       " at bond " + std::to_string(mu + 1) + " is below representation rank " +
                       std::to_string(current[mu]));
  std::vector<MatrixXd> cores(d);
  Index prev_old = 1, prev_new = 1;
  for (Index mu = 0; mu < d; ++mu) {
    const Index n = tt.mode_size(mu);
    const Index next_old = tt.core(mu).cols();
    const Index next_new = mu + 1 < d ? interior_ranks[mu] : 1;
    MatrixXd out = MatrixXd::Zero(prev_new * n, next_new);
    for (Index j = 0; j < n; ++j)
      out.block(j * prev_new, 0, prev_old, next_old) = tt.core(mu).middleRows(j * prev_old, prev_old);
    cores[mu] = std::move(out);
    prev_old = next_old;
    prev_new = next_new;
  }
  return TensorTrain::from_cores(tt.mode_sizes(), std::move(cores));
}

}  // namespace ttc
