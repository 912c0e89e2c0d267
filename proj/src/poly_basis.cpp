#include "ttcontrol/poly_basis.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace ttc {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

//! Standard Legendre values P_0..P_{n-1} and t-derivatives up to the requested
//! order at reference point t in [-1,1], by the three-term recurrences.
void legendre_all(Index n, double t, VectorXd& p, VectorXd* dp, VectorXd* ddp) {
  p.resize(n);
  if (dp) dp->resize(n);
  if (ddp) ddp->resize(n);
  for (Index k = 0; k < n; ++k) {
    if (k == 0) {
      p(k) = 1.0;
      if (dp) (*dp)(k) = 0.0;
      if (ddp) (*ddp)(k) = 0.0;
    } else if (k == 1) {
      p(k) = t;
      if (dp) (*dp)(k) = 1.0;
      if (ddp) (*ddp)(k) = 0.0;
    } else {
      const double a = (2.0 * k - 1.0) / k, b = (k - 1.0) / k;
      p(k) = a * t * p(k - 1) - b * p(k - 2);
      // P'_k = P'_{k-2} + (2k-1) P_{k-1}, and once more for P''.
      if (dp) (*dp)(k) = (*dp)(k - 2) + (2.0 * k - 1.0) * p(k - 1);
      if (ddp) (*ddp)(k) = (*ddp)(k - 2) + (2.0 * k - 1.0) * (*dp)(k - 1);
    }
  }
}

}  // namespace

std::pair<VectorXd, VectorXd> gauss_legendre(int m, double a, double b) {
  if (m < 1) throw config_error("gauss_legendre: need at least one node");
  VectorXd nodes(m), weights(m);
  for (int i = 0; i < m; ++i) {
    // Newton iteration from the Chebyshev-based initial guess.
    double t = std::cos(M_PI * (i + 0.75) / (m + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= m; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (t * p1 - p0) / (t * t - 1.0);
      const double step = p1 / dp;
      t -= step;
      if (std::abs(step) < 1e-15) break;
    }
    nodes(m - 1 - i) = 0.5 * (b - a) * t + 0.5 * (a + b);
    weights(m - 1 - i) = (b - a) / ((1.0 - t * t) * dp * dp);
  }
  return {nodes, weights};
}

BasisSet BasisSet::build(Index n, double a, double b, BasisKind kind) {
  if (n < 1) throw config_error("build_basis: basis size must be at least 1");
  if (!(b > a)) throw config_error("build_basis: empty interval");
  BasisSet basis;
  basis.n_ = n;
  basis.a_ = a;
  basis.b_ = b;
  basis.kind_ = kind;
  if (kind == BasisKind::monomial_test) return basis;

  // H2 Gram of the L2-normalized Legendre reference family, by Gauss quadrature
  // exact for the integrand degree 2(n-1).
  const auto [nodes, weights] = gauss_legendre(std::max<Index>(n, 32), a, b);
  const double scale = 2.0 / (b - a);
  MatrixXd gram = MatrixXd::Zero(n, n);
  VectorXd p, dp, ddp, norms(n);
  for (Index k = 0; k < n; ++k) norms(k) = std::sqrt((2.0 * k + 1.0) / (b - a));
  for (Index q = 0; q < nodes.size(); ++q) {
    const double t = scale * (nodes(q) - a) - 1.0;
    legendre_all(n, t, p, &dp, &ddp);
    const VectorXd v0 = norms.cwiseProduct(p);
    const VectorXd v1 = scale * norms.cwiseProduct(dp);
    const VectorXd v2 = scale * scale * norms.cwiseProduct(ddp);
    gram.noalias() += weights(q) * (v0 * v0.transpose() + v1 * v1.transpose() + v2 * v2.transpose());
  }
  Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw numeric_error("build_basis: H2 Gram matrix is not positive definite");
  // phi = C^{-1} * ref keeps phi_j of degree exactly j-1 (triangular map).
  basis.coef_ = llt.matrixL().solve(MatrixXd::Identity(n, n));
  for (Index k = 0; k < n; ++k) basis.coef_.col(k) *= norms(k);
  return basis;
}

void BasisSet::eval(double x, VectorXd& values, VectorXd& derivs) const {
  values.resize(n_);
  derivs.resize(n_);
  if (kind_ == BasisKind::monomial_test) {
    double pow = 1.0;
    for (Index j = 0; j < n_; ++j) {
      values(j) = pow;
      derivs(j) = j == 0 ? 0.0 : j * values(j - 1);
      pow *= x;
    }
    return;
  }
  const double scale = 2.0 / (b_ - a_);
  const double t = scale * (x - a_) - 1.0;
  VectorXd p, dp;
  legendre_all(n_, t, p, &dp, nullptr);
  values.noalias() = coef_ * p;
  derivs.noalias() = scale * (coef_ * dp);
}

std::pair<VectorXd, VectorXd> BasisSet::eval(double x) const {
  std::pair<VectorXd, VectorXd> out;
  eval(x, out.first, out.second);
  return out;
}

VectorXd BasisSet::expand(const std::function<double(double)>& f) const {
  const auto [nodes, weights] = gauss_legendre(std::max<Index>(n_, 32), a_, b_);
  MatrixXd gram = MatrixXd::Zero(n_, n_);
  VectorXd rhs = VectorXd::Zero(n_);
  VectorXd v, d;
  for (Index q = 0; q < nodes.size(); ++q) {
    eval(nodes(q), v, d);
    gram.noalias() += weights(q) * (v * v.transpose());
    rhs.noalias() += weights(q) * f(nodes(q)) * v;
  }
  Eigen::LLT<MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw numeric_error("expand: basis L2 Gram matrix is not positive definite");
  return llt.solve(rhs);
}

}  // namespace ttc
