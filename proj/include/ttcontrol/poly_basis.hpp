#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>

#include "ttcontrol/common.hpp"

//! One-dimensional polynomial basis families: the H2-orthonormal family used by
//! the value surrogate and a raw monomial family for tests.
namespace ttc {

//! Gauss-Legendre quadrature rule with m nodes on [a,b], exact for polynomials
//! of degree 2m-1.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int m, double a, double b);

enum class BasisKind { h2_orthonormal, monomial_test };

//! n basis polynomials on an interval, phi_j of degree exactly j-1. The
//! h2_orthonormal kind whitens L2-normalized Legendre polynomials against the
//! Gram matrix of the inner product <p,q> = int pq + p'q' + p''q'', so the
//! family is orthonormal in H2(a,b). Immutable after construction.
class BasisSet {
 public:
  //! @throws config_error for n < 1 or an empty interval.
  static BasisSet build(Eigen::Index n, double a, double b, BasisKind kind);

  Eigen::Index size() const { return n_; }
  double lower() const { return a_; }
  double upper() const { return b_; }
  BasisKind kind() const { return kind_; }

  //! Values and first derivatives of all n functions at x. Points outside
  //! [lower, upper] extrapolate the polynomials.
  void eval(double x, Eigen::VectorXd& values, Eigen::VectorXd& derivs) const;
  std::pair<Eigen::VectorXd, Eigen::VectorXd> eval(double x) const;

  //! Coefficients expanding f in this basis by least squares on the L2 Gram
  //! with exact quadrature; exact when f is a polynomial of degree < n.
  Eigen::VectorXd expand(const std::function<double(double)>& f) const;

 private:
  BasisSet() = default;
  Eigen::Index n_ = 0;
  double a_ = 0, b_ = 0;
  BasisKind kind_ = BasisKind::h2_orthonormal;
  Eigen::MatrixXd coef_;  // maps reference Legendre values to basis values
};

}  // namespace ttc
