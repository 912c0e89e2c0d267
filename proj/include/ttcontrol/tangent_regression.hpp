#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ttcontrol/poly_basis.hpp"
#include "ttcontrol/tensor_train.hpp"

//! Empirical least squares on the TT tangent space: gauge frames, design
//! matrix assembly, the regularized tangent solve, and the ALS regression
//! used by the Bellman variant.
namespace ttc {

//! Orthonormal gauge for the tangent space at a d-orthogonal reference.
//! complement[mu] holds the orthogonal complement of range(L(U^mu)) for
//! mu < d-1..; the last component is ungauged and carries its full
//! r_{d-1}*n_d parameters. Components with r_{mu-1}*n_mu = r_mu have an
//! empty complement and contribute no parameters.
struct TangentFrame {
  TensorTrain reference;
  std::vector<Eigen::MatrixXd> complements;  // size d-1, one per gauged component
  std::vector<bool> skipped;                 // size d-1, true when zero-dimensional

  //! Design-matrix columns contributed by component mu (0-based).
  Eigen::Index block_cols(Eigen::Index mu) const;
  //! Column offset of component mu's block.
  Eigen::Index block_offset(Eigen::Index mu) const;
  //! Total design-matrix columns.
  Eigen::Index cols() const;
};

//! Least-squares data: M sample states (rows of `samples`), their targets,
//! a ridge weight, and optional hard points folded in as weighted rows.
struct RegressionProblem {
  struct HardPoint {
    Eigen::VectorXd x;
    double y = 0.0;
    double weight = 0.0;  // delta_0; the row is scaled by sqrt(weight)
  };
  Eigen::MatrixXd samples;  // M x d
  Eigen::VectorXd targets;  // M
  double ridge = 0.0;
  std::vector<HardPoint> hard_points;
};

//! Result of a tangent solve. The relative residual is taken over the domain
//! rows only (hard-point rows excluded); `degenerate` marks a fallback to the
//! minimum-norm solution after a failed positive-definite factorization.
struct TangentFitResult {
  TangentVector tangent;
  Eigen::VectorXd coefficients;
  double rel_residual = 0.0;
  bool degenerate = false;
};

//! Builds the gauge frame at a d-orthogonal reference via full QR of each
//! left unfolding, taking the trailing columns as the complement.
//! Throws numeric_error when the reference is not d-orthogonal.
TangentFrame build_frame(const TensorTrain& u);

//! Per-dimension basis value rows for a batch of states, row k of table mu
//! being phi(x^(k)_mu); shared between design assembly and target generation.
std::vector<Eigen::MatrixXd> tabulate_basis(const BasisSet& basis,
                                            const Eigen::MatrixXd& samples);

//! Design matrix A with A(k, :) . x = tau(W)(x^(k)) for gauged coefficients x.
Eigen::MatrixXd assemble_design(const TangentFrame& frame, const BasisSet& basis,
                                const Eigen::MatrixXd& samples);
//! Same with precomputed basis value tables (one M x n matrix per dimension).
Eigen::MatrixXd assemble_design(const TangentFrame& frame,
                                const std::vector<Eigen::MatrixXd>& value_tables);

//! Reshapes a stacked gauged coefficient vector into tangent deltas
//! W^mu = Q_perp_mu C_mu (zero for skipped components, plain reshape for the
//! last component).
TangentVector unpack_coefficients(const TangentFrame& frame, const Eigen::VectorXd& coeffs);

//! Solves min ||A x - y||^2 + delta ||x||^2 over the gauged tangent space by
//! normal equations (LLT), falling back to a complete orthogonal decomposition
//! when the factorization fails or delta = 0 leaves the system rank-deficient.
TangentFitResult tangent_fit(const TangentFrame& frame, const BasisSet& basis,
                             const RegressionProblem& problem);
//! Same with precomputed domain-sample value tables; hard points are few and
//! evaluated through the basis directly.
TangentFitResult tangent_fit(const TangentFrame& frame, const BasisSet& basis,
                             const std::vector<Eigen::MatrixXd>& value_tables,
                             const RegressionProblem& problem);

//! Fixed-rank regression V(x) = A phi(x) by alternating ridge least squares,
//! one component at a time with interface caching, warm-started at `init`.
//! The ridge starts at delta0 and decays after each full sweep as
//! delta <- max(0.9, ||Mc - y||^2 / ||y||^2) * delta. Returns the
//! d-orthogonalized fit.
TensorTrain als_fit(const TensorTrain& init, const BasisSet& basis,
                    const RegressionProblem& problem, int sweeps_max = 20,
                    double delta0 = 1e-10, double tol = 1e-10);

}  // namespace ttc
