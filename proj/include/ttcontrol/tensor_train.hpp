#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "ttcontrol/common.hpp"

//! Tensor-train representation, orthogonalization, fixed-rank truncation,
//! evaluation and tangent-space arithmetic.
//!
//! Unfolding convention (shared with the tangent regression): component mu of
//! shape r_{mu-1} x n_mu x r_mu is stored as its left unfolding, a column-major
//! matrix of shape (r_{mu-1}*n_mu) x r_mu whose row index is i + r_{mu-1}*j with
//! the left-rank index i fastest. The right unfolding r_{mu-1} x (n_mu*r_mu)
//! with column index j + n_mu*k is a plain Map of the same buffer, and the mode
//! slice U(j) is the contiguous row block [j*r_{mu-1}, (j+1)*r_{mu-1}).
namespace ttc {

//! Order-d coefficient tensor in TT form. Values are immutable after
//! construction; all operations below are pure functions returning new values.
class TensorTrain {
 public:
  //! Builds a TT from left-unfolded components. Validates adjacent rank
  //! consistency and boundary ranks r_0 = r_d = 1.
  //! @param tag 0 for no orthogonality tag, otherwise mu in 1..d.
  static TensorTrain from_cores(std::vector<Eigen::Index> mode_sizes,
                                std::vector<Eigen::MatrixXd> cores, int tag = 0);

  //! All-zero TT with the given interior ranks (size d-1, empty for d=1).
  static TensorTrain zeros(const std::vector<Eigen::Index>& mode_sizes,
                           const std::vector<Eigen::Index>& interior_ranks);

  //! TT with independent standard-normal core entries, for tests and warm starts.
  static TensorTrain random(const std::vector<Eigen::Index>& mode_sizes,
                            const std::vector<Eigen::Index>& interior_ranks,
                            std::mt19937_64& rng);

  Eigen::Index order() const { return static_cast<Eigen::Index>(cores_.size()); }
  Eigen::Index mode_size(Eigen::Index mu) const { return mode_sizes_[mu]; }
  const std::vector<Eigen::Index>& mode_sizes() const { return mode_sizes_; }

  //! Left unfolding of component mu (0-based).
  const Eigen::MatrixXd& core(Eigen::Index mu) const { return cores_[mu]; }

  //! Rank r_mu for mu in 0..d; r_0 = r_d = 1.
  Eigen::Index rank(Eigen::Index mu) const;
  //! Interior ranks r_1..r_{d-1}.
  std::vector<Eigen::Index> interior_ranks() const;

  //! 0 when untagged, otherwise the 1-based orthogonal core index mu: components
  //! left of mu are left-orthogonal and components right of mu right-orthogonal.
  int orth_tag() const { return orth_tag_; }

  //! Total number of stored coefficients, sum of r_{mu-1}*n_mu*r_mu.
  Eigen::Index parameter_count() const;

 private:
  TensorTrain() = default;
  std::vector<Eigen::Index> mode_sizes_;
  std::vector<Eigen::MatrixXd> cores_;
  int orth_tag_ = 0;
};

//! Gauged first-order variation of a d-orthogonal TT: deltas W^mu share the
//! reference component shapes and satisfy L(U^mu)^T L(W^mu) = 0 for mu < d.
//! The per-core complement frames that generate gauged deltas live in the
//! tangent regression layer; `frames` is filled there and may be empty.
struct TangentVector {
  TensorTrain reference;
  std::vector<Eigen::MatrixXd> deltas;
  std::vector<Eigen::MatrixXd> frames;
};

//! Evaluates sum_i A_{i_1..i_d} prod_mu phi_rows[mu][i_mu] by left-to-right
//! rank-vector contraction in O(d n r^2).
double evaluate(const TensorTrain& tt, const std::vector<Eigen::VectorXd>& phi_rows);

//! Returns a representation of the same tensor tagged mu-orthogonal (1-based),
//! produced by QR sweeps from both ends. Redundant bond ranks exceeding the
//! feasible maximum of their shape are trimmed exactly in passing.
TensorTrain orthogonalize(const TensorTrain& tt, Eigen::Index mu);

//! TT-SVD truncation to exactly the requested interior ranks, clamped to
//! per-position feasibility. The result is the quasi-best fixed-rank truncation
//! and carries the d-orthogonal tag. Requested ranks must not exceed the
//! current representation ranks.
TensorTrain truncate(const TensorTrain& tt, const std::vector<Eigen::Index>& interior_ranks);

//! Block-matrix construction of U + step*deltaU with representation ranks 2r
//! (clamped at the boundaries by definition of the construction).
TensorTrain tangent_add(const TangentVector& delta, double step);

//! Dimension of the gauged tangent space:
//! sum_mu r_{mu-1} n_mu r_mu - sum_{mu<d} r_mu^2.
Eigen::Index tangent_dim(const std::vector<Eigen::Index>& mode_sizes,
                         const std::vector<Eigen::Index>& interior_ranks);

//! Frobenius inner product of the represented tensors.
double dot(const TensorTrain& a, const TensorTrain& b);

//! Frobenius norm of the represented tensor.
double norm(const TensorTrain& tt);

//! Embeds the tensor in a representation with the given larger interior ranks
//! by zero-padding components; the represented tensor is unchanged.
TensorTrain pad_ranks(const TensorTrain& tt, const std::vector<Eigen::Index>& interior_ranks);

}  // namespace ttc
