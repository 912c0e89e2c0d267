#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "ttcontrol/poly_basis.hpp"
#include "ttcontrol/tensor_train.hpp"

//! Value-function surrogate V(x) = A phi(x): evaluation, spatial gradient,
//! feedback-law extraction and exact TT construction of quadratic terminals.
namespace ttc {

enum class InterpMode { piecewise_constant, linear };

//! Piecewise value approximation: one coefficient tensor per time node,
//! interpreted between nodes according to the interpolation mode.
struct ValueFunctionPath {
  std::vector<double> times;        // strictly increasing
  std::vector<TensorTrain> tensors; // one per node, shared basis
  InterpMode mode = InterpMode::piecewise_constant;
};

//! Time-varying feedback alpha(t,x) = -1/(2 gamma) g(t,x)^T grad V(t,x) built
//! from a value path. The control interface g is injected as a callback so the
//! law stays independent of any concrete problem type.
struct FeedbackLaw {
  const ValueFunctionPath* path = nullptr;
  const BasisSet* basis = nullptr;
  double gamma = 1.0;
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> g;
};

//! V(x) from per-dimension basis value rows (no basis evaluation inside).
double eval_value(const TensorTrain& a, const std::vector<Eigen::VectorXd>& value_rows);
//! V(x) at a state vector.
double eval_value(const TensorTrain& a, const BasisSet& basis, const Eigen::VectorXd& x);

//! All d partials of V at x with shared prefix/suffix contractions, O(d n r^2).
Eigen::VectorXd eval_gradient(const TensorTrain& a,
                              const std::vector<Eigen::VectorXd>& value_rows,
                              const std::vector<Eigen::VectorXd>& deriv_rows);
Eigen::VectorXd eval_gradient(const TensorTrain& a, const BasisSet& basis,
                              const Eigen::VectorXd& x);

//! Index of the path node at or left of t (clamped to the ends).
std::size_t path_node_index(const ValueFunctionPath& path, double t);

//! V(t,x) and grad V(t,x) through the path's interpolation mode; times outside
//! the span clamp to the nearest node.
double path_value(const ValueFunctionPath& path, const BasisSet& basis, double t,
                  const Eigen::VectorXd& x);
Eigen::VectorXd path_gradient(const ValueFunctionPath& path, const BasisSet& basis, double t,
                              const Eigen::VectorXd& x);

//! alpha(t,x) = -1/2 R^{-1} g(t,x)^T grad V(t,x); scalar control.
double feedback_control(const FeedbackLaw& law, double t, const Eigen::VectorXd& x);

//! Exact TT of f(x) = sum_k w_k x_k^2 + c with representation ranks <= 2,
//! via basis expansion of 1 and x^2 (requires basis size >= 3).
TensorTrain build_quadratic_tt(const BasisSet& basis, const Eigen::VectorXd& weights, double c);

}  // namespace ttc
