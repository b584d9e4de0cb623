#pragma once

#include "lindistill/core.hpp"
#include "lindistill/geometry.hpp"

namespace lindistill {

// Transfer data for distillation: inputs as columns of X (d x n) and the
// teacher's soft labels y. w_star is the generating teacher, carried for
// closed-form comparisons and verification only; training never reads it
// beyond that.
struct TransferSet {
  Matrix X;
  Vector y;
  Vector w_star;

  Index d() const { return X.rows(); }
  Index n() const { return X.cols(); }

  // Checks shapes and that y matches sigmoid(w_star . x) within 1e-12.
  void validate() const;
};

// Normalized cross entropy against the soft labels: mean of
// H(y_i, sigmoid(w.x_i)) - H(y_i), which is zero exactly when every logit
// matches the teacher's.
double loss(const Eigen::Ref<const Vector>& w, const TransferSet& ts);

// Mean of (sigmoid(w.x_i) - y_i) x_i. Always lies in span(X).
Vector loss_gradient(const Eigen::Ref<const Vector>& w, const TransferSet& ts);

// (1/n) X diag(s_i (1 - s_i)) X^T with s_i = sigmoid(w.x_i).
Matrix loss_hessian(const Eigen::Ref<const Vector>& w, const TransferSet& ts);

// Minimum-norm-style solution the trainers converge to: w_star itself when
// n >= d, otherwise the projection of w_star onto span(X). Requires full
// column rank in both branches.
Vector closed_form_solution(const TransferSet& ts);

// True when every logit w.x_i reproduces the teacher logit recovered from
// y_i within tol. Labels exactly 0 or 1 cannot be inverted.
bool is_global_minimizer(const Eigen::Ref<const Vector>& w,
                         const TransferSet& ts, double tol = 1e-8);

}  // namespace lindistill
