#include "lindistill/distill.hpp"

#include <Eigen/QR>

namespace lindistill {

void TransferSet::validate() const {
  if (X.rows() == 0 || X.cols() == 0)
    throw std::invalid_argument("TransferSet: empty data matrix");
  if (y.size() != X.cols())
    throw std::invalid_argument("TransferSet: label count mismatch");
  if (w_star.size() != X.rows())
    throw std::invalid_argument("TransferSet: teacher dimension mismatch");
  for (Index i = 0; i < y.size(); ++i) {
    const double expected = clamp_probability(sigmoid(w_star.dot(X.col(i))));
    if (std::abs(y[i] - expected) > 1e-12)
      throw std::domain_error("TransferSet: label " + std::to_string(i) +
                              " does not match the teacher");
  }
}

double loss(const Eigen::Ref<const Vector>& w, const TransferSet& ts) {
  if (w.size() != ts.d())
    throw std::invalid_argument("loss: weight dimension mismatch");
  const Index n = ts.n();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double u = w.dot(ts.X.col(i));
    const double y = clamp_probability(ts.y[i]);
    const double ce = y * softplus(-u) + (1.0 - y) * softplus(u);
    total += ce - binary_entropy(y);
  }
  double value = total / static_cast<double>(n);
  // cancellation at the optimum can leave a tiny negative residue
  if (value < 0.0 && value > -1e-12) value = 0.0;
  return value;
}

Vector loss_gradient(const Eigen::Ref<const Vector>& w, const TransferSet& ts) {
  if (w.size() != ts.d())
    throw std::invalid_argument("loss_gradient: weight dimension mismatch");
  const Index n = ts.n();
  Vector r(n);
  for (Index i = 0; i < n; ++i)
    r[i] = sigmoid(w.dot(ts.X.col(i))) - ts.y[i];
  return ts.X * r / static_cast<double>(n);
}

Matrix loss_hessian(const Eigen::Ref<const Vector>& w, const TransferSet& ts) {
  if (w.size() != ts.d())
    throw std::invalid_argument("loss_hessian: weight dimension mismatch");
  const Index n = ts.n();
  Vector s(n);
  for (Index i = 0; i < n; ++i) {
    const double p = sigmoid(w.dot(ts.X.col(i)));
    s[i] = p * (1.0 - p);
  }
  return ts.X * s.asDiagonal() * ts.X.transpose() / static_cast<double>(n);
}

Vector closed_form_solution(const TransferSet& ts) {
  const Index d = ts.d();
  const Index n = ts.n();
  if (ts.w_star.size() != d)
    throw std::invalid_argument("closed_form_solution: teacher dimension mismatch");
  if (n >= d) {
    // full-rank check still applies; the solution is the teacher itself
    Eigen::ColPivHouseholderQR<Matrix> qr(ts.X);
    qr.setThreshold(1e-12);
    if (qr.rank() < d)
      throw singular_error("closed_form_solution: rank-deficient data with " +
                           std::to_string(n) + " columns");
    return ts.w_star;
  }
  return project_onto_span(ts.X, ts.w_star);
}

bool is_global_minimizer(const Eigen::Ref<const Vector>& w,
                         const TransferSet& ts, double tol) {
  if (w.size() != ts.d())
    throw std::invalid_argument("is_global_minimizer: weight dimension mismatch");
  for (Index i = 0; i < ts.n(); ++i) {
    const double y = ts.y[i];
    if (y == 0.0 || y == 1.0)
      throw std::domain_error(
          "is_global_minimizer: label exactly 0 or 1 has no finite teacher logit");
    if (std::abs(w.dot(ts.X.col(i)) - logit(y)) > tol) return false;
  }
  return true;
}

}  // namespace lindistill
