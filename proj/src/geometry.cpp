#include "lindistill/geometry.hpp"

#include <Eigen/QR>

namespace lindistill {

Matrix span_basis(const Eigen::Ref<const Matrix>& X) {
  const Index d = X.rows();
  const Index n = X.cols();
  if (n == 0) throw std::invalid_argument("span_basis: empty matrix");
  if (n > d)
    throw std::invalid_argument("span_basis: more columns than rows");

  Eigen::HouseholderQR<Matrix> qr(X);
  const Matrix R = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double a = std::abs(R(i, i));
    dmin = std::min(dmin, a);
    dmax = std::max(dmax, a);
  }
  if (dmin <= 1e-12 * dmax || dmax == 0.0)
    throw singular_error("span_basis: rank-deficient matrix with " +
                         std::to_string(n) + " columns");

  Matrix Q = Matrix::Identity(d, n);
  Q = qr.householderQ() * Q;
  return Q;
}

Vector project_onto_span(const Eigen::Ref<const Matrix>& X,
                         const Eigen::Ref<const Vector>& w) {
  if (X.rows() != w.size())
    throw std::invalid_argument("project_onto_span: dimension mismatch");
  if (X.cols() >= X.rows()) return w;
  const Matrix Q = span_basis(X);
  return Q * (Q.transpose() * w);
}

Vector orthogonal_complement_sample(const Eigen::Ref<const Matrix>& X,
                                    Rng& rng) {
  const Index d = X.rows();
  const Index n = X.cols();
  if (n >= d)
    throw std::invalid_argument(
        "orthogonal_complement_sample: complement is trivial for n >= d");
  const Matrix Q = span_basis(X);
  for (int attempt = 0; attempt < 64; ++attempt) {
    Vector g = rng.gaussian(d);
    Vector q = g - Q * (Q.transpose() * g);
    if (q.norm() > 1e-12) return q;
  }
  throw numeric_error("orthogonal_complement_sample: degenerate draws");
}

void PCurve::validate() const {
  if (thetas.size() != values.size())
    throw std::invalid_argument("PCurve: grid/value length mismatch");
  if (thetas.size() == 0) throw std::invalid_argument("PCurve: empty curve");
  for (Index i = 0; i < thetas.size(); ++i) {
    if (thetas[i] < 0.0 || thetas[i] > kPi / 2.0 + 1e-12)
      throw std::domain_error("PCurve: theta outside [0, pi/2]");
    if (values[i] < 0.0 || values[i] > 1.0)
      throw std::domain_error("PCurve: value outside [0, 1]");
    if (i > 0) {
      if (thetas[i] <= thetas[i - 1])
        throw std::invalid_argument("PCurve: thetas not strictly increasing");
      if (values[i] > values[i - 1] + 1e-12)
        throw std::domain_error("PCurve: values not non-increasing");
    }
  }
}

double PCurve::at(double theta) const {
  const Index m = thetas.size();
  if (m == 0) throw std::invalid_argument("PCurve: empty curve");
  if (theta <= thetas[0]) return values[0];
  if (theta >= thetas[m - 1]) return values[m - 1];
  Index hi = 1;
  while (thetas[hi] < theta) ++hi;
  const double t0 = thetas[hi - 1];
  const double t1 = thetas[hi];
  const double f = (theta - t0) / (t1 - t0);
  return values[hi - 1] + f * (values[hi] - values[hi - 1]);
}

PCurve reverse_cdf_estimate(const InputSampler& sampler,
                            const Eigen::Ref<const Vector>& w_star,
                            const Vector& theta_grid, std::size_t m,
                            Rng& rng) {
  if (m == 0) throw std::invalid_argument("reverse_cdf_estimate: m must be positive");
  if (w_star.norm() == 0.0)
    throw std::domain_error("reverse_cdf_estimate: zero reference vector");

  const Index d = w_star.size();
  Vector x(d);
  std::vector<double> angles(m);
  for (std::size_t j = 0; j < m; ++j) {
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt >= 64)
        throw numeric_error("reverse_cdf_estimate: sampler keeps returning zero vectors");
      sampler(rng, x);
      if (x.norm() > 0.0) break;
    }
    angles[j] = unsigned_angle(w_star, x);
  }
  std::sort(angles.begin(), angles.end());

  PCurve curve;
  curve.thetas = theta_grid;
  curve.values.resize(theta_grid.size());
  for (Index i = 0; i < theta_grid.size(); ++i) {
    // count of angles >= theta, from the sorted shared sample
    const auto it = std::lower_bound(angles.begin(), angles.end(), theta_grid[i]);
    curve.values[i] =
        static_cast<double>(angles.end() - it) / static_cast<double>(m);
  }
  curve.validate();
  return curve;
}

}  // namespace lindistill
