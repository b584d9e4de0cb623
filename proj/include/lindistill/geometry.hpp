#pragma once

#include <functional>

#include "lindistill/core.hpp"
#include "lindistill/rng.hpp"

namespace lindistill {

namespace detail {

template <typename DU, typename DV>
double angle_cosine(const Eigen::MatrixBase<DU>& u,
                    const Eigen::MatrixBase<DV>& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("angle: dimension mismatch");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0)
    throw std::domain_error("angle: undefined for a zero vector");
  return u.dot(v) / (nu * nv);
}

}  // namespace detail

// Angle between the lines spanned by u and v, in [0, pi/2].
template <typename DU, typename DV>
double unsigned_angle(const Eigen::MatrixBase<DU>& u,
                      const Eigen::MatrixBase<DV>& v) {
  const double c = std::abs(detail::angle_cosine(u, v));
  return std::acos(std::min(c, 1.0));
}

// Angle between the vectors themselves, in [0, pi].
template <typename DU, typename DV>
double signed_angle(const Eigen::MatrixBase<DU>& u,
                    const Eigen::MatrixBase<DV>& v) {
  const double c = detail::angle_cosine(u, v);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

// Orthonormal basis of the column span of X via thin QR. The rank test is
// on the R diagonal: smallest magnitude must exceed 1e-12 times the largest.
Matrix span_basis(const Eigen::Ref<const Matrix>& X);

// Orthogonal projection of w onto span(X). For n >= d the projector is the
// identity and w is returned unchanged, no rank requirement.
Vector project_onto_span(const Eigen::Ref<const Matrix>& X,
                         const Eigen::Ref<const Vector>& w);

// Standard Gaussian vector in the orthogonal complement of span(X).
// Requires n < d and full column rank.
Vector orthogonal_complement_sample(const Eigen::Ref<const Matrix>& X,
                                    Rng& rng);

// Fills one draw from an input distribution into `out`.
using InputSampler = std::function<void(Rng&, Eigen::Ref<Vector>)>;

// Monotone reverse cdf of the teacher angle, theta -> P[angle >= theta].
// thetas strictly increasing in [0, pi/2]; values non-increasing in [0, 1].
struct PCurve {
  Vector thetas;
  Vector values;

  void validate() const;

  // Piecewise-linear interpolation, flat beyond the grid ends.
  double at(double theta) const;
};

// Empirical reverse cdf of the angle between w_star and sampler draws,
// evaluated on theta_grid from a single shared sample of size m. Draws that
// come back as zero vectors are rejected and redrawn, up to a retry cap.
PCurve reverse_cdf_estimate(const InputSampler& sampler,
                            const Eigen::Ref<const Vector>& w_star,
                            const Vector& theta_grid, std::size_t m, Rng& rng);

}  // namespace lindistill
