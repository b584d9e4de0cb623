#include "lindistill/risk_bounds.hpp"

namespace lindistill {

RiskEstimate binomial_estimate(std::size_t hits, std::size_t samples) {
  if (samples == 0)
    throw std::invalid_argument("binomial_estimate: need at least one sample");
  if (hits > samples)
    throw std::invalid_argument("binomial_estimate: more hits than samples");
  const double m = static_cast<double>(samples);
  const double p = static_cast<double>(hits) / m;
  return {p, samples, 1.96 * std::sqrt(p * (1.0 - p) / m)};
}

RiskEstimate transfer_risk_mc(const Eigen::Ref<const Vector>& w,
                              const Eigen::Ref<const Vector>& w_star,
                              const InputSampler& sampler, std::size_t m,
                              Rng& rng, bool allow_zero_student) {
  if (w.size() != w_star.size())
    throw std::invalid_argument("transfer_risk_mc: dimension mismatch");
  if (m == 0) throw std::invalid_argument("transfer_risk_mc: need m >= 1");
  if (w_star.norm() == 0.0)
    throw std::domain_error("transfer_risk_mc: zero teacher");
  if (w.norm() == 0.0 && !allow_zero_student)
    throw std::domain_error(
        "transfer_risk_mc: zero student classifies everything as 1; pass "
        "allow_zero_student to accept that");

  Vector x(w.size());
  std::size_t disagreements = 0;
  for (std::size_t j = 0; j < m; ++j) {
    sampler(rng, x);
    if (hard_label(w, x) != hard_label(w_star, x)) ++disagreements;
  }
  return binomial_estimate(disagreements, m);
}

RiskEstimate disagreement_on(const Eigen::Ref<const Matrix>& eval,
                             const Eigen::Ref<const Vector>& w,
                             const Eigen::Ref<const Vector>& w_star) {
  if (eval.rows() != w.size() || w.size() != w_star.size())
    throw std::invalid_argument("disagreement_on: dimension mismatch");
  if (eval.cols() == 0)
    throw std::invalid_argument("disagreement_on: empty evaluation set");
  const Vector su = eval.transpose() * w;
  const Vector tu = eval.transpose() * w_star;
  std::size_t disagreements = 0;
  for (Index i = 0; i < eval.cols(); ++i)
    if ((su[i] >= 0.0) != (tu[i] >= 0.0)) ++disagreements;
  return binomial_estimate(disagreements, static_cast<std::size_t>(eval.cols()));
}

ReverseCdf make_reverse_cdf(const PCurve& curve) {
  curve.validate();
  return [curve](double theta) { return curve.at(theta); };
}

namespace {

void check_beta(double beta, double limit) {
  if (beta < 0.0 || beta > limit + 1e-12)
    throw std::domain_error("bound: beta outside its admissible range");
}

double eval_p(const ReverseCdf& p, double theta) {
  const double v = p(theta);
  if (!(v >= 0.0 && v <= 1.0 + 1e-12))
    throw std::domain_error("bound: reverse cdf value outside [0, 1]");
  return std::min(v, 1.0);
}

}  // namespace

BoundReport bound_thm3(const ReverseCdf& p, double beta, std::size_t n,
                       bool tight) {
  if (n == 0) throw std::invalid_argument("bound_thm3: need n >= 1");
  check_beta(beta, kPi / 2.0);
  BoundReport report;
  report.beta = beta;
  report.n = n;
  report.p_beta = eval_p(p, beta);
  report.p_complement = eval_p(p, kPi / 2.0 - beta);
  const double tail = std::pow(report.p_complement, static_cast<double>(n));
  report.value = tight ? report.p_beta + (1.0 - report.p_beta) * tail
                       : report.p_beta + tail;
  return report;
}

BoundReport bound_exact_case(std::size_t n) {
  BoundReport report;
  report.n = n;
  report.beta = 0.0;
  report.p_beta = 0.0;
  report.p_complement = 0.0;
  report.value = 0.0;
  return report;
}

BoundReport bound_optimize_beta(const ReverseCdf& p, std::size_t n,
                                std::size_t grid_size, bool tight,
                                bool n_ge_d) {
  if (n_ge_d) return bound_exact_case(n);
  if (grid_size < 2)
    throw std::invalid_argument("bound_optimize_beta: need at least two grid points");
  BoundReport best;
  bool have = false;
  for (std::size_t i = 0; i < grid_size; ++i) {
    const double beta = (kPi / 2.0) * static_cast<double>(i) /
                        static_cast<double>(grid_size - 1);
    const BoundReport r = bound_thm3(p, beta, n, tight);
    if (!have || r.value < best.value) {
      best = r;
      have = true;
    }
  }
  return best;
}

double bound_margin(double gamma, std::size_t n) {
  if (n == 0) throw std::invalid_argument("bound_margin: need n >= 1");
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::domain_error("bound_margin: gamma must lie in [0, 1)");
  return std::pow(gamma, static_cast<double>(n));
}

double bound_poly(double c, double kappa, double n) {
  if (c < 1.0)
    throw std::domain_error(
        "bound_poly: c must be at least 1 (the curve is 1 at theta = 0)");
  if (kappa < 0.0) throw std::domain_error("bound_poly: kappa must be nonnegative");
  if (n < 1.0) throw std::domain_error("bound_poly: need n >= 1");
  return c * (1.0 + std::pow(std::log(n), kappa)) / std::pow(n, kappa);
}

BoundReport bound_approx(const ReverseCdf& p, double beta, std::size_t n,
                         double epsilon, double w_hat_norm) {
  if (n == 0) throw std::invalid_argument("bound_approx: need n >= 1");
  if (w_hat_norm <= 0.0)
    throw std::domain_error("bound_approx: solution norm must be positive");
  if (epsilon < 0.0) throw std::domain_error("bound_approx: epsilon must be nonnegative");
  const double delta = small_angle_bound(epsilon, w_hat_norm);
  if (beta < 0.0 || beta > kPi / 2.0 - delta)
    throw std::domain_error(
        "bound_approx: need beta in [0, pi/2 - delta], delta = " +
        std::to_string(delta));
  BoundReport report;
  report.beta = beta;
  report.n = n;
  report.delta = delta;
  report.p_beta = eval_p(p, beta);
  report.p_complement = eval_p(p, kPi / 2.0 - delta - beta);
  report.value =
      report.p_beta + std::pow(report.p_complement, static_cast<double>(n));
  return report;
}

double small_angle_bound(double epsilon, double w_norm) {
  if (w_norm <= 0.0)
    throw std::domain_error("small_angle_bound: norm must be positive");
  if (epsilon < 0.0)
    throw std::domain_error("small_angle_bound: epsilon must be nonnegative");
  if (epsilon > w_norm / 2.0)
    throw std::domain_error("small_angle_bound: requires epsilon <= ||w|| / 2");
  return std::sqrt(2.0 * kPi * epsilon / w_norm);
}

Vector perturbed_learner(const Eigen::Ref<const Vector>& w_hat,
                         const Eigen::Ref<const Matrix>& X, double delta,
                         Rng& rng) {
  if (X.cols() >= X.rows())
    throw std::invalid_argument(
        "perturbed_learner: needs an underdetermined transfer set (n < d)");
  if (w_hat.size() != X.rows())
    throw std::invalid_argument("perturbed_learner: dimension mismatch");
  if (w_hat.norm() == 0.0)
    throw std::domain_error("perturbed_learner: zero base solution");
  const Vector q = orthogonal_complement_sample(X, rng);
  return w_hat + delta * (w_hat.norm() / q.norm()) * q;
}

}  // namespace lindistill
