#pragma once

#include <functional>
#include <optional>

#include "lindistill/distill.hpp"
#include "lindistill/geometry.hpp"
#include "lindistill/tasks.hpp"

namespace lindistill {

struct RiskEstimate {
  double estimate = 0.0;
  std::size_t samples = 0;
  double ci_half_width = 0.0;  // 95% normal approximation
};

RiskEstimate binomial_estimate(std::size_t hits, std::size_t samples);

// Monte Carlo disagreement probability between the hard classifiers of w
// and w_star under the sampler. A zero student is rejected unless
// allow_zero_student is set (its classifier is then constant 1).
RiskEstimate transfer_risk_mc(const Eigen::Ref<const Vector>& w,
                              const Eigen::Ref<const Vector>& w_star,
                              const InputSampler& sampler, std::size_t m,
                              Rng& rng, bool allow_zero_student = false);

// Disagreement frequency over the columns of a fixed evaluation matrix.
RiskEstimate disagreement_on(const Eigen::Ref<const Matrix>& eval,
                             const Eigen::Ref<const Vector>& w,
                             const Eigen::Ref<const Vector>& w_star);

// theta -> P[angle >= theta], either analytic or a PCurve interpolant.
using ReverseCdf = std::function<double(double)>;

ReverseCdf make_reverse_cdf(const PCurve& curve);

struct BoundReport {
  double beta = 0.0;
  double p_beta = 0.0;
  double p_complement = 0.0;
  std::size_t n = 0;
  double value = 0.0;
  std::optional<double> delta;  // set for the approximate-student variant

  bool vacuous() const { return value >= 1.0; }
};

// Expected-risk bound p(beta) + p(pi/2 - beta)^n for the exact-minimizer
// student with n < d. The tight flag multiplies the tail term by
// (1 - p(beta)), the sharper form the same argument yields.
BoundReport bound_thm3(const ReverseCdf& p, double beta, std::size_t n,
                       bool tight = false);

// n >= d: recovery is exact and the expected risk is zero.
BoundReport bound_exact_case(std::size_t n);

// Minimizes bound_thm3 over a uniform beta grid on [0, pi/2]; ties resolve
// to the smaller beta. The n_ge_d flag short-circuits to the exact case.
BoundReport bound_optimize_beta(const ReverseCdf& p, std::size_t n,
                                std::size_t grid_size = 1001,
                                bool tight = false, bool n_ge_d = false);

// gamma^n for tasks whose angle curve vanishes at some margin.
double bound_margin(double gamma, std::size_t n);

// c (1 + (log n)^kappa) / n^kappa for the polynomial family. Real-valued n
// is accepted (the expression is evaluated, not a sample size).
double bound_poly(double c, double kappa, double n);

// Approximate-minimizer variant: an epsilon-suboptimal student moves each
// angle by at most delta = sqrt(2 pi epsilon / ||w_hat||), giving
// p(beta) + p(pi/2 - delta - beta)^n for beta in [0, pi/2 - delta].
BoundReport bound_approx(const ReverseCdf& p, double beta, std::size_t n,
                         double epsilon, double w_hat_norm);

// Worst-case angle a loss-epsilon perturbation can open up:
// sqrt(2 pi epsilon / ||w||), valid for epsilon <= ||w|| / 2.
double small_angle_bound(double epsilon, double w_norm);

// w_hat plus a scaled draw from the orthogonal complement of span(X);
// still a global minimizer of the transfer loss. Requires n < d.
Vector perturbed_learner(const Eigen::Ref<const Vector>& w_hat,
                         const Eigen::Ref<const Matrix>& X, double delta,
                         Rng& rng);

// A training procedure mapping a transfer set (and private randomness) to
// student weights.
using Learner = std::function<Vector(const TransferSet&, Rng&)>;

struct MonotonicityEstimate {
  RiskEstimate index;      // fraction of trials where the angle strictly shrank
  std::size_t failures = 0;  // trials dropped due to learner errors
};

// P[angle(w_star, learner(X + one column)) < angle(w_star, learner(X))]
// over random transfer sets of size n. Each trial runs on its own derived
// stream, so trial order cannot affect the estimate.
template <typename Task>
MonotonicityEstimate monotonicity_index_mc(const Learner& learner,
                                           const Task& task, Index n,
                                           std::size_t trials, Rng& rng);

}  // namespace lindistill

#include "lindistill/risk_bounds_impl.hpp"
