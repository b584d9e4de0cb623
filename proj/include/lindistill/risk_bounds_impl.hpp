#pragma once

#include "lindistill/risk_bounds.hpp"

namespace lindistill {

template <typename Task>
MonotonicityEstimate monotonicity_index_mc(const Learner& learner,
                                           const Task& task, Index n,
                                           std::size_t trials, Rng& rng) {
  task.validate();
  if (n < 1) throw std::invalid_argument("monotonicity_index_mc: need n >= 1");
  if (trials == 0)
    throw std::invalid_argument("monotonicity_index_mc: need at least one trial");

  const std::uint64_t local_master = rng.next_u64();
  std::size_t improved = 0;
  std::size_t completed = 0;
  std::size_t failures = 0;

  for (std::size_t t = 0; t < trials; ++t) {
    Rng trial_rng = derive_stream(local_master, "monotonicity/trial", t);
    TransferSet base = make_transfer_set(task, n, trial_rng);
    TransferSet extended;
    extended.w_star = base.w_star;
    extended.X.resize(base.d(), n + 1);
    extended.X.leftCols(n) = base.X;
    task.sample_input(trial_rng, extended.X.col(n));
    extended.y.resize(n + 1);
    extended.y.head(n) = base.y;
    extended.y[n] = soft_label(task.w_star, extended.X.col(n));

    try {
      Rng learner_rng = derive_stream(local_master, "monotonicity/learner", t);
      const Vector w_base = learner(base, learner_rng);
      const Vector w_ext = learner(extended, learner_rng);
      const double a_base = unsigned_angle(task.w_star, w_base);
      const double a_ext = unsigned_angle(task.w_star, w_ext);
      if (a_ext < a_base) ++improved;
      ++completed;
    } catch (const std::exception&) {
      ++failures;
    }
  }

  if (completed == 0)
    throw numeric_error("monotonicity_index_mc: every trial failed");
  return {binomial_estimate(improved, completed), failures};
}

}  // namespace lindistill
