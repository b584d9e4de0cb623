#pragma once

#include <optional>
#include <vector>

#include "lindistill/distill.hpp"

namespace lindistill {

enum class StopReason { kLossTol, kGradTol, kMaxIters };

const char* to_string(StopReason reason);

struct TraceRow {
  std::size_t iter = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double dist_to_opt = 0.0;  // NaN when the closed form is unavailable
  double wall_time_s = 0.0;
  double balance_residual = 0.0;  // deep runs only
};

// Recorded every `stride` iterations plus the first and last. The recorded
// losses of a finished run are non-increasing up to 1e-12 slack; automatic
// step reduction restarts the run, so only the surviving trace is kept.
struct TrainTrace {
  std::vector<TraceRow> rows;
  std::size_t stride = 100;
  StopReason stop = StopReason::kMaxIters;
  double step_used = 0.0;
  int halvings = 0;
  std::vector<Vector> weights;  // filled when record_weights is set

  bool descent_ok(double slack = 1e-12) const;
};

struct ShallowConfig {
  double step = 0.1;
  std::size_t max_iters = 1000000;
  double loss_tol = 1e-10;
  double grad_tol = 1e-10;
  std::size_t record_stride = 100;
  bool record_weights = false;

  void validate() const;
};

struct ShallowResult {
  Vector w;
  TrainTrace trace;
};

// Plain full-batch gradient descent from zero on the distillation loss.
// Ten consecutive loss increases above 1e-6 trigger a restart with half the
// step, up to 20 times; past that a step_size_error is thrown.
ShallowResult train_shallow(const TransferSet& ts, const ShallowConfig& cfg);

// Factors W_1 .. W_N of a deep linear predictor; the end-to-end weight is
// the transposed product W_N ... W_1.
struct FactorStack {
  std::vector<Matrix> factors;

  int depth() const { return static_cast<int>(factors.size()); }
};

Vector end_to_end(const FactorStack& stack);

// max over adjacent pairs of the Frobenius mismatch between
// W_{j+1}^T W_{j+1} and W_j W_j^T; exactly zero for a balanced stack.
double balancedness_residual(const FactorStack& stack);

struct DeepConfig {
  int depth = 2;
  std::vector<Index> hidden;  // widths of the N-1 hidden layers, default d
  double init_scale = 1e-3;
  std::optional<Vector> init_direction;  // unit vector; drawn when absent
  double step = 0.05;
  std::size_t max_iters = 1000000;
  double loss_tol = 1e-10;
  double grad_tol = 1e-10;
  double epsilon = 0.0;  // convergence radius used for the init-scale check
  std::size_t record_stride = 100;
  bool record_weights = false;
  bool skip_init_check = false;

  void validate() const;
};

// Largest init norm for which tiny balanced starts stay in the convergence
// regime of radius epsilon around the closed-form solution.
double init_scale_bound(double epsilon, double w_hat_norm, int depth);

// Balanced rank-one stack with end-to-end weight init_scale * u. The last
// factor is negated if the initial loss fails to undercut the loss at zero.
FactorStack balanced_init(const DeepConfig& cfg, const TransferSet& ts,
                          Rng& rng);

// Per-factor gradients of the distillation loss through the product.
std::vector<Matrix> factor_gradients(const FactorStack& stack,
                                     const TransferSet& ts);

struct DeepResult {
  Vector w;
  FactorStack stack;
  TrainTrace trace;
  bool init_check_skipped = false;
};

// Simultaneous gradient descent on all factors, same stopping and
// step-halving rules as the shallow trainer. The init must satisfy the
// scale bound unless cfg.skip_init_check is set.
DeepResult train_deep(FactorStack stack, const TransferSet& ts,
                      const DeepConfig& cfg);

// Right-hand side of the time-rescaled flow the balanced stack follows:
// -||w||^(2(N-1)/N) (grad + (N-1) P_w grad). Depth 1 reduces to -grad.
Vector induced_flow_rhs(const Eigen::Ref<const Vector>& w,
                        const Eigen::Ref<const Vector>& grad, int depth);

}  // namespace lindistill
