#include "lindistill/trainers.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace lindistill {

namespace {

constexpr double kDivergenceSlack = 1e-6;
constexpr int kDivergenceRunLength = 10;
constexpr int kMaxHalvings = 20;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// One pass over the data for both the loss value and the gradient.
void loss_and_gradient(const Vector& w, const TransferSet& ts, double& value,
                       Vector& grad) {
  const Index n = ts.n();
  Vector u = ts.X.transpose() * w;
  Vector r(n);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double y = clamp_probability(ts.y[i]);
    total += y * softplus(-u[i]) + (1.0 - y) * softplus(u[i]) -
             binary_entropy(y);
    r[i] = sigmoid(u[i]) - ts.y[i];
  }
  value = total / static_cast<double>(n);
  if (value < 0.0 && value > -1e-12) value = 0.0;
  grad.noalias() = ts.X * r / static_cast<double>(n);
}

std::optional<Vector> try_closed_form(const TransferSet& ts) {
  try {
    return closed_form_solution(ts);
  } catch (const singular_error&) {
    return std::nullopt;
  }
}

double distance_to(const std::optional<Vector>& w_hat, const Vector& w) {
  if (!w_hat) return std::numeric_limits<double>::quiet_NaN();
  return (w - *w_hat).norm();
}

}  // namespace

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kLossTol: return "loss_tol";
    case StopReason::kGradTol: return "grad_tol";
    case StopReason::kMaxIters: return "max_iters";
  }
  return "unknown";
}

bool TrainTrace::descent_ok(double slack) const {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].loss > rows[i - 1].loss + slack) return false;
  return true;
}

void ShallowConfig::validate() const {
  if (step <= 0.0) throw std::invalid_argument("ShallowConfig: step must be positive");
  if (loss_tol < 0.0 || grad_tol < 0.0)
    throw std::invalid_argument("ShallowConfig: tolerances must be nonnegative");
  if (record_stride == 0)
    throw std::invalid_argument("ShallowConfig: record_stride must be positive");
}

ShallowResult train_shallow(const TransferSet& ts, const ShallowConfig& cfg) {
  cfg.validate();
  if (ts.X.rows() == 0 || ts.X.cols() == 0)
    throw std::invalid_argument("train_shallow: empty transfer set");

  const std::optional<Vector> w_hat = try_closed_form(ts);
  const auto start = Clock::now();

  double step = cfg.step;
  for (int halvings = 0;; ++halvings) {
    if (halvings > kMaxHalvings)
      throw step_size_error(
          "train_shallow: diverged after 20 step halvings; lower the step");

    Vector w = Vector::Zero(ts.d());
    Vector grad(ts.d());
    double value = 0.0;
    TrainTrace trace;
    trace.stride = cfg.record_stride;
    trace.step_used = step;
    trace.halvings = halvings;

    auto record = [&](std::size_t iter) {
      if (!trace.rows.empty() && trace.rows.back().iter == iter) return;
      trace.rows.push_back({iter, value, grad.norm(), distance_to(w_hat, w),
                            seconds_since(start), 0.0});
      if (cfg.record_weights) trace.weights.push_back(w);
    };

    double prev_value = std::numeric_limits<double>::infinity();
    int increase_run = 0;
    bool diverged = false;

    std::size_t iter = 0;
    for (;; ++iter) {
      loss_and_gradient(w, ts, value, grad);
      if (!std::isfinite(value) || !grad.allFinite())
        throw numeric_error("train_shallow: non-finite loss or gradient at iteration " +
                            std::to_string(iter));

      if (value > prev_value + kDivergenceSlack) {
        if (++increase_run >= kDivergenceRunLength) {
          diverged = true;
          break;
        }
      } else {
        increase_run = 0;
      }
      prev_value = value;

      if (iter % cfg.record_stride == 0) record(iter);
      if (value <= cfg.loss_tol) {
        trace.stop = StopReason::kLossTol;
        break;
      }
      if (grad.norm() <= cfg.grad_tol) {
        trace.stop = StopReason::kGradTol;
        break;
      }
      if (iter >= cfg.max_iters) {
        trace.stop = StopReason::kMaxIters;
        break;
      }
      w.noalias() -= step * grad;
    }

    if (diverged) {
      step *= 0.5;
      continue;
    }
    record(iter);
    return {std::move(w), std::move(trace)};
  }
}

void DeepConfig::validate() const {
  if (depth < 1) throw std::invalid_argument("DeepConfig: depth must be at least 1");
  if (!hidden.empty() && hidden.size() != static_cast<std::size_t>(depth) - 1)
    throw std::invalid_argument("DeepConfig: need one hidden width per hidden layer");
  for (Index h : hidden)
    if (h < 1) throw std::invalid_argument("DeepConfig: hidden widths must be positive");
  if (step <= 0.0) throw std::invalid_argument("DeepConfig: step must be positive");
  if (loss_tol < 0.0 || grad_tol < 0.0)
    throw std::invalid_argument("DeepConfig: tolerances must be nonnegative");
  if (record_stride == 0)
    throw std::invalid_argument("DeepConfig: record_stride must be positive");
}

Vector end_to_end(const FactorStack& stack) {
  if (stack.factors.empty())
    throw std::invalid_argument("end_to_end: empty stack");
  Matrix prod = stack.factors[0];
  for (std::size_t j = 1; j < stack.factors.size(); ++j)
    prod = stack.factors[j] * prod;
  if (prod.rows() != 1)
    throw std::invalid_argument("end_to_end: top factor must have one row");
  return prod.transpose();
}

double balancedness_residual(const FactorStack& stack) {
  double worst = 0.0;
  for (std::size_t j = 0; j + 1 < stack.factors.size(); ++j) {
    const Matrix& lo = stack.factors[j];
    const Matrix& hi = stack.factors[j + 1];
    worst = std::max(
        worst, (hi.transpose() * hi - lo * lo.transpose()).norm());
  }
  return worst;
}

double init_scale_bound(double epsilon, double w_hat_norm, int depth) {
  if (epsilon <= 0.0)
    throw std::domain_error("init_scale_bound: epsilon must be positive");
  if (w_hat_norm <= 0.0)
    throw std::domain_error("init_scale_bound: solution norm must be positive");
  if (depth < 1) throw std::invalid_argument("init_scale_bound: depth must be at least 1");
  const double N = static_cast<double>(depth);
  const double inner = epsilon * epsilon * std::pow(w_hat_norm, -2.0 / N) +
                       std::pow(w_hat_norm, 2.0 - 2.0 / N);
  const double regime = std::pow(epsilon, N) * std::pow(inner, -N / 2.0);
  return std::min(w_hat_norm, regime);
}

FactorStack balanced_init(const DeepConfig& cfg, const TransferSet& ts,
                          Rng& rng) {
  cfg.validate();
  if (cfg.init_scale <= 0.0)
    throw std::domain_error("balanced_init: init_scale must be positive");
  const Index d = ts.d();
  const int N = cfg.depth;

  Vector u;
  if (cfg.init_direction) {
    u = *cfg.init_direction;
    if (u.size() != d)
      throw std::invalid_argument("balanced_init: init_direction dimension mismatch");
    const double norm = u.norm();
    if (std::abs(norm - 1.0) > 1e-9)
      throw std::invalid_argument("balanced_init: init_direction must be unit length");
    u /= norm;
  } else {
    u = rng.unit_sphere(d);
  }

  std::vector<Index> widths(static_cast<std::size_t>(N) + 1);
  widths[0] = d;
  widths[static_cast<std::size_t>(N)] = 1;
  for (int j = 1; j < N; ++j)
    widths[static_cast<std::size_t>(j)] =
        cfg.hidden.empty() ? d : cfg.hidden[static_cast<std::size_t>(j) - 1];

  const double layer_scale = std::pow(cfg.init_scale, 1.0 / N);
  FactorStack stack;
  stack.factors.reserve(static_cast<std::size_t>(N));
  for (int j = 1; j <= N; ++j) {
    Matrix W = Matrix::Zero(widths[static_cast<std::size_t>(j)],
                            widths[static_cast<std::size_t>(j) - 1]);
    if (j == 1) {
      W.row(0) = layer_scale * u.transpose();
    } else {
      W(0, 0) = layer_scale;
    }
    stack.factors.push_back(std::move(W));
  }

  // descend from negative initial loss; flip the top factor if needed
  const Vector w0 = end_to_end(stack);
  const Vector zero = Vector::Zero(d);
  if (loss(w0, ts) >= loss(zero, ts))
    stack.factors.back() = -stack.factors.back();
  return stack;
}

std::vector<Matrix> factor_gradients(const FactorStack& stack,
                                     const TransferSet& ts) {
  const int N = stack.depth();
  if (N == 0) throw std::invalid_argument("factor_gradients: empty stack");
  const Vector w = end_to_end(stack);
  const Vector g = loss_gradient(w, ts);

  // suffix[j] = W_N ... W_{j+1} as a row, prefix[j] = W_{j-1} ... W_1
  std::vector<Matrix> suffix(static_cast<std::size_t>(N) + 1);
  suffix[static_cast<std::size_t>(N)] = Matrix::Identity(1, 1);
  for (int j = N - 1; j >= 1; --j)
    suffix[static_cast<std::size_t>(j)] =
        suffix[static_cast<std::size_t>(j) + 1] *
        stack.factors[static_cast<std::size_t>(j)];

  std::vector<Matrix> grads(static_cast<std::size_t>(N));
  Matrix prefix = Matrix::Identity(ts.d(), ts.d());
  for (int j = 1; j <= N; ++j) {
    const Matrix bg = prefix * g;  // h_{j-1} x 1
    grads[static_cast<std::size_t>(j) - 1] =
        suffix[static_cast<std::size_t>(j)].transpose() * bg.transpose();
    if (j < N)
      prefix = stack.factors[static_cast<std::size_t>(j) - 1] * prefix;
  }
  return grads;
}

DeepResult train_deep(FactorStack init, const TransferSet& ts,
                      const DeepConfig& cfg) {
  cfg.validate();
  if (init.depth() != cfg.depth)
    throw std::invalid_argument("train_deep: stack depth does not match config");

  const std::optional<Vector> w_hat = try_closed_form(ts);
  bool init_check_skipped = cfg.skip_init_check;
  if (!cfg.skip_init_check) {
    if (!w_hat)
      throw std::domain_error(
          "train_deep: closed form unavailable for the init check; "
          "set skip_init_check to proceed");
    if (cfg.epsilon <= 0.0)
      throw std::domain_error("train_deep: epsilon must be positive for the init check");
    const double w0_norm = end_to_end(init).norm();
    const double bound = init_scale_bound(cfg.epsilon, w_hat->norm(), cfg.depth);
    if (w0_norm >= bound)
      throw std::domain_error(
          "train_deep: init norm " + std::to_string(w0_norm) +
          " violates the scale bound " + std::to_string(bound));
    if (balancedness_residual(init) > 1e-9)
      throw std::domain_error("train_deep: init stack is not balanced");
    const Vector w0 = end_to_end(init);
    if (loss(w0, ts) >= loss(Vector::Zero(ts.d()), ts))
      throw std::domain_error(
          "train_deep: initial loss does not undercut the loss at zero");
  }

  const auto start = Clock::now();
  double step = cfg.step;
  for (int halvings = 0;; ++halvings) {
    if (halvings > kMaxHalvings)
      throw step_size_error(
          "train_deep: diverged after 20 step halvings; lower the step");

    FactorStack stack = init;
    TrainTrace trace;
    trace.stride = cfg.record_stride;
    trace.step_used = step;
    trace.halvings = halvings;

    Vector w = end_to_end(stack);
    Vector grad(ts.d());
    double value = 0.0;
    double factor_grad_norm = 0.0;
    std::vector<Matrix> grads;

    auto record = [&](std::size_t iter) {
      if (!trace.rows.empty() && trace.rows.back().iter == iter) return;
      trace.rows.push_back({iter, value, factor_grad_norm,
                            distance_to(w_hat, w), seconds_since(start),
                            balancedness_residual(stack)});
      if (cfg.record_weights) trace.weights.push_back(w);
    };

    double prev_value = std::numeric_limits<double>::infinity();
    int increase_run = 0;
    bool diverged = false;

    std::size_t iter = 0;
    for (;; ++iter) {
      for (const Matrix& W : stack.factors)
        if (!W.allFinite())
          throw numeric_error("train_deep: non-finite factor at iteration " +
                              std::to_string(iter));
      w = end_to_end(stack);
      loss_and_gradient(w, ts, value, grad);
      if (!std::isfinite(value))
        throw numeric_error("train_deep: non-finite loss at iteration " +
                            std::to_string(iter));

      grads = factor_gradients(stack, ts);
      double sq = 0.0;
      for (const Matrix& G : grads) sq += G.squaredNorm();
      factor_grad_norm = std::sqrt(sq);

      if (value > prev_value + kDivergenceSlack) {
        if (++increase_run >= kDivergenceRunLength) {
          diverged = true;
          break;
        }
      } else {
        increase_run = 0;
      }
      prev_value = value;

      if (iter % cfg.record_stride == 0) record(iter);
      if (value <= cfg.loss_tol) {
        trace.stop = StopReason::kLossTol;
        break;
      }
      if (factor_grad_norm <= cfg.grad_tol) {
        trace.stop = StopReason::kGradTol;
        break;
      }
      if (iter >= cfg.max_iters) {
        trace.stop = StopReason::kMaxIters;
        break;
      }
      for (int j = 0; j < cfg.depth; ++j)
        stack.factors[static_cast<std::size_t>(j)].noalias() -=
            step * grads[static_cast<std::size_t>(j)];
    }

    if (diverged) {
      step *= 0.5;
      continue;
    }
    record(iter);
    return {std::move(w), std::move(stack), std::move(trace),
            init_check_skipped};
  }
}

Vector induced_flow_rhs(const Eigen::Ref<const Vector>& w,
                        const Eigen::Ref<const Vector>& grad, int depth) {
  if (depth < 1) throw std::invalid_argument("induced_flow_rhs: depth must be at least 1");
  if (w.size() != grad.size())
    throw std::invalid_argument("induced_flow_rhs: dimension mismatch");
  if (depth == 1) return -grad;
  const double norm = w.norm();
  if (norm == 0.0) return Vector::Zero(w.size());
  const double N = static_cast<double>(depth);
  const double scale = std::pow(norm, 2.0 * (N - 1.0) / N);
  const Vector radial = (w.dot(grad) / (norm * norm)) * w;
  return -scale * (grad + (N - 1.0) * radial);
}

}  // namespace lindistill
