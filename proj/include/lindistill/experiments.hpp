#pragma once

#include <string>
#include <vector>

#include "lindistill/risk_bounds.hpp"
#include "lindistill/table.hpp"
#include "lindistill/trainers.hpp"

namespace lindistill {

// Scalar knobs the experiment drivers pass to gradient-descent students.
// auto_step replaces `step` per instance with the inverse of the largest
// eigenvalue of (1/4n) X X^T, the curvature ceiling of the loss, so one
// config covers data of any conditioning.
struct TrainerSettings {
  double step = 0.1;
  bool auto_step = false;
  std::size_t max_iters = 1000000;
  double loss_tol = 1e-10;
  double grad_tol = 1e-10;
};

double curvature_step(const Eigen::Ref<const Matrix>& X);

struct GeometryConfig {
  std::uint64_t master_seed = 1;
  std::vector<double> kappas{0.5, 1.0, 2.0, 4.0};
  Index d = 1000;
  Index n = 20;
  std::size_t trials = 50;
  std::size_t risk_samples = 100000;
  int threads = 1;
  TrainerSettings trainer{0.1, true, 300000, 1e-12, 1e-9};
};

struct BiasConfig {
  std::uint64_t master_seed = 1;
  std::vector<double> deltas{0, 10, 20, 30, 40, 50, 60, 70, 80, 90};
  Index n = 100;
  std::size_t trials = 50;
  std::size_t risk_samples = 100000;
  std::string mnist_dir;
  bool synthetic_fallback = false;
  Index synthetic_d = 784;
  double synthetic_kappa = 1.0;
  int threads = 1;
};

struct MonotonicityConfig {
  std::uint64_t master_seed = 1;
  double kappa = 1.0;
  Index d = 100;
  Index n = 5;
  std::size_t trials = 1000;
  std::size_t risk_samples = 100000;
  std::vector<double> perturb_deltas{1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0};
  TrainerSettings distill_trainer{0.1, true, 100000, 1e-12, 1e-11};
  std::size_t hard_target_iters = 10000;
  int threads = 1;
};

struct ExperimentResult {
  ResultTable table;
  std::size_t trial_failures = 0;
};

// Risk of gradient-descent distillation across angle-concentration levels:
// per kappa, one task and teacher, fresh transfer sets per trial, risk on a
// shared held-out sample. Rows per (kappa, trial) plus a summary per kappa.
ExperimentResult exp_data_geometry(const GeometryConfig& cfg);

// Risk of the perturbed minimizers w_delta as the off-span component grows.
// Runs on the MNIST pools when mnist_dir is set, otherwise requires
// synthetic_fallback and uses the synthetic family at the same width.
ExperimentResult exp_optim_bias(const BiasConfig& cfg);

// Mean risk and strict-improvement index per learner on a fixed-width
// roster: gradient-descent distillation, the hard-label learner, and the
// perturbed minimizers.
ExperimentResult exp_monotonicity(const MonotonicityConfig& cfg);

}  // namespace lindistill
