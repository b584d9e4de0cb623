#pragma once

#include <string>
#include <vector>

#include "lindistill/distill.hpp"
#include "lindistill/geometry.hpp"
#include "lindistill/rng.hpp"

namespace lindistill {

// Reverse cdf of the angle-to-teacher distribution for the polynomial
// family: P[angle >= theta] = (1 - (2/pi) theta)^kappa.
double analytic_p(double kappa, double theta);

double soft_label(const Eigen::Ref<const Vector>& w_star,
                  const Eigen::Ref<const Vector>& x);

// 1 on the nonnegative side of the hyperplane, 0 otherwise; ties go to 1.
int hard_label(const Eigen::Ref<const Vector>& w,
               const Eigen::Ref<const Vector>& x);

// Synthetic family with polynomially concentrated teacher angles. A draw
// picks angle a by inverse cdf (a = (pi/2)(1 - U^(1/kappa))), a direction at
// that angle from w_star, and a standard Gaussian radial factor.
// kappa == 0 is accepted as the degenerate point mass at a == 0; note this
// is a definitional special case, the kappa -> 0 limit of the inverse cdf
// concentrates at pi/2 instead.
struct PolyAngleTask {
  double kappa = 1.0;
  Index d = 2;
  Vector w_star;

  void validate() const;
  double reverse_cdf(double theta) const { return analytic_p(kappa, theta); }
  void sample_input(Rng& rng, Eigen::Ref<Vector> out) const;
  InputSampler sampler() const;
};

// Angle law of the kappa = 1 family conditioned on a <= pi/2 - beta0,
// realized by rejection. Gives p(beta0-complement) = 0, the margin case.
struct MarginTask {
  Index d = 2;
  Vector w_star;
  double beta0 = 0.0;

  void validate() const;
  double reverse_cdf(double theta) const;
  void sample_input(Rng& rng, Eigen::Ref<Vector> out) const;
  InputSampler sampler() const;
};

// Isotropic Gaussian inputs; no closed-form angle curve is attached.
struct GaussianTask {
  Index d = 2;
  Vector w_star;

  void validate() const;
  void sample_input(Rng& rng, Eigen::Ref<Vector> out) const;
  InputSampler sampler() const;
};

// X with n draws from the task as columns.
Matrix sample_poly_angle(const PolyAngleTask& task, Index n, Rng& rng);

TransferSet make_transfer_set(const PolyAngleTask& task, Index n, Rng& rng);
TransferSet make_transfer_set(const MarginTask& task, Index n, Rng& rng);
TransferSet make_transfer_set(const GaussianTask& task, Index n, Rng& rng);

// Pixel pool with {0,1} class labels, columns scaled to [0, 1].
struct LabeledPool {
  Matrix images;
  Eigen::VectorXi labels;

  Index d() const { return images.rows(); }
  Index count() const { return images.cols(); }
};

// IDX readers/writers. Loading keeps only label-0/1 records and divides
// pixels by 255. Magic numbers, counts, and lengths are checked; failures
// carry the offending value.
LabeledPool load_mnist_idx(const std::string& images_path,
                           const std::string& labels_path);
void write_idx_images(const std::string& path, const Matrix& images);
void write_idx_labels(const std::string& path,
                      const Eigen::VectorXi& labels);

struct LogisticTeacherConfig {
  double step = 0.5;
  std::size_t iters = 5000;
};

// Full-batch gradient descent from zero on the unregularized logistic loss
// with the pool's hard labels. Deterministic given the config.
Vector train_logistic_teacher(const LabeledPool& pool,
                              const LogisticTeacherConfig& cfg = {});

// Real-data task: a fixed pool split into teacher-training, transfer, and
// evaluation columns, with the logistic teacher trained on the first split.
struct EmpiricalTask {
  Matrix pool;
  Vector w_star;
  std::vector<Index> teacher_split;
  std::vector<Index> transfer_split;
  std::vector<Index> eval_split;

  Matrix eval_matrix() const;
};

// Loads the four standard IDX files from dir, splits the training pool
// 80/20 into teacher and transfer columns, and evaluates on the test pool.
EmpiricalTask make_mnist_task(const std::string& dir,
                              const LogisticTeacherConfig& cfg = {});

// n distinct transfer-pool columns, chosen uniformly without replacement.
std::vector<Index> sample_transfer_indices(const EmpiricalTask& task, Index n,
                                           Rng& rng);
TransferSet make_transfer_set(const EmpiricalTask& task, Index n, Rng& rng);

}  // namespace lindistill
