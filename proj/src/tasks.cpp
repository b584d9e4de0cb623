#include "lindistill/tasks.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace lindistill {

double analytic_p(double kappa, double theta) {
  if (kappa < 0.0) throw std::domain_error("analytic_p: kappa must be nonnegative");
  if (theta < 0.0 || theta > kPi / 2.0 + 1e-12)
    throw std::domain_error("analytic_p: theta outside [0, pi/2]");
  const double base = std::max(0.0, 1.0 - (2.0 / kPi) * theta);
  return std::pow(base, kappa);  // pow(0, 0) == 1 covers the kappa == 0 case
}

double soft_label(const Eigen::Ref<const Vector>& w_star,
                  const Eigen::Ref<const Vector>& x) {
  if (w_star.size() != x.size())
    throw std::invalid_argument("soft_label: dimension mismatch");
  return clamp_probability(sigmoid(w_star.dot(x)));
}

int hard_label(const Eigen::Ref<const Vector>& w,
               const Eigen::Ref<const Vector>& x) {
  if (w.size() != x.size())
    throw std::invalid_argument("hard_label: dimension mismatch");
  return w.dot(x) >= 0.0 ? 1 : 0;
}

namespace {

// Inverse-cdf draw of the teacher angle for the polynomial family.
double draw_poly_angle(double kappa, Rng& rng) {
  if (kappa == 0.0) return 0.0;  // degenerate point mass, by definition
  const double u = rng.uniform_open();
  return (kPi / 2.0) * (1.0 - std::pow(u, 1.0 / kappa));
}

// Unit direction at angle a from the unit vector w_hat, uniformly over the
// set of such directions: a uniform complement direction plus a random sign.
void direction_at_angle(const Eigen::Ref<const Vector>& w_hat, double a,
                        Rng& rng, Eigen::Ref<Vector> out) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    rng.fill_gaussian(out);
    out -= w_hat.dot(out) * w_hat;
    const double norm = out.norm();
    if (norm > 1e-12) {
      const double s = rng.sign();
      out = std::cos(a) * w_hat + std::sin(a) * s * (out / norm);
      return;
    }
  }
  throw numeric_error("direction_at_angle: degenerate complement draws");
}

}  // namespace

void PolyAngleTask::validate() const {
  if (kappa < 0.0) throw std::domain_error("PolyAngleTask: kappa must be nonnegative");
  if (d < 2) throw std::invalid_argument("PolyAngleTask: need d >= 2");
  if (w_star.size() != d)
    throw std::invalid_argument("PolyAngleTask: teacher dimension mismatch");
  if (w_star.norm() == 0.0)
    throw std::domain_error("PolyAngleTask: zero teacher");
}

void PolyAngleTask::sample_input(Rng& rng, Eigen::Ref<Vector> out) const {
  const Vector w_hat = w_star / w_star.norm();
  const double a = draw_poly_angle(kappa, rng);
  direction_at_angle(w_hat, a, rng, out);
  out *= rng.normal();
}

InputSampler PolyAngleTask::sampler() const {
  PolyAngleTask copy = *this;
  copy.validate();
  return [copy](Rng& rng, Eigen::Ref<Vector> out) {
    copy.sample_input(rng, out);
  };
}

void MarginTask::validate() const {
  if (d < 2) throw std::invalid_argument("MarginTask: need d >= 2");
  if (w_star.size() != d)
    throw std::invalid_argument("MarginTask: teacher dimension mismatch");
  if (w_star.norm() == 0.0) throw std::domain_error("MarginTask: zero teacher");
  if (beta0 < 0.0 || beta0 >= kPi / 2.0)
    throw std::domain_error("MarginTask: beta0 must be in [0, pi/2)");
}

double MarginTask::reverse_cdf(double theta) const {
  if (theta < 0.0 || theta > kPi / 2.0 + 1e-12)
    throw std::domain_error("MarginTask: theta outside [0, pi/2]");
  const double cutoff = kPi / 2.0 - beta0;
  return std::max(0.0, 1.0 - theta / cutoff);
}

void MarginTask::sample_input(Rng& rng, Eigen::Ref<Vector> out) const {
  const Vector w_hat = w_star / w_star.norm();
  const double cutoff = kPi / 2.0 - beta0;
  double a = 0.0;
  int attempt = 0;
  for (;; ++attempt) {
    if (attempt >= 100000)
      throw std::domain_error("MarginTask: rejection cap hit, beta0 = " +
                              std::to_string(beta0) + " too close to pi/2");
    a = draw_poly_angle(1.0, rng);
    if (a <= cutoff) break;
  }
  direction_at_angle(w_hat, a, rng, out);
  out *= rng.normal();
}

InputSampler MarginTask::sampler() const {
  MarginTask copy = *this;
  copy.validate();
  return [copy](Rng& rng, Eigen::Ref<Vector> out) {
    copy.sample_input(rng, out);
  };
}

void GaussianTask::validate() const {
  if (d < 1) throw std::invalid_argument("GaussianTask: need d >= 1");
  if (w_star.size() != d)
    throw std::invalid_argument("GaussianTask: teacher dimension mismatch");
  if (w_star.norm() == 0.0) throw std::domain_error("GaussianTask: zero teacher");
}

void GaussianTask::sample_input(Rng& rng, Eigen::Ref<Vector> out) const {
  rng.fill_gaussian(out);
}

InputSampler GaussianTask::sampler() const {
  GaussianTask copy = *this;
  copy.validate();
  return [copy](Rng& rng, Eigen::Ref<Vector> out) {
    copy.sample_input(rng, out);
  };
}

Matrix sample_poly_angle(const PolyAngleTask& task, Index n, Rng& rng) {
  task.validate();
  if (n < 1) throw std::invalid_argument("sample_poly_angle: need n >= 1");
  Matrix X(task.d, n);
  for (Index j = 0; j < n; ++j) task.sample_input(rng, X.col(j));
  return X;
}

namespace {

template <typename Task>
TransferSet labeled_set(const Task& task, Index n, Rng& rng) {
  task.validate();
  if (n < 1) throw std::invalid_argument("make_transfer_set: need n >= 1");
  TransferSet ts;
  ts.w_star = task.w_star;
  ts.X.resize(task.d, n);
  ts.y.resize(n);
  for (Index j = 0; j < n; ++j) {
    task.sample_input(rng, ts.X.col(j));
    ts.y[j] = soft_label(task.w_star, ts.X.col(j));
  }
  return ts;
}

}  // namespace

TransferSet make_transfer_set(const PolyAngleTask& task, Index n, Rng& rng) {
  return labeled_set(task, n, rng);
}

TransferSet make_transfer_set(const MarginTask& task, Index n, Rng& rng) {
  return labeled_set(task, n, rng);
}

TransferSet make_transfer_set(const GaussianTask& task, Index n, Rng& rng) {
  return labeled_set(task, n, rng);
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in)
    throw format_error("idx: truncated header in " + path);
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

LabeledPool load_mnist_idx(const std::string& images_path,
                           const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw format_error("idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw format_error("idx: cannot open " + labels_path);

  const std::uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != kImagesMagic)
    throw format_error("idx: bad image magic " + std::to_string(img_magic) +
                       " in " + images_path);
  const std::uint32_t img_count = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);

  const std::uint32_t lab_magic = read_be32(lab, labels_path);
  if (lab_magic != kLabelsMagic)
    throw format_error("idx: bad label magic " + std::to_string(lab_magic) +
                       " in " + labels_path);
  const std::uint32_t lab_count = read_be32(lab, labels_path);
  if (img_count != lab_count)
    throw format_error("idx: " + std::to_string(img_count) + " images vs " +
                       std::to_string(lab_count) + " labels");

  const std::size_t pixels = std::size_t{rows} * cols;
  std::vector<unsigned char> image(pixels);
  std::vector<unsigned char> labels(lab_count);
  lab.read(reinterpret_cast<char*>(labels.data()), labels.size());
  if (static_cast<std::size_t>(lab.gcount()) != labels.size())
    throw format_error("idx: truncated label data in " + labels_path);

  std::vector<std::vector<double>> kept;
  std::vector<int> kept_labels;
  for (std::uint32_t i = 0; i < img_count; ++i) {
    img.read(reinterpret_cast<char*>(image.data()), image.size());
    if (static_cast<std::size_t>(img.gcount()) != image.size())
      throw format_error("idx: truncated image data at record " +
                         std::to_string(i) + " in " + images_path);
    if (labels[i] != 0 && labels[i] != 1) continue;
    std::vector<double> col(pixels);
    for (std::size_t p = 0; p < pixels; ++p)
      col[p] = static_cast<double>(image[p]) / 255.0;
    kept.push_back(std::move(col));
    kept_labels.push_back(labels[i]);
  }

  LabeledPool pool;
  pool.images.resize(static_cast<Index>(pixels),
                     static_cast<Index>(kept.size()));
  pool.labels.resize(static_cast<Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) {
    for (std::size_t p = 0; p < pixels; ++p)
      pool.images(static_cast<Index>(p), static_cast<Index>(j)) = kept[j][p];
    pool.labels[static_cast<Index>(j)] = kept_labels[j];
  }
  return pool;
}

void write_idx_images(const std::string& path, const Matrix& images) {
  // columns are flattened 28x28 records; other heights are rejected
  if (images.rows() != 784)
    throw std::invalid_argument("write_idx_images: expected 784 rows");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("idx: cannot write " + path);
  write_be32(out, kImagesMagic);
  write_be32(out, static_cast<std::uint32_t>(images.cols()));
  write_be32(out, 28);
  write_be32(out, 28);
  for (Index j = 0; j < images.cols(); ++j) {
    for (Index p = 0; p < images.rows(); ++p) {
      const double v = std::clamp(images(p, j), 0.0, 1.0);
      const unsigned char b =
          static_cast<unsigned char>(std::lround(v * 255.0));
      out.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
  if (!out) throw format_error("idx: write failed for " + path);
}

void write_idx_labels(const std::string& path, const Eigen::VectorXi& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("idx: cannot write " + path);
  write_be32(out, kLabelsMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (Index i = 0; i < labels.size(); ++i) {
    const unsigned char b = static_cast<unsigned char>(labels[i]);
    out.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!out) throw format_error("idx: write failed for " + path);
}

Vector train_logistic_teacher(const LabeledPool& pool,
                              const LogisticTeacherConfig& cfg) {
  const Index n = pool.count();
  if (n == 0) throw std::invalid_argument("train_logistic_teacher: empty pool");
  bool has0 = false, has1 = false;
  for (Index i = 0; i < n; ++i) {
    if (pool.labels[i] == 0) has0 = true;
    else if (pool.labels[i] == 1) has1 = true;
    else throw std::domain_error("train_logistic_teacher: label outside {0,1}");
  }
  if (!has0 || !has1)
    throw std::domain_error("train_logistic_teacher: pool has a single class");

  Vector w = Vector::Zero(pool.d());
  Vector t(n);
  for (Index i = 0; i < n; ++i) t[i] = static_cast<double>(pool.labels[i]);
  Vector r(n);
  for (std::size_t it = 0; it < cfg.iters; ++it) {
    for (Index i = 0; i < n; ++i)
      r[i] = sigmoid(w.dot(pool.images.col(i))) - t[i];
    w.noalias() -= (cfg.step / static_cast<double>(n)) * (pool.images * r);
  }
  return w;
}

Matrix EmpiricalTask::eval_matrix() const {
  Matrix E(pool.rows(), static_cast<Index>(eval_split.size()));
  for (std::size_t j = 0; j < eval_split.size(); ++j)
    E.col(static_cast<Index>(j)) = pool.col(eval_split[j]);
  return E;
}

EmpiricalTask make_mnist_task(const std::string& dir,
                              const LogisticTeacherConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  const std::string train_images = (base / "train-images-idx3-ubyte").string();
  const std::string train_labels = (base / "train-labels-idx1-ubyte").string();
  const std::string test_images = (base / "t10k-images-idx3-ubyte").string();
  const std::string test_labels = (base / "t10k-labels-idx1-ubyte").string();
  for (const auto& p : {train_images, train_labels, test_images, test_labels})
    if (!fs::exists(p))
      throw format_error("mnist: missing file " + p +
                         " (expected the four standard IDX files)");

  const LabeledPool train = load_mnist_idx(train_images, train_labels);
  const LabeledPool test = load_mnist_idx(test_images, test_labels);
  if (train.count() < 2 || test.count() < 1)
    throw format_error("mnist: too few 0/1 records after filtering");

  EmpiricalTask task;
  task.pool.resize(train.d(), train.count() + test.count());
  task.pool.leftCols(train.count()) = train.images;
  task.pool.rightCols(test.count()) = test.images;

  const Index teacher_count = (train.count() * 8) / 10;
  LabeledPool teacher_pool;
  teacher_pool.images = train.images.leftCols(teacher_count);
  teacher_pool.labels = train.labels.head(teacher_count);
  task.w_star = train_logistic_teacher(teacher_pool, cfg);

  for (Index i = 0; i < teacher_count; ++i) task.teacher_split.push_back(i);
  for (Index i = teacher_count; i < train.count(); ++i)
    task.transfer_split.push_back(i);
  for (Index i = 0; i < test.count(); ++i)
    task.eval_split.push_back(train.count() + i);
  return task;
}

std::vector<Index> sample_transfer_indices(const EmpiricalTask& task, Index n,
                                           Rng& rng) {
  const Index pool_size = static_cast<Index>(task.transfer_split.size());
  if (n < 1) throw std::invalid_argument("sample_transfer_indices: need n >= 1");
  if (n > pool_size)
    throw std::invalid_argument(
        "sample_transfer_indices: requested " + std::to_string(n) +
        " of a transfer pool with " + std::to_string(pool_size) + " columns");
  std::vector<Index> order(task.transfer_split);
  for (Index i = 0; i < n; ++i) {
    const Index j =
        i + static_cast<Index>(rng.integer(static_cast<std::uint64_t>(pool_size - i)));
    std::swap(order[i], order[j]);
  }
  order.resize(n);
  return order;
}

TransferSet make_transfer_set(const EmpiricalTask& task, Index n, Rng& rng) {
  const std::vector<Index> chosen = sample_transfer_indices(task, n, rng);
  TransferSet ts;
  ts.w_star = task.w_star;
  ts.X.resize(task.pool.rows(), n);
  ts.y.resize(n);
  for (Index j = 0; j < n; ++j) {
    ts.X.col(j) = task.pool.col(chosen[j]);
    ts.y[j] = soft_label(task.w_star, ts.X.col(j));
  }
  return ts;
}

}  // namespace lindistill
