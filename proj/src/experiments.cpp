#include "lindistill/experiments.hpp"

#include <Eigen/Eigenvalues>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

namespace lindistill {

namespace {

constexpr Index kEvalBlock = 4096;
const std::string kNan = "nan";

void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int spawn = std::min<int>(threads, static_cast<int>(count));
  pool.reserve(static_cast<std::size_t>(spawn));
  for (int i = 0; i < spawn; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct MeanCi {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double ci = 0.0;
};

MeanCi mean_ci(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  const double sd = std::sqrt(sq / static_cast<double>(xs.size() - 1));
  return {mean, 1.96 * sd / std::sqrt(static_cast<double>(xs.size()))};
}

// Disagreement counts of every student column against the teacher over m
// sampler draws, evaluated in blocks so wide students stay in memory budget.
std::vector<std::size_t> sampled_disagreements(const Matrix& students,
                                               const Vector& w_star,
                                               const InputSampler& sampler,
                                               std::size_t m, Rng& rng) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(students.cols()), 0);
  if (students.cols() == 0) return counts;
  const Index d = students.rows();
  Matrix block(d, kEvalBlock);
  std::size_t done = 0;
  while (done < m) {
    const Index bs = static_cast<Index>(
        std::min<std::size_t>(static_cast<std::size_t>(kEvalBlock), m - done));
    for (Index j = 0; j < bs; ++j) sampler(rng, block.col(j));
    const Matrix su = block.leftCols(bs).transpose() * students;
    const Vector tu = block.leftCols(bs).transpose() * w_star;
    for (Index j = 0; j < bs; ++j) {
      const bool teacher_pos = tu[j] >= 0.0;
      for (Index v = 0; v < students.cols(); ++v)
        if ((su(j, v) >= 0.0) != teacher_pos)
          ++counts[static_cast<std::size_t>(v)];
    }
    done += static_cast<std::size_t>(bs);
  }
  return counts;
}

std::vector<std::size_t> fixed_disagreements(const Matrix& students,
                                             const Vector& w_star,
                                             const Matrix& eval) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(students.cols()), 0);
  const Matrix su = eval.transpose() * students;
  const Vector tu = eval.transpose() * w_star;
  for (Index j = 0; j < eval.cols(); ++j) {
    const bool teacher_pos = tu[j] >= 0.0;
    for (Index v = 0; v < students.cols(); ++v)
      if ((su(j, v) >= 0.0) != teacher_pos)
        ++counts[static_cast<std::size_t>(v)];
  }
  return counts;
}

ShallowConfig shallow_config(const TrainerSettings& settings,
                             const Matrix& X) {
  ShallowConfig sc;
  sc.step = settings.auto_step ? curvature_step(X) : settings.step;
  sc.max_iters = settings.max_iters;
  sc.loss_tol = settings.loss_tol;
  sc.grad_tol = settings.grad_tol;
  sc.record_stride = settings.max_iters + 1;  // keep first and last rows only
  return sc;
}

std::uint64_t mix_index(std::size_t outer, std::size_t inner) {
  return (static_cast<std::uint64_t>(outer) << 32) ^
         static_cast<std::uint64_t>(inner);
}

}  // namespace

double curvature_step(const Eigen::Ref<const Matrix>& X) {
  const Index n = X.cols();
  if (n == 0) throw std::invalid_argument("curvature_step: empty data");
  const Matrix gram = X.transpose() * X;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const double lambda =
      eig.eigenvalues().maxCoeff() / (4.0 * static_cast<double>(n));
  if (lambda <= 0.0 || !std::isfinite(lambda))
    throw numeric_error("curvature_step: degenerate curvature");
  return std::min(1.0 / lambda, 1e4);
}

ExperimentResult exp_data_geometry(const GeometryConfig& cfg) {
  if (cfg.kappas.empty())
    throw std::invalid_argument("geometry experiment: empty kappa roster");
  if (cfg.trials == 0 || cfg.risk_samples == 0)
    throw std::invalid_argument("geometry experiment: trials and risk_samples must be positive");

  struct Trial {
    bool ok = false;
    Vector w;
    double angle = 0.0;
    double final_loss = 0.0;
    std::string stop;
    std::size_t iters = 0;
  };

  ResultTable table;
  table.columns = {"experiment", "kind",  "kappa",      "trial",
                   "d",          "n",     "risk",       "ci_half_width",
                   "angle",      "final_loss", "stop_reason", "iters",
                   "failures"};
  std::size_t total_failures = 0;

  for (std::size_t k = 0; k < cfg.kappas.size(); ++k) {
    const double kappa = cfg.kappas[k];
    PolyAngleTask task;
    task.kappa = kappa;
    task.d = cfg.d;
    task.w_star = derive_stream(cfg.master_seed, "geometry/task", k)
                      .unit_sphere(cfg.d);
    task.validate();

    std::vector<Trial> outs(cfg.trials);
    parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
      Rng rng = derive_stream(cfg.master_seed, "geometry/trial", mix_index(k, t));
      Trial& out = outs[t];
      try {
        const TransferSet ts = make_transfer_set(task, cfg.n, rng);
        const ShallowResult res =
            train_shallow(ts, shallow_config(cfg.trainer, ts.X));
        out.w = res.w;
        out.angle = unsigned_angle(task.w_star, res.w);
        out.final_loss = res.trace.rows.back().loss;
        out.stop = to_string(res.trace.stop);
        out.iters = res.trace.rows.back().iter;
        out.ok = true;
      } catch (const std::exception&) {
        out.ok = false;
      }
    });

    Matrix students(cfg.d, static_cast<Index>(cfg.trials));
    std::vector<Index> col_of(cfg.trials, -1);
    Index v = 0;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      if (!outs[t].ok) continue;
      students.col(v) = outs[t].w;
      col_of[t] = v++;
    }
    Rng eval_rng = derive_stream(cfg.master_seed, "geometry/eval", k);
    const std::vector<std::size_t> counts = sampled_disagreements(
        students.leftCols(v), task.w_star, task.sampler(), cfg.risk_samples,
        eval_rng);

    std::vector<double> risks;
    std::vector<double> angles;
    std::size_t failures = 0;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const Trial& out = outs[t];
      if (out.ok) {
        const RiskEstimate est = binomial_estimate(
            counts[static_cast<std::size_t>(col_of[t])], cfg.risk_samples);
        risks.push_back(est.estimate);
        angles.push_back(out.angle);
        table.append_row({"geometry", "trial", format_double(kappa),
                          std::to_string(t), std::to_string(cfg.d),
                          std::to_string(cfg.n), format_double(est.estimate),
                          format_double(est.ci_half_width),
                          format_double(out.angle),
                          format_double(out.final_loss), out.stop,
                          std::to_string(out.iters), ""});
      } else {
        ++failures;
        table.append_row({"geometry", "trial", format_double(kappa),
                          std::to_string(t), std::to_string(cfg.d),
                          std::to_string(cfg.n), kNan, kNan, kNan, kNan,
                          "error", "", ""});
      }
    }
    total_failures += failures;
    const MeanCi risk_summary = mean_ci(risks);
    const MeanCi angle_summary = mean_ci(angles);
    table.append_row({"geometry", "summary", format_double(kappa), "",
                      std::to_string(cfg.d), std::to_string(cfg.n),
                      format_double(risk_summary.mean),
                      format_double(risk_summary.ci),
                      format_double(angle_summary.mean), "", "", "",
                      std::to_string(failures)});
  }
  return {std::move(table), total_failures};
}

ExperimentResult exp_optim_bias(const BiasConfig& cfg) {
  if (cfg.deltas.empty())
    throw std::invalid_argument("bias experiment: empty delta roster");
  if (cfg.trials == 0)
    throw std::invalid_argument("bias experiment: trials must be positive");

  const bool use_mnist = !cfg.mnist_dir.empty();
  if (!use_mnist && !cfg.synthetic_fallback)
    throw std::invalid_argument(
        "bias experiment: no mnist_dir given and synthetic_fallback is off; "
        "point at the IDX files or enable the fallback");

  EmpiricalTask mnist;
  PolyAngleTask synthetic;
  Vector w_star;
  Index d = 0;
  if (use_mnist) {
    mnist = make_mnist_task(cfg.mnist_dir);
    w_star = mnist.w_star;
    d = mnist.pool.rows();
  } else {
    synthetic.kappa = cfg.synthetic_kappa;
    synthetic.d = cfg.synthetic_d;
    synthetic.w_star =
        derive_stream(cfg.master_seed, "bias/task", 0).unit_sphere(cfg.synthetic_d);
    synthetic.validate();
    w_star = synthetic.w_star;
    d = cfg.synthetic_d;
  }

  struct Trial {
    bool ok = false;
    std::vector<Vector> students;  // one per delta
    std::vector<double> train_loss;
    std::vector<double> angle;
  };

  std::vector<Trial> outs(cfg.trials);
  parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
    Rng rng = derive_stream(cfg.master_seed, "bias/trial", t);
    Trial& out = outs[t];
    try {
      const TransferSet ts = use_mnist
                                 ? make_transfer_set(mnist, cfg.n, rng)
                                 : make_transfer_set(synthetic, cfg.n, rng);
      const Vector w_hat = closed_form_solution(ts);
      const Vector q = orthogonal_complement_sample(ts.X, rng);
      // one complement draw per trial; delta only scales it
      for (double delta : cfg.deltas) {
        const Vector w = w_hat + delta * (w_hat.norm() / q.norm()) * q;
        out.students.push_back(w);
        out.train_loss.push_back(loss(w, ts));
        out.angle.push_back(unsigned_angle(w_star, w));
      }
      out.ok = true;
    } catch (const std::exception&) {
      out.ok = false;
      out.students.clear();
    }
  });

  Matrix students(d, static_cast<Index>(cfg.trials * cfg.deltas.size()));
  std::vector<std::vector<Index>> col_of(
      cfg.trials, std::vector<Index>(cfg.deltas.size(), -1));
  Index v = 0;
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    if (!outs[t].ok) continue;
    for (std::size_t di = 0; di < cfg.deltas.size(); ++di) {
      students.col(v) = outs[t].students[di];
      col_of[t][di] = v++;
    }
  }

  std::vector<std::size_t> counts;
  std::size_t eval_count = 0;
  if (use_mnist) {
    const Matrix eval = mnist.eval_matrix();
    eval_count = static_cast<std::size_t>(eval.cols());
    counts = fixed_disagreements(students.leftCols(v), w_star, eval);
  } else {
    if (cfg.risk_samples == 0)
      throw std::invalid_argument("bias experiment: risk_samples must be positive");
    eval_count = cfg.risk_samples;
    Rng eval_rng = derive_stream(cfg.master_seed, "bias/eval", 0);
    counts = sampled_disagreements(students.leftCols(v), w_star,
                                   synthetic.sampler(), cfg.risk_samples,
                                   eval_rng);
  }

  ResultTable table;
  table.columns = {"experiment", "kind",          "delta", "trial",
                   "d",          "n",             "risk",  "ci_half_width",
                   "angle",      "train_loss",    "failures"};
  for (std::size_t di = 0; di < cfg.deltas.size(); ++di) {
    const double delta = cfg.deltas[di];
    std::vector<double> risks;
    std::size_t failures = 0;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const Trial& out = outs[t];
      if (out.ok) {
        const RiskEstimate est = binomial_estimate(
            counts[static_cast<std::size_t>(col_of[t][di])], eval_count);
        risks.push_back(est.estimate);
        table.append_row({"bias", "trial", format_double(delta),
                          std::to_string(t), std::to_string(d),
                          std::to_string(cfg.n), format_double(est.estimate),
                          format_double(est.ci_half_width),
                          format_double(out.angle[di]),
                          format_double(out.train_loss[di]), ""});
      } else {
        ++failures;
        table.append_row({"bias", "trial", format_double(delta),
                          std::to_string(t), std::to_string(d),
                          std::to_string(cfg.n), kNan, kNan, kNan, kNan, ""});
      }
    }
    const MeanCi summary = mean_ci(risks);
    table.append_row({"bias", "summary", format_double(delta), "",
                      std::to_string(d), std::to_string(cfg.n),
                      format_double(summary.mean), format_double(summary.ci),
                      "", "", std::to_string(failures)});
  }
  // a failed trial is one failure even though it spans the delta roster
  std::size_t total_failures = 0;
  for (const Trial& out : outs)
    if (!out.ok) ++total_failures;
  return {std::move(table), total_failures};
}

ExperimentResult exp_monotonicity(const MonotonicityConfig& cfg) {
  if (cfg.trials == 0 || cfg.risk_samples == 0)
    throw std::invalid_argument(
        "monotonicity experiment: trials and risk_samples must be positive");

  PolyAngleTask task;
  task.kappa = cfg.kappa;
  task.d = cfg.d;
  task.w_star =
      derive_stream(cfg.master_seed, "monotonicity/task", 0).unit_sphere(cfg.d);
  task.validate();

  struct NamedLearner {
    std::string name;
    Learner fn;
  };
  std::vector<NamedLearner> roster;
  roster.push_back({"distill_gd", [&cfg](const TransferSet& ts, Rng&) {
                      return train_shallow(ts,
                                           shallow_config(cfg.distill_trainer, ts.X))
                          .w;
                    }});
  roster.push_back({"hard_target", [&cfg](const TransferSet& ts, Rng&) {
                      TransferSet hard = ts;
                      for (Index i = 0; i < hard.n(); ++i)
                        hard.y[i] = static_cast<double>(
                            hard_label(ts.w_star, ts.X.col(i)));
                      ShallowConfig sc;
                      sc.max_iters = cfg.hard_target_iters;
                      sc.record_stride = cfg.hard_target_iters + 1;
                      return train_shallow(hard, sc).w;
                    }});
  for (double delta : cfg.perturb_deltas)
    roster.push_back({"perturbed_" + format_double(delta),
                      [delta](const TransferSet& ts, Rng& rng) {
                        const Vector w_hat = closed_form_solution(ts);
                        return perturbed_learner(w_hat, ts.X, delta, rng);
                      }});

  struct Cell {
    bool ok = false;
    Vector w_base;
    double angle_base = 0.0;
    double angle_ext = 0.0;
    bool improved = false;
  };
  const std::size_t L = roster.size();
  std::vector<Cell> cells(cfg.trials * L);

  parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
    Rng rng = derive_stream(cfg.master_seed, "monotonicity/trial", t);
    const TransferSet base = make_transfer_set(task, cfg.n, rng);
    TransferSet extended;
    extended.w_star = base.w_star;
    extended.X.resize(base.d(), cfg.n + 1);
    extended.X.leftCols(cfg.n) = base.X;
    task.sample_input(rng, extended.X.col(cfg.n));
    extended.y.resize(cfg.n + 1);
    extended.y.head(cfg.n) = base.y;
    extended.y[cfg.n] = soft_label(task.w_star, extended.X.col(cfg.n));

    for (std::size_t k = 0; k < L; ++k) {
      Cell& cell = cells[t * L + k];
      try {
        Rng learner_rng =
            derive_stream(cfg.master_seed, "monotonicity/learner", mix_index(k, t));
        cell.w_base = roster[k].fn(base, learner_rng);
        const Vector w_ext = roster[k].fn(extended, learner_rng);
        cell.angle_base = unsigned_angle(task.w_star, cell.w_base);
        cell.angle_ext = unsigned_angle(task.w_star, w_ext);
        cell.improved = cell.angle_ext < cell.angle_base;
        cell.ok = true;
      } catch (const std::exception&) {
        cell.ok = false;
      }
    }
  });

  Matrix students(cfg.d, static_cast<Index>(cells.size()));
  std::vector<Index> col_of(cells.size(), -1);
  Index v = 0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (!cells[c].ok) continue;
    students.col(v) = cells[c].w_base;
    col_of[c] = v++;
  }
  Rng eval_rng = derive_stream(cfg.master_seed, "monotonicity/eval", 0);
  const std::vector<std::size_t> counts =
      sampled_disagreements(students.leftCols(v), task.w_star, task.sampler(),
                            cfg.risk_samples, eval_rng);

  ResultTable table;
  table.columns = {"experiment", "kind",       "learner",
                   "trial",      "d",          "n",
                   "risk",       "ci_half_width", "improved",
                   "angle_base", "angle_ext",  "index",
                   "index_ci_half_width", "failures"};
  std::size_t total_failures = 0;
  for (std::size_t k = 0; k < L; ++k) {
    std::vector<double> risks;
    std::size_t improved = 0;
    std::size_t completed = 0;
    std::size_t failures = 0;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const Cell& cell = cells[t * L + k];
      if (cell.ok) {
        const RiskEstimate est = binomial_estimate(
            counts[static_cast<std::size_t>(col_of[t * L + k])],
            cfg.risk_samples);
        risks.push_back(est.estimate);
        improved += cell.improved ? 1 : 0;
        ++completed;
        table.append_row({"monotonicity", "trial", roster[k].name,
                          std::to_string(t), std::to_string(cfg.d),
                          std::to_string(cfg.n), format_double(est.estimate),
                          format_double(est.ci_half_width),
                          cell.improved ? "1" : "0",
                          format_double(cell.angle_base),
                          format_double(cell.angle_ext), "", "", ""});
      } else {
        ++failures;
        table.append_row({"monotonicity", "trial", roster[k].name,
                          std::to_string(t), std::to_string(cfg.d),
                          std::to_string(cfg.n), kNan, kNan, kNan, kNan, kNan,
                          "", "", ""});
      }
    }
    total_failures += failures;
    const MeanCi summary = mean_ci(risks);
    std::string index_cell = kNan;
    std::string index_ci_cell = kNan;
    if (completed > 0) {
      const RiskEstimate idx = binomial_estimate(improved, completed);
      index_cell = format_double(idx.estimate);
      index_ci_cell = format_double(idx.ci_half_width);
    }
    table.append_row({"monotonicity", "summary", roster[k].name, "",
                      std::to_string(cfg.d), std::to_string(cfg.n),
                      format_double(summary.mean), format_double(summary.ci),
                      "", "", "", index_cell, index_ci_cell,
                      std::to_string(failures)});
  }
  return {std::move(table), total_failures};
}

}  // namespace lindistill
