#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lindistill/experiments.hpp"
#include "lindistill/svg.hpp"

using json = nlohmann::json;
using namespace lindistill;

namespace {

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string iso_utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw usage_error(std::string("config: ") + e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw usage_error("config " + path + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw usage_error(std::string("config key '") + key + "': " + e.what());
  }
}

json section(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) return json::object();
  if (!j.at(key).is_object())
    throw usage_error(std::string("config key '") + key +
                      "' must be an object");
  return j.at(key);
}

struct CommonArgs {
  std::string config_path;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string out_dir;
  bool plot = false;
  std::string mnist_dir;
  int threads = 0;
};

std::uint64_t resolve_seed(const CommonArgs& args, const json& cfg) {
  if (args.seed_given) return args.seed;
  return get_or<std::uint64_t>(cfg, "seed", 1);
}

int resolve_threads(const CommonArgs& args, const json& cfg) {
  if (args.threads > 0) return args.threads;
  return get_or<int>(cfg, "threads", 1);
}

std::string resolve_mnist_dir(const CommonArgs& args, const json& task_cfg) {
  if (!args.mnist_dir.empty()) return args.mnist_dir;
  const std::string from_cfg = get_or<std::string>(task_cfg, "dir", "");
  if (!from_cfg.empty()) return from_cfg;
  const char* env = std::getenv("LINDISTILL_MNIST_DIR");
  return env ? env : "";
}

void require_out(const CommonArgs& args) {
  if (args.out_dir.empty())
    throw usage_error("this command writes files; pass --out DIR");
}

std::string out_path(const CommonArgs& args, const std::string& name) {
  return (std::filesystem::path(args.out_dir) / name).string();
}

void write_manifest(const CommonArgs& args, const std::string& command,
                    std::uint64_t seed, const json& params,
                    std::size_t trial_failures,
                    const std::vector<std::string>& outputs) {
  json m;
  m["tool_version"] = kToolVersion;
  m["command"] = command;
  m["master_seed"] = seed;
  m["parameters"] = params;
  m["config_hash"] = fnv1a_hex(params.dump());
  m["created_utc"] = iso_utc_now();
  m["trial_failures"] = trial_failures;
  m["outputs"] = outputs;
  write_file_atomic(out_path(args, "manifest.json"), m.dump(2) + "\n");
}

// --- task construction ---------------------------------------------------

struct TaskBundle {
  std::string family;
  PolyAngleTask poly;
  MarginTask margin;
  GaussianTask gauss;
  EmpiricalTask mnist;
  Vector w_star;
  json params;

  bool empirical() const { return family == "mnist"; }

  InputSampler sampler() const {
    if (family == "poly") return poly.sampler();
    if (family == "margin") return margin.sampler();
    if (family == "gaussian") return gauss.sampler();
    throw usage_error("the mnist task has no input sampler; risk runs on "
                      "the held-out split");
  }

  TransferSet make(Index n, Rng& rng) const {
    if (family == "poly") return make_transfer_set(poly, n, rng);
    if (family == "margin") return make_transfer_set(margin, n, rng);
    if (family == "gaussian") return make_transfer_set(gauss, n, rng);
    return make_transfer_set(mnist, n, rng);
  }
};

TaskBundle build_task(const json& cfg, const CommonArgs& args,
                      std::uint64_t seed) {
  const json tc = section(cfg, "task");
  TaskBundle b;
  b.family = get_or<std::string>(tc, "family", "poly");
  const Index d = get_or<Index>(tc, "d", 100);
  Rng rng = derive_stream(seed, "cli/task", 0);
  if (b.family == "poly") {
    b.poly.kappa = get_or<double>(tc, "kappa", 1.0);
    b.poly.d = d;
    b.poly.w_star = rng.unit_sphere(d);
    b.poly.validate();
    b.w_star = b.poly.w_star;
    b.params = {{"family", "poly"}, {"kappa", b.poly.kappa}, {"d", d}};
  } else if (b.family == "margin") {
    b.margin.beta0 = get_or<double>(tc, "beta0", 0.5);
    b.margin.d = d;
    b.margin.w_star = rng.unit_sphere(d);
    b.margin.validate();
    b.w_star = b.margin.w_star;
    b.params = {{"family", "margin"}, {"beta0", b.margin.beta0}, {"d", d}};
  } else if (b.family == "gaussian") {
    b.gauss.d = d;
    b.gauss.w_star = rng.unit_sphere(d);
    b.gauss.validate();
    b.w_star = b.gauss.w_star;
    b.params = {{"family", "gaussian"}, {"d", d}};
  } else if (b.family == "mnist") {
    const std::string dir = resolve_mnist_dir(args, tc);
    if (dir.empty())
      throw usage_error(
          "mnist task: give --mnist-dir, task.dir, or LINDISTILL_MNIST_DIR");
    b.mnist = make_mnist_task(dir);
    b.w_star = b.mnist.w_star;
    b.params = {{"family", "mnist"}, {"dir", dir}};
  } else {
    throw usage_error("unknown task family '" + b.family + "'");
  }
  return b;
}

// --- trainer configs ------------------------------------------------------

ShallowConfig shallow_from(const json& tc, const TransferSet& ts,
                           json& params) {
  ShallowConfig sc;
  const bool auto_step = get_or<bool>(tc, "auto_step", false);
  sc.step = get_or<double>(tc, "step", sc.step);
  if (auto_step) sc.step = curvature_step(ts.X);
  sc.max_iters = get_or<std::size_t>(tc, "max_iters", sc.max_iters);
  sc.loss_tol = get_or<double>(tc, "loss_tol", sc.loss_tol);
  sc.grad_tol = get_or<double>(tc, "grad_tol", sc.grad_tol);
  sc.record_stride = get_or<std::size_t>(tc, "record_stride", sc.record_stride);
  sc.validate();
  params = {{"kind", "gd"},
            {"step", sc.step},
            {"auto_step", auto_step},
            {"max_iters", sc.max_iters},
            {"loss_tol", sc.loss_tol},
            {"grad_tol", sc.grad_tol},
            {"record_stride", sc.record_stride}};
  return sc;
}

TrainerSettings settings_from(const json& tc, TrainerSettings base) {
  base.step = get_or<double>(tc, "step", base.step);
  base.auto_step = get_or<bool>(tc, "auto_step", base.auto_step);
  base.max_iters = get_or<std::size_t>(tc, "max_iters", base.max_iters);
  base.loss_tol = get_or<double>(tc, "loss_tol", base.loss_tol);
  base.grad_tol = get_or<double>(tc, "grad_tol", base.grad_tol);
  return base;
}

json settings_json(const TrainerSettings& s) {
  return {{"step", s.step},
          {"auto_step", s.auto_step},
          {"max_iters", s.max_iters},
          {"loss_tol", s.loss_tol},
          {"grad_tol", s.grad_tol}};
}

// --- output helpers -------------------------------------------------------

ResultTable trace_table(const TrainTrace& trace) {
  ResultTable t;
  t.columns = {"iter",        "loss",        "grad_norm",
               "dist_to_opt", "wall_time_s", "balance_residual"};
  for (const TraceRow& row : trace.rows)
    t.append_row({std::to_string(row.iter), format_double(row.loss),
                  format_double(row.grad_norm), format_double(row.dist_to_opt),
                  format_double(row.wall_time_s),
                  format_double(row.balance_residual)});
  return t;
}

ResultTable weights_table(const Vector& w, const Vector& w_star) {
  ResultTable t;
  t.columns = {"index", "weight", "teacher"};
  for (Index i = 0; i < w.size(); ++i)
    t.append_row({std::to_string(i), format_double(w[i]),
                  format_double(w_star[i])});
  return t;
}

Vector weights_from_csv(const std::string& path) {
  const ResultTable t = ResultTable::from_csv(read_file(path));
  int col = -1;
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    if (t.columns[i] == "weight") col = static_cast<int>(i);
  if (col < 0) throw format_error(path + ": no 'weight' column");
  Vector w(static_cast<Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    w[static_cast<Index>(i)] = std::strtod(t.rows[i][col].c_str(), nullptr);
  return w;
}

PCurve curve_from_csv(const std::string& path) {
  const ResultTable t = ResultTable::from_csv(read_file(path));
  int tc = -1, vc = -1;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (t.columns[i] == "theta") tc = static_cast<int>(i);
    if (t.columns[i] == "value") vc = static_cast<int>(i);
  }
  if (tc < 0 || vc < 0)
    throw format_error(path + ": need 'theta' and 'value' columns");
  PCurve c;
  c.thetas = Vector(static_cast<Index>(t.rows.size()));
  c.values = Vector(static_cast<Index>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    c.thetas[static_cast<Index>(i)] =
        std::strtod(t.rows[i][tc].c_str(), nullptr);
    c.values[static_cast<Index>(i)] =
        std::strtod(t.rows[i][vc].c_str(), nullptr);
  }
  c.validate();
  return c;
}

// one chart series per group label, trial points behind the group mean
Chart chart_from_table(const ResultTable& table, const std::string& title,
                       const std::string& x_label,
                       const std::function<double(const std::string&)>& x_of) {
  Chart chart;
  chart.title = title;
  chart.x_label = x_label;
  chart.y_label = "risk";
  std::vector<std::string> order;
  std::map<std::string, Series> groups;
  for (const auto& row : table.rows) {
    const std::string& label = row[2];
    if (!groups.count(label)) {
      order.push_back(label);
      groups[label].label = label;
    }
    Series& s = groups[label];
    const double risk = std::strtod(row[6].c_str(), nullptr);
    if (row[1] == "trial") {
      s.point_xs.push_back(x_of(label));
      s.point_ys.push_back(risk);
    } else {
      s.xs.push_back(x_of(label));
      s.ys.push_back(risk);
    }
  }
  for (const std::string& label : order)
    chart.series.push_back(groups[label]);
  return chart;
}

// --- subcommand bodies ----------------------------------------------------

int run_train(const CommonArgs& args) {
  const json cfg = load_config(args.config_path);
  const std::uint64_t seed = resolve_seed(args, cfg);
  require_out(args);
  const TaskBundle task = build_task(cfg, args, seed);
  const Index n = get_or<Index>(section(cfg, "transfer"), "n", 20);
  Rng transfer_rng = derive_stream(seed, "cli/transfer", 0);
  const TransferSet ts = task.make(n, transfer_rng);

  const json tc = section(cfg, "trainer");
  const std::string kind = get_or<std::string>(tc, "kind", "gd");
  json trainer_params;
  Vector w;
  TrainTrace trace;
  if (kind == "gd") {
    const ShallowConfig sc = shallow_from(tc, ts, trainer_params);
    ShallowResult res = train_shallow(ts, sc);
    w = std::move(res.w);
    trace = std::move(res.trace);
  } else if (kind == "deep") {
    const json dc = section(cfg, "deep");
    DeepConfig deep;
    deep.depth = get_or<int>(dc, "depth", 2);
    deep.step = get_or<double>(tc, "step", deep.step);
    deep.max_iters = get_or<std::size_t>(tc, "max_iters", deep.max_iters);
    deep.loss_tol = get_or<double>(tc, "loss_tol", deep.loss_tol);
    deep.grad_tol = get_or<double>(tc, "grad_tol", deep.grad_tol);
    deep.record_stride =
        get_or<std::size_t>(tc, "record_stride", deep.record_stride);
    deep.skip_init_check = get_or<bool>(dc, "skip_init_check", false);
    deep.epsilon = get_or<double>(dc, "epsilon", 0.0);
    if (dc.contains("init_scale")) {
      deep.init_scale = dc.at("init_scale").get<double>();
    } else {
      const Vector w_hat = closed_form_solution(ts);
      if (deep.epsilon <= 0) deep.epsilon = 0.05 * w_hat.norm();
      deep.init_scale =
          0.9 * init_scale_bound(deep.epsilon, w_hat.norm(), deep.depth);
    }
    deep.validate();
    Rng init_rng = derive_stream(seed, "cli/init", 0);
    const FactorStack stack = balanced_init(deep, ts, init_rng);
    DeepResult res = train_deep(stack, ts, deep);
    w = std::move(res.w);
    trace = std::move(res.trace);
    trainer_params = {{"kind", "deep"},
                      {"depth", deep.depth},
                      {"step", deep.step},
                      {"max_iters", deep.max_iters},
                      {"loss_tol", deep.loss_tol},
                      {"grad_tol", deep.grad_tol},
                      {"init_scale", deep.init_scale},
                      {"epsilon", deep.epsilon},
                      {"skip_init_check", deep.skip_init_check}};
  } else {
    throw usage_error("unknown trainer kind '" + kind + "'");
  }

  write_file_atomic(out_path(args, "trace.csv"), trace_table(trace).to_csv());
  write_file_atomic(out_path(args, "weights.csv"),
                    weights_table(w, ts.w_star).to_csv());
  json params = {{"task", task.params},
                 {"transfer", {{"n", n}}},
                 {"trainer", trainer_params}};
  write_manifest(args, "train", seed, params, 0,
                 {"trace.csv", "weights.csv"});

  json summary;
  summary["final_loss"] = trace.rows.back().loss;
  summary["grad_norm"] = trace.rows.back().grad_norm;
  summary["iters"] = trace.rows.back().iter;
  summary["stop"] = to_string(trace.stop);
  summary["step_used"] = trace.step_used;
  summary["halvings"] = trace.halvings;
  summary["angle_to_teacher"] = unsigned_angle(task.w_star, w);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_closed_form(const CommonArgs& args) {
  const json cfg = load_config(args.config_path);
  const std::uint64_t seed = resolve_seed(args, cfg);
  require_out(args);
  const TaskBundle task = build_task(cfg, args, seed);
  const Index n = get_or<Index>(section(cfg, "transfer"), "n", 20);
  Rng transfer_rng = derive_stream(seed, "cli/transfer", 0);
  const TransferSet ts = task.make(n, transfer_rng);
  const Vector w_hat = closed_form_solution(ts);
  write_file_atomic(out_path(args, "weights.csv"),
                    weights_table(w_hat, ts.w_star).to_csv());
  json params = {{"task", task.params}, {"transfer", {{"n", n}}}};
  write_manifest(args, "closed-form", seed, params, 0, {"weights.csv"});
  json summary;
  summary["norm"] = w_hat.norm();
  summary["angle_to_teacher"] = unsigned_angle(ts.w_star, w_hat);
  summary["loss"] = loss(w_hat, ts);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_risk(const CommonArgs& args, const std::string& weights_path) {
  const json cfg = load_config(args.config_path);
  const std::uint64_t seed = resolve_seed(args, cfg);
  const TaskBundle task = build_task(cfg, args, seed);
  Vector w;
  if (!weights_path.empty()) {
    w = weights_from_csv(weights_path);
  } else {
    const Index n = get_or<Index>(section(cfg, "transfer"), "n", 20);
    Rng transfer_rng = derive_stream(seed, "cli/transfer", 0);
    w = closed_form_solution(task.make(n, transfer_rng));
  }
  RiskEstimate est;
  if (task.empirical()) {
    est = disagreement_on(task.mnist.eval_matrix(), w, task.mnist.w_star);
  } else {
    const std::size_t m =
        get_or<std::size_t>(section(cfg, "risk"), "samples", 100000);
    Rng eval_rng = derive_stream(seed, "cli/eval", 0);
    est = transfer_risk_mc(w, task.w_star, task.sampler(), m, eval_rng);
  }
  json summary;
  summary["estimate"] = est.estimate;
  summary["ci_half_width"] = est.ci_half_width;
  summary["samples"] = est.samples;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int run_bound(const CommonArgs& args) {
  const json cfg = load_config(args.config_path);
  const json bc = section(cfg, "bound");
  const std::string form = get_or<std::string>(bc, "form", "optimized");
  const std::size_t n = get_or<std::size_t>(bc, "n", 5);

  ReverseCdf p;
  const std::string curve_csv = get_or<std::string>(bc, "curve_csv", "");
  if (!curve_csv.empty()) {
    p = make_reverse_cdf(curve_from_csv(curve_csv));
  } else {
    const double kappa = get_or<double>(bc, "kappa", 1.0);
    p = [kappa](double theta) { return analytic_p(kappa, theta); };
  }

  json out;
  const auto fill = [&out](const BoundReport& r) {
    out["beta"] = r.beta;
    out["p_beta"] = r.p_beta;
    out["p_complement"] = r.p_complement;
    out["n"] = r.n;
    out["value"] = r.value;
    out["vacuous"] = r.vacuous();
    if (r.delta) out["delta"] = *r.delta;
  };
  if (form == "two-term") {
    fill(bound_thm3(p, get_or<double>(bc, "beta", kPi / 4), n,
                    get_or<bool>(bc, "tight", false)));
  } else if (form == "optimized") {
    fill(bound_optimize_beta(p, n, get_or<std::size_t>(bc, "grid", 1001),
                             get_or<bool>(bc, "tight", false),
                             get_or<bool>(bc, "n_ge_d", false)));
  } else if (form == "exact") {
    fill(bound_exact_case(n));
  } else if (form == "margin") {
    out["value"] = bound_margin(get_or<double>(bc, "gamma", 0.5), n);
    out["n"] = n;
  } else if (form == "poly") {
    out["value"] = bound_poly(get_or<double>(bc, "c", 1.0),
                              get_or<double>(bc, "kappa", 1.0),
                              get_or<double>(bc, "n_real",
                                             static_cast<double>(n)));
  } else if (form == "approx") {
    fill(bound_approx(p, get_or<double>(bc, "beta", 0.3), n,
                      get_or<double>(bc, "epsilon", 0.01),
                      get_or<double>(bc, "w_hat_norm", 1.0)));
  } else {
    throw usage_error("unknown bound form '" + form + "'");
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

// --- experiments ----------------------------------------------------------

GeometryConfig geometry_config(const json& cfg, const CommonArgs& args) {
  GeometryConfig g;
  const json jc = section(cfg, "geometry");
  g.master_seed = resolve_seed(args, cfg);
  g.kappas = get_or<std::vector<double>>(jc, "kappas", g.kappas);
  g.d = get_or<Index>(jc, "d", g.d);
  g.n = get_or<Index>(jc, "n", g.n);
  g.trials = get_or<std::size_t>(jc, "trials", g.trials);
  g.risk_samples = get_or<std::size_t>(jc, "risk_samples", g.risk_samples);
  g.threads = resolve_threads(args, cfg);
  g.trainer = settings_from(section(jc, "trainer"), g.trainer);
  return g;
}

json geometry_json(const GeometryConfig& g) {
  return {{"kappas", g.kappas},  {"d", g.d},
          {"n", g.n},            {"trials", g.trials},
          {"risk_samples", g.risk_samples}, {"threads", g.threads},
          {"trainer", settings_json(g.trainer)}};
}

BiasConfig bias_config(const json& cfg, const CommonArgs& args) {
  BiasConfig b;
  const json jc = section(cfg, "bias");
  b.master_seed = resolve_seed(args, cfg);
  b.deltas = get_or<std::vector<double>>(jc, "deltas", b.deltas);
  b.n = get_or<Index>(jc, "n", b.n);
  b.trials = get_or<std::size_t>(jc, "trials", b.trials);
  b.risk_samples = get_or<std::size_t>(jc, "risk_samples", b.risk_samples);
  b.mnist_dir = resolve_mnist_dir(args, jc.contains("mnist_dir")
                                            ? json{{"dir", jc.at("mnist_dir")}}
                                            : json::object());
  b.synthetic_fallback = get_or<bool>(jc, "synthetic_fallback", false);
  b.synthetic_d = get_or<Index>(jc, "synthetic_d", b.synthetic_d);
  b.synthetic_kappa = get_or<double>(jc, "synthetic_kappa", b.synthetic_kappa);
  b.threads = resolve_threads(args, cfg);
  if (b.mnist_dir.empty() && !b.synthetic_fallback)
    throw usage_error(
        "bias experiment needs --mnist-dir or bias.synthetic_fallback");
  return b;
}

json bias_json(const BiasConfig& b) {
  return {{"deltas", b.deltas},
          {"n", b.n},
          {"trials", b.trials},
          {"risk_samples", b.risk_samples},
          {"mnist_dir", b.mnist_dir},
          {"synthetic_fallback", b.synthetic_fallback},
          {"synthetic_d", b.synthetic_d},
          {"synthetic_kappa", b.synthetic_kappa},
          {"threads", b.threads}};
}

MonotonicityConfig monotonicity_config(const json& cfg,
                                       const CommonArgs& args) {
  MonotonicityConfig m;
  const json jc = section(cfg, "monotonicity");
  m.master_seed = resolve_seed(args, cfg);
  m.kappa = get_or<double>(jc, "kappa", m.kappa);
  m.d = get_or<Index>(jc, "d", m.d);
  m.n = get_or<Index>(jc, "n", m.n);
  m.trials = get_or<std::size_t>(jc, "trials", m.trials);
  m.risk_samples = get_or<std::size_t>(jc, "risk_samples", m.risk_samples);
  m.perturb_deltas =
      get_or<std::vector<double>>(jc, "perturb_deltas", m.perturb_deltas);
  m.distill_trainer =
      settings_from(section(jc, "distill_trainer"), m.distill_trainer);
  m.hard_target_iters =
      get_or<std::size_t>(jc, "hard_target_iters", m.hard_target_iters);
  m.threads = resolve_threads(args, cfg);
  return m;
}

json monotonicity_json(const MonotonicityConfig& m) {
  return {{"kappa", m.kappa},
          {"d", m.d},
          {"n", m.n},
          {"trials", m.trials},
          {"risk_samples", m.risk_samples},
          {"perturb_deltas", m.perturb_deltas},
          {"distill_trainer", settings_json(m.distill_trainer)},
          {"hard_target_iters", m.hard_target_iters},
          {"threads", m.threads}};
}

int run_experiment(const CommonArgs& args, const std::string& which) {
  const json cfg = load_config(args.config_path);
  require_out(args);

  ExperimentResult res;
  json params;
  std::uint64_t seed = resolve_seed(args, cfg);
  std::string x_label;
  if (which == "geometry") {
    const GeometryConfig g = geometry_config(cfg, args);
    params = geometry_json(g);
    res = exp_data_geometry(g);
    x_label = "kappa";
  } else if (which == "bias") {
    const BiasConfig b = bias_config(cfg, args);
    params = bias_json(b);
    res = exp_optim_bias(b);
    x_label = "delta";
  } else {
    const MonotonicityConfig m = monotonicity_config(cfg, args);
    params = monotonicity_json(m);
    res = exp_monotonicity(m);
    x_label = "learner";
  }

  const std::string csv_name = which + ".csv";
  write_file_atomic(out_path(args, csv_name), res.table.to_csv());
  std::vector<std::string> outputs{csv_name};

  if (args.plot) {
    std::function<double(const std::string&)> x_of;
    if (which == "monotonicity") {
      auto positions = std::make_shared<std::map<std::string, double>>();
      x_of = [positions](const std::string& label) {
        auto it = positions->find(label);
        if (it == positions->end())
          it = positions->emplace(label, static_cast<double>(positions->size()))
                   .first;
        return it->second;
      };
    } else {
      x_of = [](const std::string& label) {
        return std::strtod(label.c_str(), nullptr);
      };
    }
    const Chart chart =
        chart_from_table(res.table, which, x_label, x_of);
    const std::string svg_name = which + ".svg";
    write_file_atomic(out_path(args, svg_name), chart.render());
    outputs.push_back(svg_name);
  }

  write_manifest(args, "experiment " + which, seed, params,
                 res.trial_failures, outputs);
  json summary;
  summary["rows"] = res.table.rows.size();
  summary["trial_failures"] = res.trial_failures;
  summary["out"] = args.out_dir;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// --- verify ---------------------------------------------------------------

int run_verify() {
  int failures = 0;
  const auto check = [&failures](const char* name, const std::function<void()>& fn) {
    try {
      fn();
      std::cout << "ok " << name << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "FAIL " << name << ": " << e.what() << "\n";
    }
  };
  const auto expect = [](bool cond, const char* what) {
    if (!cond) throw std::runtime_error(what);
  };

  check("gradient matches finite differences", [&] {
    GaussianTask task;
    task.d = 6;
    Rng seed_rng(101);
    task.w_star = seed_rng.unit_sphere(6);
    Rng rng(102);
    const TransferSet ts = make_transfer_set(task, 9, rng);
    const Vector w = rng.gaussian(6);
    const Vector g = loss_gradient(w, ts);
    Vector fd(6);
    const double h = 1e-6;
    for (Index i = 0; i < 6; ++i) {
      Vector wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      fd[i] = (loss(wp, ts) - loss(wm, ts)) / (2 * h);
    }
    expect((g - fd).norm() <= 1e-5 * std::max(1.0, g.norm()),
           "finite difference mismatch");
  });

  check("projection solves the normal equations", [&] {
    Rng rng(103);
    Matrix X(9, 4);
    for (Index j = 0; j < 4; ++j) X.col(j) = rng.gaussian(9);
    const Vector w = rng.gaussian(9);
    const Vector p = project_onto_span(X, w);
    const Vector oracle =
        X * (X.transpose() * X).ldlt().solve(X.transpose() * w);
    expect((p - oracle).norm() < 1e-10, "projection mismatch");
  });

  check("closed form recovers the teacher with enough data", [&] {
    GaussianTask task;
    task.d = 5;
    Rng seed_rng(104);
    task.w_star = seed_rng.unit_sphere(5);
    Rng rng(105);
    const TransferSet ts = make_transfer_set(task, 12, rng);
    expect(closed_form_solution(ts) == ts.w_star, "teacher not recovered");
  });

  check("sampled angles follow the analytic curve", [&] {
    PolyAngleTask task;
    task.kappa = 1.0;
    task.d = 8;
    Rng seed_rng(106);
    task.w_star = seed_rng.unit_sphere(8);
    Vector grid(3);
    grid << kPi / 8, kPi / 4, 3 * kPi / 8;
    Rng rng(107);
    const PCurve curve =
        reverse_cdf_estimate(task.sampler(), task.w_star, grid, 20000, rng);
    for (Index i = 0; i < 3; ++i) {
      const double p = task.reverse_cdf(grid[i]);
      const double sigma = std::sqrt(p * (1 - p) / 20000.0);
      expect(std::abs(curve.values[i] - p) < 3 * sigma + 1e-9,
             "curve outside the binomial band");
    }
  });

  check("bound values", [&] {
    const ReverseCdf p = [](double theta) { return analytic_p(1.0, theta); };
    expect(std::abs(bound_thm3(p, kPi / 4, 5).value - 0.53125) < 1e-12,
           "two-term value");
    expect(std::abs(bound_margin(0.5, 10) - 0.0009765625) < 1e-15,
           "margin value");
    expect(std::abs(bound_poly(1.0, 1.0, std::exp(2.0)) -
                    3.0 * std::exp(-2.0)) < 1e-12,
           "poly value");
  });

  check("experiments are deterministic", [&] {
    GeometryConfig cfg;
    cfg.kappas = {1.0};
    cfg.d = 15;
    cfg.n = 8;
    cfg.trials = 3;
    cfg.risk_samples = 1000;
    cfg.trainer.max_iters = 5000;
    cfg.trainer.grad_tol = 1e-7;
    const ExperimentResult a = exp_data_geometry(cfg);
    const ExperimentResult b = exp_data_geometry(cfg);
    expect(a.table == b.table, "geometry tables differ across runs");
  });

  check("deep training descends", [&] {
    GaussianTask task;
    task.d = 4;
    Rng seed_rng(108);
    task.w_star = seed_rng.unit_sphere(4);
    Rng rng(109);
    const TransferSet ts = make_transfer_set(task, 2, rng);
    DeepConfig cfg;
    cfg.depth = 2;
    cfg.init_scale = 1e-3;
    cfg.skip_init_check = true;
    cfg.max_iters = 3000;
    Rng init_rng(110);
    const DeepResult res = train_deep(balanced_init(cfg, ts, init_rng), ts, cfg);
    expect(res.trace.descent_ok(), "deep loss increased");
  });

  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for linear knowledge distillation"};
  app.require_subcommand(1);

  CommonArgs args;
  const auto add_common = [&args](CLI::App* sub, bool with_plot = false) {
    sub->add_option("--config", args.config_path, "JSON config file");
    sub->add_option("--seed", args.seed, "master seed")
        ->each([&args](const std::string&) { args.seed_given = true; });
    sub->add_option("--out", args.out_dir, "output directory");
    sub->add_option("--mnist-dir", args.mnist_dir, "directory with IDX files");
    sub->add_option("--threads", args.threads, "worker threads");
    if (with_plot) sub->add_flag("--plot", args.plot, "also write an SVG chart");
  };

  CLI::App* train = app.add_subcommand("train", "gradient descent student");
  add_common(train);
  CLI::App* closed =
      app.add_subcommand("closed-form", "projection solution");
  add_common(closed);
  CLI::App* risk = app.add_subcommand("risk", "Monte Carlo transfer risk");
  add_common(risk);
  std::string weights_path;
  risk->add_option("--weights", weights_path, "weights.csv of the student");
  CLI::App* bound = app.add_subcommand("bound", "expected risk bounds");
  add_common(bound);
  CLI::App* experiment =
      app.add_subcommand("experiment", "preconfigured studies");
  std::string which;
  experiment
      ->add_option("name", which, "geometry, bias, or monotonicity")
      ->required()
      ->check(CLI::IsMember({"geometry", "bias", "monotonicity"}));
  add_common(experiment, true);
  CLI::App* verify =
      app.add_subcommand("verify", "fast self checks of the numerics");
  (void)verify;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(train)) return run_train(args);
    if (app.got_subcommand(closed)) return run_closed_form(args);
    if (app.got_subcommand(risk)) return run_risk(args, weights_path);
    if (app.got_subcommand(bound)) return run_bound(args);
    if (app.got_subcommand(experiment)) return run_experiment(args, which);
    if (app.got_subcommand(verify)) return run_verify();
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
