#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>

#include "lindistill/experiments.hpp"
#include "test_util.hpp"

using namespace lindistill;

namespace {

GeometryConfig small_geometry() {
  GeometryConfig cfg;
  cfg.kappas = {1.0};
  cfg.d = 20;
  cfg.n = 10;
  cfg.trials = 4;
  cfg.risk_samples = 2000;
  cfg.trainer.max_iters = 20000;
  cfg.trainer.grad_tol = 1e-8;
  cfg.trainer.loss_tol = 1e-10;
  return cfg;
}

double cell_as_double(const std::string& s) {
  return std::strtod(s.c_str(), nullptr);
}

}  // namespace

TEST_CASE("curvature step on hand data") {
  Matrix X(1, 1);
  X << 2;
  CHECK(curvature_step(X) == doctest::Approx(1.0).epsilon(1e-12));

  Matrix tiny(1, 1);
  tiny << 1e-6;
  CHECK(curvature_step(tiny) == 1e4);  // capped
}

TEST_CASE("geometry experiment shape and determinism") {
  const GeometryConfig cfg = small_geometry();
  const ExperimentResult res = exp_data_geometry(cfg);
  CHECK(res.trial_failures == 0);
  REQUIRE(res.table.rows.size() == 5);  // 4 trials + summary
  CHECK(res.table.columns.size() == 13);

  for (std::size_t i = 0; i < 4; ++i) {
    const auto& row = res.table.rows[i];
    CHECK(row[0] == "geometry");
    CHECK(row[1] == "trial");
    const double risk = cell_as_double(row[6]);
    CHECK(risk >= 0.0);
    CHECK(risk <= 1.0);
    CHECK(cell_as_double(row[8]) >= 0.0);
    CHECK((row[10] == "loss_tol" || row[10] == "grad_tol" ||
           row[10] == "max_iters"));
  }
  CHECK(res.table.rows[4][1] == "summary");
  CHECK(res.table.rows[4][12] == "0");

  const ExperimentResult again = exp_data_geometry(cfg);
  CHECK(again.table == res.table);

  GeometryConfig threaded = cfg;
  threaded.threads = 4;
  const ExperimentResult parallel = exp_data_geometry(threaded);
  CHECK(parallel.table == res.table);
}

TEST_CASE("geometry experiment validates its config") {
  GeometryConfig cfg = small_geometry();
  cfg.kappas.clear();
  CHECK_THROWS_AS(exp_data_geometry(cfg), std::invalid_argument);
  GeometryConfig none = small_geometry();
  none.trials = 0;
  CHECK_THROWS_AS(exp_data_geometry(none), std::invalid_argument);
}

TEST_CASE("bias experiment on the synthetic family") {
  BiasConfig cfg;
  cfg.deltas = {0.0, 30.0};
  cfg.n = 10;
  cfg.trials = 3;
  cfg.risk_samples = 2000;
  cfg.synthetic_fallback = true;
  cfg.synthetic_d = 20;
  const ExperimentResult res = exp_optim_bias(cfg);
  CHECK(res.trial_failures == 0);
  REQUIRE(res.table.rows.size() == 8);  // 2 deltas x (3 trials + summary)

  // delta = 0 is the projection itself; its train loss is zero
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(res.table.rows[i][2] == "0");
    CHECK(cell_as_double(res.table.rows[i][9]) < 1e-10);
  }
  // larger delta keeps the train loss at zero too (still a minimizer)
  for (std::size_t i = 4; i < 7; ++i)
    CHECK(cell_as_double(res.table.rows[i][9]) < 1e-10);

  const ExperimentResult again = exp_optim_bias(cfg);
  CHECK(again.table == res.table);
}

TEST_CASE("bias experiment refuses to run without a data source") {
  BiasConfig cfg;
  cfg.synthetic_fallback = false;
  cfg.mnist_dir.clear();
  CHECK_THROWS_AS(exp_optim_bias(cfg), std::invalid_argument);
}

TEST_CASE("monotonicity experiment covers the learner roster") {
  MonotonicityConfig cfg;
  cfg.d = 10;
  cfg.n = 3;
  cfg.trials = 5;
  cfg.risk_samples = 1000;
  cfg.perturb_deltas = {0.5};
  cfg.distill_trainer.max_iters = 5000;
  cfg.distill_trainer.grad_tol = 1e-8;
  cfg.hard_target_iters = 2000;
  const ExperimentResult res = exp_monotonicity(cfg);
  CHECK(res.trial_failures == 0);
  // 3 learners x (5 trials + summary)
  REQUIRE(res.table.rows.size() == 18);

  std::size_t summaries = 0;
  for (const auto& row : res.table.rows) {
    if (row[1] != "summary") continue;
    ++summaries;
    const double index = cell_as_double(row[11]);
    CHECK(index >= 0.0);
    CHECK(index <= 1.0);
  }
  CHECK(summaries == 3);
  CHECK(res.table.rows[0][2] == "distill_gd");
  CHECK(res.table.rows[6][2] == "hard_target");
  CHECK(res.table.rows[12][2] == "perturbed_0.5");

  const ExperimentResult again = exp_monotonicity(cfg);
  CHECK(again.table == res.table);
}
