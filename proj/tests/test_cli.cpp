#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "lindistill/table.hpp"
#include "test_util.hpp"

using namespace lindistill;

namespace {

int run(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string cli() { return std::string(LINDISTILL_CLI_PATH); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run(cli() + " --help > /dev/null") == 0);
  CHECK(run(cli() + " nonsense 2> /dev/null") == 2);
  CHECK(run(cli() + " 2> /dev/null") == 2);
  CHECK(run(cli() + " experiment mystery 2> /dev/null") == 2);
}

TEST_CASE("malformed config exits with the usage code") {
  testutil::TempDir tmp;
  write_text(tmp.file("bad.json"), "{ not json");
  CHECK(run(cli() + " train --config " + tmp.file("bad.json") + " --out " +
            tmp.file("out") + " 2> /dev/null") == 2);
  write_text(tmp.file("badkey.json"), "{\"task\": {\"family\": \"nope\"}}");
  CHECK(run(cli() + " train --config " + tmp.file("badkey.json") + " --out " +
            tmp.file("out") + " 2> /dev/null") == 2);
  // missing --out is a usage problem too
  CHECK(run(cli() + " train 2> /dev/null") == 2);
}

TEST_CASE("train writes trace, weights, and manifest") {
  testutil::TempDir tmp;
  write_text(tmp.file("cfg.json"), R"({
    "seed": 5,
    "task": {"family": "gaussian", "d": 6},
    "transfer": {"n": 10},
    "trainer": {"step": 0.5, "max_iters": 20000, "loss_tol": 1e-10}
  })");
  const std::string out = tmp.file("run");
  CHECK(run(cli() + " train --config " + tmp.file("cfg.json") + " --out " +
            out + " > " + tmp.file("stdout.json")) == 0);

  const ResultTable trace =
      ResultTable::from_csv(read_file(out + "/trace.csv"));
  CHECK(trace.columns.size() == 6);
  CHECK(trace.columns[0] == "iter");
  CHECK(trace.rows.size() >= 2);

  const ResultTable weights =
      ResultTable::from_csv(read_file(out + "/weights.csv"));
  CHECK(weights.rows.size() == 6);

  const std::string manifest = read_file(out + "/manifest.json");
  CHECK(manifest.find("\"config_hash\"") != std::string::npos);
  CHECK(manifest.find("\"master_seed\": 5") != std::string::npos);
  CHECK(manifest.find("\"tool_version\"") != std::string::npos);

  const std::string summary = read_file(tmp.file("stdout.json"));
  CHECK(summary.find("\"final_loss\"") != std::string::npos);
  CHECK(summary.find("\"stop\"") != std::string::npos);
}

TEST_CASE("closed form and risk chain together") {
  testutil::TempDir tmp;
  write_text(tmp.file("cfg.json"), R"({
    "seed": 9,
    "task": {"family": "poly", "kappa": 2.0, "d": 30},
    "transfer": {"n": 8},
    "risk": {"samples": 4000}
  })");
  const std::string out = tmp.file("cf");
  CHECK(run(cli() + " closed-form --config " + tmp.file("cfg.json") +
            " --out " + out + " > /dev/null") == 0);
  CHECK(run(cli() + " risk --config " + tmp.file("cfg.json") + " --weights " +
            out + "/weights.csv > " + tmp.file("risk.json")) == 0);
  const std::string risk = read_file(tmp.file("risk.json"));
  CHECK(risk.find("\"estimate\"") != std::string::npos);
  CHECK(risk.find("\"samples\": 4000") != std::string::npos);
}

TEST_CASE("bound prints the hand-computed two term value") {
  testutil::TempDir tmp;
  write_text(tmp.file("cfg.json"), R"({
    "bound": {"form": "two-term", "kappa": 1.0,
               "beta": 0.7853981633974483, "n": 5}
  })");
  CHECK(run(cli() + " bound --config " + tmp.file("cfg.json") + " > " +
            tmp.file("bound.json")) == 0);
  const std::string text = read_file(tmp.file("bound.json"));
  CHECK(text.find("0.53125") != std::string::npos);
}

TEST_CASE("bound accepts an empirical curve") {
  testutil::TempDir tmp;
  ResultTable curve;
  curve.columns = {"theta", "value"};
  curve.append_row({"0", "1"});
  curve.append_row({format_double(kPi / 2), "0"});
  write_file_atomic(tmp.file("curve.csv"), curve.to_csv());
  write_text(tmp.file("cfg.json"), std::string(R"({
    "bound": {"form": "two-term", "curve_csv": ")") +
                                       tmp.file("curve.csv") +
                                       R"(", "beta": 0.7853981633974483,
         "n": 5}
  })");
  CHECK(run(cli() + " bound --config " + tmp.file("cfg.json") + " > " +
            tmp.file("bound.json")) == 0);
  CHECK(read_file(tmp.file("bound.json")).find("0.53125") !=
        std::string::npos);
}

TEST_CASE("experiment runs are reproducible byte for byte") {
  testutil::TempDir tmp;
  write_text(tmp.file("cfg.json"), R"({
    "seed": 3,
    "geometry": {"kappas": [1.0], "d": 12, "n": 6, "trials": 3,
                  "risk_samples": 800,
                  "trainer": {"auto_step": true, "max_iters": 4000,
                               "grad_tol": 1e-7}}
  })");
  const std::string a = tmp.file("a");
  const std::string b = tmp.file("b");
  CHECK(run(cli() + " experiment geometry --config " + tmp.file("cfg.json") +
            " --out " + a + " --plot > /dev/null") == 0);
  CHECK(run(cli() + " experiment geometry --config " + tmp.file("cfg.json") +
            " --out " + b + " > /dev/null") == 0);
  CHECK(read_file(a + "/geometry.csv") == read_file(b + "/geometry.csv"));

  const std::string svg = read_file(a + "/geometry.svg");
  testutil::check_xml_balanced(svg);
  CHECK(svg.find("class=\"series\"") != std::string::npos);
  CHECK(read_file(a + "/manifest.json").find("\"trial_failures\": 0") !=
        std::string::npos);
}

TEST_CASE("bias experiment without a data source is a config error") {
  testutil::TempDir tmp;
  write_text(tmp.file("cfg.json"), R"({"bias": {"trials": 2}})");
  CHECK(run(cli() + " experiment bias --config " + tmp.file("cfg.json") +
            " --out " + tmp.file("out") + " 2> /dev/null") == 2);
}

TEST_CASE("bias experiment runs on the synthetic fallback") {
  testutil::TempDir tmp;
  write_text(tmp.file("cfg.json"), R"({
    "seed": 11,
    "bias": {"deltas": [0, 20], "n": 6, "trials": 2, "risk_samples": 500,
              "synthetic_fallback": true, "synthetic_d": 12}
  })");
  const std::string out = tmp.file("out");
  CHECK(run(cli() + " experiment bias --config " + tmp.file("cfg.json") +
            " --out " + out + " > /dev/null") == 0);
  const ResultTable t = ResultTable::from_csv(read_file(out + "/bias.csv"));
  CHECK(t.rows.size() == 6);  // 2 deltas x (2 trials + summary)
}

TEST_CASE("verify passes") {
  CHECK(run(cli() + " verify > /dev/null") == 0);
}
