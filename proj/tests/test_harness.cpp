/* Copyright 2026 The regchoice Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "regchoice/errors.hpp"
#include "regchoice/harness.hpp"

using namespace regchoice;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("regchoice_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

ReportGroup group(const std::string& label, double ll, double acc) {
  ReportGroup g;
  g.label = label;
  g.summary.mean = {ll, acc, acc, 0.5, 1.0};
  g.summary.count = 1;
  return g;
}

constexpr const char* kSmallRun = R"({
  "data": {"synthetic": {"rows": 400, "seed": 3}},
  "model": {"family": "mlp", "depth": 1, "width": 8},
  "train": {"max_epochs": 3, "learning_rate": 0.01, "seed": 2},
  "penalty": {"kind": "sum", "target": "probability", "lambda": 1.0},
  "sweep": {"lambdas": [0, 1], "replications": 2},
  "curve": {"grid_size": 5}
})";

int run_in(const fs::path& dir, const std::string& command, const fs::path& config, std::string* err_text = nullptr,
           std::optional<int> workers = {}) {
  CliOptions o;
  o.config = config.string();
  o.out = dir.string();
  o.workers = workers;
  std::ostringstream out, err;
  const int status = run(command, o, out, err);
  if (err_text) *err_text = err.str();
  return status;
}

}  // namespace

TEST_CASE("config defaults materialize and round trip") {
  const RunConfig c = RunConfig::from_json("{}");
  CHECK(c.train.learning_rate == 1e-3);
  CHECK(c.train.batches_per_epoch == 10);
  CHECK(c.train.patience == 20);
  CHECK(c.model.depth == 4);
  CHECK(c.model.width == 100);
  CHECK(c.sweep.replications == 10);
  CHECK(c.sweep.lambdas.size() == 7);
  CHECK(c.standardize);
  CHECK(c.regularity.epsilon_strong == -1e-4);
  const RunConfig back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  const RunConfig custom = RunConfig::from_json(kSmallRun);
  CHECK(RunConfig::from_json(custom.to_json()).to_json() == custom.to_json());
}

TEST_CASE("config errors carry the key path") {
  auto path_of = [](const std::string& text) {
    try {
      RunConfig::from_json(text);
    } catch (const ConfigError& e) {
      return e.key_path();
    }
    return std::string("<no error>");
  };
  CHECK(path_of(R"({"trian": {}})") == "trian");
  CHECK(path_of(R"({"train": {"learning_rat": 0.1}})") == "train.learning_rat");
  CHECK(path_of(R"({"train": {"learning_rate": "fast"}})") == "train.learning_rate");
  CHECK(path_of(R"({"train": {"learning_rate": -1}})") == "train.learning_rate");
  CHECK(path_of(R"({"penalty": {"kind": "max"}})") == "penalty.kind");
  CHECK(path_of(R"({"penalty": {"signs": [{"alternative": "drive", "colum": "x"}]}})") == "penalty.signs[0].colum");
  CHECK(path_of(R"({"data": {"synthetic": {"rows": 0}}})") == "data.synthetic.rows");
  CHECK(path_of(R"({"sweep": {"lambdas": [1, -2]}})") == "sweep.lambdas[1]");
  CHECK(path_of(R"({"split": {"scheme": "sorted"}})") == "split.sort_column");
  CHECK(path_of("{not json") == "<root>");
}

TEST_CASE("comparison flags") {
  SUBCASE("single group") {
    const std::vector<ReportGroup> g{group("a", -10, 0.5)};
    for (const auto& row : compare_flags(g)) CHECK(row == std::vector<int>{1});
  }
  SUBCASE("equal means share the best flag") {
    const std::vector<ReportGroup> g{group("a", -10, 0.5), group("b", -10, 0.5)};
    for (const auto& row : compare_flags(g)) CHECK(row == std::vector<int>{1, 1});
  }
  SUBCASE("three groups get one best and one second best") {
    const std::vector<ReportGroup> g{group("a", -12, 0.6), group("b", -10, 0.4), group("c", -11, 0.5)};
    const auto flags = compare_flags(g);
    CHECK(flags[0] == std::vector<int>{0, 1, 2});  // log-likelihood closest to zero
    CHECK(flags[1] == std::vector<int>{1, 0, 2});
    const std::string table = compare_table(g);
    CHECK(table.find("-10 (0)*") != std::string::npos);
    CHECK(table.find("-11 (0)+") != std::string::npos);
    CHECK(compare_csv(g).find("log_likelihood,b,-10,0,1,best") != std::string::npos);
  }
  SUBCASE("four significant digits") {
    const std::vector<ReportGroup> g{group("a", -1351.9123, 0.123456)};
    const std::string table = compare_table(g);
    CHECK(table.find("-1352 (0)") != std::string::npos);
    CHECK(table.find("0.1235 (0)") != std::string::npos);
  }
}

TEST_CASE("unknown command prints usage and fails") {
  std::ostringstream out, err;
  CHECK(run("fit", CliOptions{}, out, err) != 0);
  CHECK(err.str().find("usage:") != std::string::npos);
}

TEST_CASE("invalid config exits nonzero naming the key") {
  const fs::path dir = scratch("badcfg");
  put(dir / "cfg.json", R"({"model": {"widht": 3}})");
  std::string err;
  CHECK(run_in(dir / "out", "train", dir / "cfg.json", &err) == 2);
  CHECK(err.find("model.widht") != std::string::npos);
  CHECK(run_in(dir / "out", "train", dir / "missing.json", &err) == 2);
}

TEST_CASE("runtime failures exit nonzero with the trainer diagnostic") {
  const fs::path dir = scratch("diverge");
  put(dir / "cfg.json", R"({"data": {"synthetic": {"rows": 200}}, "model": {"depth": 1, "width": 4},
    "train": {"optimizer": "sgd", "learning_rate": 1e300, "max_epochs": 3}})");
  std::string err;
  CHECK(run_in(dir / "out", "train", dir / "cfg.json", &err) == 1);
  CHECK(err.find("diverged at epoch") != std::string::npos);
}

TEST_CASE("synth, split, train, eval, curve, and eps-sweep produce artifacts") {
  const fs::path dir = scratch("pipeline");
  put(dir / "run.json", kSmallRun);
  REQUIRE(run_in(dir / "synth", "synth", dir / "run.json") == 0);
  CHECK(fs::exists(dir / "synth" / "data.csv"));
  CHECK(fs::exists(dir / "synth" / "teacher.json"));

  // Train from the written table and schema so input digests are recorded.
  const std::string table = (dir / "synth" / "data.csv").string();
  const std::string schema = (dir / "synth" / "schema.json").string();
  put(dir / "table.json", R"({"data": {"table": ")" + table + R"(", "schema": ")" + schema +
                              R"("}, "model": {"depth": 1, "width": 8}, "train": {"max_epochs": 3}})");
  REQUIRE(run_in(dir / "split", "split", dir / "table.json") == 0);
  CHECK(fs::exists(dir / "split" / "split_manifest.json"));
  CHECK(fs::exists(dir / "split" / "scaling.json"));

  REQUIRE(run_in(dir / "train", "train", dir / "table.json") == 0);
  for (const char* f : {"checkpoint.json", "history.csv", "metrics.csv", "summary.txt", "manifest.json"}) {
    CHECK(fs::exists(dir / "train" / f));
  }
  const std::string manifest = slurp(dir / "train" / "manifest.json");
  CHECK(manifest.find(table) != std::string::npos);
  CHECK(manifest.find("\"code_version\"") != std::string::npos);
  CHECK(manifest.find("\"learning_rate\"") != std::string::npos);

  const std::string ck = (dir / "train" / "checkpoint.json").string();
  put(dir / "eval.json", R"({"data": {"table": ")" + table + R"(", "schema": ")" + schema +
                             R"("}, "eval": {"checkpoint": ")" + ck + R"(", "split": "test"}})");
  REQUIRE(run_in(dir / "eval", "eval", dir / "eval.json") == 0);
  const MetricsReport r = MetricsReport::from_record(slurp(dir / "eval" / "metrics.txt"));
  // Evaluating the checkpoint on the same test split reproduces the training run's test metrics.
  const std::string summary = slurp(dir / "train" / "summary.txt");
  const auto at = summary.find("test.log_likelihood=");
  REQUIRE(at != std::string::npos);
  CHECK(std::stod(summary.substr(at + 20)) == r.log_likelihood);
  CHECK(r.log_likelihood < 0.0);
  CHECK(r.weak_regularity >= r.strong_regularity);

  REQUIRE(run_in(dir / "curve", "curve", dir / "run.json") == 0);
  CHECK(fs::exists(dir / "curve" / "curve_drive_cost_drive.csv"));
  put(dir / "eps.json", R"({"data": {"table": ")" + table + R"(", "schema": ")" + schema +
                            R"("}, "eps_sweep": {"checkpoint": ")" + ck +
                            R"(", "alternative": "transit", "column": "cost_transit"}})");
  REQUIRE(run_in(dir / "eps", "eps-sweep", dir / "eps.json") == 0);
  CHECK(fs::exists(dir / "eps" / "eps_sweep.csv"));
}

TEST_CASE("sweep artifacts regenerate bit for bit across worker counts") {
  const fs::path dir = scratch("sweep");
  put(dir / "run.json", kSmallRun);
  REQUIRE(run_in(dir / "a", "sweep", dir / "run.json", nullptr, 1) == 0);
  REQUIRE(run_in(dir / "b", "sweep", dir / "run.json", nullptr, 2) == 0);
  for (const char* f : {"sweep_summary.csv", "sweep_cells.csv", "metrics_table.txt", "metrics_table.csv",
                        "summary.txt", "cells/lambda1_rep1.txt"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(slurp(dir / "a" / "summary.txt").find("selected_lambda=") != std::string::npos);
}

TEST_CASE("checkpoint container round trip") {
  SyntheticSpec spec;
  spec.rows = 100;
  const Dataset d = synthesize(spec).data;
  Checkpoint c{ChoiceModel::initialize(travel_mlp_spec(d, 1, 4), 3), true, fit_scaling(d)};
  const Checkpoint back = Checkpoint::from_json(c.to_json());
  CHECK(back.model.flat_parameters() == c.model.flat_parameters());
  CHECK(back.scaling.mean == c.scaling.mean);
  CHECK(back.to_json() == c.to_json());
}

TEST_CASE("sha256 of a known string") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
