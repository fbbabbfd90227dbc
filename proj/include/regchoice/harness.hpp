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

#ifndef REGCHOICE_HARNESS_HPP_
#define REGCHOICE_HARNESS_HPP_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regchoice/choice_model.hpp"
#include "regchoice/dataset.hpp"
#include "regchoice/metrics.hpp"
#include "regchoice/regularizer.hpp"
#include "regchoice/trainer.hpp"

namespace regchoice {

const char* version();

// Hex SHA-256 of a byte string or a file's contents.
std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::string& path);

struct DataConfig {
  std::string table;   // CSV path; empty selects the synthetic generator
  std::string schema;  // JSON schema path; required with `table`
  SyntheticSpec synthetic;
};

struct ModelConfig {
  std::string family = "mlp";  // mlp | mnl | tastenet
  int depth = 4;
  int width = 100;
  Activation activation = Activation::kRectifier;
  int hidden_width = 16;
  ConstraintMode constraint = ConstraintMode::kNone;
};

struct SignEntry {
  std::string alternative;
  std::string column;
  ExpectedSign sign = ExpectedSign::kNegative;
};

struct SweepSettings {
  std::vector<double> lambdas{std::begin(kDefaultLambdaGrid), std::end(kDefaultLambdaGrid)};
  int replications = 10;
  double regularity_floor = 0.95;
};

struct RegularitySettings {
  double epsilon_strong = -1e-4;
  double epsilon_weak = 1e-4;
  DerivativeMethod method = DerivativeMethod::kExact;
  double fd_step = 1e-3;
  // Empty: the NEG entries of the sign spec.
  std::vector<std::pair<std::string, std::string>> pairs;
};

struct CurveSettings {
  std::string alternative;  // empty: first alternative with a cost column
  std::string column;       // empty: that alternative's cost column
  int grid_size = 50;
  std::vector<std::string> checkpoints;  // empty: train sweep.replications models
};

struct EpsSweepSettings {
  std::string alternative;
  std::string column;
  std::vector<double> epsilons{-1e-2, -1e-3, -1e-4, 0.0, 1e-4, 1e-3, 1e-2};
  std::string checkpoint;  // empty: train one model
};

struct EvalSettings {
  std::string checkpoint;
  std::string split = "test";  // train | validation | test
  std::string table;           // optional raw CSV evaluated instead of a split
};

// One run's configuration with every default materialized.
struct RunConfig {
  DataConfig data;
  SplitPlan split;
  bool standardize = true;
  ModelConfig model;
  TrainConfig train;
  std::vector<SignEntry> signs;  // empty: NEG on every direct-cost pair
  RegularitySettings regularity;
  SweepSettings sweep;
  CurveSettings curve;
  EpsSweepSettings eps_sweep;
  EvalSettings eval;
  int workers = 1;

  // Nested JSON; missing keys keep their defaults, unknown keys and ill-typed
  // values throw ConfigError naming the key path.
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_json() const;
};

struct RunManifest {
  std::string command;
  std::string resolved_config;  // RunConfig::to_json
  std::vector<std::uint64_t> seeds;
  std::string code_version = version();
  std::map<std::string, std::string> input_digests;
  std::map<std::string, double> timings;  // seconds

  std::string to_json() const;
};

struct PreparedData {
  SchemaSpec schema;
  Dataset full;
  Splits raw;
  Splits splits;  // standardized when the config asks for it
  ScalingRecord scaling;
  std::optional<Teacher> teacher;
};

PreparedData prepare_data(const RunConfig& config, RunManifest* manifest = nullptr);
ModelSpec resolve_model(const ModelConfig& config, const Dataset& train);
SignSpec resolve_signs(const RunConfig& config, const Dataset& train);
RegularityConfig resolve_regularity(const RunConfig& config, const Dataset& train);
TrainConfig resolve_train(const RunConfig& config, const Dataset& train);

// Model plus the scaling that maps raw attributes to its inputs.
struct Checkpoint {
  ChoiceModel model;
  bool standardized = false;
  ScalingRecord scaling;

  std::string to_json() const;
  static Checkpoint from_json(const std::string& text);
};

struct ReportGroup {
  std::string label;
  MetricsSummary summary;
};

// metric x group flags: 1 best, 2 second best, 0 otherwise. Higher is better
// for every metric; log-likelihood closest to zero wins. Ties share a flag.
std::vector<std::vector<int>> compare_flags(std::span<const ReportGroup> groups);
// Rows are metrics, columns are groups; "mean (SD)" at 4 significant digits,
// best marked "*" and second best "+".
std::string compare_table(std::span<const ReportGroup> groups);
// Same content at full precision, comma separated.
std::string compare_csv(std::span<const ReportGroup> groups);

struct CliOptions {
  std::string config;
  std::string out = "out";
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

inline constexpr const char* kCommands[] = {"split", "synth", "train", "sweep", "eval", "curve", "eps-sweep"};
std::string usage();

// Executes one command and writes its artifacts under `options.out`. Returns
// 0 on success, 2 for a config or usage error, 1 for a runtime failure;
// diagnostics go to `err`.
int run(const std::string& command, const CliOptions& options, std::ostream& out, std::ostream& err);

}  // namespace regchoice

#endif  // REGCHOICE_HARNESS_HPP_
