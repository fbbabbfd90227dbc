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

#ifndef REGCHOICE_TRAINER_HPP_
#define REGCHOICE_TRAINER_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regchoice/choice_model.hpp"
#include "regchoice/dataset.hpp"
#include "regchoice/metrics.hpp"
#include "regchoice/regularizer.hpp"

namespace regchoice {

enum class OptimizerKind { kSgd, kAdam, kAdamW };

struct OptimizerSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // AdamW only
};

struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long step = 0;
};

// One in-place update. SGD: p -= lr * g. Adam/AdamW: bias-corrected moments;
// AdamW additionally applies decoupled decay lr * weight_decay * p.
// Throws DivergenceError on a non-finite gradient.
void optimizer_step(OptimizerKind kind, std::vector<Matrix>& params, const std::vector<Matrix>& grads,
                    OptimizerState& state, double learning_rate, const OptimizerSettings& settings = {});

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  int batches_per_epoch = 10;
  int max_epochs = 500;
  int patience = 20;
  std::uint64_t seed = 0;
  PenaltyConfig penalty;
  SignSpec sign_spec;
  OptimizerSettings optimizer_settings;
  // Re-evaluate each batch objective after its update (one extra forward
  // pass per step).
  bool record_step_objectives = false;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;       // mean cross-entropy over the training split
  double validation_loss = 0.0;  // mean cross-entropy over the validation split
  double penalty = 0.0;          // mean per-row penalty, lambda not applied
};

struct StepRecord {
  int epoch = 0;
  double before = 0.0;
  double after = 0.0;
};

// Epoch 0 is the initialized model before any update.
struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
  int best_epoch = 0;

  std::string to_table() const;
};

struct TrainResult {
  ChoiceModel model;  // parameters from `history.best_epoch`
  TrainHistory history;
};

double mean_cross_entropy(const ChoiceModel& model, const Dataset& data);

TrainResult train(const ModelSpec& spec, const Splits& splits, const TrainConfig& config);

struct SplitMetrics {
  MetricsReport train;
  MetricsReport validation;
  MetricsReport test;
};

struct SweepCell {
  double lambda = 0.0;
  int replication = 0;
  std::uint64_t seed = 0;
  SplitMetrics metrics;
  int best_epoch = 0;
  int epochs_run = 0;
  std::optional<ChoiceModel> model;
};

enum class SplitName { kTrain, kValidation, kTest };

struct SweepResult {
  std::vector<double> lambdas;
  int replications = 0;
  std::vector<SweepCell> cells;  // lambda-major, replication-minor

  const SweepCell& cell(std::size_t lambda_index, int replication) const;
  MetricsSummary summary(std::size_t lambda_index, SplitName split) const;
  std::vector<ChoiceModel> models(std::size_t lambda_index) const;
  // One row per (lambda, split) with mean and SD of each metric.
  std::string to_table() const;
  // One row per cell.
  std::string cells_table() const;
};

struct SweepOptions {
  int replications = 10;
  int workers = 1;
  RegularityConfig regularity;
  bool keep_models = false;
};

// One training run per (lambda, replication); replication r uses seed
// base.seed + r. Cells are independent and may run on `workers` threads.
SweepResult lambda_sweep(const ModelSpec& spec, const Splits& splits, const TrainConfig& base,
                         std::span<const double> lambda_grid, const SweepOptions& options);

inline constexpr double kDefaultLambdaGrid[] = {1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0, 100.0};

struct LambdaChoice {
  double lambda = 0.0;
  bool fallback = false;  // no lambda met the regularity floor
};

// Maximizes mean validation log-likelihood among lambdas whose mean
// validation strong regularity reaches `regularity_floor`; ties go to the
// smaller lambda. With no feasible lambda, maximizes strong regularity, then
// log-likelihood.
LambdaChoice select_optimal_lambda(const SweepResult& sweep, double regularity_floor = 0.95);

}  // namespace regchoice

#endif  // REGCHOICE_TRAINER_HPP_
