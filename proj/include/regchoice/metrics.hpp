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

#ifndef REGCHOICE_METRICS_HPP_
#define REGCHOICE_METRICS_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "regchoice/choice_model.hpp"
#include "regchoice/dataset.hpp"

namespace regchoice {

// Sum over rows of log P_chosen, each term clamped at log(1e-300).
// Throws InputError unless every row of Y is one-hot.
double log_likelihood(const Matrix& P, const Matrix& Y);
// Share of rows whose argmax (lowest index on ties) is the observed choice.
double accuracy(const Matrix& P, const Matrix& Y);
// Unweighted mean of per-class F1; a class with no true or predicted rows
// scores 0.
double f1_macro(const Matrix& P, const Matrix& Y);

enum class DerivativeMethod { kExact, kFiniteDifference };

struct RegularityPair {
  int alternative = 0;
  int column = 0;
};

struct RegularityConfig {
  std::vector<RegularityPair> pairs;
  double epsilon_strong = -1e-4;
  double epsilon_weak = 1e-4;
  DerivativeMethod method = DerivativeMethod::kExact;
  // Central-difference step as a fraction of the column's training range.
  double fd_step = 1e-3;
  // Training-set max - min per column. Empty: use the evaluated data.
  Vector column_range;

  void validate() const;
};

// Direct-cost pairs of a travel dataset with the default thresholds.
RegularityConfig default_regularity(const Dataset& train);

struct RegularityResult {
  double strong = 0.0;
  double weak = 0.0;
};

// N x pairs matrix of d P_i / d x_d.
Matrix regularity_derivatives(const ChoiceModel& model, const Matrix& X, const RegularityConfig& config);
// Mean over rows and pairs of 1{derivative < epsilon}.
double regularity_at(const Matrix& derivatives, double epsilon);
RegularityResult behavioral_regularity(const ChoiceModel& model, const Dataset& data, const RegularityConfig& config);

struct MetricsReport {
  double log_likelihood = 0.0;
  double accuracy = 0.0;
  double f1_macro = 0.0;
  double strong_regularity = 0.0;
  double weak_regularity = 0.0;

  // Flat key=value lines at full precision.
  std::string to_record() const;
  static MetricsReport from_record(const std::string& text);
  bool operator==(const MetricsReport&) const = default;
};

inline constexpr const char* kMetricNames[] = {"log_likelihood", "accuracy", "f1_macro", "strong_regularity",
                                               "weak_regularity"};
double metric_value(const MetricsReport& report, int metric);

MetricsReport evaluate(const ChoiceModel& model, const Dataset& data, const RegularityConfig& config);

struct MetricsSummary {
  MetricsReport mean;
  MetricsReport sd;  // sample SD; 0 for a single replication
  std::size_t count = 0;
};

MetricsSummary summarize(std::span<const MetricsReport> reports);

// Representative row: continuous columns at their mean, indicators at their
// mode, counts at their (lower) median.
RowVector average_individual(const Dataset& train);

struct DemandCurve {
  Vector grid;
  Matrix curves;  // grid x replications
  Vector mean;

  // Delimited table: grid value, one column per replication, ensemble mean.
  std::string to_table(const std::string& grid_name) const;
};

// Sweeps column `column` of the average individual over an even grid spanning
// the training range and records P_alternative for each model.
DemandCurve demand_curve(std::span<const ChoiceModel> ensemble, const Dataset& train, int alternative, int column,
                         int grid_size);

struct EpsilonSweep {
  Vector epsilon;
  Vector regularity;
  std::string to_table() const;
};

// Regularity of one pair at each epsilon of an ascending grid.
EpsilonSweep epsilon_sweep(const ChoiceModel& model, const Dataset& data, const RegularityPair& pair,
                           std::span<const double> epsilon_grid, const RegularityConfig& base = {});

}  // namespace regchoice

#endif  // REGCHOICE_METRICS_HPP_
