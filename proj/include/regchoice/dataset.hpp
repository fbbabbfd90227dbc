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

#ifndef REGCHOICE_DATASET_HPP_
#define REGCHOICE_DATASET_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "regchoice/choice_model.hpp"

namespace regchoice {

enum class ColumnKind { kContinuous, kCount, kIndicator };
enum class ColumnRole { kCost, kTime, kSociodemographic, kChoice };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  ColumnRole role = ColumnRole::kSociodemographic;
  std::string alternative;  // COST / TIME only
};

// Column roles of a survey table plus the alternative labels, in the order
// that defines alternative indices.
struct SchemaSpec {
  std::vector<std::string> alternatives;
  std::vector<ColumnSpec> columns;

  // Exactly one CHOICE column; at most one COST and one TIME column per
  // alternative; names unique. Throws ConfigError.
  void validate() const;
  std::string to_json() const;
  static SchemaSpec from_json(const std::string& text);
  static SchemaSpec load(const std::string& path);
};

// Attribute metadata once the CHOICE column is split off.
struct FeatureInfo {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  ColumnRole role = ColumnRole::kSociodemographic;
  int alternative = -1;
};

// Immutable N x D attributes with one observed choice per row. `row_ids`
// records each row's index in the table it was loaded or generated from.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<FeatureInfo> features, std::vector<std::string> alternatives, Matrix X, std::vector<int> choices,
          std::vector<Index> row_ids = {});

  const Matrix& X() const { return X_; }
  const Matrix& Y() const { return Y_; }
  const std::vector<int>& choices() const { return choices_; }
  const std::vector<Index>& row_ids() const { return row_ids_; }
  const std::vector<FeatureInfo>& features() const { return features_; }
  const std::vector<std::string>& alternatives() const { return alternatives_; }
  Index rows() const { return X_.rows(); }
  int attributes() const { return static_cast<int>(X_.cols()); }
  int num_alternatives() const { return static_cast<int>(alternatives_.size()); }

  // Throws ConfigError when absent.
  int column_index(const std::string& name) const;
  int alternative_index(const std::string& label) const;

  Dataset subset(std::span<const Index> rows) const;
  Dataset with_attributes(Matrix X) const;

 private:
  std::vector<FeatureInfo> features_;
  std::vector<std::string> alternatives_;
  Matrix X_;
  Matrix Y_;
  std::vector<int> choices_;
  std::vector<Index> row_ids_;
};

std::vector<FeatureInfo> feature_layout(const SchemaSpec& schema);

// Comma-separated text with a header row. Every schema column must appear in
// the header; extra columns are ignored. Errors name the row and column.
Dataset load_table(const std::string& path, const SchemaSpec& schema);
Dataset parse_table(const std::string& text, const SchemaSpec& schema);
std::string format_table(const Dataset& data, const std::string& choice_column = "choice");

enum class SplitScheme { kRandom, kSorted };

struct SplitPlan {
  SplitScheme scheme = SplitScheme::kRandom;
  double train_fraction = 0.7;
  double validation_fraction = 0.1;
  double test_fraction = 0.2;
  std::string sort_column;  // kSorted only
  std::uint64_t seed = 0;
  // Random scheme only: the fractions apply to a pool of `pool_size` rows and
  // `external_test_size` further rows outside the pool form the test split.
  std::optional<Index> pool_size;
  Index external_test_size = 0;
};

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

Splits split_random(const Dataset& data, const SplitPlan& plan);
Splits split_sorted(const Dataset& data, const SplitPlan& plan);
Splits split(const Dataset& data, const SplitPlan& plan);

// JSON listing the source row indices of each split.
std::string split_manifest(const Splits& splits);

// Per-column affine map fitted on a training split.
struct ScalingRecord {
  Vector mean;
  Vector scale;             // 1 for unscaled columns
  std::vector<bool> scaled;  // false for indicators and zero-variance columns
  std::vector<std::string> warnings;

  Matrix apply(const Matrix& raw) const;
  Matrix invert(const Matrix& standardized) const;
  // d/dx_raw = d/dx_std / scale
  double derivative_to_raw(double derivative, Index column) const;
  std::string to_json() const;
  static ScalingRecord from_json(const std::string& text);
};

ScalingRecord fit_scaling(const Dataset& train);
std::pair<Splits, ScalingRecord> standardize(const Splits& splits);

// Structural helpers for the travel-mode layout, driven by column roles.
// (alternative, cost column of that alternative) for every alternative with a cost.
std::vector<std::pair<int, int>> direct_cost_pairs(const Dataset& data);
// Linear utility: every alternative gets its own TIME and COST terms; all but
// the first alternative also get a constant and the sociodemographic columns.
MnlSpec travel_mnl_spec(const Dataset& data);
// Taste pairs for each alternative's TIME and COST columns plus constants for
// all but the first alternative; cost pairs are constrained.
TasteNetSpec travel_tastenet_spec(const Dataset& data, ConstraintMode constraint, int hidden_width = 16);
MlpSpec travel_mlp_spec(const Dataset& data, int depth = 4, int width = 100);

// Teacher utilities in raw attribute units: a linear MNL plus an optional
// Gaussian bump on one attribute of one alternative,
//   V_i += amplitude * exp(-((x_d - center) / width)^2 / 2).
struct Teacher {
  Matrix coefficients;  // J x D
  RowVector constants;  // 1 x J
  double bump_amplitude = 0.0;
  double bump_center = 0.0;
  double bump_width = 1.0;
  int bump_alternative = 0;
  int bump_column = 0;

  Matrix utilities(const Matrix& X) const;
  Matrix probabilities(const Matrix& X) const;
  // N-vector of d P_i / d x_d at each row.
  Vector derivative(const Matrix& X, int alternative, int column) const;
};

// Three-mode synthetic survey (drive, transit, active) with ten attributes:
// per-mode times, drive and transit costs, age, household size, car count,
// and two indicators.
struct SyntheticSpec {
  Index rows = 10000;
  std::uint64_t seed = 0;
  bool irregular = false;
  double bump_amplitude = 2.0;
  double bump_center = 4.0;
  double bump_width = 1.2;
};

struct SyntheticData {
  SchemaSpec schema;
  Dataset data;
  Teacher teacher;
};

SchemaSpec travel_schema();
Teacher default_teacher(const SyntheticSpec& spec);
SyntheticData synthesize(const SyntheticSpec& spec);

}  // namespace regchoice

#endif  // REGCHOICE_DATASET_HPP_
