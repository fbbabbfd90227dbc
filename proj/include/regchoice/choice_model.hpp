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

#ifndef REGCHOICE_CHOICE_MODEL_HPP_
#define REGCHOICE_CHOICE_MODEL_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "regchoice/tape.hpp"

namespace regchoice {

using ad::Index;
using ad::Matrix;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class Activation { kIdentity, kRectifier };

// Which function of the attributes a Jacobian or penalty is taken of:
// choice probabilities, utilities, or per-alternative negative log-likelihood
// terms l_i = -y_i log P_i.
enum class GradientTarget { kProbability, kUtility, kLogLik };

// Sign enforcement on TasteNet taste parameters.
enum class ConstraintMode { kNone, kRectifier, kExponential };

// Feedforward network: `depth` hidden layers of `width` units followed by a
// linear output layer of `output_dim` utilities.
struct MlpSpec {
  int input_dim = 0;
  int output_dim = 0;
  int depth = 4;
  int width = 100;
  Activation activation = Activation::kRectifier;
};

// Linear-in-parameters utilities. Alternative i uses the attribute columns in
// `attribute_columns[i]`, each with its own coefficient, plus an
// alternative-specific constant when `has_constant[i]`.
struct MnlSpec {
  int input_dim = 0;
  std::vector<std::vector<int>> attribute_columns;
  std::vector<bool> has_constant;

  int num_alternatives() const { return static_cast<int>(attribute_columns.size()); }
};

// One taste parameter of a TasteNet: the coefficient of attribute `column`
// in the utility of `alternative`. Column kConstantColumn denotes an
// alternative-specific constant.
struct TastePair {
  static constexpr int kConstantColumn = -1;
  int alternative = 0;
  int column = kConstantColumn;
  bool constrained = false;
};

// V_i = sum over pairs of alternative i of beta_k(z) * x_k, where beta(z) is
// produced by a one-hidden-layer rectifier network of the sociodemographic
// columns `taste_inputs`. Constrained pairs pass through the hard constraint.
struct TasteNetSpec {
  int input_dim = 0;
  int num_alternatives = 0;
  std::vector<int> taste_inputs;
  std::vector<TastePair> pairs;
  int hidden_width = 16;
  ConstraintMode constraint = ConstraintMode::kNone;
};

using ModelSpec = std::variant<MlpSpec, MnlSpec, TasteNetSpec>;

// Throws ConfigError on an inconsistent spec.
void validate(const ModelSpec& spec);
int input_dim(const ModelSpec& spec);
int num_alternatives(const ModelSpec& spec);
std::string model_family(const ModelSpec& spec);

// A model spec together with its parameter matrices.
class ChoiceModel {
 public:
  ChoiceModel() = default;
  ChoiceModel(ModelSpec spec, std::vector<Matrix> parameters, std::uint64_t seed);

  // Seeded initialization: layer weights uniform in +-sqrt(6/(fan_in+fan_out)),
  // biases zero; MNL coefficients start at zero.
  static ChoiceModel initialize(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<Matrix>& parameters() const { return parameters_; }
  std::vector<Matrix>& mutable_parameters() { return parameters_; }
  std::uint64_t seed() const { return seed_; }
  int input_dim() const { return regchoice::input_dim(spec_); }
  int num_alternatives() const { return regchoice::num_alternatives(spec_); }

  Vector flat_parameters() const;
  void set_flat_parameters(const Vector& flat);

 private:
  ModelSpec spec_;
  std::vector<Matrix> parameters_;
  std::uint64_t seed_ = 0;
};

// Tape nodes for one forward pass over a batch `X` (rows are individuals).
struct ModelGraph {
  std::vector<ad::Var> parameters;
  ad::Var input;
  ad::Var utilities;
  ad::Var probabilities;
  ad::Var log_probabilities;
  ad::Var tastes;  // TasteNet only: N x pairs constrained taste parameters
};

ModelGraph build_graph(ad::Tape& tape, const ChoiceModel& model, const Matrix& X);

// Node whose input-derivatives the target asks for. kLogLik needs the one-hot
// choices `Y` and yields -Y .* log P.
ad::Var target_node(ad::Tape& tape, const ModelGraph& graph, GradientTarget target, const Matrix* Y);

// N x J utilities and probabilities for the rows of X. Throws InputError on
// non-finite input.
Matrix utilities(const ChoiceModel& model, const Matrix& X);
Matrix probabilities(const ChoiceModel& model, const Matrix& X);

// J x D Jacobian of the target for one individual. kLogLik needs the observed
// choice `y`; ConfigError without it.
Matrix target_jacobian(const ChoiceModel& model, const RowVector& x, const RowVector* y, GradientTarget target);

// N x J matrix of d target_i / d x_column for every row of X.
Matrix target_derivative_column(const ChoiceModel& model, const Matrix& X, const Matrix* Y, GradientTarget target,
                                Index column);

double apply_hard_constraint(double raw_taste, ConstraintMode mode);

// Per-row taste parameters (N x pairs) after constraints.
Matrix taste_parameters(const ChoiceModel& model, const Matrix& X);

// Self-describing text container: spec, flat parameter vector, seed.
// Round trip is bit-exact.
std::string serialize_model(const ChoiceModel& model);
ChoiceModel deserialize_model(const std::string& text);

}  // namespace regchoice

#endif  // REGCHOICE_CHOICE_MODEL_HPP_
