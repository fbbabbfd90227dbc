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

#ifndef REGCHOICE_REGULARIZER_HPP_
#define REGCHOICE_REGULARIZER_HPP_

#include <utility>
#include <vector>

#include "regchoice/choice_model.hpp"

namespace regchoice {

enum class ExpectedSign { kNegative, kPositive, kFree };

// J x D grid of expected signs for d target_i / d x_d.
class SignSpec {
 public:
  SignSpec() = default;
  SignSpec(int alternatives, int attributes, ExpectedSign fill = ExpectedSign::kFree);

  // NEG on the listed (alternative, column) entries, FREE elsewhere.
  static SignSpec negative_on(int alternatives, int attributes, const std::vector<std::pair<int, int>>& entries);

  int alternatives() const { return alternatives_; }
  int attributes() const { return attributes_; }
  ExpectedSign at(int i, int d) const;
  void set(int i, int d, ExpectedSign sign);

  // +1 for NEG, -1 for POS, 0 for FREE.
  Matrix orientation() const;
  // Columns with at least one non-FREE entry.
  std::vector<Index> constrained_columns() const;
  // Effective spec for a gradient target: l_i = -y_i log P_i decreases in
  // P_i, so kLogLik swaps NEG and POS.
  SignSpec for_target(GradientTarget target) const;

  bool operator==(const SignSpec&) const = default;

 private:
  int alternatives_ = 0;
  int attributes_ = 0;
  std::vector<ExpectedSign> grid_;
};

enum class PenaltyKind { kSum, kNorm };

struct PenaltyConfig {
  PenaltyKind kind = PenaltyKind::kSum;
  GradientTarget target = GradientTarget::kProbability;
  double lambda = 0.0;
};

void validate(const PenaltyConfig& config);

// Psi: 1 where the entry violates its expected sign (NEG violated at >= 0,
// POS at <= 0), 0 elsewhere and on FREE entries.
template <typename Derived>
Matrix build_mask(const Eigen::MatrixBase<Derived>& jacobian, const SignSpec& spec) {
  Matrix mask = Matrix::Zero(jacobian.rows(), jacobian.cols());
  for (Index i = 0; i < jacobian.rows(); ++i) {
    for (Index d = 0; d < jacobian.cols(); ++d) {
      switch (spec.at(static_cast<int>(i), static_cast<int>(d))) {
        case ExpectedSign::kNegative:
          mask(i, d) = jacobian(i, d) >= 0.0 ? 1.0 : 0.0;
          break;
        case ExpectedSign::kPositive:
          mask(i, d) = jacobian(i, d) <= 0.0 ? 1.0 : 0.0;
          break;
        case ExpectedSign::kFree:
          break;
      }
    }
  }
  return mask;
}

// sum_id Psi_id * s_id * J_id with s = orientation(); nonnegative.
double sum_penalty(const Matrix& jacobian, const SignSpec& spec);
// ||J||_F^2
double norm_penalty(const Matrix& jacobian);

// lambda * (mean over batch rows of the per-row penalty) as a tape scalar.
// Input-Jacobian columns are emitted as tangent nodes so the result is
// differentiable in the parameters; masks enter as constants recomputed from
// the current Jacobian values. lambda == 0 yields a constant zero node.
ad::Var penalty_term(ad::Tape& tape, const ModelGraph& graph, const Matrix* Y, const PenaltyConfig& config,
                     const SignSpec& spec);

// Mean per-row penalty (lambda not applied) over all rows of X.
double mean_penalty(const ChoiceModel& model, const Matrix& X, const Matrix& Y, PenaltyKind kind,
                    GradientTarget target, const SignSpec& spec);

}  // namespace regchoice

#endif  // REGCHOICE_REGULARIZER_HPP_
