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

#include "regchoice/regularizer.hpp"

#include <algorithm>
#include <cmath>

#include "regchoice/errors.hpp"

namespace regchoice {

SignSpec::SignSpec(int alternatives, int attributes, ExpectedSign fill)
    : alternatives_(alternatives),
      attributes_(attributes),
      grid_(static_cast<std::size_t>(alternatives) * static_cast<std::size_t>(attributes), fill) {
  if (alternatives < 0 || attributes < 0) throw ConfigError("sign spec dimensions must be nonnegative");
}

SignSpec SignSpec::negative_on(int alternatives, int attributes, const std::vector<std::pair<int, int>>& entries) {
  SignSpec spec(alternatives, attributes);
  for (const auto& [i, d] : entries) spec.set(i, d, ExpectedSign::kNegative);
  return spec;
}

ExpectedSign SignSpec::at(int i, int d) const {
  if (i < 0 || i >= alternatives_ || d < 0 || d >= attributes_) {
    throw ConfigError("sign spec entry (" + std::to_string(i) + ", " + std::to_string(d) + ") out of range");
  }
  return grid_[static_cast<std::size_t>(i) * static_cast<std::size_t>(attributes_) + static_cast<std::size_t>(d)];
}

void SignSpec::set(int i, int d, ExpectedSign sign) {
  if (i < 0 || i >= alternatives_ || d < 0 || d >= attributes_) {
    throw ConfigError("sign spec entry (" + std::to_string(i) + ", " + std::to_string(d) + ") out of range");
  }
  grid_[static_cast<std::size_t>(i) * static_cast<std::size_t>(attributes_) + static_cast<std::size_t>(d)] = sign;
}

Matrix SignSpec::orientation() const {
  Matrix s = Matrix::Zero(alternatives_, attributes_);
  for (int i = 0; i < alternatives_; ++i) {
    for (int d = 0; d < attributes_; ++d) {
      const ExpectedSign e = at(i, d);
      s(i, d) = e == ExpectedSign::kNegative ? 1.0 : (e == ExpectedSign::kPositive ? -1.0 : 0.0);
    }
  }
  return s;
}

std::vector<Index> SignSpec::constrained_columns() const {
  std::vector<Index> cols;
  for (int d = 0; d < attributes_; ++d) {
    for (int i = 0; i < alternatives_; ++i) {
      if (at(i, d) != ExpectedSign::kFree) {
        cols.push_back(d);
        break;
      }
    }
  }
  return cols;
}

SignSpec SignSpec::for_target(GradientTarget target) const {
  if (target != GradientTarget::kLogLik) return *this;
  SignSpec flipped = *this;
  for (auto& e : flipped.grid_) {
    if (e == ExpectedSign::kNegative) {
      e = ExpectedSign::kPositive;
    } else if (e == ExpectedSign::kPositive) {
      e = ExpectedSign::kNegative;
    }
  }
  return flipped;
}

void validate(const PenaltyConfig& config) {
  if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda)) {
    throw ConfigError("penalty lambda must be a finite nonnegative number");
  }
}

double sum_penalty(const Matrix& jacobian, const SignSpec& spec) {
  if (jacobian.rows() != spec.alternatives() || jacobian.cols() != spec.attributes()) {
    throw InputError("jacobian shape does not match the sign spec");
  }
  return build_mask(jacobian, spec).cwiseProduct(spec.orientation()).cwiseProduct(jacobian).sum();
}

double norm_penalty(const Matrix& jacobian) { return jacobian.squaredNorm(); }

ad::Var penalty_term(ad::Tape& tape, const ModelGraph& graph, const Matrix* Y, const PenaltyConfig& config,
                     const SignSpec& spec) {
  validate(config);
  if (config.lambda == 0.0) return tape.constant(0.0);

  // Node values move as the tape grows, so keep shapes rather than references.
  const Index B = graph.input.rows();
  const Index D = graph.input.cols();
  const Index J = graph.utilities.cols();
  if (spec.alternatives() != J || spec.attributes() != D) {
    throw ConfigError("sign spec is " + std::to_string(spec.alternatives()) + "x" + std::to_string(spec.attributes()) +
                      ", model is " + std::to_string(J) + "x" + std::to_string(D));
  }
  ad::Var target = target_node(tape, graph, config.target, Y);
  const SignSpec effective = spec.for_target(config.target);
  const Matrix orient = effective.orientation();

  std::vector<Index> columns;
  if (config.kind == PenaltyKind::kSum) {
    columns = effective.constrained_columns();
  } else {
    columns.resize(static_cast<std::size_t>(D));
    for (Index d = 0; d < D; ++d) columns[static_cast<std::size_t>(d)] = d;
  }

  ad::Var total;
  for (Index d : columns) {
    Matrix direction = Matrix::Zero(B, D);
    direction.col(d).setOnes();
    ad::Var tangent = ad::jvp(tape, target, graph.input, direction);
    ad::Var term;
    if (config.kind == PenaltyKind::kSum) {
      const Matrix& T = tangent.value();
      Matrix signed_mask = Matrix::Zero(B, J);
      for (Index i = 0; i < J; ++i) {
        const double s = orient(i, d);
        if (s == 0.0) continue;
        for (Index n = 0; n < B; ++n) {
          if (s * T(n, i) >= 0.0) signed_mask(n, i) = s;
        }
      }
      if (config.target == GradientTarget::kLogLik) signed_mask = signed_mask.cwiseProduct(*Y);
      term = ad::masked_sum(tangent, signed_mask);
    } else {
      term = ad::squared_frobenius(tangent);
    }
    total = total.valid() ? total + term : term;
  }
  if (!total.valid()) return tape.constant(0.0);
  return (config.lambda / static_cast<double>(B)) * total;
}

double mean_penalty(const ChoiceModel& model, const Matrix& X, const Matrix& Y, PenaltyKind kind,
                    GradientTarget target, const SignSpec& spec) {
  constexpr Index kChunk = 1024;
  const PenaltyConfig unit{kind, target, 1.0};
  double weighted = 0.0;
  for (Index start = 0; start < X.rows(); start += kChunk) {
    const Index n = std::min(kChunk, X.rows() - start);
    ad::Tape tape;
    ModelGraph g = build_graph(tape, model, X.middleRows(start, n));
    Matrix y = Y.middleRows(start, n);
    weighted += penalty_term(tape, g, &y, unit, spec).value()(0, 0) * static_cast<double>(n);
  }
  return X.rows() > 0 ? weighted / static_cast<double>(X.rows()) : 0.0;
}

}  // namespace regchoice
