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

#include <random>

#include "oracles.hpp"
#include "regchoice/dataset.hpp"
#include "regchoice/errors.hpp"
#include "regchoice/regularizer.hpp"

using namespace regchoice;
using namespace regchoice::testing;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

SignSpec diagonal(int n, ExpectedSign s) {
  SignSpec spec(n, n);
  for (int i = 0; i < n; ++i) spec.set(i, i, s);
  return spec;
}

double penalty_value(const ChoiceModel& m, const Matrix& X, const Matrix* Y, const PenaltyConfig& cfg,
                     const SignSpec& spec) {
  ad::Tape tape;
  auto g = build_graph(tape, m, X);
  return penalty_term(tape, g, Y, cfg, spec).value()(0, 0);
}

}  // namespace

TEST_CASE("mask examples") {
  CHECK(build_mask(mat({{-1, -2}, {-0.5, -3}}), SignSpec(2, 2, ExpectedSign::kNegative)).norm() == 0.0);
  CHECK(build_mask(mat({{1, 5}, {-7, -3}}), diagonal(2, ExpectedSign::kNegative)) == mat({{1, 0}, {0, 0}}));
  CHECK(build_mask(mat({{1, -5}, {7, 0}}), SignSpec(2, 2)).norm() == 0.0);
  // Boundary values violate.
  CHECK(build_mask(mat({{0.0}}), SignSpec(1, 1, ExpectedSign::kNegative))(0, 0) == 1.0);
  CHECK(build_mask(mat({{0.0}}), SignSpec(1, 1, ExpectedSign::kPositive))(0, 0) == 1.0);
}

TEST_CASE("sum penalty examples") {
  const SignSpec neg = diagonal(2, ExpectedSign::kNegative);
  CHECK(sum_penalty(mat({{-0.2, 9}, {9, -0.1}}), neg) == 0.0);
  CHECK(sum_penalty(mat({{0.3, 9}, {9, -0.1}}), neg) == doctest::Approx(0.3).epsilon(1e-15));
  const SignSpec pos(1, 1, ExpectedSign::kPositive);
  CHECK(sum_penalty(mat({{0.4}}), pos) == 0.0);
  CHECK(sum_penalty(mat({{-0.4}}), pos) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("norm penalty examples") {
  CHECK(norm_penalty(Matrix::Zero(3, 2)) == 0.0);
  const Matrix j = mat({{1, -1}, {2, -3}});
  CHECK(norm_penalty(j) == 15.0);
  CHECK(norm_penalty(2.5 * j) == doctest::Approx(6.25 * 15.0).epsilon(1e-15));
}

TEST_CASE("penalties are nonnegative, and the sum penalty vanishes exactly without violations") {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> sign(0, 2);
  for (int t = 0; t < 200; ++t) {
    const Matrix j = random_matrix(3, 4, rng);
    SignSpec spec(3, 4);
    for (int i = 0; i < 3; ++i) {
      for (int d = 0; d < 4; ++d) spec.set(i, d, static_cast<ExpectedSign>(sign(rng)));
    }
    const double s = sum_penalty(j, spec);
    CHECK(s >= 0.0);
    CHECK(norm_penalty(j) >= 0.0);
    CHECK((s == 0.0) == (build_mask(j, spec).norm() == 0.0));
  }
}

TEST_CASE("sum penalty is continuous at the sign boundary") {
  const SignSpec neg(1, 1, ExpectedSign::kNegative);
  for (double v : {1e-1, 1e-4, 1e-8, 1e-12}) CHECK(sum_penalty(mat({{v}}), neg) == v);
  CHECK(sum_penalty(mat({{-1e-12}}), neg) == 0.0);
}

TEST_CASE("log-likelihood target flips the expected sign") {
  SignSpec spec(2, 2);
  spec.set(0, 0, ExpectedSign::kNegative);
  spec.set(1, 1, ExpectedSign::kPositive);
  const SignSpec flipped = spec.for_target(GradientTarget::kLogLik);
  CHECK(flipped.at(0, 0) == ExpectedSign::kPositive);
  CHECK(flipped.at(1, 1) == ExpectedSign::kNegative);
  CHECK(flipped.at(0, 1) == ExpectedSign::kFree);
  CHECK(spec.for_target(GradientTarget::kProbability) == spec);
  CHECK(spec.constrained_columns() == std::vector<Index>{0, 1});
}

TEST_CASE("zero lambda gives an exact zero node") {
  std::mt19937_64 rng(1);
  ChoiceModel m = random_mlp(rng);
  const Matrix X = random_matrix(5, m.input_dim(), rng);
  ad::Tape tape;
  auto g = build_graph(tape, m, X);
  auto pen = penalty_term(tape, g, nullptr, {PenaltyKind::kNorm, GradientTarget::kProbability, 0.0},
                          SignSpec(m.num_alternatives(), m.input_dim(), ExpectedSign::kNegative));
  CHECK(pen.value()(0, 0) == 0.0);
  CHECK(tape.is_leaf(pen));
  CHECK(tape.leaf_kind(pen) == ad::LeafKind::kConstant);
}

TEST_CASE("penalty is lambda times the batch mean of per-row penalties") {
  std::mt19937_64 rng(2);
  ChoiceModel m = random_mlp(rng);
  const int J = m.num_alternatives();
  const int D = m.input_dim();
  const Matrix X = random_matrix(6, D, rng);
  const Matrix Y = random_one_hot(6, J, rng);
  SignSpec spec(J, D, ExpectedSign::kNegative);
  for (auto target : {GradientTarget::kProbability, GradientTarget::kUtility, GradientTarget::kLogLik}) {
    const SignSpec eff = spec.for_target(target);
    double sum_rows = 0.0;
    double norm_rows = 0.0;
    for (Index n = 0; n < X.rows(); ++n) {
      const RowVector y = Y.row(n);
      const Matrix jac = target_jacobian(m, X.row(n), &y, target);
      sum_rows += sum_penalty(jac, eff);
      norm_rows += norm_penalty(jac);

      // A batch of one reduces to the single-row penalty.
      const Matrix Xn = X.row(n);
      const Matrix Yn = Y.row(n);
      CHECK(penalty_value(m, Xn, &Yn, {PenaltyKind::kSum, target, 1.0}, spec) ==
            doctest::Approx(sum_penalty(jac, eff)).epsilon(1e-12));
    }
    CHECK(penalty_value(m, X, &Y, {PenaltyKind::kSum, target, 2.5}, spec) ==
          doctest::Approx(2.5 * sum_rows / 6.0).epsilon(1e-12));
    CHECK(penalty_value(m, X, &Y, {PenaltyKind::kNorm, target, 2.5}, spec) ==
          doctest::Approx(2.5 * norm_rows / 6.0).epsilon(1e-12));
    CHECK(mean_penalty(m, X, Y, PenaltyKind::kNorm, target, spec) == doctest::Approx(norm_rows / 6.0).epsilon(1e-12));
  }
}

TEST_CASE("unchosen alternatives never contribute to the log-likelihood penalty") {
  std::mt19937_64 rng(3);
  ChoiceModel m = random_mlp(rng);
  const int J = m.num_alternatives();
  const Matrix X = random_matrix(4, m.input_dim(), rng);
  Matrix Y = Matrix::Zero(4, J);
  Y.col(0).setOnes();
  // Constraining only alternative 1 leaves nothing for a batch that always chose 0.
  SignSpec spec(J, m.input_dim());
  for (int d = 0; d < m.input_dim(); ++d) spec.set(1, d, ExpectedSign::kNegative);
  CHECK(penalty_value(m, X, &Y, {PenaltyKind::kSum, GradientTarget::kLogLik, 1.0}, spec) == 0.0);
}

TEST_CASE("norm penalty on utilities of a linear model equals the squared weight norm") {
  std::mt19937_64 rng(4);
  ChoiceModel m = ChoiceModel::initialize(MlpSpec{5, 3, 0, 1, Activation::kIdentity}, 0);
  m.mutable_parameters()[0] = random_matrix(3, 5, rng);
  m.mutable_parameters()[1] = random_matrix(1, 3, rng);
  const Matrix X = random_matrix(9, 5, rng);
  const double pen = penalty_value(m, X, nullptr, {PenaltyKind::kNorm, GradientTarget::kUtility, 1.0}, SignSpec(3, 5));
  CHECK(std::abs(pen - m.parameters()[0].squaredNorm()) <= 1e-12);
}

TEST_CASE("exponentially constrained TasteNet incurs no utility sum penalty") {
  SyntheticSpec s;
  s.rows = 300;
  s.seed = 5;
  const Dataset d = synthesize(s).data;
  ChoiceModel m = ChoiceModel::initialize(travel_tastenet_spec(d, ConstraintMode::kExponential), 1);
  std::mt19937_64 rng(6);
  for (auto& p : m.mutable_parameters()) p = random_matrix(p.rows(), p.cols(), rng);
  const SignSpec spec = SignSpec::negative_on(3, 10, direct_cost_pairs(d));
  CHECK(penalty_value(m, d.X(), nullptr, {PenaltyKind::kSum, GradientTarget::kUtility, 1.0}, spec) == 0.0);
}

TEST_CASE("penalty config validation") {
  CHECK_THROWS_AS(validate(PenaltyConfig{PenaltyKind::kSum, GradientTarget::kUtility, -1.0}), ConfigError);
  CHECK_NOTHROW(validate(PenaltyConfig{PenaltyKind::kSum, GradientTarget::kUtility, 0.0}));
}
