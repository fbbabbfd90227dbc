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
#include "regchoice/errors.hpp"
#include "regchoice/regularizer.hpp"
#include "regchoice/tape.hpp"

namespace ad = regchoice::ad;
using regchoice::ChoiceModel;
using regchoice::Matrix;
using regchoice::RowVector;
using regchoice::Vector;
using namespace regchoice::testing;

namespace {

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index k = 0;
  for (double e : v) m(k++, 0) = e;
  return m;
}

// Builds the mean cross-entropy of `model` on (X, Y) and returns it with the
// parameter gradients.
std::pair<double, std::vector<Matrix>> cross_entropy_grad(const ChoiceModel& model, const Matrix& X, const Matrix& Y) {
  ad::Tape tape;
  auto g = regchoice::build_graph(tape, model, X);
  ad::Var ce = (-1.0 / static_cast<double>(X.rows())) * ad::masked_sum(g.log_probabilities, Y);
  auto bundle = ad::grad(tape, ce, g.parameters);
  std::vector<Matrix> out;
  for (auto p : g.parameters) out.push_back(bundle.at(p));
  return {ce.value()(0, 0), out};
}

Vector flatten(const std::vector<Matrix>& ms) {
  Eigen::Index n = 0;
  for (const auto& m : ms) n += m.size();
  Vector v(n);
  Eigen::Index off = 0;
  for (const auto& m : ms) {
    v.segment(off, m.size()) = m.reshaped();
    off += m.size();
  }
  return v;
}

}  // namespace

TEST_CASE("single identity layer passes the input through") {
  ad::Tape tape;
  auto W = tape.parameter(Matrix::Identity(2, 2));
  auto b = tape.parameter(Matrix::Zero(2, 1));
  auto x = tape.input(col({3, -1}));
  auto out = ad::matmul(W, x) + b;
  CHECK(out.value() == col({3, -1}));
  auto rect = ad::relu(out);
  CHECK(rect.value() == col({3, 0}));
}

TEST_CASE("forward of a random depth-2 net matches a straight-line evaluation") {
  std::mt19937_64 rng(11);
  regchoice::MlpSpec spec{5, 3, 2, 7, regchoice::Activation::kRectifier};
  auto model = ChoiceModel::initialize(spec, 4);
  for (std::size_t k = 1; k < model.parameters().size(); k += 2) {
    model.mutable_parameters()[k] = random_matrix(1, model.parameters()[k].cols(), rng, 0.3);
  }
  const Matrix X = random_matrix(6, 5, rng);
  const Matrix V = regchoice::utilities(model, X);
  for (Eigen::Index n = 0; n < X.rows(); ++n) {
    const auto oracle = mlp_oracle(spec, model.parameters(), X.row(n));
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(V(n, i) == doctest::Approx(oracle.utilities[i]).epsilon(1e-12));
  }
}

TEST_CASE("replay with identical leaves reproduces values bit for bit") {
  std::mt19937_64 rng(3);
  auto model = random_mlp(rng);
  const Matrix X = random_matrix(4, model.input_dim(), rng);
  ad::Tape tape;
  auto g = regchoice::build_graph(tape, model, X);
  const Matrix before = g.log_probabilities.value();
  std::vector<std::pair<ad::Var, Matrix>> leaves{{g.input, X}};
  ad::forward(tape, leaves);
  CHECK(g.log_probabilities.value() == before);
}

TEST_CASE("shape mismatch names the node") {
  ad::Tape tape;
  auto a = tape.input(Matrix::Zero(2, 3));
  auto b = tape.input(Matrix::Zero(2, 3));
  try {
    ad::matmul(a, b);
    FAIL("expected a structural error");
  } catch (const regchoice::StructuralError& e) {
    CHECK(std::string(e.what()).find("node 2") != std::string::npos);
  }
  std::vector<std::pair<ad::Var, Matrix>> bad{{a, Matrix::Zero(3, 3)}};
  CHECK_THROWS_AS(tape.replay(bad), regchoice::StructuralError);
}

TEST_CASE("gradient of sum(x) is all ones and of a constant is zero") {
  ad::Tape tape;
  auto x = tape.input(col({1.5, -2, 7}));
  auto s = ad::sum(x);
  std::vector<ad::Var> t{x};
  CHECK(ad::grad(tape, s, t).at(x) == Matrix::Ones(3, 1));

  auto c = tape.constant(4.0);
  CHECK(ad::grad(tape, c, t).at(x) == Matrix::Zero(3, 1));
}

TEST_CASE("gradient targets must be leaves of the same tape") {
  ad::Tape tape, other;
  auto x = tape.input(col({1, 2}));
  auto y = other.input(col({1, 2}));
  auto s = ad::sum(x);
  std::vector<ad::Var> foreign{y};
  CHECK_THROWS_AS(ad::grad(tape, s, foreign), regchoice::StructuralError);
  std::vector<ad::Var> constant{tape.constant(1.0)};
  CHECK_THROWS_AS(ad::grad(tape, s, constant), regchoice::StructuralError);
  std::vector<ad::Var> not_scalar{x};
  CHECK_THROWS_AS(ad::grad(tape, x, not_scalar), regchoice::StructuralError);
}

TEST_CASE("gradients are linear in the scalar") {
  std::mt19937_64 rng(5);
  ad::Tape tape;
  auto w = tape.parameter(random_matrix(3, 2, rng));
  auto x = tape.input(random_matrix(4, 3, rng));
  auto F = ad::sum(ad::square(ad::matmul(x, w)));
  auto G = ad::sum(ad::exp(ad::matmul(x, w)));
  std::vector<ad::Var> t{w};
  const Matrix lhs = ad::grad(tape, 2.0 * F + (-3.0) * G, t).at(w);
  const Matrix rhs = 2.0 * ad::grad(tape, F, t).at(w) - 3.0 * ad::grad(tape, G, t).at(w);
  CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());
}

TEST_CASE("cross-entropy parameter gradients match central differences") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    ChoiceModel model = random_mlp(rng);
    const Matrix X = random_matrix(5, model.input_dim(), rng);
    const Matrix Y = random_one_hot(5, model.num_alternatives(), rng);
    const Vector analytic = flatten(cross_entropy_grad(model, X, Y).second);
    auto f = [&](const Vector& theta) {
      ChoiceModel m = model;
      m.set_flat_parameters(theta);
      return cross_entropy_grad(m, X, Y).first;
    };
    const Vector numeric = central_difference(f, model.flat_parameters(), 1e-4);
    CHECK(relative_error(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("gradients are deterministic") {
  std::mt19937_64 rng(8);
  ChoiceModel model = random_mlp(rng);
  const Matrix X = random_matrix(7, model.input_dim(), rng);
  const Matrix Y = random_one_hot(7, model.num_alternatives(), rng);
  CHECK(flatten(cross_entropy_grad(model, X, Y).second) == flatten(cross_entropy_grad(model, X, Y).second));
}

TEST_CASE("input Jacobian of a linear map is the weight matrix") {
  std::mt19937_64 rng(1);
  const Matrix W = random_matrix(3, 4, rng);
  ad::Tape tape;
  auto w = tape.parameter(W);
  auto x = tape.input(random_matrix(4, 1, rng));
  auto v = ad::matmul(w, x);
  CHECK(ad::input_jacobian(tape, v, x) == W);
  CHECK_THROWS_AS(ad::input_jacobian(tape, v, w), regchoice::StructuralError);
}

TEST_CASE("softmax Jacobian at equal utilities") {
  ad::Tape tape;
  auto v = tape.input(Matrix::Zero(1, 3));
  auto p = ad::softmax_rows(v);
  const Matrix expected = Matrix::Identity(3, 3) / 3.0 - Matrix::Ones(3, 3) / 9.0;
  CHECK((ad::input_jacobian(tape, p, v) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("probability input Jacobian matches the oracle and central differences") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    ChoiceModel model = random_mlp(rng);
    const auto& spec = std::get<regchoice::MlpSpec>(model.spec());
    const RowVector x = random_matrix(1, model.input_dim(), rng);
    const Matrix jac = regchoice::target_jacobian(model, x, nullptr, regchoice::GradientTarget::kProbability);

    const Matrix oracle = probability_jacobian_oracle(mlp_oracle(spec, model.parameters(), x));
    CHECK(relative_error(jac, oracle) < 1e-12);

    Matrix numeric(model.num_alternatives(), model.input_dim());
    for (int i = 0; i < model.num_alternatives(); ++i) {
      auto f = [&](const Vector& xv) {
        return regchoice::probabilities(model, xv.transpose())(0, i);
      };
      numeric.row(i) = central_difference(f, x.transpose(), 1e-4).transpose();
    }
    CHECK(relative_error(jac, numeric) < 1e-5);
  }
}

TEST_CASE("jvp along a column direction gives per-row derivatives") {
  std::mt19937_64 rng(19);
  ChoiceModel model = random_mlp(rng);
  const Matrix X = random_matrix(4, model.input_dim(), rng);
  const Matrix cols = regchoice::target_derivative_column(model, X, nullptr, regchoice::GradientTarget::kProbability, 0);
  for (Eigen::Index n = 0; n < X.rows(); ++n) {
    const Matrix jac = regchoice::target_jacobian(model, X.row(n), nullptr, regchoice::GradientTarget::kProbability);
    CHECK(relative_error(cols.row(n).transpose(), jac.col(0)) < 1e-12);
  }
}

TEST_CASE("probability Jacobian is unchanged by a common utility shift") {
  ad::Tape tape;
  std::mt19937_64 rng(4);
  const Matrix V = random_matrix(1, 4, rng);
  auto v1 = tape.input(V);
  auto v2 = tape.input((V.array() + 17.0).matrix());
  const Matrix j1 = ad::input_jacobian(tape, ad::softmax_rows(v1), v1);
  const Matrix j2 = ad::input_jacobian(tape, ad::softmax_rows(v2), v2);
  CHECK((j1 - j2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("norm penalty gradient vanishes on a zero-weight network") {
  regchoice::MlpSpec spec{3, 3, 2, 5, regchoice::Activation::kRectifier};
  ChoiceModel model = ChoiceModel::initialize(spec, 1);
  for (auto& p : model.mutable_parameters()) p.setZero();
  std::mt19937_64 rng(6);
  const Matrix X = random_matrix(5, 3, rng);
  ad::Tape tape;
  auto g = regchoice::build_graph(tape, model, X);
  regchoice::PenaltyConfig cfg{regchoice::PenaltyKind::kNorm, regchoice::GradientTarget::kProbability, 1.0};
  auto pen = regchoice::penalty_term(tape, g, nullptr, cfg, regchoice::SignSpec(3, 3));
  const auto bundle = ad::grad_through_jacobian(tape, pen, g.parameters);
  for (auto p : g.parameters) CHECK(bundle.at(p).norm() == 0.0);
}

TEST_CASE("norm penalty on utilities of a linear model has gradient 2W") {
  std::mt19937_64 rng(9);
  regchoice::MlpSpec spec{4, 3, 0, 1, regchoice::Activation::kIdentity};
  ChoiceModel model = ChoiceModel::initialize(spec, 2);
  model.mutable_parameters()[0] = random_matrix(3, 4, rng);
  const Matrix X = random_matrix(6, 4, rng);
  ad::Tape tape;
  auto g = regchoice::build_graph(tape, model, X);
  regchoice::PenaltyConfig cfg{regchoice::PenaltyKind::kNorm, regchoice::GradientTarget::kUtility, 1.0};
  auto pen = regchoice::penalty_term(tape, g, nullptr, cfg, regchoice::SignSpec(3, 4));
  const auto bundle = ad::grad_through_jacobian(tape, pen, g.parameters);
  const Matrix& W = model.parameters()[0];
  CHECK((bundle.at(g.parameters[0]) - 2.0 * W).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(bundle.at(g.parameters[1]).norm() == 0.0);
}

TEST_CASE("penalty parameter gradients match central differences of the penalty") {
  std::mt19937_64 rng(515);
  using regchoice::GradientTarget;
  using regchoice::PenaltyKind;
  int trial = 0;
  for (auto kind : {PenaltyKind::kSum, PenaltyKind::kNorm}) {
    for (auto target : {GradientTarget::kProbability, GradientTarget::kUtility, GradientTarget::kLogLik}) {
      for (int rep = 0; rep < 4; ++rep, ++trial) {
        ChoiceModel model = random_mlp(rng);
        const int J = model.num_alternatives();
        const int D = model.input_dim();
        const Matrix X = random_matrix(4, D, rng);
        const Matrix Y = random_one_hot(4, J, rng);
        regchoice::SignSpec spec(J, D);
        std::uniform_int_distribution<int> sign(0, 2);
        for (int i = 0; i < J; ++i) {
          for (int d = 0; d < D; ++d) spec.set(i, d, static_cast<regchoice::ExpectedSign>(sign(rng)));
        }
        ad::Tape tape;
        auto g = regchoice::build_graph(tape, model, X);
        auto pen = regchoice::penalty_term(tape, g, &Y, {kind, target, 1.0}, spec);
        const auto bundle = ad::grad_through_jacobian(tape, pen, g.parameters);
        std::vector<Matrix> parts;
        for (auto p : g.parameters) parts.push_back(bundle.at(p));
        auto f = [&](const Vector& theta) {
          ChoiceModel m = model;
          m.set_flat_parameters(theta);
          return regchoice::mean_penalty(m, X, Y, kind, target, spec);
        };
        const Vector numeric = central_difference(f, model.flat_parameters(), 1e-5);
        CAPTURE(trial);
        CHECK(relative_error(flatten(parts), numeric) < 1e-4);
      }
    }
  }
}
