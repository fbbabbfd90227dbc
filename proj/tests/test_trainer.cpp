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

#include <cmath>

#include "regchoice/errors.hpp"
#include "regchoice/trainer.hpp"

using namespace regchoice;

namespace {

Splits small_splits(Index rows, bool irregular, std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.rows = rows;
  spec.seed = seed;
  spec.irregular = irregular;
  return standardize(split(synthesize(spec).data, SplitPlan{})).first;
}

TrainConfig quick_config(const Dataset& train, int epochs) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.learning_rate = 1e-2;
  c.seed = 5;
  c.sign_spec = SignSpec::negative_on(train.num_alternatives(), train.attributes(), direct_cost_pairs(train));
  return c;
}

MetricsReport report(double ll, double strong) { return {ll, 0.5, 0.5, strong, 1.0}; }

SweepResult fake_sweep(const std::vector<double>& lambdas, const std::vector<MetricsReport>& validation) {
  SweepResult s;
  s.lambdas = lambdas;
  s.replications = 1;
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    SweepCell c;
    c.lambda = lambdas[l];
    c.metrics.validation = validation[l];
    s.cells.push_back(c);
  }
  return s;
}

}  // namespace

TEST_CASE("one SGD step") {
  std::vector<Matrix> p{Matrix::Constant(1, 1, 1.0)};
  OptimizerState st;
  optimizer_step(OptimizerKind::kSgd, p, {Matrix::Constant(1, 1, 2.0)}, st, 0.1);
  CHECK(p[0](0, 0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("first Adam step moves by the learning rate whatever the gradient scale") {
  for (double g : {1e-3, 1.0, 1e4}) {
    std::vector<Matrix> p{Matrix::Zero(2, 1)};
    OptimizerState st;
    Matrix grad(2, 1);
    grad << g, -g;
    optimizer_step(OptimizerKind::kAdam, p, {grad}, st, 1e-3);
    CHECK(p[0](0, 0) == doctest::Approx(-1e-3).epsilon(1e-4));
    CHECK(p[0](1, 0) == doctest::Approx(1e-3).epsilon(1e-4));
  }
}

TEST_CASE("AdamW without decay equals Adam bit for bit") {
  std::vector<Matrix> a{Matrix::Constant(2, 2, 0.3)}, b = a;
  OptimizerState sa, sb;
  for (int k = 0; k < 20; ++k) {
    const Matrix g = Matrix::Constant(2, 2, std::sin(k * 0.7));
    optimizer_step(OptimizerKind::kAdam, a, {g}, sa, 1e-2);
    optimizer_step(OptimizerKind::kAdamW, b, {g}, sb, 1e-2);
  }
  CHECK(a[0] == b[0]);

  OptimizerSettings decay;
  decay.weight_decay = 0.1;
  std::vector<Matrix> c{Matrix::Constant(1, 1, 1.0)};
  OptimizerState sc;
  optimizer_step(OptimizerKind::kAdamW, c, {Matrix::Zero(1, 1)}, sc, 0.5, decay);
  CHECK(c[0](0, 0) == doctest::Approx(1.0 - 0.5 * 0.1));
}

TEST_CASE("non-finite gradients abort the step") {
  std::vector<Matrix> p{Matrix::Zero(1, 1)};
  OptimizerState st;
  CHECK_THROWS_AS(optimizer_step(OptimizerKind::kAdam, p, {Matrix::Constant(1, 1, NAN)}, st, 1e-3), DivergenceError);
  CHECK_THROWS_AS(optimizer_step(OptimizerKind::kAdam, p, {Matrix::Zero(2, 1)}, st, 1e-3), StructuralError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.patience = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.penalty.lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training is deterministic and returns the best-validation parameters") {
  const Splits s = small_splits(600, false);
  const ModelSpec spec = travel_mlp_spec(s.train, 2, 16);
  TrainConfig c = quick_config(s.train, 30);
  c.patience = 3;
  c.record_step_objectives = true;
  const TrainResult a = train(spec, s, c);
  const TrainResult b = train(spec, s, c);
  CHECK(a.model.flat_parameters() == b.model.flat_parameters());
  REQUIRE(a.history.epochs.size() == b.history.epochs.size());
  for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
    CHECK(a.history.epochs[e].train_loss == b.history.epochs[e].train_loss);
    CHECK(a.history.epochs[e].validation_loss == b.history.epochs[e].validation_loss);
  }

  const auto& h = a.history;
  CHECK(h.epochs.front().epoch == 0);
  const auto& best = h.epochs[static_cast<std::size_t>(h.best_epoch)];
  for (const auto& e : h.epochs) CHECK(best.validation_loss <= e.validation_loss);
  CHECK(mean_cross_entropy(a.model, s.validation) == best.validation_loss);
  CHECK(h.steps.size() == static_cast<std::size_t>(10 * (h.epochs.size() - 1)));
  CHECK(h.to_table().rfind("epoch,train_loss,validation_loss,penalty,best\n", 0) == 0);
}

TEST_CASE("early stopping halts after the patience window") {
  const Splits s = small_splits(400, false);
  TrainConfig c = quick_config(s.train, 500);
  c.learning_rate = 0.05;
  c.patience = 2;
  const TrainResult r = train(travel_mlp_spec(s.train, 2, 16), s, c);
  const int last = r.history.epochs.back().epoch;
  CHECK(last < 500);
  CHECK(last - r.history.best_epoch == 2);
}

TEST_CASE("zero lambda trains exactly like the penalty-free configuration") {
  const Splits s = small_splits(500, true);
  const ModelSpec spec = travel_mlp_spec(s.train, 2, 8);
  TrainConfig plain = quick_config(s.train, 5);
  plain.sign_spec = SignSpec();
  const TrainResult base = train(spec, s, plain);
  for (auto kind : {PenaltyKind::kSum, PenaltyKind::kNorm}) {
    for (auto target : {GradientTarget::kProbability, GradientTarget::kLogLik}) {
      TrainConfig c = quick_config(s.train, 5);
      c.penalty = {kind, target, 0.0};
      const TrainResult r = train(spec, s, c);
      CHECK(r.model.flat_parameters() == base.model.flat_parameters());
      CHECK(r.history.epochs.back().train_loss == base.history.epochs.back().train_loss);
    }
  }
}

TEST_CASE("sum penalty with lambda 10 lowers the mean penalty of a depth-4 MLP") {
  const Splits s = small_splits(1000, true, 3);
  TrainConfig c = quick_config(s.train, 15);
  c.learning_rate = 1e-3;
  c.penalty = {PenaltyKind::kSum, GradientTarget::kProbability, 10.0};
  const TrainResult r = train(travel_mlp_spec(s.train), s, c);
  const double initial = r.history.epochs.front().penalty;
  const double final_penalty =
      mean_penalty(r.model, s.train.X(), s.train.Y(), PenaltyKind::kSum, GradientTarget::kProbability, c.sign_spec);
  CHECK(final_penalty < initial);
}

TEST_CASE("divergence names the epoch and lambda") {
  const Splits s = small_splits(300, false);
  TrainConfig c = quick_config(s.train, 5);
  c.optimizer = OptimizerKind::kSgd;
  c.learning_rate = 1e300;
  c.penalty = {PenaltyKind::kNorm, GradientTarget::kUtility, 0.5};
  try {
    train(travel_mlp_spec(s.train, 1, 4), s, c);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    const std::string what = e.what();
    CHECK(what.find("epoch 1") != std::string::npos);
    CHECK(what.find("lambda=0.5") != std::string::npos);
  }
}

TEST_CASE("sweep cells, seeds, and summaries") {
  const Splits s = small_splits(400, false);
  const ModelSpec spec = travel_mlp_spec(s.train, 1, 8);
  TrainConfig base = quick_config(s.train, 3);
  base.seed = 40;
  const std::vector<double> grid{0.0, 1.0};
  SweepOptions opt;
  opt.replications = 2;
  opt.regularity = default_regularity(s.train);
  opt.keep_models = true;
  const SweepResult one = lambda_sweep(spec, s, base, grid, opt);
  opt.workers = 3;
  const SweepResult three = lambda_sweep(spec, s, base, grid, opt);
  REQUIRE(one.cells.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(one.cells[k].metrics.test == three.cells[k].metrics.test);
    CHECK(one.cells[k].model->flat_parameters() == three.cells[k].model->flat_parameters());
  }
  CHECK(one.cell(1, 1).seed == 41);
  CHECK(one.cell(1, 1).lambda == 1.0);
  CHECK(one.to_table() == three.to_table());
  CHECK(one.cells_table() == three.cells_table());
  CHECK(one.models(0).size() == 2);

  opt.replications = 1;
  opt.workers = 1;
  const std::vector<double> single{0.0};
  const SweepResult collapsed = lambda_sweep(spec, s, base, single, opt);
  const MetricsSummary sum = collapsed.summary(0, SplitName::kTest);
  CHECK(sum.count == 1);
  CHECK(sum.sd == MetricsReport{});
  CHECK(sum.mean == collapsed.cell(0, 0).metrics.test);
}

TEST_CASE("default lambda grid") {
  const std::vector<double> grid(std::begin(kDefaultLambdaGrid), std::end(kDefaultLambdaGrid));
  CHECK(grid == std::vector<double>{1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0, 100.0});
}

TEST_CASE("optimal lambda selection") {
  SUBCASE("best feasible log-likelihood") {
    const auto s = fake_sweep({0.01, 0.1, 1.0}, {report(-100, 0.5), report(-110, 0.97), report(-120, 0.99)});
    const LambdaChoice c = select_optimal_lambda(s);
    CHECK(c.lambda == 0.1);
    CHECK(!c.fallback);
  }
  SUBCASE("no feasible lambda falls back and is flagged") {
    const auto s = fake_sweep({0.01, 0.1}, {report(-100, 0.5), report(-130, 0.8)});
    const LambdaChoice c = select_optimal_lambda(s);
    CHECK(c.lambda == 0.1);
    CHECK(c.fallback);
  }
  SUBCASE("ties go to the smaller lambda") {
    const auto s = fake_sweep({10.0, 1.0}, {report(-100, 0.99), report(-100, 0.99)});
    CHECK(select_optimal_lambda(s).lambda == 1.0);
  }
}
