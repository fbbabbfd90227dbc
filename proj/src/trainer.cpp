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

#include "regchoice/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "regchoice/errors.hpp"

namespace regchoice {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

bool all_finite(const std::vector<Matrix>& ms) {
  return std::all_of(ms.begin(), ms.end(), [](const Matrix& m) { return m.allFinite(); });
}

struct BatchObjective {
  double objective = 0.0;
  double penalty = 0.0;  // lambda not applied
  std::vector<Matrix> grads;
};

BatchObjective batch_objective(const ChoiceModel& model, const Matrix& X, const Matrix& Y, const TrainConfig& config,
                               bool with_gradient) {
  ad::Tape tape;
  ModelGraph g = build_graph(tape, model, X);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  ad::Var ce = (-inv_n) * ad::masked_sum(g.log_probabilities, Y);
  ad::Var pen = penalty_term(tape, g, &Y, config.penalty, config.sign_spec);
  ad::Var obj = ce + pen;
  BatchObjective out;
  out.objective = obj.value()(0, 0);
  out.penalty = config.penalty.lambda > 0.0 ? pen.value()(0, 0) / config.penalty.lambda : 0.0;
  if (with_gradient && std::isfinite(out.objective)) {
    const auto bundle = ad::grad(tape, obj, g.parameters);
    for (const auto& p : g.parameters) out.grads.push_back(bundle.at(p));
  }
  return out;
}

std::string lambda_str(double lambda) { return fmt(lambda); }

}  // namespace

void optimizer_step(OptimizerKind kind, std::vector<Matrix>& params, const std::vector<Matrix>& grads,
                    OptimizerState& state, double learning_rate, const OptimizerSettings& s) {
  if (params.size() != grads.size()) throw StructuralError("optimizer: gradient count does not match parameters");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].rows() != grads[k].rows() || params[k].cols() != grads[k].cols()) {
      throw StructuralError("optimizer: gradient " + std::to_string(k) + " has the wrong shape");
    }
  }
  if (!all_finite(grads)) throw DivergenceError("optimizer: non-finite gradient");

  if (kind == OptimizerKind::kSgd) {
    for (std::size_t k = 0; k < params.size(); ++k) params[k] -= learning_rate * grads[k];
    ++state.step;
    return;
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
      state.second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw StructuralError("optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    const auto& g = grads[k];
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
    Matrix update = (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
    if (kind == OptimizerKind::kAdamW) update += s.weight_decay * params[k];
    params[k] -= learning_rate * update;
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive", "train.learning_rate");
  if (patience < 1) throw ConfigError("patience must be at least 1", "train.patience");
  if (batches_per_epoch < 1) throw ConfigError("batches_per_epoch must be at least 1", "train.batches_per_epoch");
  if (max_epochs < 0) throw ConfigError("max_epochs must be nonnegative", "train.max_epochs");
  if (optimizer_settings.weight_decay < 0.0) throw ConfigError("weight decay must be nonnegative", "train.weight_decay");
  regchoice::validate(penalty);
}

std::string TrainHistory::to_table() const {
  std::ostringstream os;
  os << "epoch,train_loss,validation_loss,penalty,best\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.validation_loss) << ',' << fmt(e.penalty) << ','
       << (e.epoch == best_epoch ? 1 : 0) << '\n';
  }
  return os.str();
}

double mean_cross_entropy(const ChoiceModel& model, const Dataset& data) {
  if (data.rows() == 0) return 0.0;
  return -log_likelihood(probabilities(model, data.X()), data.Y()) / static_cast<double>(data.rows());
}

TrainResult train(const ModelSpec& spec, const Splits& splits, const TrainConfig& config) {
  config.validate();
  const Dataset& tr = splits.train;
  if (tr.rows() == 0) throw ConfigError("training split is empty");
  if (splits.validation.rows() == 0) throw ConfigError("validation split is empty; early stopping needs it");
  if (config.penalty.lambda > 0.0 &&
      (config.sign_spec.alternatives() != tr.num_alternatives() || config.sign_spec.attributes() != tr.attributes())) {
    throw ConfigError("sign spec does not match the data layout", "train.sign_spec");
  }

  ChoiceModel model = ChoiceModel::initialize(spec, config.seed);
  if (model.input_dim() != tr.attributes() || model.num_alternatives() != tr.num_alternatives()) {
    throw ConfigError("model dimensions do not match the data");
  }
  std::mt19937_64 shuffle_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  OptimizerState state;

  auto diverged = [&](int epoch, const char* what) {
    return DivergenceError(std::string("training diverged at epoch ") + std::to_string(epoch) +
                           " (lambda=" + lambda_str(config.penalty.lambda) + "): " + what);
  };

  TrainResult result;
  TrainHistory& h = result.history;
  EpochRecord e0;
  e0.epoch = 0;
  e0.train_loss = mean_cross_entropy(model, tr);
  e0.validation_loss = mean_cross_entropy(model, splits.validation);
  e0.penalty = config.penalty.lambda > 0.0
                   ? mean_penalty(model, tr.X(), tr.Y(), config.penalty.kind, config.penalty.target, config.sign_spec)
                   : 0.0;
  h.epochs.push_back(e0);
  h.best_epoch = 0;
  double best_val = e0.validation_loss;
  std::vector<Matrix> best_params = model.parameters();
  int since_best = 0;

  const Index N = tr.rows();
  const Index nb = std::min<Index>(config.batches_per_epoch, N);
  std::vector<Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Index{0});

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double penalty_sum = 0.0;
    Index start = 0;
    for (Index b = 0; b < nb; ++b) {
      const Index size = N / nb + (b < N % nb ? 1 : 0);
      Matrix Xb(size, tr.attributes());
      Matrix Yb(size, tr.num_alternatives());
      for (Index k = 0; k < size; ++k) {
        const Index row = order[static_cast<std::size_t>(start + k)];
        Xb.row(k) = tr.X().row(row);
        Yb.row(k) = tr.Y().row(row);
      }
      start += size;

      BatchObjective bo = batch_objective(model, Xb, Yb, config, true);
      if (!std::isfinite(bo.objective)) throw diverged(epoch, "non-finite objective");
      if (!all_finite(bo.grads)) throw diverged(epoch, "non-finite gradient");
      optimizer_step(config.optimizer, model.mutable_parameters(), bo.grads, state, config.learning_rate,
                     config.optimizer_settings);
      penalty_sum += bo.penalty * static_cast<double>(size);
      if (config.record_step_objectives) {
        const double after = batch_objective(model, Xb, Yb, config, false).objective;
        h.steps.push_back({epoch, bo.objective, after});
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = mean_cross_entropy(model, tr);
    rec.validation_loss = mean_cross_entropy(model, splits.validation);
    rec.penalty = penalty_sum / static_cast<double>(N);
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.validation_loss)) throw diverged(epoch, "non-finite loss");
    h.epochs.push_back(rec);

    if (rec.validation_loss < best_val) {
      best_val = rec.validation_loss;
      h.best_epoch = epoch;
      best_params = model.parameters();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  model.mutable_parameters() = std::move(best_params);
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Sweeps

const SweepCell& SweepResult::cell(std::size_t lambda_index, int replication) const {
  return cells.at(lambda_index * static_cast<std::size_t>(replications) + static_cast<std::size_t>(replication));
}

MetricsSummary SweepResult::summary(std::size_t lambda_index, SplitName split) const {
  std::vector<MetricsReport> reports;
  for (int r = 0; r < replications; ++r) {
    const auto& m = cell(lambda_index, r).metrics;
    reports.push_back(split == SplitName::kTrain ? m.train : split == SplitName::kValidation ? m.validation : m.test);
  }
  return summarize(reports);
}

std::vector<ChoiceModel> SweepResult::models(std::size_t lambda_index) const {
  std::vector<ChoiceModel> out;
  for (int r = 0; r < replications; ++r) {
    const auto& c = cell(lambda_index, r);
    if (!c.model) throw ConfigError("sweep was run without keep_models");
    out.push_back(*c.model);
  }
  return out;
}

std::string SweepResult::to_table() const {
  std::ostringstream os;
  os << "lambda,split,replications";
  for (const char* m : kMetricNames) os << ',' << m << "_mean," << m << "_sd";
  os << '\n';
  const char* names[] = {"train", "validation", "test"};
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    for (int s = 0; s < 3; ++s) {
      const auto sum = summary(l, static_cast<SplitName>(s));
      os << fmt(lambdas[l]) << ',' << names[s] << ',' << replications;
      for (int m = 0; m < 5; ++m) os << ',' << fmt(metric_value(sum.mean, m)) << ',' << fmt(metric_value(sum.sd, m));
      os << '\n';
    }
  }
  return os.str();
}

std::string SweepResult::cells_table() const {
  std::ostringstream os;
  os << "lambda,replication,seed,best_epoch,epochs_run,split";
  for (const char* m : kMetricNames) os << ',' << m;
  os << '\n';
  for (const auto& c : cells) {
    const MetricsReport* reports[] = {&c.metrics.train, &c.metrics.validation, &c.metrics.test};
    const char* names[] = {"train", "validation", "test"};
    for (int s = 0; s < 3; ++s) {
      os << fmt(c.lambda) << ',' << c.replication << ',' << c.seed << ',' << c.best_epoch << ',' << c.epochs_run << ','
         << names[s];
      for (int m = 0; m < 5; ++m) os << ',' << fmt(metric_value(*reports[s], m));
      os << '\n';
    }
  }
  return os.str();
}

SweepResult lambda_sweep(const ModelSpec& spec, const Splits& splits, const TrainConfig& base,
                         std::span<const double> lambda_grid, const SweepOptions& options) {
  if (lambda_grid.empty()) throw ConfigError("lambda grid is empty", "sweep.lambdas");
  if (options.replications < 1) throw ConfigError("replications must be at least 1", "sweep.replications");
  SweepResult result;
  result.lambdas.assign(lambda_grid.begin(), lambda_grid.end());
  result.replications = options.replications;
  result.cells.resize(lambda_grid.size() * static_cast<std::size_t>(options.replications));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= result.cells.size()) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      try {
        const std::size_t l = k / static_cast<std::size_t>(options.replications);
        const int r = static_cast<int>(k % static_cast<std::size_t>(options.replications));
        TrainConfig cfg = base;
        cfg.penalty.lambda = lambda_grid[l];
        cfg.seed = base.seed + static_cast<std::uint64_t>(r);
        TrainResult tr = train(spec, splits, cfg);
        SweepCell& c = result.cells[k];
        c.lambda = cfg.penalty.lambda;
        c.replication = r;
        c.seed = cfg.seed;
        c.best_epoch = tr.history.best_epoch;
        c.epochs_run = static_cast<int>(tr.history.epochs.size()) - 1;
        c.metrics.train = evaluate(tr.model, splits.train, options.regularity);
        c.metrics.validation = evaluate(tr.model, splits.validation, options.regularity);
        c.metrics.test = splits.test.rows() > 0 ? evaluate(tr.model, splits.test, options.regularity) : MetricsReport{};
        if (options.keep_models) c.model = std::move(tr.model);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(result.cells.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return result;
}

LambdaChoice select_optimal_lambda(const SweepResult& sweep, double regularity_floor) {
  if (sweep.lambdas.empty()) throw ConfigError("sweep has no lambdas");
  std::vector<std::size_t> order(sweep.lambdas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sweep.lambdas[a] < sweep.lambdas[b]; });
  std::optional<std::size_t> best;
  double best_ll = 0.0;
  for (std::size_t l : order) {
    const auto s = sweep.summary(l, SplitName::kValidation);
    if (s.mean.strong_regularity < regularity_floor) continue;
    if (!best || s.mean.log_likelihood > best_ll) {
      best = l;
      best_ll = s.mean.log_likelihood;
    }
  }
  if (best) return {sweep.lambdas[*best], false};
  double best_reg = 0.0;
  for (std::size_t l : order) {
    const auto s = sweep.summary(l, SplitName::kValidation);
    if (!best || s.mean.strong_regularity > best_reg ||
        (s.mean.strong_regularity == best_reg && s.mean.log_likelihood > best_ll)) {
      best = l;
      best_reg = s.mean.strong_regularity;
      best_ll = s.mean.log_likelihood;
    }
  }
  return {sweep.lambdas[*best], true};
}

}  // namespace regchoice
