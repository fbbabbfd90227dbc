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

#include "regchoice/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "regchoice/errors.hpp"

namespace regchoice {

namespace {

constexpr Index kChunk = 2048;

void check_one_hot(const Matrix& P, const Matrix& Y) {
  if (P.rows() != Y.rows() || P.cols() != Y.cols()) throw InputError("probability and choice matrices differ in shape");
  for (Index n = 0; n < Y.rows(); ++n) {
    int ones = 0;
    for (Index j = 0; j < Y.cols(); ++j) {
      const double y = Y(n, j);
      if (y == 1.0) {
        ++ones;
      } else if (y != 0.0) {
        throw InputError("choice row " + std::to_string(n) + " is not one-hot");
      }
    }
    if (ones != 1) throw InputError("choice row " + std::to_string(n) + " is not one-hot");
  }
}

Index argmax_row(const Matrix& P, Index n) {
  Index best = 0;
  for (Index j = 1; j < P.cols(); ++j) {
    if (P(n, j) > P(n, best)) best = j;
  }
  return best;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

double log_likelihood(const Matrix& P, const Matrix& Y) {
  check_one_hot(P, Y);
  static const double kFloor = std::log(1e-300);
  double ll = 0.0;
  for (Index n = 0; n < Y.rows(); ++n) {
    for (Index j = 0; j < Y.cols(); ++j) {
      if (Y(n, j) == 1.0) ll += P(n, j) > 0.0 ? std::max(std::log(P(n, j)), kFloor) : kFloor;
    }
  }
  return ll;
}

double accuracy(const Matrix& P, const Matrix& Y) {
  if (P.rows() == 0) return 0.0;
  Index hits = 0;
  for (Index n = 0; n < P.rows(); ++n) {
    Index truth = 0;
    Y.row(n).maxCoeff(&truth);
    if (argmax_row(P, n) == truth) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(P.rows());
}

double f1_macro(const Matrix& P, const Matrix& Y) {
  const Index J = P.cols();
  if (J == 0) return 0.0;
  std::vector<double> tp(static_cast<std::size_t>(J)), fp(static_cast<std::size_t>(J)), fn(static_cast<std::size_t>(J));
  for (Index n = 0; n < P.rows(); ++n) {
    Index truth = 0;
    Y.row(n).maxCoeff(&truth);
    const Index pred = argmax_row(P, n);
    if (pred == truth) {
      tp[static_cast<std::size_t>(truth)] += 1;
    } else {
      fp[static_cast<std::size_t>(pred)] += 1;
      fn[static_cast<std::size_t>(truth)] += 1;
    }
  }
  double total = 0.0;
  for (std::size_t j = 0; j < tp.size(); ++j) {
    const double denom = 2 * tp[j] + fp[j] + fn[j];
    total += denom > 0 ? 2 * tp[j] / denom : 0.0;
  }
  return total / static_cast<double>(J);
}

void RegularityConfig::validate() const {
  if (!(epsilon_strong < 0.0 && epsilon_weak > 0.0)) {
    throw ConfigError("regularity thresholds need epsilon_strong < 0 < epsilon_weak");
  }
  if (method == DerivativeMethod::kFiniteDifference && !(fd_step > 0.0)) {
    throw ConfigError("finite-difference step must be positive", "regularity.fd_step");
  }
  if (pairs.empty()) throw ConfigError("regularity needs at least one (alternative, column) pair");
}

RegularityConfig default_regularity(const Dataset& train) {
  RegularityConfig c;
  for (const auto& [i, d] : direct_cost_pairs(train)) c.pairs.push_back({i, d});
  c.column_range = train.X().colwise().maxCoeff().transpose() - train.X().colwise().minCoeff().transpose();
  return c;
}

Matrix regularity_derivatives(const ChoiceModel& model, const Matrix& X, const RegularityConfig& config) {
  config.validate();
  const Index N = X.rows();
  const Index K = static_cast<Index>(config.pairs.size());
  for (const auto& p : config.pairs) {
    if (p.alternative < 0 || p.alternative >= model.num_alternatives() || p.column < 0 ||
        p.column >= model.input_dim()) {
      throw ConfigError("regularity pair (" + std::to_string(p.alternative) + ", " + std::to_string(p.column) +
                        ") out of range");
    }
  }
  Matrix out(N, K);
  if (config.method == DerivativeMethod::kExact) {
    for (Index start = 0; start < N; start += kChunk) {
      const Index n = std::min(kChunk, N - start);
      const Matrix Xc = X.middleRows(start, n);
      std::map<int, Matrix> by_column;
      for (Index k = 0; k < K; ++k) {
        const auto& p = config.pairs[static_cast<std::size_t>(k)];
        auto it = by_column.find(p.column);
        if (it == by_column.end()) {
          it = by_column.emplace(p.column, target_derivative_column(model, Xc, nullptr, GradientTarget::kProbability,
                                                                    p.column))
                   .first;
        }
        out.block(start, k, n, 1) = it->second.col(p.alternative);
      }
    }
    return out;
  }
  Vector range = config.column_range;
  if (range.size() == 0) range = X.colwise().maxCoeff().transpose() - X.colwise().minCoeff().transpose();
  if (range.size() != X.cols()) throw ConfigError("column_range has the wrong length");
  for (Index k = 0; k < K; ++k) {
    const auto& p = config.pairs[static_cast<std::size_t>(k)];
    const double h = config.fd_step * (range(p.column) > 0.0 ? range(p.column) : 1.0);
    Matrix up = X;
    Matrix down = X;
    up.col(p.column).array() += h;
    down.col(p.column).array() -= h;
    out.col(k) = (probabilities(model, up).col(p.alternative) - probabilities(model, down).col(p.alternative)) / (2 * h);
  }
  return out;
}

double regularity_at(const Matrix& derivatives, double epsilon) {
  if (derivatives.size() == 0) return 0.0;
  // Unweighted mean over pairs of the per-pair share of rows below epsilon.
  double total = 0.0;
  for (Index k = 0; k < derivatives.cols(); ++k) {
    total += (derivatives.col(k).array() < epsilon).cast<double>().mean();
  }
  return total / static_cast<double>(derivatives.cols());
}

RegularityResult behavioral_regularity(const ChoiceModel& model, const Dataset& data, const RegularityConfig& config) {
  const Matrix d = regularity_derivatives(model, data.X(), config);
  return {regularity_at(d, config.epsilon_strong), regularity_at(d, config.epsilon_weak)};
}

std::string MetricsReport::to_record() const {
  std::ostringstream os;
  os << "log_likelihood=" << fmt(log_likelihood) << '\n'
     << "accuracy=" << fmt(accuracy) << '\n'
     << "f1_macro=" << fmt(f1_macro) << '\n'
     << "strong_regularity=" << fmt(strong_regularity) << '\n'
     << "weak_regularity=" << fmt(weak_regularity) << '\n';
  return os.str();
}

MetricsReport MetricsReport::from_record(const std::string& text) {
  MetricsReport r;
  std::istringstream in(text);
  std::string line;
  int seen = 0;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
    if (ec != std::errc()) throw InputError("bad metric value for '" + key + "'");
    double* slot = key == "log_likelihood"      ? &r.log_likelihood
                   : key == "accuracy"          ? &r.accuracy
                   : key == "f1_macro"          ? &r.f1_macro
                   : key == "strong_regularity" ? &r.strong_regularity
                   : key == "weak_regularity"   ? &r.weak_regularity
                                                : nullptr;
    if (slot == nullptr) throw InputError("unknown metric '" + key + "'");
    *slot = v;
    ++seen;
  }
  if (seen != 5) throw InputError("metric record needs all five metrics");
  return r;
}

double metric_value(const MetricsReport& r, int metric) {
  switch (metric) {
    case 0: return r.log_likelihood;
    case 1: return r.accuracy;
    case 2: return r.f1_macro;
    case 3: return r.strong_regularity;
    case 4: return r.weak_regularity;
    default: throw ConfigError("metric index out of range");
  }
}

MetricsReport evaluate(const ChoiceModel& model, const Dataset& data, const RegularityConfig& config) {
  const Matrix P = probabilities(model, data.X());
  MetricsReport r;
  r.log_likelihood = log_likelihood(P, data.Y());
  r.accuracy = accuracy(P, data.Y());
  r.f1_macro = f1_macro(P, data.Y());
  const auto reg = behavioral_regularity(model, data, config);
  r.strong_regularity = reg.strong;
  r.weak_regularity = reg.weak;
  return r;
}

MetricsSummary summarize(std::span<const MetricsReport> reports) {
  MetricsSummary s;
  s.count = reports.size();
  if (reports.empty()) return s;
  const double n = static_cast<double>(reports.size());
  double mean[5] = {};
  double var[5] = {};
  for (const auto& r : reports) {
    for (int m = 0; m < 5; ++m) mean[m] += metric_value(r, m) / n;
  }
  if (reports.size() > 1) {
    for (const auto& r : reports) {
      for (int m = 0; m < 5; ++m) var[m] += (metric_value(r, m) - mean[m]) * (metric_value(r, m) - mean[m]) / (n - 1);
    }
  }
  s.mean = {mean[0], mean[1], mean[2], mean[3], mean[4]};
  s.sd = {std::sqrt(var[0]), std::sqrt(var[1]), std::sqrt(var[2]), std::sqrt(var[3]), std::sqrt(var[4])};
  return s;
}

RowVector average_individual(const Dataset& train) {
  if (train.rows() == 0) throw InputError("average individual needs a non-empty training split");
  const Index D = train.attributes();
  RowVector row(D);
  for (Index d = 0; d < D; ++d) {
    const auto col = train.X().col(d);
    switch (train.features()[static_cast<std::size_t>(d)].kind) {
      case ColumnKind::kContinuous:
        row(d) = col.mean();
        break;
      case ColumnKind::kIndicator: {
        // Mode of a 0/1 column; ties go to the smaller value.
        const double max_v = col.maxCoeff();
        const Index ones = (col.array() == max_v).count();
        row(d) = 2 * ones > train.rows() ? max_v : col.minCoeff();
        break;
      }
      case ColumnKind::kCount: {
        std::vector<double> v(col.data(), col.data() + col.size());
        const auto mid = v.begin() + (static_cast<std::ptrdiff_t>(v.size()) - 1) / 2;
        std::nth_element(v.begin(), mid, v.end());
        row(d) = *mid;
        break;
      }
    }
  }
  return row;
}

std::string DemandCurve::to_table(const std::string& grid_name) const {
  std::ostringstream os;
  os << grid_name;
  for (Index r = 0; r < curves.cols(); ++r) os << ",replication_" << r;
  os << ",mean\n";
  for (Index g = 0; g < grid.size(); ++g) {
    os << fmt(grid(g));
    for (Index r = 0; r < curves.cols(); ++r) os << ',' << fmt(curves(g, r));
    os << ',' << fmt(mean(g)) << '\n';
  }
  return os.str();
}

DemandCurve demand_curve(std::span<const ChoiceModel> ensemble, const Dataset& train, int alternative, int column,
                         int grid_size) {
  if (ensemble.empty()) throw ConfigError("demand curve needs at least one model");
  if (grid_size < 1) throw ConfigError("demand curve grid must have at least one point", "curve.grid_size");
  if (column < 0 || column >= train.attributes()) throw ConfigError("demand curve column out of range");
  if (alternative < 0 || alternative >= train.num_alternatives()) {
    throw ConfigError("demand curve alternative out of range");
  }
  const RowVector base = average_individual(train);
  const double lo = train.X().col(column).minCoeff();
  const double hi = train.X().col(column).maxCoeff();
  DemandCurve c;
  c.grid = grid_size == 1 ? Vector(Vector::Constant(1, lo)) : Vector(Vector::LinSpaced(grid_size, lo, hi));
  Matrix rows = base.replicate(grid_size, 1);
  rows.col(column) = c.grid;
  c.curves.resize(grid_size, static_cast<Index>(ensemble.size()));
  for (std::size_t r = 0; r < ensemble.size(); ++r) {
    c.curves.col(static_cast<Index>(r)) = probabilities(ensemble[r], rows).col(alternative);
  }
  c.mean = c.curves.rowwise().mean();
  return c;
}

std::string EpsilonSweep::to_table() const {
  std::ostringstream os;
  os << "epsilon,regularity\n";
  for (Index k = 0; k < epsilon.size(); ++k) os << fmt(epsilon(k)) << ',' << fmt(regularity(k)) << '\n';
  return os.str();
}

EpsilonSweep epsilon_sweep(const ChoiceModel& model, const Dataset& data, const RegularityPair& pair,
                           std::span<const double> epsilon_grid, const RegularityConfig& base) {
  if (!std::is_sorted(epsilon_grid.begin(), epsilon_grid.end())) {
    throw ConfigError("epsilon grid must be sorted ascending");
  }
  RegularityConfig cfg = base;
  cfg.pairs = {pair};
  const Matrix d = regularity_derivatives(model, data.X(), cfg);
  EpsilonSweep s;
  s.epsilon = Eigen::Map<const Vector>(epsilon_grid.data(), static_cast<Index>(epsilon_grid.size()));
  s.regularity.resize(s.epsilon.size());
  for (Index k = 0; k < s.epsilon.size(); ++k) s.regularity(k) = regularity_at(d, s.epsilon(k));
  return s;
}

}  // namespace regchoice
