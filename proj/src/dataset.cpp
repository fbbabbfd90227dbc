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

#include "regchoice/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "regchoice/errors.hpp"
#include "regchoice/softmax.hpp"

namespace regchoice {

namespace {

using nlohmann::json;

const char* kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::kContinuous: return "continuous";
    case ColumnKind::kCount: return "count";
    case ColumnKind::kIndicator: return "indicator";
  }
  return "continuous";
}

ColumnKind parse_kind(const std::string& s, const std::string& path) {
  if (s == "continuous") return ColumnKind::kContinuous;
  if (s == "count") return ColumnKind::kCount;
  if (s == "indicator") return ColumnKind::kIndicator;
  throw ConfigError("unknown column kind '" + s + "'", path);
}

const char* role_name(ColumnRole r) {
  switch (r) {
    case ColumnRole::kCost: return "cost";
    case ColumnRole::kTime: return "time";
    case ColumnRole::kSociodemographic: return "sociodemographic";
    case ColumnRole::kChoice: return "choice";
  }
  return "sociodemographic";
}

ColumnRole parse_role(const std::string& s, const std::string& path) {
  if (s == "cost") return ColumnRole::kCost;
  if (s == "time") return ColumnRole::kTime;
  if (s == "sociodemographic") return ColumnRole::kSociodemographic;
  if (s == "choice") return ColumnRole::kChoice;
  throw ConfigError("unknown column role '" + s + "'", path);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<Index> permutation(Index n, std::uint64_t seed) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

void check_fractions(const SplitPlan& plan) {
  const double f[] = {plan.train_fraction, plan.validation_fraction, plan.test_fraction};
  for (double x : f) {
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
  }
  if (f[0] + f[1] + f[2] > 1.0 + 1e-9) throw ConfigError("split fractions sum to more than 1");
}

// Sizes for a pool of n rows: floor for validation/test, remainder to train
// when the fractions are exhaustive.
std::array<Index, 3> split_sizes(Index n, const SplitPlan& plan, double test_fraction) {
  const auto nv = static_cast<Index>(std::floor(plan.validation_fraction * static_cast<double>(n) + 1e-9));
  const auto nt = static_cast<Index>(std::floor(test_fraction * static_cast<double>(n) + 1e-9));
  const double total = plan.train_fraction + plan.validation_fraction + test_fraction;
  Index ntr = std::abs(total - 1.0) < 1e-9 ? n - nv - nt
                                           : static_cast<Index>(std::floor(plan.train_fraction * static_cast<double>(n) + 1e-9));
  if (ntr <= 0 || ntr + nv + nt > n) {
    throw ConfigError("split fractions are infeasible for " + std::to_string(n) + " rows");
  }
  return {ntr, nv, nt};
}

}  // namespace

// ---------------------------------------------------------------------------
// Schema

void SchemaSpec::validate() const {
  if (alternatives.empty()) throw ConfigError("schema needs at least one alternative", "alternatives");
  std::set<std::string> labels(alternatives.begin(), alternatives.end());
  if (labels.size() != alternatives.size()) throw ConfigError("duplicate alternative label", "alternatives");
  std::set<std::string> names;
  int choice_columns = 0;
  std::map<std::pair<std::string, ColumnRole>, int> per_alt;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto& col = columns[c];
    const std::string path = "columns[" + std::to_string(c) + "]";
    if (col.name.empty()) throw ConfigError("column name is empty", path + ".name");
    if (!names.insert(col.name).second) throw ConfigError("duplicate column '" + col.name + "'", path + ".name");
    if (col.role == ColumnRole::kChoice) {
      ++choice_columns;
    } else if (col.role == ColumnRole::kCost || col.role == ColumnRole::kTime) {
      if (!labels.contains(col.alternative)) {
        throw ConfigError("column '" + col.name + "' names unknown alternative '" + col.alternative + "'",
                          path + ".alternative");
      }
      if (++per_alt[{col.alternative, col.role}] > 1) {
        throw ConfigError("alternative '" + col.alternative + "' has more than one " + role_name(col.role) + " column",
                          path);
      }
    }
  }
  if (choice_columns != 1) throw ConfigError("schema needs exactly one choice column", "columns");
}

std::string SchemaSpec::to_json() const {
  json cols = json::array();
  for (const auto& c : columns) {
    json j{{"name", c.name}, {"kind", kind_name(c.kind)}, {"role", role_name(c.role)}};
    if (!c.alternative.empty()) j["alternative"] = c.alternative;
    cols.push_back(j);
  }
  return json{{"alternatives", alternatives}, {"columns", cols}}.dump(2);
}

SchemaSpec SchemaSpec::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("schema is not valid JSON: ") + e.what());
  }
  SchemaSpec s;
  if (!doc.is_object()) throw ConfigError("schema must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "alternatives" && key != "columns") throw ConfigError("unknown key", key);
  }
  try {
    s.alternatives = doc.at("alternatives").get<std::vector<std::string>>();
    const auto& cols = doc.at("columns");
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const std::string path = "columns[" + std::to_string(c) + "]";
      const auto& j = cols[c];
      for (const auto& [key, _] : j.items()) {
        if (key != "name" && key != "kind" && key != "role" && key != "alternative") {
          throw ConfigError("unknown key", path + "." + key);
        }
      }
      ColumnSpec col;
      col.name = j.at("name").get<std::string>();
      col.role = parse_role(j.at("role").get<std::string>(), path + ".role");
      col.kind = j.contains("kind") ? parse_kind(j.at("kind").get<std::string>(), path + ".kind")
                                    : ColumnKind::kContinuous;
      if (j.contains("alternative")) col.alternative = j.at("alternative").get<std::string>();
      s.columns.push_back(col);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed schema: ") + e.what());
  }
  s.validate();
  return s;
}

SchemaSpec SchemaSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::vector<FeatureInfo> feature_layout(const SchemaSpec& schema) {
  schema.validate();
  std::vector<FeatureInfo> out;
  for (const auto& c : schema.columns) {
    if (c.role == ColumnRole::kChoice) continue;
    FeatureInfo f{c.name, c.kind, c.role, -1};
    if (c.role == ColumnRole::kCost || c.role == ColumnRole::kTime) {
      const auto it = std::find(schema.alternatives.begin(), schema.alternatives.end(), c.alternative);
      f.alternative = static_cast<int>(it - schema.alternatives.begin());
    }
    out.push_back(f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<FeatureInfo> features, std::vector<std::string> alternatives, Matrix X,
                 std::vector<int> choices, std::vector<Index> row_ids)
    : features_(std::move(features)),
      alternatives_(std::move(alternatives)),
      X_(std::move(X)),
      choices_(std::move(choices)),
      row_ids_(std::move(row_ids)) {
  if (static_cast<Index>(features_.size()) != X_.cols()) throw InputError("feature metadata does not match columns");
  if (static_cast<Index>(choices_.size()) != X_.rows()) throw InputError("one choice per row required");
  if (row_ids_.empty()) {
    row_ids_.resize(choices_.size());
    std::iota(row_ids_.begin(), row_ids_.end(), Index{0});
  }
  if (row_ids_.size() != choices_.size()) throw InputError("one row id per row required");
  const int J = num_alternatives();
  Y_ = Matrix::Zero(X_.rows(), J);
  for (std::size_t n = 0; n < choices_.size(); ++n) {
    if (choices_[n] < 0 || choices_[n] >= J) {
      throw InputError("choice index out of range at row " + std::to_string(n));
    }
    Y_(static_cast<Index>(n), choices_[n]) = 1.0;
  }
}

int Dataset::column_index(const std::string& name) const {
  for (std::size_t d = 0; d < features_.size(); ++d) {
    if (features_[d].name == name) return static_cast<int>(d);
  }
  throw ConfigError("unknown column '" + name + "'");
}

int Dataset::alternative_index(const std::string& label) const {
  const auto it = std::find(alternatives_.begin(), alternatives_.end(), label);
  if (it == alternatives_.end()) throw ConfigError("unknown alternative '" + label + "'");
  return static_cast<int>(it - alternatives_.begin());
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  Matrix X(static_cast<Index>(rows.size()), X_.cols());
  std::vector<int> ch(rows.size());
  std::vector<Index> ids(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    X.row(static_cast<Index>(k)) = X_.row(rows[k]);
    ch[k] = choices_[static_cast<std::size_t>(rows[k])];
    ids[k] = row_ids_[static_cast<std::size_t>(rows[k])];
  }
  return Dataset(features_, alternatives_, std::move(X), std::move(ch), std::move(ids));
}

Dataset Dataset::with_attributes(Matrix X) const {
  if (X.rows() != X_.rows() || X.cols() != X_.cols()) throw InputError("replacement attributes change the shape");
  return Dataset(features_, alternatives_, std::move(X), choices_, row_ids_);
}

Dataset parse_table(const std::string& text, const SchemaSpec& schema) {
  const auto features = feature_layout(schema);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InputError("table is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_line(line);

  auto find_column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> feature_pos;
  for (const auto& f : features) feature_pos.push_back(find_column(f.name));
  std::string choice_name;
  for (const auto& c : schema.columns) {
    if (c.role == ColumnRole::kChoice) choice_name = c.name;
  }
  const std::size_t choice_pos = find_column(choice_name);

  std::vector<double> values;
  std::vector<int> choices;
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw InputError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    for (std::size_t d = 0; d < features.size(); ++d) {
      const std::string& cell = cells[feature_pos[d]];
      const auto where = [&] { return "row " + std::to_string(row) + ", column '" + features[d].name + "'"; };
      if (cell.empty()) throw InputError(where() + ": missing value");
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw InputError(where() + ": cannot parse '" + cell + "' as a number");
      }
      if (features[d].kind == ColumnKind::kCount && (v < 0.0 || v != std::floor(v))) {
        throw InputError(where() + ": count value '" + cell + "' is not a nonnegative integer");
      }
      if (features[d].kind == ColumnKind::kIndicator && v != 0.0 && v != 1.0) {
        throw InputError(where() + ": indicator value '" + cell + "' is not 0 or 1");
      }
      values.push_back(v);
    }
    const std::string& label = cells[choice_pos];
    const auto it = std::find(schema.alternatives.begin(), schema.alternatives.end(), label);
    if (it == schema.alternatives.end()) {
      throw InputError("row " + std::to_string(row) + ", column '" + choice_name + "': unknown choice label '" + label +
                       "'");
    }
    choices.push_back(static_cast<int>(it - schema.alternatives.begin()));
  }
  const auto D = static_cast<Index>(features.size());
  Matrix X(row, D);
  for (Index n = 0; n < row; ++n) {
    for (Index d = 0; d < D; ++d) X(n, d) = values[static_cast<std::size_t>(n * D + d)];
  }
  return Dataset(features, schema.alternatives, std::move(X), std::move(choices));
}

Dataset load_table(const std::string& path, const SchemaSpec& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open table '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_table(ss.str(), schema);
}

std::string format_table(const Dataset& data, const std::string& choice_column) {
  std::ostringstream os;
  for (const auto& f : data.features()) os << f.name << ',';
  os << choice_column << '\n';
  char buf[64];
  for (Index n = 0; n < data.rows(); ++n) {
    for (Index d = 0; d < data.attributes(); ++d) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), data.X()(n, d));
      os.write(buf, ptr - buf);
      os << ',';
    }
    os << data.alternatives()[static_cast<std::size_t>(data.choices()[static_cast<std::size_t>(n)])] << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Splits

Splits split_random(const Dataset& data, const SplitPlan& plan) {
  if (plan.scheme != SplitScheme::kRandom) throw ConfigError("split_random needs the random scheme");
  check_fractions(plan);
  const Index N = data.rows();
  const auto perm = permutation(N, plan.seed);
  if (plan.external_test_size > 0 && plan.test_fraction > 0.0) {
    throw ConfigError("an external test block replaces the test fraction; set test_fraction to 0");
  }
  const Index pool = plan.pool_size.value_or(N - plan.external_test_size);
  if (pool <= 0 || plan.external_test_size < 0 || pool + plan.external_test_size > N) {
    throw ConfigError("pool of " + std::to_string(pool) + " plus external test of " +
                      std::to_string(plan.external_test_size) + " exceeds " + std::to_string(N) + " rows");
  }
  const auto [ntr, nv, nt] = split_sizes(pool, plan, plan.test_fraction);
  std::span<const Index> all(perm);
  Splits s;
  s.train = data.subset(all.subspan(0, static_cast<std::size_t>(ntr)));
  s.validation = data.subset(all.subspan(static_cast<std::size_t>(ntr), static_cast<std::size_t>(nv)));
  if (plan.external_test_size > 0) {
    s.test = data.subset(all.subspan(static_cast<std::size_t>(pool), static_cast<std::size_t>(plan.external_test_size)));
  } else {
    s.test = data.subset(all.subspan(static_cast<std::size_t>(ntr + nv), static_cast<std::size_t>(nt)));
  }
  return s;
}

Splits split_sorted(const Dataset& data, const SplitPlan& plan) {
  if (plan.scheme != SplitScheme::kSorted) throw ConfigError("split_sorted needs the sorted scheme");
  check_fractions(plan);
  if (plan.sort_column.empty()) throw ConfigError("sorted split needs a sort column", "split.sort_column");
  const int col = data.column_index(plan.sort_column);
  if (data.features()[static_cast<std::size_t>(col)].kind != ColumnKind::kContinuous) {
    throw ConfigError("sort column '" + plan.sort_column + "' is not continuous", "split.sort_column");
  }
  const Index N = data.rows();
  const auto [ntr, nv, nt] = split_sizes(N, plan, plan.test_fraction);
  std::vector<Index> order(static_cast<std::size_t>(N));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return data.X()(a, col) < data.X()(b, col); });

  std::vector<Index> test(order.end() - nt, order.end());
  std::vector<Index> rest(order.begin(), order.end() - nt);
  std::sort(rest.begin(), rest.end());
  const auto perm = permutation(static_cast<Index>(rest.size()), plan.seed);
  std::vector<Index> shuffled(rest.size());
  for (std::size_t k = 0; k < rest.size(); ++k) shuffled[k] = rest[static_cast<std::size_t>(perm[k])];
  std::span<const Index> sh(shuffled);
  Splits s;
  s.train = data.subset(sh.subspan(0, static_cast<std::size_t>(ntr)));
  s.validation = data.subset(sh.subspan(static_cast<std::size_t>(ntr), static_cast<std::size_t>(nv)));
  s.test = data.subset(test);
  return s;
}

Splits split(const Dataset& data, const SplitPlan& plan) {
  return plan.scheme == SplitScheme::kSorted ? split_sorted(data, plan) : split_random(data, plan);
}

std::string split_manifest(const Splits& splits) {
  return json{{"train", splits.train.row_ids()},
              {"validation", splits.validation.row_ids()},
              {"test", splits.test.row_ids()}}
      .dump();
}

// ---------------------------------------------------------------------------
// Standardization

Matrix ScalingRecord::apply(const Matrix& raw) const {
  return (raw.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Matrix ScalingRecord::invert(const Matrix& standardized) const {
  return (standardized.array().rowwise() * scale.transpose().array()).matrix().rowwise() + mean.transpose();
}

double ScalingRecord::derivative_to_raw(double derivative, Index column) const { return derivative / scale(column); }

std::string ScalingRecord::to_json() const {
  return json{{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
              {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())},
              {"scaled", scaled},
              {"warnings", warnings}}
      .dump();
}

ScalingRecord ScalingRecord::from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    ScalingRecord r;
    const auto m = doc.at("mean").get<std::vector<double>>();
    const auto s = doc.at("scale").get<std::vector<double>>();
    r.mean = Eigen::Map<const Vector>(m.data(), static_cast<Index>(m.size()));
    r.scale = Eigen::Map<const Vector>(s.data(), static_cast<Index>(s.size()));
    r.scaled = doc.at("scaled").get<std::vector<bool>>();
    r.warnings = doc.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed scaling record: ") + e.what());
  }
}

ScalingRecord fit_scaling(const Dataset& train) {
  if (train.rows() == 0) throw InputError("cannot standardize on an empty training split");
  const Index D = train.attributes();
  ScalingRecord r;
  r.mean = Vector::Zero(D);
  r.scale = Vector::Ones(D);
  r.scaled.assign(static_cast<std::size_t>(D), false);
  for (Index d = 0; d < D; ++d) {
    const auto& f = train.features()[static_cast<std::size_t>(d)];
    if (f.kind == ColumnKind::kIndicator) continue;
    const double mu = train.X().col(d).mean();
    const double var = train.rows() > 1
                           ? (train.X().col(d).array() - mu).square().sum() / static_cast<double>(train.rows() - 1)
                           : 0.0;
    if (!(var > 0.0)) {
      r.warnings.push_back("column '" + f.name + "' has zero variance; left unscaled");
      continue;
    }
    r.mean(d) = mu;
    r.scale(d) = std::sqrt(var);
    r.scaled[static_cast<std::size_t>(d)] = true;
  }
  return r;
}

std::pair<Splits, ScalingRecord> standardize(const Splits& splits) {
  ScalingRecord r = fit_scaling(splits.train);
  Splits out{splits.train.with_attributes(r.apply(splits.train.X())),
             splits.validation.with_attributes(r.apply(splits.validation.X())),
             splits.test.with_attributes(r.apply(splits.test.X()))};
  return {std::move(out), std::move(r)};
}

// ---------------------------------------------------------------------------
// Travel-mode layout helpers

std::vector<std::pair<int, int>> direct_cost_pairs(const Dataset& data) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < data.num_alternatives(); ++i) {
    for (int d = 0; d < data.attributes(); ++d) {
      const auto& f = data.features()[static_cast<std::size_t>(d)];
      if (f.role == ColumnRole::kCost && f.alternative == i) pairs.emplace_back(i, d);
    }
  }
  return pairs;
}

MnlSpec travel_mnl_spec(const Dataset& data) {
  MnlSpec spec;
  spec.input_dim = data.attributes();
  const int J = data.num_alternatives();
  spec.attribute_columns.resize(static_cast<std::size_t>(J));
  spec.has_constant.assign(static_cast<std::size_t>(J), false);
  for (int i = 0; i < J; ++i) {
    auto& cols = spec.attribute_columns[static_cast<std::size_t>(i)];
    if (i > 0) {
      spec.has_constant[static_cast<std::size_t>(i)] = true;
      for (int d = 0; d < data.attributes(); ++d) {
        if (data.features()[static_cast<std::size_t>(d)].role == ColumnRole::kSociodemographic) cols.push_back(d);
      }
    }
    for (ColumnRole role : {ColumnRole::kTime, ColumnRole::kCost}) {
      for (int d = 0; d < data.attributes(); ++d) {
        const auto& f = data.features()[static_cast<std::size_t>(d)];
        if (f.role == role && f.alternative == i) cols.push_back(d);
      }
    }
  }
  return spec;
}

TasteNetSpec travel_tastenet_spec(const Dataset& data, ConstraintMode constraint, int hidden_width) {
  TasteNetSpec spec;
  spec.input_dim = data.attributes();
  spec.num_alternatives = data.num_alternatives();
  spec.hidden_width = hidden_width;
  spec.constraint = constraint;
  for (int d = 0; d < data.attributes(); ++d) {
    if (data.features()[static_cast<std::size_t>(d)].role == ColumnRole::kSociodemographic) {
      spec.taste_inputs.push_back(d);
    }
  }
  for (int i = 0; i < spec.num_alternatives; ++i) {
    if (i > 0) spec.pairs.push_back({i, TastePair::kConstantColumn, false});
    for (int d = 0; d < data.attributes(); ++d) {
      const auto& f = data.features()[static_cast<std::size_t>(d)];
      if (f.alternative != i) continue;
      if (f.role == ColumnRole::kTime) spec.pairs.push_back({i, d, false});
      if (f.role == ColumnRole::kCost) spec.pairs.push_back({i, d, true});
    }
  }
  return spec;
}

MlpSpec travel_mlp_spec(const Dataset& data, int depth, int width) {
  return MlpSpec{data.attributes(), data.num_alternatives(), depth, width, Activation::kRectifier};
}

// ---------------------------------------------------------------------------
// Synthetic generator

Matrix Teacher::utilities(const Matrix& X) const {
  Matrix V = (X * coefficients.transpose()).rowwise() + constants;
  if (bump_amplitude != 0.0) {
    const auto u = (X.col(bump_column).array() - bump_center) / bump_width;
    V.col(bump_alternative).array() += bump_amplitude * (-0.5 * u.square()).exp();
  }
  return V;
}

Matrix Teacher::probabilities(const Matrix& X) const { return softmax_rows(utilities(X)); }

Vector Teacher::derivative(const Matrix& X, int alternative, int column) const {
  const Matrix P = probabilities(X);
  Matrix dV = Matrix::Zero(X.rows(), coefficients.rows());
  for (Index j = 0; j < coefficients.rows(); ++j) dV.col(j).setConstant(coefficients(j, column));
  if (bump_amplitude != 0.0 && column == bump_column) {
    const auto u = (X.col(bump_column).array() - bump_center) / bump_width;
    dV.col(bump_alternative).array() += -bump_amplitude * u / bump_width * (-0.5 * u.square()).exp();
  }
  const Vector mean_dv = P.cwiseProduct(dV).rowwise().sum();
  return P.col(alternative).cwiseProduct(dV.col(alternative) - mean_dv);
}

SchemaSpec travel_schema() {
  SchemaSpec s;
  s.alternatives = {"drive", "transit", "active"};
  s.columns = {
      {"time_drive", ColumnKind::kContinuous, ColumnRole::kTime, "drive"},
      {"time_transit", ColumnKind::kContinuous, ColumnRole::kTime, "transit"},
      {"time_active", ColumnKind::kContinuous, ColumnRole::kTime, "active"},
      {"cost_drive", ColumnKind::kContinuous, ColumnRole::kCost, "drive"},
      {"cost_transit", ColumnKind::kContinuous, ColumnRole::kCost, "transit"},
      {"age", ColumnKind::kContinuous, ColumnRole::kSociodemographic, ""},
      {"household_size", ColumnKind::kCount, ColumnRole::kSociodemographic, ""},
      {"num_cars", ColumnKind::kCount, ColumnRole::kSociodemographic, ""},
      {"male", ColumnKind::kIndicator, ColumnRole::kSociodemographic, ""},
      {"high_income", ColumnKind::kIndicator, ColumnRole::kSociodemographic, ""},
      {"choice", ColumnKind::kIndicator, ColumnRole::kChoice, ""},
  };
  return s;
}

Teacher default_teacher(const SyntheticSpec& spec) {
  Teacher t;
  t.coefficients = Matrix::Zero(3, 10);
  t.constants = RowVector::Zero(3);
  // drive: time, cost
  t.coefficients(0, 0) = -0.4;
  t.coefficients(0, 3) = -0.5;
  // transit: constant, sociodemographics, time, cost
  t.constants(1) = 0.3;
  t.coefficients.row(1).segment(5, 5) << -0.1, 0.1, -0.6, 0.0, -0.3;
  t.coefficients(1, 1) = -0.3;
  t.coefficients(1, 4) = -0.5;
  // active: constant, sociodemographics, time
  t.constants(2) = 1.0;
  t.coefficients.row(2).segment(5, 5) << -0.25, 0.05, -0.4, 0.2, 0.0;
  t.coefficients(2, 2) = -0.35;
  if (spec.irregular) {
    t.bump_amplitude = spec.bump_amplitude;
    t.bump_center = spec.bump_center;
    t.bump_width = spec.bump_width;
    t.bump_alternative = 0;
    t.bump_column = 3;
  }
  return t;
}

SyntheticData synthesize(const SyntheticSpec& spec) {
  if (spec.rows <= 0) throw ConfigError("synthetic row count must be positive", "synth.rows");
  if (spec.irregular && !(spec.bump_width > 0.0)) throw ConfigError("bump width must be positive", "synth.bump_width");
  SyntheticData out;
  out.schema = travel_schema();
  out.teacher = default_teacher(spec);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> time_drive(0.5, 5.0);
  std::uniform_real_distribution<double> transit_extra(0.5, 4.0);
  std::uniform_real_distribution<double> time_active(1.0, 10.0);
  std::gamma_distribution<double> cost_drive(2.0, 1.5);
  std::uniform_real_distribution<double> cost_transit(1.0, 5.0);
  std::uniform_real_distribution<double> age(1.8, 8.0);
  std::poisson_distribution<int> household(1.5);
  std::poisson_distribution<int> cars(1.2);
  std::bernoulli_distribution male(0.5);
  std::bernoulli_distribution income(0.35);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const Index N = spec.rows;
  Matrix X(N, 10);
  for (Index n = 0; n < N; ++n) {
    const double td = time_drive(rng);
    X(n, 0) = td;
    X(n, 1) = 1.2 * td + transit_extra(rng);
    X(n, 2) = time_active(rng);
    X(n, 3) = cost_drive(rng);
    X(n, 4) = cost_transit(rng);
    X(n, 5) = age(rng);
    X(n, 6) = 1.0 + household(rng);
    X(n, 7) = std::min(cars(rng), 4);
    X(n, 8) = male(rng) ? 1.0 : 0.0;
    X(n, 9) = income(rng) ? 1.0 : 0.0;
  }
  const Matrix P = out.teacher.probabilities(X);
  std::vector<int> choices(static_cast<std::size_t>(N));
  for (Index n = 0; n < N; ++n) {
    const double u = unit(rng);
    double cum = 0.0;
    int pick = static_cast<int>(P.cols()) - 1;
    for (Index j = 0; j < P.cols(); ++j) {
      cum += P(n, j);
      if (u < cum) {
        pick = static_cast<int>(j);
        break;
      }
    }
    choices[static_cast<std::size_t>(n)] = pick;
  }
  out.data = Dataset(feature_layout(out.schema), out.schema.alternatives, std::move(X), std::move(choices));
  return out;
}

}  // namespace regchoice
