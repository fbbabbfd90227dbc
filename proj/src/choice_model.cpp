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

#include "regchoice/choice_model.hpp"

#include <cmath>
#include <random>

#include "json.hpp"
#include "regchoice/errors.hpp"

namespace regchoice {

namespace {

using ad::Tape;
using ad::Var;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Matrix glorot_uniform(Index rows, Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) w(i, j) = dist(rng);
  }
  return w;
}

std::vector<std::pair<Index, Index>> parameter_shapes(const ModelSpec& spec) {
  return std::visit(
      Overloaded{
          [](const MlpSpec& s) {
            std::vector<std::pair<Index, Index>> shapes;
            Index in = s.input_dim;
            for (int h = 0; h < s.depth; ++h) {
              shapes.emplace_back(s.width, in);
              shapes.emplace_back(1, s.width);
              in = s.width;
            }
            shapes.emplace_back(s.output_dim, in);
            shapes.emplace_back(1, s.output_dim);
            return shapes;
          },
          [](const MnlSpec& s) {
            const Index J = s.num_alternatives();
            return std::vector<std::pair<Index, Index>>{{J, s.input_dim}, {1, J}};
          },
          [](const TasteNetSpec& s) {
            const Index Z = static_cast<Index>(s.taste_inputs.size());
            const Index K = static_cast<Index>(s.pairs.size());
            const Index H = s.hidden_width;
            return std::vector<std::pair<Index, Index>>{{H, Z}, {1, H}, {K, H}, {1, K}};
          },
      },
      spec);
}

// Structural masks of the MNL coefficient matrix and constant row.
std::pair<Matrix, Matrix> mnl_masks(const MnlSpec& s) {
  const Index J = s.num_alternatives();
  Matrix coef = Matrix::Zero(J, s.input_dim);
  Matrix cons = Matrix::Zero(1, J);
  for (Index i = 0; i < J; ++i) {
    for (int d : s.attribute_columns[static_cast<std::size_t>(i)]) coef(i, d) = 1.0;
    if (s.has_constant[static_cast<std::size_t>(i)]) cons(0, i) = 1.0;
  }
  return {coef, cons};
}

Var dense(Var x, Var w, Var b) { return ad::add_row_broadcast(ad::matmul(x, ad::transpose(w)), b); }

Var constrain(Var raw, ConstraintMode mode) {
  switch (mode) {
    case ConstraintMode::kNone:
      return raw;
    case ConstraintMode::kRectifier:
      return -ad::relu(-raw);
    case ConstraintMode::kExponential:
      return -ad::exp(-raw);
  }
  return raw;
}

void check_finite(const Matrix& X) {
  if (!X.allFinite()) {
    for (Index i = 0; i < X.rows(); ++i) {
      for (Index j = 0; j < X.cols(); ++j) {
        if (!std::isfinite(X(i, j))) {
          throw InputError("non-finite attribute at row " + std::to_string(i) + ", column " + std::to_string(j));
        }
      }
    }
  }
}

const char* activation_name(Activation a) { return a == Activation::kIdentity ? "identity" : "rectifier"; }

Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "rectifier") return Activation::kRectifier;
  throw ConfigError("unknown activation '" + s + "'");
}

const char* constraint_name(ConstraintMode m) {
  switch (m) {
    case ConstraintMode::kNone: return "none";
    case ConstraintMode::kRectifier: return "rectifier";
    case ConstraintMode::kExponential: return "exponential";
  }
  return "none";
}

ConstraintMode parse_constraint(const std::string& s) {
  if (s == "none") return ConstraintMode::kNone;
  if (s == "rectifier") return ConstraintMode::kRectifier;
  if (s == "exponential") return ConstraintMode::kExponential;
  throw ConfigError("unknown constraint mode '" + s + "'");
}

}  // namespace

void validate(const ModelSpec& spec) {
  std::visit(Overloaded{
                 [](const MlpSpec& s) {
                   if (s.input_dim <= 0 || s.output_dim <= 0) throw ConfigError("mlp dimensions must be positive");
                   if (s.depth < 0) throw ConfigError("mlp depth must be >= 0");
                   if (s.depth > 0 && s.width <= 0) throw ConfigError("mlp width must be positive");
                 },
                 [](const MnlSpec& s) {
                   if (s.input_dim <= 0 || s.num_alternatives() <= 0) {
                     throw ConfigError("mnl dimensions must be positive");
                   }
                   if (s.has_constant.size() != s.attribute_columns.size()) {
                     throw ConfigError("mnl has_constant needs one flag per alternative");
                   }
                   for (const auto& cols : s.attribute_columns) {
                     for (int d : cols) {
                       if (d < 0 || d >= s.input_dim) throw ConfigError("mnl column " + std::to_string(d) + " out of range");
                     }
                   }
                 },
                 [](const TasteNetSpec& s) {
                   if (s.input_dim <= 0 || s.num_alternatives <= 0) {
                     throw ConfigError("tastenet dimensions must be positive");
                   }
                   if (s.hidden_width <= 0) throw ConfigError("tastenet hidden width must be positive");
                   if (s.taste_inputs.empty()) throw ConfigError("tastenet needs at least one taste input");
                   if (s.pairs.empty()) throw ConfigError("tastenet needs at least one taste pair");
                   for (int d : s.taste_inputs) {
                     if (d < 0 || d >= s.input_dim) throw ConfigError("tastenet input " + std::to_string(d) + " out of range");
                   }
                   for (const auto& p : s.pairs) {
                     if (p.alternative < 0 || p.alternative >= s.num_alternatives) {
                       throw ConfigError("tastenet pair alternative out of range");
                     }
                     if (p.column != TastePair::kConstantColumn && (p.column < 0 || p.column >= s.input_dim)) {
                       throw ConfigError("tastenet pair column " + std::to_string(p.column) + " out of range");
                     }
                   }
                 },
             },
             spec);
}

int input_dim(const ModelSpec& spec) {
  return std::visit(Overloaded{[](const MlpSpec& s) { return s.input_dim; },
                               [](const MnlSpec& s) { return s.input_dim; },
                               [](const TasteNetSpec& s) { return s.input_dim; }},
                    spec);
}

int num_alternatives(const ModelSpec& spec) {
  return std::visit(Overloaded{[](const MlpSpec& s) { return s.output_dim; },
                               [](const MnlSpec& s) { return s.num_alternatives(); },
                               [](const TasteNetSpec& s) { return s.num_alternatives; }},
                    spec);
}

std::string model_family(const ModelSpec& spec) {
  return std::visit(Overloaded{[](const MlpSpec&) { return std::string("mlp"); },
                               [](const MnlSpec&) { return std::string("mnl"); },
                               [](const TasteNetSpec&) { return std::string("tastenet"); }},
                    spec);
}

ChoiceModel::ChoiceModel(ModelSpec spec, std::vector<Matrix> parameters, std::uint64_t seed)
    : spec_(std::move(spec)), parameters_(std::move(parameters)), seed_(seed) {
  validate(spec_);
  const auto shapes = parameter_shapes(spec_);
  if (shapes.size() != parameters_.size()) throw StructuralError("parameter count does not match model spec");
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    if (parameters_[k].rows() != shapes[k].first || parameters_[k].cols() != shapes[k].second) {
      throw StructuralError("parameter " + std::to_string(k) + " has the wrong shape");
    }
  }
}

ChoiceModel ChoiceModel::initialize(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  std::vector<Matrix> params;
  const auto shapes = parameter_shapes(spec);
  const bool linear = std::holds_alternative<MnlSpec>(spec);
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const auto [r, c] = shapes[k];
    const bool is_bias = (k % 2) == 1;
    if (linear || is_bias) {
      params.push_back(Matrix::Zero(r, c));
    } else {
      params.push_back(glorot_uniform(r, c, rng));
    }
  }
  return ChoiceModel(spec, std::move(params), seed);
}

Vector ChoiceModel::flat_parameters() const {
  Index total = 0;
  for (const auto& p : parameters_) total += p.size();
  Vector flat(total);
  Index off = 0;
  for (const auto& p : parameters_) {
    flat.segment(off, p.size()) = p.reshaped();
    off += p.size();
  }
  return flat;
}

void ChoiceModel::set_flat_parameters(const Vector& flat) {
  Index total = 0;
  for (const auto& p : parameters_) total += p.size();
  if (flat.size() != total) throw StructuralError("flat parameter vector has the wrong length");
  Index off = 0;
  for (auto& p : parameters_) {
    p.reshaped() = flat.segment(off, p.size());
    off += p.size();
  }
}

ModelGraph build_graph(Tape& tape, const ChoiceModel& model, const Matrix& X) {
  if (X.cols() != model.input_dim()) {
    throw InputError("expected " + std::to_string(model.input_dim()) + " attribute columns, got " +
                     std::to_string(X.cols()));
  }
  check_finite(X);
  ModelGraph g;
  for (const auto& p : model.parameters()) g.parameters.push_back(tape.parameter(p));
  g.input = tape.input(X);
  const auto& P = g.parameters;

  g.utilities = std::visit(
      Overloaded{
          [&](const MlpSpec& s) {
            Var h = g.input;
            for (int layer = 0; layer < s.depth; ++layer) {
              h = dense(h, P[2 * layer], P[2 * layer + 1]);
              if (s.activation == Activation::kRectifier) h = ad::relu(h);
            }
            return dense(h, P[2 * s.depth], P[2 * s.depth + 1]);
          },
          [&](const MnlSpec& s) {
            auto [coef_mask, const_mask] = mnl_masks(s);
            Var w = ad::hadamard(P[0], tape.constant(std::move(coef_mask)));
            Var c = ad::hadamard(P[1], tape.constant(std::move(const_mask)));
            return dense(g.input, w, c);
          },
          [&](const TasteNetSpec& s) {
            const Index K = static_cast<Index>(s.pairs.size());
            std::vector<Index> z_cols(s.taste_inputs.begin(), s.taste_inputs.end());
            Var z = ad::gather_cols(g.input, z_cols);
            Var hidden = ad::relu(dense(z, P[0], P[1]));
            Var raw = dense(hidden, P[2], P[3]);

            std::vector<Index> free_cols;
            std::vector<Index> bound_cols;
            for (Index k = 0; k < K; ++k) {
              (s.pairs[static_cast<std::size_t>(k)].constrained && s.constraint != ConstraintMode::kNone ? bound_cols
                                                                                                        : free_cols)
                  .push_back(k);
            }
            Var beta = raw;
            if (!bound_cols.empty()) {
              Var bound = constrain(ad::gather_cols(raw, bound_cols), s.constraint);
              Var stacked = bound;
              std::vector<Index> order = free_cols;
              order.insert(order.end(), bound_cols.begin(), bound_cols.end());
              if (!free_cols.empty()) stacked = ad::concat_cols(ad::gather_cols(raw, free_cols), bound);
              std::vector<Index> inverse(static_cast<std::size_t>(K));
              for (std::size_t pos = 0; pos < order.size(); ++pos) {
                inverse[static_cast<std::size_t>(order[pos])] = static_cast<Index>(pos);
              }
              beta = ad::gather_cols(stacked, inverse);
            }
            g.tastes = beta;

            const Index D = s.input_dim;
            std::vector<Index> attr(static_cast<std::size_t>(K));
            Matrix aggregate = Matrix::Zero(K, s.num_alternatives);
            for (Index k = 0; k < K; ++k) {
              const auto& pr = s.pairs[static_cast<std::size_t>(k)];
              attr[static_cast<std::size_t>(k)] = pr.column == TastePair::kConstantColumn ? D : pr.column;
              aggregate(k, pr.alternative) = 1.0;
            }
            Var with_ones = ad::concat_cols(g.input, tape.constant(Matrix::Ones(X.rows(), 1)));
            Var attributes = ad::gather_cols(with_ones, attr);
            return ad::matmul(ad::hadamard(beta, attributes), tape.constant(std::move(aggregate)));
          },
      },
      model.spec());

  g.log_probabilities = ad::log_softmax_rows(g.utilities);
  g.probabilities = ad::softmax_rows(g.utilities);
  return g;
}

Var target_node(Tape& tape, const ModelGraph& graph, GradientTarget target, const Matrix* Y) {
  switch (target) {
    case GradientTarget::kProbability:
      return graph.probabilities;
    case GradientTarget::kUtility:
      return graph.utilities;
    case GradientTarget::kLogLik: {
      if (Y == nullptr) throw ConfigError("log-likelihood target requires observed choices");
      const Matrix& lp = graph.log_probabilities.value();
      if (Y->rows() != lp.rows() || Y->cols() != lp.cols()) {
        throw InputError("choice matrix shape does not match the batch");
      }
      return ad::hadamard(tape.constant(-*Y), graph.log_probabilities);
    }
  }
  throw ConfigError("unknown gradient target");
}

Matrix utilities(const ChoiceModel& model, const Matrix& X) {
  Tape tape;
  return build_graph(tape, model, X).utilities.value();
}

Matrix probabilities(const ChoiceModel& model, const Matrix& X) {
  Tape tape;
  return build_graph(tape, model, X).probabilities.value();
}

Matrix target_jacobian(const ChoiceModel& model, const RowVector& x, const RowVector* y, GradientTarget target) {
  if (target == GradientTarget::kLogLik && y == nullptr) {
    throw ConfigError("log-likelihood target requires the observed choice");
  }
  Tape tape;
  ModelGraph g = build_graph(tape, model, Matrix(x));
  Matrix ym;
  if (y != nullptr) ym = Matrix(*y);
  Var out = target_node(tape, g, target, y != nullptr ? &ym : nullptr);
  return ad::input_jacobian(tape, out, g.input);
}

Matrix target_derivative_column(const ChoiceModel& model, const Matrix& X, const Matrix* Y, GradientTarget target,
                                Index column) {
  if (column < 0 || column >= X.cols()) throw InputError("derivative column out of range");
  Tape tape;
  ModelGraph g = build_graph(tape, model, X);
  Var out = target_node(tape, g, target, Y);
  Matrix dir = Matrix::Zero(X.rows(), X.cols());
  dir.col(column).setOnes();
  return ad::jvp(tape, out, g.input, dir).value();
}

double apply_hard_constraint(double raw_taste, ConstraintMode mode) {
  switch (mode) {
    case ConstraintMode::kNone:
      return raw_taste;
    case ConstraintMode::kRectifier:
      return -std::max(0.0, -raw_taste);
    case ConstraintMode::kExponential:
      return -std::exp(-raw_taste);
  }
  return raw_taste;
}

Matrix taste_parameters(const ChoiceModel& model, const Matrix& X) {
  if (!std::holds_alternative<TasteNetSpec>(model.spec())) throw ConfigError("taste parameters need a TasteNet model");
  Tape tape;
  return build_graph(tape, model, X).tastes.value();
}

// ---------------------------------------------------------------------------
// Checkpoint container

std::string serialize_model(const ChoiceModel& model) {
  using nlohmann::json;
  json spec = std::visit(
      Overloaded{
          [](const MlpSpec& s) {
            return json{{"input_dim", s.input_dim},
                        {"output_dim", s.output_dim},
                        {"depth", s.depth},
                        {"width", s.width},
                        {"activation", activation_name(s.activation)}};
          },
          [](const MnlSpec& s) {
            return json{{"input_dim", s.input_dim},
                        {"attribute_columns", s.attribute_columns},
                        {"has_constant", s.has_constant}};
          },
          [](const TasteNetSpec& s) {
            json pairs = json::array();
            for (const auto& p : s.pairs) {
              pairs.push_back({{"alternative", p.alternative}, {"column", p.column}, {"constrained", p.constrained}});
            }
            return json{{"input_dim", s.input_dim},       {"num_alternatives", s.num_alternatives},
                        {"taste_inputs", s.taste_inputs}, {"pairs", pairs},
                        {"hidden_width", s.hidden_width}, {"constraint", constraint_name(s.constraint)}};
          },
      },
      model.spec());
  const Vector flat = model.flat_parameters();
  json doc{{"format", "regchoice-model"},
           {"version", 1},
           {"family", model_family(model.spec())},
           {"spec", spec},
           {"seed", model.seed()},
           {"parameters", std::vector<double>(flat.data(), flat.data() + flat.size())}};
  return doc.dump(1);
}

ChoiceModel deserialize_model(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("model checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "regchoice-model") throw InputError("not a regchoice model checkpoint");
    const std::string family = doc.at("family").get<std::string>();
    const json& s = doc.at("spec");
    ModelSpec spec;
    if (family == "mlp") {
      spec = MlpSpec{s.at("input_dim").get<int>(), s.at("output_dim").get<int>(), s.at("depth").get<int>(),
                     s.at("width").get<int>(), parse_activation(s.at("activation").get<std::string>())};
    } else if (family == "mnl") {
      spec = MnlSpec{s.at("input_dim").get<int>(), s.at("attribute_columns").get<std::vector<std::vector<int>>>(),
                     s.at("has_constant").get<std::vector<bool>>()};
    } else if (family == "tastenet") {
      TasteNetSpec t;
      t.input_dim = s.at("input_dim").get<int>();
      t.num_alternatives = s.at("num_alternatives").get<int>();
      t.taste_inputs = s.at("taste_inputs").get<std::vector<int>>();
      for (const auto& p : s.at("pairs")) {
        t.pairs.push_back({p.at("alternative").get<int>(), p.at("column").get<int>(), p.at("constrained").get<bool>()});
      }
      t.hidden_width = s.at("hidden_width").get<int>();
      t.constraint = parse_constraint(s.at("constraint").get<std::string>());
      spec = t;
    } else {
      throw InputError("unknown model family '" + family + "'");
    }
    ChoiceModel model = ChoiceModel::initialize(spec, doc.at("seed").get<std::uint64_t>());
    const auto flat = doc.at("parameters").get<std::vector<double>>();
    model.set_flat_parameters(Eigen::Map<const Vector>(flat.data(), static_cast<Index>(flat.size())));
    return model;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model checkpoint: ") + e.what());
  }
}

}  // namespace regchoice
