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

#include "regchoice/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "regchoice/errors.hpp"

#ifndef REGCHOICE_VERSION
#define REGCHOICE_VERSION "unknown"
#endif

namespace regchoice {

using nlohmann::json;

const char* version() { return REGCHOICE_VERSION; }

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Enum <-> string tables.
template <typename E>
struct Names {
  std::initializer_list<std::pair<const char*, E>> table;

  const char* name(E value) const {
    for (const auto& [n, v] : table) {
      if (v == value) return n;
    }
    return "?";
  }
  E parse(const std::string& text, const std::string& path) const {
    for (const auto& [n, v] : table) {
      if (text == n) return v;
    }
    std::string options;
    for (const auto& [n, v] : table) options += std::string(options.empty() ? "" : ", ") + n;
    throw ConfigError("unknown value '" + text + "' (expected one of: " + options + ")", path);
  }
};

const Names<Activation> kActivations{{{"rectifier", Activation::kRectifier}, {"identity", Activation::kIdentity}}};
const Names<ConstraintMode> kConstraints{{{"none", ConstraintMode::kNone},
                                          {"rectifier", ConstraintMode::kRectifier},
                                          {"exponential", ConstraintMode::kExponential}}};
const Names<PenaltyKind> kPenaltyKinds{{{"sum", PenaltyKind::kSum}, {"norm", PenaltyKind::kNorm}}};
const Names<GradientTarget> kTargets{{{"probability", GradientTarget::kProbability},
                                      {"utility", GradientTarget::kUtility},
                                      {"loglik", GradientTarget::kLogLik}}};
const Names<OptimizerKind> kOptimizers{
    {{"sgd", OptimizerKind::kSgd}, {"adam", OptimizerKind::kAdam}, {"adamw", OptimizerKind::kAdamW}}};
const Names<SplitScheme> kSchemes{{{"random", SplitScheme::kRandom}, {"sorted", SplitScheme::kSorted}}};
const Names<DerivativeMethod> kMethods{
    {{"exact", DerivativeMethod::kExact}, {"finite_difference", DerivativeMethod::kFiniteDifference}}};
const Names<ExpectedSign> kSigns{
    {{"negative", ExpectedSign::kNegative}, {"positive", ExpectedSign::kPositive}, {"free", ExpectedSign::kFree}}};

// Reads one JSON object, rejecting keys outside `allowed`.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::initializer_list<const char*> allowed)
      : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError("expected an object", path_.empty() ? "<root>" : path_);
    for (const auto& item : obj_.items()) {
      const bool known =
          std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; });
      if (!known) throw ConfigError("unknown key", key(item.key()));
    }
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const char* k) const { return obj_.contains(k) && !obj_.at(k).is_null(); }
  const json& at(const char* k) const { return obj_.at(k); }

  template <typename T>
  void get(const char* k, T& out) const {
    if (!has(k)) return;
    try {
      out = obj_.at(k).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("wrong type", key(k));
    }
  }

  template <typename E>
  void get_enum(const char* k, E& out, const Names<E>& names) const {
    if (!has(k)) return;
    if (!obj_.at(k).is_string()) throw ConfigError("expected a string", key(k));
    out = names.parse(obj_.at(k).get<std::string>(), key(k));
  }

 private:
  const json& obj_;
  std::string path_;
};

void require(bool ok, const std::string& what, const std::string& path) {
  if (!ok) throw ConfigError(what, path);
}

std::string array_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

}  // namespace

std::string file_sha256(const std::string& path) { return sha256_hex(read_file(path)); }

// ---------------------------------------------------------------------------
// Config

RunConfig RunConfig::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what(), "<root>");
  }
  RunConfig c;
  Reader root(doc, "",
              {"data", "split", "standardize", "model", "train", "penalty", "regularity", "sweep", "curve", "eps_sweep",
               "eval", "workers"});

  if (root.has("data")) {
    Reader r(root.at("data"), "data", {"table", "schema", "synthetic"});
    r.get("table", c.data.table);
    r.get("schema", c.data.schema);
    if (r.has("synthetic")) {
      Reader s(r.at("synthetic"), "data.synthetic",
               {"rows", "seed", "irregular", "bump_amplitude", "bump_center", "bump_width"});
      s.get("rows", c.data.synthetic.rows);
      s.get("seed", c.data.synthetic.seed);
      s.get("irregular", c.data.synthetic.irregular);
      s.get("bump_amplitude", c.data.synthetic.bump_amplitude);
      s.get("bump_center", c.data.synthetic.bump_center);
      s.get("bump_width", c.data.synthetic.bump_width);
      require(c.data.synthetic.rows > 0, "must be positive", "data.synthetic.rows");
      require(c.data.synthetic.bump_width > 0, "must be positive", "data.synthetic.bump_width");
    }
    require(c.data.table.empty() || !c.data.schema.empty(), "a table needs a schema file", "data.schema");
  }

  if (root.has("split")) {
    Reader r(root.at("split"), "split",
             {"scheme", "train", "validation", "test", "sort_column", "seed", "pool_size", "external_test_size"});
    r.get_enum("scheme", c.split.scheme, kSchemes);
    r.get("train", c.split.train_fraction);
    r.get("validation", c.split.validation_fraction);
    r.get("test", c.split.test_fraction);
    r.get("sort_column", c.split.sort_column);
    r.get("seed", c.split.seed);
    if (r.has("pool_size")) {
      Index pool = 0;
      r.get("pool_size", pool);
      require(pool > 0, "must be positive", "split.pool_size");
      c.split.pool_size = pool;
    }
    r.get("external_test_size", c.split.external_test_size);
    for (auto [name, v] : {std::pair{"train", c.split.train_fraction}, std::pair{"validation", c.split.validation_fraction},
                           std::pair{"test", c.split.test_fraction}}) {
      require(v >= 0.0 && v <= 1.0, "fraction must lie in [0, 1]", std::string("split.") + name);
    }
    require(c.split.train_fraction + c.split.validation_fraction + c.split.test_fraction <= 1.0 + 1e-9,
            "fractions must sum to at most 1", "split");
    require(c.split.scheme != SplitScheme::kSorted || !c.split.sort_column.empty(), "sorted split needs a column",
            "split.sort_column");
    require(c.split.external_test_size >= 0, "must be nonnegative", "split.external_test_size");
  }

  root.get("standardize", c.standardize);

  if (root.has("model")) {
    Reader r(root.at("model"), "model", {"family", "depth", "width", "activation", "hidden_width", "constraint"});
    r.get("family", c.model.family);
    require(c.model.family == "mlp" || c.model.family == "mnl" || c.model.family == "tastenet",
            "unknown value '" + c.model.family + "' (expected one of: mlp, mnl, tastenet)", "model.family");
    r.get("depth", c.model.depth);
    r.get("width", c.model.width);
    r.get_enum("activation", c.model.activation, kActivations);
    r.get("hidden_width", c.model.hidden_width);
    r.get_enum("constraint", c.model.constraint, kConstraints);
    require(c.model.depth >= 0, "must be nonnegative", "model.depth");
    require(c.model.width > 0, "must be positive", "model.width");
    require(c.model.hidden_width > 0, "must be positive", "model.hidden_width");
  }

  if (root.has("train")) {
    Reader r(root.at("train"), "train",
             {"optimizer", "learning_rate", "batches_per_epoch", "max_epochs", "patience", "seed", "beta1", "beta2",
              "epsilon", "weight_decay", "record_step_objectives"});
    r.get_enum("optimizer", c.train.optimizer, kOptimizers);
    r.get("learning_rate", c.train.learning_rate);
    r.get("batches_per_epoch", c.train.batches_per_epoch);
    r.get("max_epochs", c.train.max_epochs);
    r.get("patience", c.train.patience);
    r.get("seed", c.train.seed);
    r.get("beta1", c.train.optimizer_settings.beta1);
    r.get("beta2", c.train.optimizer_settings.beta2);
    r.get("epsilon", c.train.optimizer_settings.epsilon);
    r.get("weight_decay", c.train.optimizer_settings.weight_decay);
    r.get("record_step_objectives", c.train.record_step_objectives);
  }

  if (root.has("penalty")) {
    Reader r(root.at("penalty"), "penalty", {"kind", "target", "lambda", "signs"});
    r.get_enum("kind", c.train.penalty.kind, kPenaltyKinds);
    r.get_enum("target", c.train.penalty.target, kTargets);
    r.get("lambda", c.train.penalty.lambda);
    require(c.train.penalty.lambda >= 0.0 && std::isfinite(c.train.penalty.lambda), "must be finite and nonnegative",
            "penalty.lambda");
    if (r.has("signs")) {
      require(r.at("signs").is_array(), "expected an array", "penalty.signs");
      for (std::size_t i = 0; i < r.at("signs").size(); ++i) {
        const std::string p = array_path("penalty.signs", i);
        Reader e(r.at("signs")[i], p, {"alternative", "column", "sign"});
        SignEntry entry;
        e.get("alternative", entry.alternative);
        e.get("column", entry.column);
        e.get_enum("sign", entry.sign, kSigns);
        require(!entry.alternative.empty(), "required", p + ".alternative");
        require(!entry.column.empty(), "required", p + ".column");
        c.signs.push_back(entry);
      }
    }
  }
  c.train.validate();

  if (root.has("regularity")) {
    Reader r(root.at("regularity"), "regularity", {"epsilon_strong", "epsilon_weak", "method", "fd_step", "pairs"});
    r.get("epsilon_strong", c.regularity.epsilon_strong);
    r.get("epsilon_weak", c.regularity.epsilon_weak);
    r.get_enum("method", c.regularity.method, kMethods);
    r.get("fd_step", c.regularity.fd_step);
    require(c.regularity.fd_step > 0.0, "must be positive", "regularity.fd_step");
    if (r.has("pairs")) {
      require(r.at("pairs").is_array(), "expected an array", "regularity.pairs");
      for (std::size_t i = 0; i < r.at("pairs").size(); ++i) {
        const std::string p = array_path("regularity.pairs", i);
        Reader e(r.at("pairs")[i], p, {"alternative", "column"});
        std::pair<std::string, std::string> pair;
        e.get("alternative", pair.first);
        e.get("column", pair.second);
        require(!pair.first.empty(), "required", p + ".alternative");
        require(!pair.second.empty(), "required", p + ".column");
        c.regularity.pairs.push_back(pair);
      }
    }
  }

  if (root.has("sweep")) {
    Reader r(root.at("sweep"), "sweep", {"lambdas", "replications", "regularity_floor"});
    r.get("lambdas", c.sweep.lambdas);
    r.get("replications", c.sweep.replications);
    r.get("regularity_floor", c.sweep.regularity_floor);
    require(!c.sweep.lambdas.empty(), "must not be empty", "sweep.lambdas");
    for (std::size_t i = 0; i < c.sweep.lambdas.size(); ++i) {
      require(c.sweep.lambdas[i] >= 0.0 && std::isfinite(c.sweep.lambdas[i]), "must be finite and nonnegative",
              array_path("sweep.lambdas", i));
    }
    require(c.sweep.replications >= 1, "must be at least 1", "sweep.replications");
  }

  if (root.has("curve")) {
    Reader r(root.at("curve"), "curve", {"alternative", "column", "grid_size", "checkpoints"});
    r.get("alternative", c.curve.alternative);
    r.get("column", c.curve.column);
    r.get("grid_size", c.curve.grid_size);
    r.get("checkpoints", c.curve.checkpoints);
    require(c.curve.grid_size >= 1, "must be at least 1", "curve.grid_size");
  }

  if (root.has("eps_sweep")) {
    Reader r(root.at("eps_sweep"), "eps_sweep", {"alternative", "column", "epsilons", "checkpoint"});
    r.get("alternative", c.eps_sweep.alternative);
    r.get("column", c.eps_sweep.column);
    r.get("epsilons", c.eps_sweep.epsilons);
    r.get("checkpoint", c.eps_sweep.checkpoint);
    require(!c.eps_sweep.epsilons.empty(), "must not be empty", "eps_sweep.epsilons");
    require(std::is_sorted(c.eps_sweep.epsilons.begin(), c.eps_sweep.epsilons.end()), "must be ascending",
            "eps_sweep.epsilons");
  }

  if (root.has("eval")) {
    Reader r(root.at("eval"), "eval", {"checkpoint", "split", "table"});
    r.get("checkpoint", c.eval.checkpoint);
    r.get("split", c.eval.split);
    r.get("table", c.eval.table);
    require(c.eval.split == "train" || c.eval.split == "validation" || c.eval.split == "test",
            "unknown value '" + c.eval.split + "' (expected one of: train, validation, test)", "eval.split");
  }

  root.get("workers", c.workers);
  require(c.workers >= 1, "must be at least 1", "workers");
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const InputError& e) {
    throw ConfigError(e.what(), "--config");
  }
  return from_json(text);
}

std::string RunConfig::to_json() const {
  json signs_json = json::array();
  for (const auto& s : signs) {
    signs_json.push_back({{"alternative", s.alternative}, {"column", s.column}, {"sign", kSigns.name(s.sign)}});
  }
  json pairs_json = json::array();
  for (const auto& [alt, col] : regularity.pairs) pairs_json.push_back({{"alternative", alt}, {"column", col}});
  json doc;
  doc["data"] = {{"table", data.table},
                 {"schema", data.schema},
                 {"synthetic",
                  {{"rows", data.synthetic.rows},
                   {"seed", data.synthetic.seed},
                   {"irregular", data.synthetic.irregular},
                   {"bump_amplitude", data.synthetic.bump_amplitude},
                   {"bump_center", data.synthetic.bump_center},
                   {"bump_width", data.synthetic.bump_width}}}};
  doc["split"] = {{"scheme", kSchemes.name(split.scheme)},
                  {"train", split.train_fraction},
                  {"validation", split.validation_fraction},
                  {"test", split.test_fraction},
                  {"sort_column", split.sort_column},
                  {"seed", split.seed},
                  {"pool_size", split.pool_size ? json(*split.pool_size) : json(nullptr)},
                  {"external_test_size", split.external_test_size}};
  doc["standardize"] = standardize;
  doc["model"] = {{"family", model.family},
                  {"depth", model.depth},
                  {"width", model.width},
                  {"activation", kActivations.name(model.activation)},
                  {"hidden_width", model.hidden_width},
                  {"constraint", kConstraints.name(model.constraint)}};
  doc["train"] = {{"optimizer", kOptimizers.name(train.optimizer)},
                  {"learning_rate", train.learning_rate},
                  {"batches_per_epoch", train.batches_per_epoch},
                  {"max_epochs", train.max_epochs},
                  {"patience", train.patience},
                  {"seed", train.seed},
                  {"beta1", train.optimizer_settings.beta1},
                  {"beta2", train.optimizer_settings.beta2},
                  {"epsilon", train.optimizer_settings.epsilon},
                  {"weight_decay", train.optimizer_settings.weight_decay},
                  {"record_step_objectives", train.record_step_objectives}};
  doc["penalty"] = {{"kind", kPenaltyKinds.name(train.penalty.kind)},
                    {"target", kTargets.name(train.penalty.target)},
                    {"lambda", train.penalty.lambda},
                    {"signs", signs_json}};
  doc["regularity"] = {{"epsilon_strong", regularity.epsilon_strong},
                       {"epsilon_weak", regularity.epsilon_weak},
                       {"method", kMethods.name(regularity.method)},
                       {"fd_step", regularity.fd_step},
                       {"pairs", pairs_json}};
  doc["sweep"] = {
      {"lambdas", sweep.lambdas}, {"replications", sweep.replications}, {"regularity_floor", sweep.regularity_floor}};
  doc["curve"] = {{"alternative", curve.alternative},
                  {"column", curve.column},
                  {"grid_size", curve.grid_size},
                  {"checkpoints", curve.checkpoints}};
  doc["eps_sweep"] = {{"alternative", eps_sweep.alternative},
                      {"column", eps_sweep.column},
                      {"epsilons", eps_sweep.epsilons},
                      {"checkpoint", eps_sweep.checkpoint}};
  doc["eval"] = {{"checkpoint", eval.checkpoint}, {"split", eval.split}, {"table", eval.table}};
  doc["workers"] = workers;
  return doc.dump(2);
}

std::string RunManifest::to_json() const {
  json doc;
  doc["command"] = command;
  doc["config"] = json::parse(resolved_config.empty() ? "{}" : resolved_config);
  doc["seeds"] = seeds;
  doc["code_version"] = code_version;
  doc["input_digests"] = input_digests;
  doc["timings_seconds"] = timings;
  return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Resolution

PreparedData prepare_data(const RunConfig& config, RunManifest* manifest) {
  PreparedData p;
  if (config.data.table.empty()) {
    SyntheticData synth = synthesize(config.data.synthetic);
    p.schema = synth.schema;
    p.full = std::move(synth.data);
    p.teacher = synth.teacher;
    if (manifest) manifest->seeds.push_back(config.data.synthetic.seed);
  } else {
    try {
      p.schema = SchemaSpec::load(config.data.schema);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), "data.schema");
    }
    p.full = load_table(config.data.table, p.schema);
    if (manifest) {
      manifest->input_digests[config.data.schema] = file_sha256(config.data.schema);
      manifest->input_digests[config.data.table] = file_sha256(config.data.table);
    }
  }
  try {
    p.raw = split(p.full, config.split);
  } catch (const ConfigError& e) {
    if (!e.key_path().empty()) throw;
    throw ConfigError(e.what(), "split");
  }
  if (manifest) manifest->seeds.push_back(config.split.seed);
  if (config.standardize) {
    auto [s, rec] = standardize(p.raw);
    p.splits = std::move(s);
    p.scaling = std::move(rec);
  } else {
    p.splits = p.raw;
  }
  return p;
}

ModelSpec resolve_model(const ModelConfig& config, const Dataset& train) {
  if (config.family == "mnl") return travel_mnl_spec(train);
  if (config.family == "tastenet") return travel_tastenet_spec(train, config.constraint, config.hidden_width);
  if (config.family == "mlp") {
    MlpSpec s = travel_mlp_spec(train, config.depth, config.width);
    s.activation = config.activation;
    return s;
  }
  throw ConfigError("unknown model family '" + config.family + "'", "model.family");
}

namespace {

int column_at(const Dataset& d, const std::string& name, const std::string& path) {
  try {
    return d.column_index(name);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), path);
  }
}

int alternative_at(const Dataset& d, const std::string& label, const std::string& path) {
  try {
    return d.alternative_index(label);
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), path);
  }
}

}  // namespace

SignSpec resolve_signs(const RunConfig& config, const Dataset& train) {
  const int J = train.num_alternatives();
  const int D = train.attributes();
  if (config.signs.empty()) return SignSpec::negative_on(J, D, direct_cost_pairs(train));
  SignSpec spec(J, D);
  for (std::size_t i = 0; i < config.signs.size(); ++i) {
    const std::string p = array_path("penalty.signs", i);
    spec.set(alternative_at(train, config.signs[i].alternative, p + ".alternative"),
             column_at(train, config.signs[i].column, p + ".column"), config.signs[i].sign);
  }
  return spec;
}

RegularityConfig resolve_regularity(const RunConfig& config, const Dataset& train) {
  RegularityConfig r;
  r.epsilon_strong = config.regularity.epsilon_strong;
  r.epsilon_weak = config.regularity.epsilon_weak;
  r.method = config.regularity.method;
  r.fd_step = config.regularity.fd_step;
  if (config.regularity.pairs.empty()) {
    const SignSpec signs = resolve_signs(config, train);
    for (int i = 0; i < signs.alternatives(); ++i) {
      for (int d = 0; d < signs.attributes(); ++d) {
        if (signs.at(i, d) == ExpectedSign::kNegative) r.pairs.push_back({i, d});
      }
    }
  } else {
    for (std::size_t i = 0; i < config.regularity.pairs.size(); ++i) {
      const std::string p = array_path("regularity.pairs", i);
      r.pairs.push_back({alternative_at(train, config.regularity.pairs[i].first, p + ".alternative"),
                         column_at(train, config.regularity.pairs[i].second, p + ".column")});
    }
  }
  if (train.rows() > 0) r.column_range = (train.X().colwise().maxCoeff() - train.X().colwise().minCoeff()).transpose();
  try {
    r.validate();
  } catch (const ConfigError& e) {
    if (!e.key_path().empty()) throw;
    throw ConfigError(e.what(), "regularity");
  }
  return r;
}

TrainConfig resolve_train(const RunConfig& config, const Dataset& train) {
  TrainConfig t = config.train;
  t.sign_spec = resolve_signs(config, train);
  return t;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string Checkpoint::to_json() const {
  json doc;
  doc["format"] = "regchoice-checkpoint";
  doc["standardized"] = standardized;
  doc["scaling"] = standardized ? json::parse(scaling.to_json()) : json(nullptr);
  doc["model"] = json::parse(serialize_model(model));
  return doc.dump(1);
}

Checkpoint Checkpoint::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  Checkpoint c;
  try {
    if (doc.at("format").get<std::string>() != "regchoice-checkpoint") throw InputError("not a regchoice checkpoint");
    c.standardized = doc.at("standardized").get<bool>();
    if (c.standardized) c.scaling = ScalingRecord::from_json(doc.at("scaling").dump());
    c.model = deserialize_model(doc.at("model").dump());
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Comparison tables

namespace {

double comparable(const MetricsReport& mean, int metric) {
  const double v = metric_value(mean, metric);
  return metric == 0 ? -std::abs(v) : v;
}

std::string sig4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::vector<int>> compare_flags(std::span<const ReportGroup> groups) {
  std::vector<std::vector<int>> flags(std::size(kMetricNames), std::vector<int>(groups.size(), 0));
  if (groups.empty()) return flags;
  for (int m = 0; m < static_cast<int>(std::size(kMetricNames)); ++m) {
    double best = -INFINITY;
    for (const auto& g : groups) best = std::max(best, comparable(g.summary.mean, m));
    double second = -INFINITY;
    bool has_second = false;
    for (std::size_t k = 0; k < groups.size(); ++k) {
      const double v = comparable(groups[k].summary.mean, m);
      if (v == best) {
        flags[m][k] = 1;
      } else if (!has_second || v > second) {
        second = v;
        has_second = true;
      }
    }
    if (!has_second) continue;
    for (std::size_t k = 0; k < groups.size(); ++k) {
      if (flags[m][k] == 0 && comparable(groups[k].summary.mean, m) == second) flags[m][k] = 2;
    }
  }
  return flags;
}

std::string compare_table(std::span<const ReportGroup> groups) {
  const auto flags = compare_flags(groups);
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"metric"};
  for (const auto& g : groups) header.push_back(g.label);
  cells.push_back(header);
  for (int m = 0; m < static_cast<int>(std::size(kMetricNames)); ++m) {
    std::vector<std::string> row{kMetricNames[m]};
    for (std::size_t k = 0; k < groups.size(); ++k) {
      std::string cell = sig4(metric_value(groups[k].summary.mean, m)) + " (" +
                         sig4(metric_value(groups[k].summary.sd, m)) + ")";
      if (flags[m][k] == 1) cell += "*";
      if (flags[m][k] == 2) cell += "+";
      row.push_back(cell);
    }
    cells.push_back(row);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) os << "  ";
      os << row[c] << std::string(width[c] - row[c].size(), ' ');
    }
    os << '\n';
  }
  os << "* best, + second best\n";
  return os.str();
}

std::string compare_csv(std::span<const ReportGroup> groups) {
  const auto flags = compare_flags(groups);
  std::ostringstream os;
  os << "metric,group,mean,sd,count,flag\n";
  for (int m = 0; m < static_cast<int>(std::size(kMetricNames)); ++m) {
    for (std::size_t k = 0; k < groups.size(); ++k) {
      os << kMetricNames[m] << ',' << groups[k].label << ',' << full(metric_value(groups[k].summary.mean, m)) << ','
         << full(metric_value(groups[k].summary.sd, m)) << ',' << groups[k].summary.count << ','
         << (flags[m][k] == 1 ? "best" : flags[m][k] == 2 ? "second" : "") << '\n';
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Commands

std::string usage() {
  std::ostringstream os;
  os << "usage: regchoice <command> --config <path> [--out <dir>] [--workers <n>] [--seed <int>]\n"
     << "commands:\n"
     << "  split      split a table and write the splits and scaling record\n"
     << "  synth      generate a synthetic travel-mode table\n"
     << "  train      train one model and write a checkpoint\n"
     << "  sweep      train lambda x replication grid and write metric tables\n"
     << "  eval       evaluate a checkpoint on a split or table\n"
     << "  curve      write demand curves of the average individual\n"
     << "  eps-sweep  write regularity as a function of epsilon\n";
  return os.str();
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string metrics_csv(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::ostringstream os;
  os << "split";
  for (const char* m : kMetricNames) os << ',' << m;
  os << '\n';
  for (const auto& [name, r] : rows) {
    os << name;
    for (int m = 0; m < 5; ++m) os << ',' << full(metric_value(r, m));
    os << '\n';
  }
  return os.str();
}

std::string summary_lines(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::ostringstream os;
  for (const auto& [name, r] : rows) {
    for (int m = 0; m < 5; ++m) os << name << '.' << kMetricNames[m] << '=' << full(metric_value(r, m)) << '\n';
  }
  return os.str();
}

std::string group_label(const RunConfig& c, double lambda) {
  std::ostringstream os;
  os << c.model.family << '/' << kPenaltyKinds.name(c.train.penalty.kind) << '-' << kTargets.name(c.train.penalty.target)
     << " lambda=" << sig4(lambda);
  return os.str();
}

const Dataset& split_named(const Splits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "validation") return s.validation;
  return s.test;
}

Dataset to_model_space(const Dataset& raw, const Checkpoint& ck) {
  return ck.standardized ? raw.with_attributes(ck.scaling.apply(raw.X())) : raw;
}

Checkpoint load_checkpoint(const std::string& path, const std::string& key, RunManifest& manifest) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const InputError& e) {
    throw ConfigError(e.what(), key);
  }
  manifest.input_digests[path] = sha256_hex(text);
  return Checkpoint::from_json(text);
}

// (alternative, column) for curve and eps-sweep: explicit names, or the first
// direct-cost pair.
std::pair<int, int> resolve_pair(const Dataset& train, const std::string& alt, const std::string& col,
                                 const std::string& section) {
  if (alt.empty() && col.empty()) {
    const auto pairs = direct_cost_pairs(train);
    if (pairs.empty()) throw ConfigError("no cost column to default to", section + ".column");
    return pairs.front();
  }
  if (alt.empty()) throw ConfigError("required", section + ".alternative");
  if (col.empty()) throw ConfigError("required", section + ".column");
  return {alternative_at(train, alt, section + ".alternative"), column_at(train, col, section + ".column")};
}

Checkpoint trained_checkpoint(const RunConfig& c, const PreparedData& p, std::uint64_t seed) {
  TrainConfig t = resolve_train(c, p.splits.train);
  t.seed = seed;
  TrainResult r = train(resolve_model(c.model, p.splits.train), p.splits, t);
  return Checkpoint{std::move(r.model), c.standardize, p.scaling};
}

int execute(const std::string& command, const RunConfig& c, const std::filesystem::path& out_dir, std::ostream& out,
            RunManifest& manifest) {
  const auto t0 = Clock::now();

  if (command == "synth") {
    if (!c.data.table.empty()) throw ConfigError("synth uses the synthetic generator; remove the table", "data.table");
    SyntheticData s = synthesize(c.data.synthetic);
    manifest.seeds.push_back(c.data.synthetic.seed);
    write_file(out_dir / "data.csv", format_table(s.data));
    write_file(out_dir / "schema.json", s.schema.to_json());
    json teacher;
    for (Index i = 0; i < s.teacher.coefficients.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(s.teacher.coefficients.cols()));
      for (Index d = 0; d < s.teacher.coefficients.cols(); ++d) row[static_cast<std::size_t>(d)] = s.teacher.coefficients(i, d);
      teacher["coefficients"].push_back(row);
    }
    teacher["constants"] =
        std::vector<double>(s.teacher.constants.data(), s.teacher.constants.data() + s.teacher.constants.size());
    teacher["bump"] = {{"amplitude", s.teacher.bump_amplitude},
                       {"center", s.teacher.bump_center},
                       {"width", s.teacher.bump_width},
                       {"alternative", s.teacher.bump_alternative},
                       {"column", s.teacher.bump_column}};
    write_file(out_dir / "teacher.json", teacher.dump(2));
    manifest.timings["synth"] = seconds_since(t0);
    out << "rows=" << s.data.rows() << '\n';
    return 0;
  }

  const PreparedData p = prepare_data(c, &manifest);
  manifest.timings["prepare_data"] = seconds_since(t0);

  if (command == "split") {
    write_file(out_dir / "train.csv", format_table(p.raw.train));
    write_file(out_dir / "validation.csv", format_table(p.raw.validation));
    write_file(out_dir / "test.csv", format_table(p.raw.test));
    write_file(out_dir / "split_manifest.json", split_manifest(p.raw));
    if (c.standardize) write_file(out_dir / "scaling.json", p.scaling.to_json());
    out << "train=" << p.raw.train.rows() << " validation=" << p.raw.validation.rows()
        << " test=" << p.raw.test.rows() << '\n';
    return 0;
  }

  const RegularityConfig reg = resolve_regularity(c, p.splits.train);

  if (command == "train") {
    const auto t1 = Clock::now();
    TrainConfig t = resolve_train(c, p.splits.train);
    manifest.seeds.push_back(t.seed);
    TrainResult r = train(resolve_model(c.model, p.splits.train), p.splits, t);
    manifest.timings["train"] = seconds_since(t1);
    std::vector<std::pair<std::string, MetricsReport>> rows{{"train", evaluate(r.model, p.splits.train, reg)},
                                                            {"validation", evaluate(r.model, p.splits.validation, reg)}};
    if (p.splits.test.rows() > 0) rows.emplace_back("test", evaluate(r.model, p.splits.test, reg));
    write_file(out_dir / "checkpoint.json", Checkpoint{r.model, c.standardize, p.scaling}.to_json());
    write_file(out_dir / "history.csv", r.history.to_table());
    write_file(out_dir / "metrics.csv", metrics_csv(rows));
    write_file(out_dir / "summary.txt",
               summary_lines(rows) + "best_epoch=" + std::to_string(r.history.best_epoch) + "\n");
    out << summary_lines(rows);
    return 0;
  }

  if (command == "sweep") {
    const auto t1 = Clock::now();
    TrainConfig base = resolve_train(c, p.splits.train);
    SweepOptions opts;
    opts.replications = c.sweep.replications;
    opts.workers = c.workers;
    opts.regularity = reg;
    for (int r = 0; r < c.sweep.replications; ++r) manifest.seeds.push_back(base.seed + static_cast<std::uint64_t>(r));
    const SweepResult s =
        lambda_sweep(resolve_model(c.model, p.splits.train), p.splits, base, c.sweep.lambdas, opts);
    manifest.timings["sweep"] = seconds_since(t1);
    const std::filesystem::path cell_dir = out_dir / "cells";
    std::filesystem::create_directories(cell_dir);
    for (std::size_t l = 0; l < s.lambdas.size(); ++l) {
      for (int r = 0; r < s.replications; ++r) {
        const SweepCell& cell = s.cell(l, r);
        std::vector<std::pair<std::string, MetricsReport>> rows{
            {"train", cell.metrics.train}, {"validation", cell.metrics.validation}, {"test", cell.metrics.test}};
        write_file(cell_dir / ("lambda" + std::to_string(l) + "_rep" + std::to_string(r) + ".txt"),
                   "lambda=" + full(cell.lambda) + "\nseed=" + std::to_string(cell.seed) + "\n" + summary_lines(rows));
      }
    }
    std::vector<ReportGroup> groups;
    for (std::size_t l = 0; l < s.lambdas.size(); ++l) {
      groups.push_back({group_label(c, s.lambdas[l]), s.summary(l, SplitName::kTest)});
    }
    const LambdaChoice choice = select_optimal_lambda(s, c.sweep.regularity_floor);
    write_file(out_dir / "sweep_summary.csv", s.to_table());
    write_file(out_dir / "sweep_cells.csv", s.cells_table());
    write_file(out_dir / "metrics_table.txt", compare_table(groups));
    write_file(out_dir / "metrics_table.csv", compare_csv(groups));
    const std::string selection =
        "selected_lambda=" + full(choice.lambda) + "\nfallback=" + (choice.fallback ? "true" : "false") + "\n";
    write_file(out_dir / "summary.txt", selection);
    out << compare_table(groups) << selection;
    return 0;
  }

  if (command == "eval") {
    if (c.eval.checkpoint.empty()) throw ConfigError("required", "eval.checkpoint");
    const Checkpoint ck = load_checkpoint(c.eval.checkpoint, "eval.checkpoint", manifest);
    Dataset raw;
    if (c.eval.table.empty()) {
      raw = split_named(p.raw, c.eval.split);
    } else {
      raw = load_table(c.eval.table, p.schema);
      manifest.input_digests[c.eval.table] = file_sha256(c.eval.table);
    }
    // Regularity ranges come from the training split in the checkpoint's input space.
    const RegularityConfig ck_reg = resolve_regularity(c, to_model_space(p.raw.train, ck));
    const MetricsReport report = evaluate(ck.model, to_model_space(raw, ck), ck_reg);
    write_file(out_dir / "metrics.txt", report.to_record());
    out << report.to_record();
    return 0;
  }

  if (command == "curve") {
    std::vector<Checkpoint> ensemble;
    const auto t1 = Clock::now();
    if (c.curve.checkpoints.empty()) {
      for (int r = 0; r < c.sweep.replications; ++r) {
        const std::uint64_t seed = c.train.seed + static_cast<std::uint64_t>(r);
        manifest.seeds.push_back(seed);
        ensemble.push_back(trained_checkpoint(c, p, seed));
      }
    } else {
      for (std::size_t k = 0; k < c.curve.checkpoints.size(); ++k) {
        ensemble.push_back(load_checkpoint(c.curve.checkpoints[k], array_path("curve.checkpoints", k), manifest));
      }
    }
    manifest.timings["models"] = seconds_since(t1);
    // Curves are computed in the first model's input space; every member must share it.
    const Checkpoint& ref = ensemble.front();
    for (const auto& ck : ensemble) {
      if (ck.standardized != ref.standardized || (ck.standardized && (ck.scaling.mean != ref.scaling.mean ||
                                                                      ck.scaling.scale != ref.scaling.scale))) {
        throw ConfigError("checkpoints were trained on different scalings", "curve.checkpoints");
      }
    }
    const Dataset train = to_model_space(p.raw.train, ref);
    const auto [alt, col] = resolve_pair(train, c.curve.alternative, c.curve.column, "curve");
    std::vector<ChoiceModel> models;
    for (const auto& ck : ensemble) models.push_back(ck.model);
    DemandCurve curve = demand_curve(models, train, alt, col, c.curve.grid_size);
    if (ref.standardized && ref.scaling.scaled[static_cast<std::size_t>(col)]) {
      curve.grid = (curve.grid.array() * ref.scaling.scale(col) + ref.scaling.mean(col)).matrix();
    }
    const std::string name = train.features()[static_cast<std::size_t>(col)].name;
    write_file(out_dir / ("curve_" + train.alternatives()[static_cast<std::size_t>(alt)] + "_" + name + ".csv"),
               curve.to_table(name));
    out << "models=" << models.size() << " grid=" << curve.grid.size() << '\n';
    return 0;
  }

  if (command == "eps-sweep") {
    Checkpoint ck;
    if (c.eps_sweep.checkpoint.empty()) {
      manifest.seeds.push_back(c.train.seed);
      ck = trained_checkpoint(c, p, c.train.seed);
    } else {
      ck = load_checkpoint(c.eps_sweep.checkpoint, "eps_sweep.checkpoint", manifest);
    }
    const Dataset train = to_model_space(p.raw.train, ck);
    const auto [alt, col] = resolve_pair(train, c.eps_sweep.alternative, c.eps_sweep.column, "eps_sweep");
    const RegularityConfig ck_reg = resolve_regularity(c, train);
    const EpsilonSweep sweep =
        epsilon_sweep(ck.model, to_model_space(p.raw.test.rows() > 0 ? p.raw.test : p.raw.validation, ck),
                      RegularityPair{alt, col}, c.eps_sweep.epsilons, ck_reg);
    write_file(out_dir / "eps_sweep.csv", sweep.to_table());
    out << sweep.to_table();
    return 0;
  }

  throw std::logic_error("unhandled command " + command);
}

}  // namespace

int run(const std::string& command, const CliOptions& options, std::ostream& out, std::ostream& err) {
  if (std::find_if(std::begin(kCommands), std::end(kCommands), [&](const char* c) { return command == c; }) ==
      std::end(kCommands)) {
    err << "unknown command '" << command << "'\n" << usage();
    return 2;
  }
  const auto start = Clock::now();
  RunConfig config;
  try {
    if (!options.config.empty()) config = RunConfig::load(options.config);
    if (options.workers) {
      if (*options.workers < 1) throw ConfigError("must be at least 1", "--workers");
      config.workers = *options.workers;
    }
    if (options.seed) config.train.seed = *options.seed;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  }

  RunManifest manifest;
  manifest.command = command;
  manifest.resolved_config = config.to_json();
  if (!options.config.empty()) manifest.input_digests[options.config] = file_sha256(options.config);

  try {
    const std::filesystem::path out_dir(options.out);
    std::filesystem::create_directories(out_dir);
    const int status = execute(command, config, out_dir, out, manifest);
    manifest.timings["total"] = seconds_since(start);
    write_file(out_dir / "manifest.json", manifest.to_json());
    return status;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DivergenceError& e) {
    err << "training failed: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace regchoice
