/*
 * Copyright 2026 The ultr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "ultr/config.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "ultr/errors.h"
#include "ultr/hashing.h"
#include "ultr/text_format.h"

namespace ultr {

std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::kByGradeDesc: return "by_grade_desc";
    case PolicyKind::kRandom: return "random";
    case PolicyKind::kWeakRanker: return "weak_ranker";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view name) {
  for (auto p : {PolicyKind::kByGradeDesc, PolicyKind::kRandom, PolicyKind::kWeakRanker}) {
    if (to_string(p) == name) return p;
  }
  throw ValidationError("unknown policy '" + std::string(name) + "'");
}

std::string_view to_string(EmInit e) { return e == EmInit::kFresh ? "fresh" : "naive"; }

EmInit parse_em_init(std::string_view name) {
  if (name == "fresh") return EmInit::kFresh;
  if (name == "naive") return EmInit::kNaive;
  throw ValidationError("unknown em.init '" + std::string(name) + "'");
}

std::string_view to_string(GammaSource g) { return g == GammaSource::kEm ? "em" : "self"; }

GammaSource parse_gamma_source(std::string_view name) {
  if (name == "em") return GammaSource::kEm;
  if (name == "self") return GammaSource::kSelf;
  throw ValidationError("unknown gamma source '" + std::string(name) + "'");
}

RunConfig::RunConfig() {
  // Pipeline defaults; the library structs keep their own neutral defaults.
  em.alpha0 = 0.5;
  em.epochs = 10;
  em.head_lr = 0.3;
  em.freeze_gamma = true;
  train.lr = 3e-4;
  train.loss.variant = LossVariant::kOpt;
}

namespace {

struct Option {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ValidationError("config: bad value '" + std::string(value) + "' for " +
                        std::string(key));
}

double to_real(std::string_view key, std::string_view v) {
  auto d = parse_double(v);
  if (!d) bad_value(key, v);
  return *d;
}

std::int64_t to_int(std::string_view key, std::string_view v) {
  auto i = parse_int(v);
  if (!i) bad_value(key, v);
  return *i;
}

std::uint64_t to_count(std::string_view key, std::string_view v) {
  const auto i = to_int(key, v);
  if (i < 0) bad_value(key, v);
  return static_cast<std::uint64_t>(i);
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v);
}

std::string join_sizes(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) out += (k ? "," : "") + std::to_string(xs[k]);
  return out;
}

std::string join_reals(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t k = 0; k < xs.size(); ++k) out += (k ? "," : "") + format_double(xs[k]);
  return out;
}

template <typename T>
using Ref = std::function<T&(RunConfig&)>;

template <typename T>
T& at(const Ref<T>& ref, const RunConfig& c) {
  return ref(const_cast<RunConfig&>(c));
}

Option real(std::string key, Ref<double> ref) {
  return {key, [ref](const RunConfig& c) { return format_double(at(ref, c)); },
          [ref, key](RunConfig& c, std::string_view v) { ref(c) = to_real(key, v); }};
}

Option integer(std::string key, Ref<int> ref) {
  return {key, [ref](const RunConfig& c) { return std::to_string(at(ref, c)); },
          [ref, key](RunConfig& c, std::string_view v) {
            ref(c) = static_cast<int>(to_int(key, v));
          }};
}

Option count(std::string key, Ref<std::size_t> ref) {
  return {key, [ref](const RunConfig& c) { return std::to_string(at(ref, c)); },
          [ref, key](RunConfig& c, std::string_view v) {
            ref(c) = static_cast<std::size_t>(to_count(key, v));
          }};
}

Option seed(std::string key, Ref<std::uint64_t> ref) {
  return {key, [ref](const RunConfig& c) { return std::to_string(at(ref, c)); },
          [ref, key](RunConfig& c, std::string_view v) { ref(c) = to_count(key, v); }};
}

Option flag(std::string key, Ref<bool> ref) {
  return {key, [ref](const RunConfig& c) { return std::string(at(ref, c) ? "true" : "false"); },
          [ref, key](RunConfig& c, std::string_view v) { ref(c) = to_bool(key, v); }};
}

Option text(std::string key, Ref<std::string> ref) {
  return {key, [ref](const RunConfig& c) { return at(ref, c); },
          [ref](RunConfig& c, std::string_view v) { ref(c) = std::string(v); }};
}

template <typename E>
Option named(std::string key, Ref<E> ref, E (*parse)(std::string_view)) {
  return {key, [ref](const RunConfig& c) { return std::string(to_string(at(ref, c))); },
          [ref, parse](RunConfig& c, std::string_view v) { ref(c) = parse(v); }};
}

CombineKind parse_combine(std::string_view v) {
  if (v == "sum") return CombineKind::kWeightedSum;
  if (v == "product") return CombineKind::kWeightedProduct;
  throw ValidationError("unknown sim.combine '" + std::string(v) + "'");
}

DeltaZOrder parse_delta_z(std::string_view v) {
  if (v == "model") return DeltaZOrder::kModel;
  if (v == "logged") return DeltaZOrder::kLogged;
  throw ValidationError("unknown train.delta_z_order '" + std::string(v) + "'");
}

const std::vector<Option>& registry() {
  static const std::vector<Option> options = [] {
    std::vector<Option> o;
    o.push_back(text("data.train", [](RunConfig& c) -> auto& { return c.data.train_path; }));
    o.push_back(text("data.valid", [](RunConfig& c) -> auto& { return c.data.valid_path; }));
    o.push_back(text("data.test", [](RunConfig& c) -> auto& { return c.data.test_path; }));
    o.push_back(count("data.synthetic.train_queries",
                      [](RunConfig& c) -> auto& { return c.data.train_queries; }));
    o.push_back(count("data.synthetic.valid_queries",
                      [](RunConfig& c) -> auto& { return c.data.valid_queries; }));
    o.push_back(count("data.synthetic.test_queries",
                      [](RunConfig& c) -> auto& { return c.data.test_queries; }));
    o.push_back(count("data.synthetic.docs_per_query",
                      [](RunConfig& c) -> auto& { return c.data.synthetic.docs_per_query; }));
    o.push_back(count("data.synthetic.feature_dim",
                      [](RunConfig& c) -> auto& { return c.data.synthetic.feature_dim; }));
    o.push_back(real("data.synthetic.label_noise",
                     [](RunConfig& c) -> auto& { return c.data.synthetic.label_noise; }));
    o.push_back(seed("data.seed", [](RunConfig& c) -> auto& { return c.data.seed; }));
    o.push_back(flag("data.normalize", [](RunConfig& c) -> auto& { return c.data.normalize; }));

    o.push_back(real("sim.eta", [](RunConfig& c) -> auto& { return c.sim.eta; }));
    o.push_back(real("sim.noise_eps", [](RunConfig& c) -> auto& { return c.sim.noise_eps; }));
    o.push_back(integer("sim.list_size", [](RunConfig& c) -> auto& { return c.sim.list_size; }));
    o.push_back(integer("sim.sessions_per_query",
                        [](RunConfig& c) -> auto& { return c.sim.sessions_per_query; }));
    o.push_back({"sim.combine",
                 [](const RunConfig& c) {
                   return std::string(c.sim.combine.kind == CombineKind::kWeightedSum ? "sum"
                                                                                      : "product");
                 },
                 [](RunConfig& c, std::string_view v) { c.sim.combine.kind = parse_combine(v); }});
    o.push_back({"sim.weights",
                 [](const RunConfig& c) { return join_reals(c.sim.combine.weights); },
                 [](RunConfig& c, std::string_view v) {
                   std::vector<double> w;
                   for (auto part : split(v, ',')) w.push_back(to_real("sim.weights", trim(part)));
                   c.sim.combine.weights = std::move(w);
                 }});
    o.push_back(named<PolicyKind>("sim.policy", [](RunConfig& c) -> auto& { return c.policy; },
                                  parse_policy));
    o.push_back(count("sim.weak.queries", [](RunConfig& c) -> auto& { return c.weak.queries; }));
    o.push_back(integer("sim.weak.epochs", [](RunConfig& c) -> auto& { return c.weak.epochs; }));
    o.push_back(
        count("sim.weak.batch", [](RunConfig& c) -> auto& { return c.weak.batch_lists; }));
    o.push_back(real("sim.weak.lr", [](RunConfig& c) -> auto& { return c.weak.lr; }));

    o.push_back(real("em.alpha0", [](RunConfig& c) -> auto& { return c.em.alpha0; }));
    o.push_back(real("em.alpha_decay_batches",
                     [](RunConfig& c) -> auto& { return c.em.alpha_decay_batches; }));
    o.push_back(count("em.batch_size", [](RunConfig& c) -> auto& { return c.em.batch_size; }));
    o.push_back(integer("em.epochs", [](RunConfig& c) -> auto& { return c.em.epochs; }));
    o.push_back(real("em.head_lr", [](RunConfig& c) -> auto& { return c.em.head_lr; }));
    o.push_back(integer("em.head_steps", [](RunConfig& c) -> auto& { return c.em.head_steps; }));
    o.push_back(flag("em.update_heads", [](RunConfig& c) -> auto& { return c.em.update_heads; }));
    o.push_back(flag("em.freeze_gamma", [](RunConfig& c) -> auto& { return c.em.freeze_gamma; }));
    o.push_back(flag("em.interleaved", [](RunConfig& c) -> auto& { return c.em.interleaved; }));
    o.push_back(real("em.tolerance", [](RunConfig& c) -> auto& { return c.em.tolerance; }));
    o.push_back(real("em.floor", [](RunConfig& c) -> auto& { return c.em.floor; }));
    o.push_back(named<EmInit>("em.init", [](RunConfig& c) -> auto& { return c.em_init; },
                              parse_em_init));

    o.push_back({"model.hidden", [](const RunConfig& c) { return join_sizes(c.hidden); },
                 [](RunConfig& c, std::string_view v) {
                   std::vector<std::size_t> h;
                   for (auto part : split(v, ',')) {
                     h.push_back(static_cast<std::size_t>(to_count("model.hidden", trim(part))));
                   }
                   c.hidden = std::move(h);
                 }});

    o.push_back(named<LossVariant>("train.loss",
                                   [](RunConfig& c) -> auto& { return c.train.loss.variant; },
                                   parse_loss_variant));
    o.push_back(named<LabelSource>("train.labels", [](RunConfig& c) -> auto& { return c.labels; },
                                   parse_label_source));
    o.push_back(named<Optimizer>("train.optimizer",
                                 [](RunConfig& c) -> auto& { return c.train.optimizer; },
                                 parse_optimizer));
    o.push_back(real("train.lr", [](RunConfig& c) -> auto& { return c.train.lr; }));
    o.push_back(count("train.batch", [](RunConfig& c) -> auto& { return c.train.batch_lists; }));
    o.push_back(integer("train.epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }));
    o.push_back(integer("train.patience", [](RunConfig& c) -> auto& { return c.train.patience; }));
    o.push_back({"train.clip",
                 [](const RunConfig& c) {
                   return c.train.clip ? format_double(*c.train.clip) : std::string("0");
                 },
                 [](RunConfig& c, std::string_view v) {
                   const double x = to_real("train.clip", v);
                   c.train.clip = x > 0 ? std::optional<double>(x) : std::nullopt;
                 }});
    o.push_back(named<GammaSource>("train.gamma_source",
                                   [](RunConfig& c) -> auto& { return c.gamma_source; },
                                   parse_gamma_source));
    o.push_back(integer("train.ndcg_cutoff",
                        [](RunConfig& c) -> auto& { return c.train.loss.ndcg_cutoff; }));
    o.push_back({"train.delta_z_order",
                 [](const RunConfig& c) {
                   return std::string(c.train.loss.delta_z_order == DeltaZOrder::kModel ? "model"
                                                                                       : "logged");
                 },
                 [](RunConfig& c, std::string_view v) {
                   c.train.loss.delta_z_order = parse_delta_z(v);
                 }});

    o.push_back(seed("seed", [](RunConfig& c) -> auto& { return c.seed; }));
    std::sort(o.begin(), o.end(), [](const Option& a, const Option& b) { return a.key < b.key; });
    return o;
  }();
  return options;
}

const Option* find_option(std::string_view key) {
  const auto& reg = registry();
  auto it = std::lower_bound(reg.begin(), reg.end(), key,
                             [](const Option& o, std::string_view k) { return o.key < k; });
  return it != reg.end() && it->key == key ? &*it : nullptr;
}

}  // namespace

void set_option(RunConfig& cfg, std::string_view key, std::string_view value) {
  const Option* opt = find_option(key);
  if (!opt) throw ValidationError("config: unknown key '" + std::string(key) + "'");
  opt->set(cfg, value);
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ValidationError("override '" + std::string(assignment) + "' is not key=value");
  }
  set_option(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig parse_config(std::istream& in, RunConfig base) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::string_view v = line;
    if (auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = trim(v);
    if (v.empty()) continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) throw ParseError(n, "expected 'key = value'");
    try {
      set_option(base, trim(v.substr(0, eq)), trim(v.substr(eq + 1)));
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ParseError(n, e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  return parse_config(in, std::move(base));
}

std::string canonical_text(const RunConfig& cfg) {
  std::ostringstream out;
  for (const auto& o : registry()) out << o.key << " = " << o.get(cfg) << '\n';
  return out.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& o : registry()) keys.push_back(o.key);
  return keys;
}

std::string config_hash(const RunConfig& cfg) { return git_blob_hash(canonical_text(cfg)); }

void validate(const RunConfig& cfg) {
  validate(cfg.sim);
  validate(cfg.em);
  validate(cfg.train);
  check_compatible(cfg.train.loss.variant, cfg.labels);
  if (cfg.hidden.empty() ||
      std::any_of(cfg.hidden.begin(), cfg.hidden.end(), [](std::size_t w) { return w == 0; })) {
    throw ValidationError("model.hidden needs one or more positive widths");
  }
  for (const auto& p : {cfg.data.train_path, cfg.data.valid_path, cfg.data.test_path}) {
    if (p.empty()) continue;
    std::ifstream probe(p);
    if (!probe) throw ValidationError("dataset path not readable: " + p);
  }
  const auto& d = cfg.data;
  if ((d.train_path.empty() && d.train_queries == 0) ||
      (d.test_path.empty() && d.test_queries == 0)) {
    throw ValidationError("synthetic train and test splits need at least one query");
  }
  if (d.synthetic.docs_per_query < 2 || d.synthetic.feature_dim == 0) {
    throw ValidationError("synthetic data needs >= 2 docs per query and >= 1 feature");
  }
  if (cfg.policy == PolicyKind::kWeakRanker &&
      (cfg.weak.queries == 0 || cfg.weak.epochs < 0 || cfg.weak.batch_lists == 0 ||
       !(cfg.weak.lr > 0))) {
    throw ValidationError("sim.weak.* must be positive");
  }
}

StageSeeds stage_seeds(const RunConfig& cfg) {
  return StageSeeds{derive_seed(cfg.seed, "sim", 0), derive_seed(cfg.seed, "em", 0),
                    derive_seed(cfg.seed, "model", 0), derive_seed(cfg.seed, "train", 0)};
}

}  // namespace ultr
