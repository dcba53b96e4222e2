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


#include "ultr/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "ultr/bias_params.h"
#include "ultr/checkpoint.h"
#include "ultr/errors.h"
#include "ultr/hashing.h"
#include "ultr/log.h"
#include "ultr/text_format.h"

namespace ultr {
namespace fs = std::filesystem;

namespace {

Dataset load_or_make(const std::string& path, std::size_t n, SplitTag tag, std::uint64_t stream,
                     const SyntheticGenerator& gen) {
  if (!path.empty()) return load_letor(path, std::nullopt, tag);
  if (n == 0) {
    Dataset empty;
    empty.split_tag = tag;
    return empty;
  }
  return gen.make(n, tag, stream);
}

void pad_features(Dataset& d, std::size_t dim) {
  for (auto& q : d.queries) {
    for (auto& doc : q.documents) doc.features.resize(dim, 0.0);
  }
  d.feature_dim = dim;
}

const Dataset* valid_or_null(const PreparedData& data) {
  return data.valid.queries.empty() ? nullptr : &data.valid;
}

bool needs_reference(LossVariant v) {
  return needs_bias_params(v) && v != LossVariant::kIpwPointwise;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_bytes(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

std::string method_name(const RunConfig& cfg) {
  return std::string(to_string(cfg.train.loss.variant)) + "/" + std::string(to_string(cfg.labels));
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
  const SyntheticGenerator gen(cfg.data.synthetic, cfg.data.seed);
  PreparedData d;
  d.train = load_or_make(cfg.data.train_path, cfg.data.train_queries, SplitTag::kTrain, 1, gen);
  d.valid = load_or_make(cfg.data.valid_path, cfg.data.valid_queries, SplitTag::kValid, 2, gen);
  d.test = load_or_make(cfg.data.test_path, cfg.data.test_queries, SplitTag::kTest, 3, gen);
  if (d.train.queries.empty()) throw EmptyDatasetError("training split has no queries");
  if (d.test.queries.empty()) throw EmptyDatasetError("test split has no queries");
  // LETOR files omit trailing zero features, so splits may disagree on width.
  const std::size_t dim =
      std::max({d.train.feature_dim, d.valid.feature_dim, d.test.feature_dim});
  for (Dataset* s : {&d.train, &d.valid, &d.test}) pad_features(*s, dim);
  d.train_hash = git_blob_hash(serialize_letor(d.train));
  d.valid_hash = git_blob_hash(serialize_letor(d.valid));
  d.test_hash = git_blob_hash(serialize_letor(d.test));
  if (cfg.data.normalize) {
    d.normalizer = MinMaxNormalizer::fit(d.train);
    for (Dataset* s : {&d.train, &d.valid, &d.test}) d.normalizer.apply(*s);
  }
  return d;
}

MlpSpec model_spec(const RunConfig& cfg, const PreparedData& data) {
  return MlpSpec{data.train.feature_dim, cfg.hidden, stage_seeds(cfg).model};
}

std::optional<Ranker> logging_ranker(const RunConfig& cfg, const PreparedData& data) {
  if (cfg.policy != PolicyKind::kWeakRanker) return std::nullopt;
  // Depends on the data seed only, so every run seed sees the same logger.
  Dataset small = data.train;
  small.queries.resize(std::min(cfg.weak.queries, small.queries.size()));
  TrainerConfig wc;
  wc.loss.variant = LossVariant::kNaivePairwise;
  wc.optimizer = Optimizer::kSgd;
  wc.lr = cfg.weak.lr;
  wc.epochs = cfg.weak.epochs;
  wc.batch_lists = cfg.weak.batch_lists;
  wc.seed = derive_seed(cfg.data.seed, "weak", 0);
  const Ranker init(MlpSpec{data.train.feature_dim, cfg.hidden,
                            derive_seed(cfg.data.seed, "weak-init", 0)});
  return train_ranker(lists_from_grades(small), BiasParams{}, init, wc).ranker;
}

std::vector<Session> simulate_stage(const RunConfig& cfg, const PreparedData& data,
                                    const Ranker* logger) {
  SimConfig sc = cfg.sim;
  sc.seed = stage_seeds(cfg).sim;
  RankingPolicy policy = ByGradeDesc{};
  switch (cfg.policy) {
    case PolicyKind::kByGradeDesc: break;
    case PolicyKind::kRandom: policy = RandomOrder{derive_seed(sc.seed, "order", 0)}; break;
    case PolicyKind::kWeakRanker:
      if (!logger) throw StateError("simulate: weak_ranker policy without a logging ranker");
      policy = ByScore{logger};
      break;
  }
  return simulate_sessions(data.train, policy, sc);
}

LabelChannel label_channel(LabelSource source) {
  switch (source) {
    case LabelSource::kClickCategorical: return LabelChannel::kClick;
    case LabelSource::kSynthesizedContinuous: return LabelChannel::kSynth;
    case LabelSource::kRelevanceUpperBound: break;
  }
  throw ValidationError("relevance_upper_bound trains on grades, not logged labels");
}

TrainResult train_naive(const RunConfig& cfg, const PreparedData& data,
                        std::span<const EmSession> sessions) {
  TrainerConfig tc = cfg.train;
  tc.loss.variant = LossVariant::kNaivePairwise;
  tc.self_reference = false;
  tc.seed = stage_seeds(cfg).train;
  return train_ranker(lists_from_sessions(sessions), BiasParams{},
                      Ranker(model_spec(cfg, data)), tc, valid_or_null(data));
}

EmResult em_stage(const RunConfig& cfg, const PreparedData& data,
                  std::span<const EmSession> sessions, const Ranker* warm_start) {
  EmConfig ec = cfg.em;
  ec.seed = stage_seeds(cfg).em;
  const auto pairs = extract_pairs(sessions);
  if (pairs.empty()) throw EmptyDatasetError("em: sessions contain no pairs");
  const Ranker init = warm_start ? *warm_start : Ranker(model_spec(cfg, data));
  return run_em(pairs, ec, init_default(static_cast<std::size_t>(cfg.sim.list_size)), init);
}

TrainResult train_stage(const RunConfig& cfg, const PreparedData& data,
                        std::span<const EmSession> sessions, const EmResult* em) {
  const LossVariant v = cfg.train.loss.variant;
  check_compatible(v, cfg.labels);
  auto lists = cfg.labels == LabelSource::kRelevanceUpperBound ? lists_from_grades(data.train)
                                                               : lists_from_sessions(sessions);
  TrainerConfig tc = cfg.train;
  tc.seed = stage_seeds(cfg).train;
  tc.self_reference = false;
  BiasParams params;
  if (needs_bias_params(v)) {
    if (!em) throw StateError("train: " + std::string(to_string(v)) + " needs EM estimates");
    params = em->params;
  }
  if (needs_reference(v)) {
    if (cfg.gamma_source == GammaSource::kSelf) {
      tc.self_reference = true;
    } else {
      attach_reference(lists, em->ranker);
    }
  }
  return train_ranker(std::move(lists), params, Ranker(model_spec(cfg, data)), tc,
                      valid_or_null(data));
}

PipelineResult run_pipeline(const RunConfig& cfg) {
  validate(cfg);
  PipelineResult r{prepare_data(cfg), {}, std::nullopt, TrainResult{Ranker(MlpSpec{1, {1}, 0}), {}, {}, 0, 0},
                   {}, config_hash(cfg), stage_seeds(cfg)};
  std::vector<EmSession> ems;
  if (cfg.labels != LabelSource::kRelevanceUpperBound) {
    const auto logger = logging_ranker(cfg, r.data);
    r.sessions = simulate_stage(cfg, r.data, logger ? &*logger : nullptr);
    ems = join_sessions(r.sessions, r.data.train, label_channel(cfg.labels));
  }
  if (needs_bias_params(cfg.train.loss.variant)) {
    std::optional<TrainResult> warm;
    if (cfg.em_init == EmInit::kNaive) warm = train_naive(cfg, r.data, ems);
    r.em = em_stage(cfg, r.data, ems, warm ? &warm->ranker : nullptr);
  }
  r.train = train_stage(cfg, r.data, ems, r.em ? &*r.em : nullptr);
  r.report = evaluate(r.train.ranker, r.data.test);
  return r;
}

fs::path run_experiment(const RunConfig& cfg) {
  validate(cfg);
  if (cfg.out_dir.empty()) throw ValidationError("run: no output directory");
  const fs::path dir = cfg.out_dir;
  fs::create_directories(dir);
  const fs::path lock = dir / "run.lock";
  {
    std::FILE* f = std::fopen(lock.c_str(), "wx");
    if (!f) throw StateError("run directory " + dir.string() + " is locked by another run");
    std::fclose(f);
  }
  fs::remove(dir / "FAILED");

  const std::string hash = config_hash(cfg);
  const StageSeeds seeds = stage_seeds(cfg);
  Manifest manifest;
  manifest["config_hash"] = hash;
  manifest["method"] = method_name(cfg);
  manifest["seed"] = std::to_string(cfg.seed);
  manifest["seed.sim"] = std::to_string(seeds.sim);
  manifest["seed.em"] = std::to_string(seeds.em);
  manifest["seed.model"] = std::to_string(seeds.model);
  manifest["seed.train"] = std::to_string(seeds.train);
  manifest["seed.data"] = std::to_string(cfg.data.seed);
  manifest["ndcg_gain"] = kNdcgGainConvention;
  manifest["normalize"] = cfg.data.normalize ? "true" : "false";

  auto emit = [&](const std::string& name, const std::string& content) {
    write_bytes(dir / name, content);
    manifest["file." + name] = git_blob_hash(content);
  };
  auto save_ckpt = [&](const std::string& name, const Ranker& ranker,
                       const MinMaxNormalizer& norm) {
    save_checkpoint(dir / name, Checkpoint{ranker, norm, hash},
                    {{"config_hash", hash}, {"method", method_name(cfg)}});
    manifest["file." + name] = git_blob_hash(read_bytes(dir / name));
  };

  std::string stage = "config";
  try {
    emit("config.txt", canonical_text(cfg));

    stage = "data";
    const PreparedData data = prepare_data(cfg);
    manifest["split.train"] = data.train_hash;
    manifest["split.valid"] = data.valid_hash;
    manifest["split.test"] = data.test_hash;

    std::vector<EmSession> ems;
    if (cfg.labels != LabelSource::kRelevanceUpperBound) {
      stage = "simulate";
      const auto logger = logging_ranker(cfg, data);
      const auto sessions = simulate_stage(cfg, data, logger ? &*logger : nullptr);
      std::ostringstream s;
      write_sessions(s, sessions, hash);
      emit("sessions.tsv", s.str());
      ems = join_sessions(sessions, data.train, label_channel(cfg.labels));
    }

    std::optional<EmResult> em;
    if (needs_bias_params(cfg.train.loss.variant)) {
      stage = "em";
      std::optional<TrainResult> warm;
      if (cfg.em_init == EmInit::kNaive) warm = train_naive(cfg, data, ems);
      em = em_stage(cfg, data, ems, warm ? &warm->ranker : nullptr);
      std::ostringstream p, t;
      p << "# config_hash\t" << hash << '\n';
      write_table(p, em->params);
      emit("bias_params.tsv", p.str());
      write_trace(t, em->trace, hash);
      emit("em_trace.tsv", t.str());
      save_ckpt("em_ranker.ckpt", em->ranker, data.normalizer);
      manifest["em.epochs_run"] = std::to_string(em->epochs_run);
      manifest["em.converged"] = em->converged ? "true" : "false";
    }

    stage = "train";
    const auto trained = train_stage(cfg, data, ems, em ? &*em : nullptr);
    save_ckpt("model.ckpt", trained.ranker, data.normalizer);
    manifest["train.epochs_run"] = std::to_string(trained.epochs_run);
    manifest["train.best_epoch"] = std::to_string(trained.best_epoch);

    stage = "evaluate";
    const auto report = evaluate(trained.ranker, data.test);
    std::ostringstream rep;
    write_report_tsv(rep, report, hash);
    emit("report.tsv", rep.str());
    emit("report.txt", format_report_table(report));

    stage = "manifest";
    write_manifest(dir / "manifest.txt", manifest);
  } catch (const std::exception& e) {
    log::error("run failed in stage '" + stage + "': " + e.what());
    std::ofstream(dir / "FAILED") << stage << ": " << e.what() << '\n';
    fs::remove(lock);
    throw;
  }
  fs::remove(lock);
  return dir;
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing manifest " + path.string());
  Manifest m;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto v = trim(line);
    if (v.empty() || v.front() == '#') continue;
    const auto eq = v.find(" = ");
    if (eq == std::string_view::npos) throw ParseError(n, "manifest: expected 'key = value'");
    m[std::string(v.substr(0, eq))] = std::string(v.substr(eq + 3));
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  std::ostringstream out;
  for (const auto& [k, v] : manifest) out << k << " = " << v << '\n';
  write_bytes(path, out.str());
}

std::vector<ComparisonRow> compare_runs(std::span<const fs::path> run_dirs,
                                        std::string_view metric, int cutoff) {
  if (run_dirs.size() < 2) throw ValidationError("compare: need at least two runs");
  if (metric != "ndcg" && metric != "arp") {
    throw ValidationError("compare: metric must be ndcg or arp");
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> values;
  std::string split;
  for (const auto& dir : run_dirs) {
    const auto m = read_manifest(dir / "manifest.txt");
    auto field = [&](const std::string& k) {
      auto it = m.find(k);
      if (it == m.end()) throw Error("compare: " + dir.string() + " manifest lacks " + k);
      return it->second;
    };
    const std::string test_hash = field("split.test");
    if (split.empty()) {
      split = test_hash;
    } else if (split != test_hash) {
      throw ValidationError("compare: test split of " + dir.string() +
                            " differs from the first run (" + test_hash + " vs " + split + ")");
    }
    std::ifstream in(dir / "report.tsv");
    if (!in) throw Error("compare: missing report in " + dir.string());
    std::string report_hash;
    const auto report = read_report_tsv(in, &report_hash);
    if (report_hash != field("config_hash")) {
      throw ValidationError("compare: report in " + dir.string() +
                            " does not belong to its manifest");
    }
    double value = report.arp;
    if (metric == "ndcg") {
      auto it = report.ndcg_at.find(cutoff);
      if (it == report.ndcg_at.end()) {
        throw ValidationError("compare: no NDCG@" + std::to_string(cutoff) + " in " +
                              dir.string());
      }
      value = it->second;
    }
    const std::string method = field("method");
    if (!values.count(method)) order.push_back(method);
    values[method].push_back(value);
  }
  std::vector<ComparisonRow> rows;
  for (const auto& method : order) {
    const auto& xs = values[method];
    ComparisonRow row{method, xs.size(), 0.0, 0.0};
    for (double x : xs) row.mean += x;
    row.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
      double ss = 0.0;
      for (double x : xs) ss += (x - row.mean) * (x - row.mean);
      row.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_comparison(std::span<const ComparisonRow> rows, std::string_view metric,
                              int cutoff) {
  std::size_t width = 6;
  for (const auto& r : rows) width = std::max(width, r.method.size());
  std::ostringstream out;
  const std::string label =
      metric == "ndcg" ? "NDCG@" + std::to_string(cutoff) : std::string("ARP");
  out << std::left << std::setw(static_cast<int>(width)) << "method" << "  runs  " << label
      << " mean +- std\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.method << "  " << std::right
        << std::setw(4) << r.runs << "  " << r.mean << " +- " << r.std << '\n';
  }
  return out.str();
}

}  // namespace ultr
