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


// Command-line front end: one subcommand per pipeline stage plus `run` and
// `compare`. Exit codes: 0 ok, 1 bad input or config, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ultr/bias_params.h"
#include "ultr/checkpoint.h"
#include "ultr/config.h"
#include "ultr/errors.h"
#include "ultr/log.h"
#include "ultr/metrics.h"
#include "ultr/pipeline.h"

namespace fs = std::filesystem;
using namespace ultr;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, CommonFlags& f, bool need_out) {
  app->add_option("--config", f.config, "key = value config file");
  app->add_option("--seed", f.seed, "master seed (overrides the config)");
  auto* out = app->add_option("--out", f.out, "output directory");
  if (need_out) out->required();
  app->add_option("--set", f.overrides, "key=value override, repeatable");
}

RunConfig build_config(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
  for (const auto& o : f.overrides) apply_override(cfg, o);
  if (f.seed) cfg.seed = *f.seed;
  cfg.out_dir = f.out;
  validate(cfg);
  return cfg;
}

std::vector<Session> load_sessions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read sessions " + path);
  return read_sessions(in);
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string text_of(auto&& writer) {
  std::ostringstream s;
  writer(s);
  return s.str();
}

void cmd_simulate(const CommonFlags& f) {
  const auto cfg = build_config(f);
  const auto data = prepare_data(cfg);
  const auto logger = logging_ranker(cfg, data);
  const auto sessions = simulate_stage(cfg, data, logger ? &*logger : nullptr);
  fs::create_directories(cfg.out_dir);
  const auto hash = config_hash(cfg);
  write_text(cfg.out_dir / "config.txt", canonical_text(cfg));
  write_text(cfg.out_dir / "sessions.tsv",
             text_of([&](std::ostream& o) { write_sessions(o, sessions, hash); }));
  std::cout << sessions.size() << " sessions -> " << (cfg.out_dir / "sessions.tsv").string()
            << '\n';
}

void cmd_em_fit(const CommonFlags& f, const std::string& sessions_path) {
  const auto cfg = build_config(f);
  const auto data = prepare_data(cfg);
  const auto ems =
      join_sessions(load_sessions(sessions_path), data.train, label_channel(cfg.labels));
  std::optional<TrainResult> warm;
  if (cfg.em_init == EmInit::kNaive) warm = train_naive(cfg, data, ems);
  const auto em = em_stage(cfg, data, ems, warm ? &warm->ranker : nullptr);
  const auto hash = config_hash(cfg);
  fs::create_directories(cfg.out_dir);
  write_text(cfg.out_dir / "bias_params.tsv", text_of([&](std::ostream& o) {
               o << "# config_hash\t" << hash << '\n';
               write_table(o, em.params);
             }));
  write_text(cfg.out_dir / "em_trace.tsv",
             text_of([&](std::ostream& o) { write_trace(o, em.trace, hash); }));
  save_checkpoint(cfg.out_dir / "em_ranker.ckpt", Checkpoint{em.ranker, data.normalizer, hash},
                  {{"config_hash", hash}});
  std::cout << "em: " << em.epochs_run << " epochs, final loglik "
            << (em.epoch_loglik.empty() ? 0.0 : em.epoch_loglik.back()) << '\n';
}

void cmd_train(const CommonFlags& f, const std::string& sessions_path,
               const std::string& params_path, const std::string& reference_path) {
  const auto cfg = build_config(f);
  const auto data = prepare_data(cfg);
  std::vector<EmSession> ems;
  if (cfg.labels != LabelSource::kRelevanceUpperBound) {
    if (sessions_path.empty()) throw ValidationError("train: --sessions is required");
    ems = join_sessions(load_sessions(sessions_path), data.train, label_channel(cfg.labels));
  }
  std::optional<EmResult> em;
  if (!params_path.empty() || !reference_path.empty()) {
    EmResult r{BiasParams{}, Ranker(model_spec(cfg, data)), {}, {}, 0, false};
    if (!params_path.empty()) {
      std::ifstream in(params_path);
      if (!in) throw Error("cannot read bias parameters " + params_path);
      r.params = read_table(in);
    }
    if (!reference_path.empty()) r.ranker = load_checkpoint(reference_path).ranker;
    em = std::move(r);
  }
  const LossVariant v = cfg.train.loss.variant;
  if (needs_bias_params(v) && params_path.empty()) {
    throw ValidationError("train: " + std::string(to_string(v)) + " needs --params");
  }
  if (needs_bias_params(v) && v != LossVariant::kIpwPointwise &&
      cfg.gamma_source == GammaSource::kEm && reference_path.empty()) {
    throw ValidationError("train: gamma_source = em needs --reference");
  }
  const auto res = train_stage(cfg, data, ems, em ? &*em : nullptr);
  const auto hash = config_hash(cfg);
  fs::create_directories(cfg.out_dir);
  save_checkpoint(cfg.out_dir / "model.ckpt", Checkpoint{res.ranker, data.normalizer, hash},
                  {{"config_hash", hash}});
  std::cout << "train: " << res.epochs_run << " epochs, best " << res.best_epoch << '\n';
}

void cmd_evaluate(const CommonFlags& f, const std::string& ckpt_path,
                  const std::string& test_path) {
  RunConfig cfg = build_config(f);
  if (!fs::exists(ckpt_path)) throw Error("checkpoint not found: " + ckpt_path);
  const auto ckpt = load_checkpoint(ckpt_path);
  Dataset test;
  if (!test_path.empty()) {
    test = load_letor(test_path, ckpt.ranker.spec().input_dim, SplitTag::kTest);
  } else {
    cfg.data.normalize = false;
    test = prepare_data(cfg).test;
  }
  if (test.feature_dim != ckpt.ranker.spec().input_dim) {
    throw ValidationError("evaluate: test features have width " +
                          std::to_string(test.feature_dim) + ", checkpoint expects " +
                          std::to_string(ckpt.ranker.spec().input_dim));
  }
  if (!ckpt.normalizer.empty()) ckpt.normalizer.apply(test);
  const auto report = evaluate(ckpt.ranker, test);
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir / "report.tsv",
               text_of([&](std::ostream& o) { write_report_tsv(o, report, ckpt.config_hash); }));
  }
  std::cout << format_report_table(report);
}

void cmd_run(const CommonFlags& f) {
  const auto cfg = build_config(f);
  const auto dir = run_experiment(cfg);
  std::ifstream in(dir / "report.txt");
  std::cout << in.rdbuf();
}

void cmd_compare(const std::vector<std::string>& dirs, const std::string& metric, int cutoff) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const auto rows = compare_runs(paths, metric, cutoff);
  std::cout << format_comparison(rows, metric, cutoff);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ultr: unbiased pairwise learning to rank"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  CommonFlags sim_f, em_f, train_f, eval_f, run_f;
  std::string em_sessions, tr_sessions, tr_params, tr_reference, ev_ckpt, ev_test;
  std::vector<std::string> cmp_dirs;
  std::string cmp_metric = "ndcg";
  int cmp_cutoff = 5;

  auto* sim = app.add_subcommand("simulate", "dataset + SimConfig -> sessions.tsv");
  add_common(sim, sim_f, true);

  auto* em = app.add_subcommand("em-fit", "sessions -> bias parameters and EM trace");
  add_common(em, em_f, true);
  em->add_option("--sessions", em_sessions, "sessions TSV")->required();

  auto* tr = app.add_subcommand("train", "sessions + bias parameters -> checkpoint");
  add_common(tr, train_f, true);
  tr->add_option("--sessions", tr_sessions, "sessions TSV");
  tr->add_option("--params", tr_params, "bias parameter table");
  tr->add_option("--reference", tr_reference, "EM ranker checkpoint for gamma/beta");

  auto* ev = app.add_subcommand("evaluate", "checkpoint + test set -> report");
  add_common(ev, eval_f, false);
  ev->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  ev->add_option("--test", ev_test, "LETOR test file (default: the configured test split)");

  auto* run = app.add_subcommand("run", "full pipeline into --out");
  add_common(run, run_f, true);

  auto* cmp = app.add_subcommand("compare", "mean +- std per method over run directories");
  cmp->add_option("runs", cmp_dirs, "run directories")->required();
  cmp->add_option("--metric", cmp_metric, "ndcg or arp");
  cmp->add_option("--cutoff", cmp_cutoff, "NDCG cutoff");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (verbose) log::set_level(log::Level::kDebug);

  try {
    if (*sim) cmd_simulate(sim_f);
    if (*em) cmd_em_fit(em_f, em_sessions);
    if (*tr) cmd_train(train_f, tr_sessions, tr_params, tr_reference);
    if (*ev) cmd_evaluate(eval_f, ev_ckpt, ev_test);
    if (*run) cmd_run(run_f);
    if (*cmp) cmd_compare(cmp_dirs, cmp_metric, cmp_cutoff);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
