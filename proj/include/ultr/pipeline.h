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


#ifndef ULTR_PIPELINE_H_
#define ULTR_PIPELINE_H_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ultr/config.h"
#include "ultr/em_estimator.h"
#include "ultr/letor_io.h"
#include "ultr/metrics.h"
#include "ultr/simulate.h"
#include "ultr/trainer.h"

namespace ultr {

struct PreparedData {
  Dataset train;
  Dataset valid;
  Dataset test;
  MinMaxNormalizer normalizer;  // empty unless data.normalize
  // Hashes of the serialized splits before normalization.
  std::string train_hash;
  std::string valid_hash;
  std::string test_hash;
};

// Loads or generates the three splits and normalizes them with train
// statistics when asked.
PreparedData prepare_data(const RunConfig& cfg);

MlpSpec model_spec(const RunConfig& cfg, const PreparedData& data);

// The ranker behind sim.policy = weak_ranker; nullopt for the other policies.
std::optional<Ranker> logging_ranker(const RunConfig& cfg, const PreparedData& data);

std::vector<Session> simulate_stage(const RunConfig& cfg, const PreparedData& data,
                                    const Ranker* logger);

LabelChannel label_channel(LabelSource source);

// Naive pairwise ranker on the logged labels; also the EM warm start.
TrainResult train_naive(const RunConfig& cfg, const PreparedData& data,
                        std::span<const EmSession> sessions);

EmResult em_stage(const RunConfig& cfg, const PreparedData& data,
                  std::span<const EmSession> sessions, const Ranker* warm_start);

// Trains cfg.train.loss. `em` supplies the bias parameters and, with
// gamma_source = em, the reference scorer; ignored by losses that need
// neither.
TrainResult train_stage(const RunConfig& cfg, const PreparedData& data,
                        std::span<const EmSession> sessions, const EmResult* em);

struct PipelineResult {
  PreparedData data;
  std::vector<Session> sessions;
  std::optional<EmResult> em;
  TrainResult train;
  EvalReport report;
  std::string config_hash;
  StageSeeds seeds;
};

// All stages in memory, nothing written.
PipelineResult run_pipeline(const RunConfig& cfg);

// Runs into cfg.out_dir and returns it. Writes config.txt, sessions.tsv,
// bias_params.tsv, em_trace.tsv, em_ranker.ckpt, model.ckpt, report.tsv,
// report.txt and manifest.txt, holding run.lock meanwhile. On failure the
// partial outputs stay and FAILED names the stage.
std::filesystem::path run_experiment(const RunConfig& cfg);

// `key = value` lines.
using Manifest = std::map<std::string, std::string>;
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct ComparisonRow {
  std::string method;  // "<loss>/<labels>"
  std::size_t runs = 0;
  double mean = 0;
  double std = 0;  // n - 1 denominator; 0 for a single run
};

// Groups runs by method. `metric` is "ndcg" (needs a cutoff present in the
// reports) or "arp". Refuses runs whose test split hashes differ.
std::vector<ComparisonRow> compare_runs(std::span<const std::filesystem::path> run_dirs,
                                        std::string_view metric, int cutoff);
std::string format_comparison(std::span<const ComparisonRow> rows, std::string_view metric,
                              int cutoff);

}  // namespace ultr

#endif  // ULTR_PIPELINE_H_
