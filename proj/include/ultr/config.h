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


#ifndef ULTR_CONFIG_H_
#define ULTR_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ultr/em_estimator.h"
#include "ultr/losses.h"
#include "ultr/nnrank.h"
#include "ultr/simulate.h"
#include "ultr/trainer.h"

namespace ultr {

// Which ranker orders the lists shown to simulated users.
enum class PolicyKind { kByGradeDesc, kRandom, kWeakRanker };

std::string_view to_string(PolicyKind p);
PolicyKind parse_policy(std::string_view name);

// Logging ranker fitted on the true grades of a handful of training queries.
struct WeakRankerSpec {
  std::size_t queries = 20;
  int epochs = 1;
  std::size_t batch_lists = 20;
  double lr = 0.05;
};

// Starting point of the EM ranker: untrained, or a naive pairwise ranker
// fitted on the same logged labels.
enum class EmInit { kFresh, kNaive };

std::string_view to_string(EmInit e);
EmInit parse_em_init(std::string_view name);

// Where the frozen gamma/beta of the trust-bias losses come from.
enum class GammaSource { kEm, kSelf };

std::string_view to_string(GammaSource g);
GammaSource parse_gamma_source(std::string_view name);

struct DataConfig {
  // Empty paths select the synthetic generator for that split.
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::size_t train_queries = 2000;
  std::size_t valid_queries = 250;
  std::size_t test_queries = 500;
  SyntheticSpec synthetic;
  std::uint64_t seed = 1;
  bool normalize = true;
};

struct RunConfig {
  DataConfig data;
  SimConfig sim;
  PolicyKind policy = PolicyKind::kByGradeDesc;
  WeakRankerSpec weak;
  EmConfig em;
  EmInit em_init = EmInit::kNaive;
  std::vector<std::size_t> hidden = {64, 32};
  TrainerConfig train;
  LabelSource labels = LabelSource::kSynthesizedContinuous;
  GammaSource gamma_source = GammaSource::kEm;
  std::uint64_t seed = 0;
  // Not part of the canonical text, so moving a run does not change its hash.
  std::filesystem::path out_dir;

  RunConfig();
};

// Sets one dotted key. Unknown keys and unparsable values throw
// ValidationError.
void set_option(RunConfig& cfg, std::string_view key, std::string_view value);

// `key=value` as given on the command line.
void apply_override(RunConfig& cfg, std::string_view assignment);

// `key = value` lines; '#' starts a comment, blank lines are ignored. Later
// assignments win.
RunConfig parse_config(std::istream& in, RunConfig base = RunConfig{});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = RunConfig{});

// Every key in sorted order with its current value. Parsing it back gives an
// equal configuration.
std::string canonical_text(const RunConfig& cfg);
std::vector<std::string> config_keys();

// git-style hash of the canonical text.
std::string config_hash(const RunConfig& cfg);

// Range checks, loss/label compatibility and readable dataset paths.
void validate(const RunConfig& cfg);

// Seeds of the individual stages, all derived from `cfg.seed`.
struct StageSeeds {
  std::uint64_t sim = 0;
  std::uint64_t em = 0;
  std::uint64_t model = 0;
  std::uint64_t train = 0;
};

StageSeeds stage_seeds(const RunConfig& cfg);

}  // namespace ultr

#endif  // ULTR_CONFIG_H_
