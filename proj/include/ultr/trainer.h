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

#ifndef ULTR_TRAINER_H_
#define ULTR_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ultr/bias_params.h"
#include "ultr/em_estimator.h"
#include "ultr/letor_io.h"
#include "ultr/losses.h"
#include "ultr/nnrank.h"

namespace ultr {

enum class LabelSource { kRelevanceUpperBound, kClickCategorical, kSynthesizedContinuous };

std::string_view to_string(LabelSource s);
LabelSource parse_label_source(std::string_view name);

// Throws ValidationError for combinations the losses do not define.
void check_compatible(LossVariant variant, LabelSource source);

struct TrainingList {
  std::vector<std::span<const double>> features;
  std::vector<double> labels;
  std::vector<int> positions;
  std::vector<double> ref_scores;
  std::vector<double> ref_betas;
};

// Every query with its true grades as labels (documents in file order).
std::vector<TrainingList> lists_from_grades(const Dataset& dataset);
// Every displayed session list with its logged labels.
std::vector<TrainingList> lists_from_sessions(std::span<const EmSession> sessions);

// Freezes gamma/beta inputs of the trust-bias losses from `reference`.
void attach_reference(std::vector<TrainingList>& lists, const Ranker& reference);

enum class Optimizer { kSgd, kAdam };

std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view name);

// Adam moments over a ranker's flat parameter array.
class AdamState {
 public:
  explicit AdamState(std::size_t n, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8);
  void step(Ranker& ranker, const Gradients& grads, double lr);

 private:
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

struct TrainerConfig {
  LossOptions loss;
  Optimizer optimizer = Optimizer::kAdam;
  double lr = 1e-3;
  std::size_t batch_lists = 32;
  int epochs = 40;
  int patience = 5;  // evaluation rounds without valid NDCG@5 improvement
  std::optional<double> clip = 10.0;
  std::uint64_t seed = 0;
  // Reference scores follow the ranker being trained (refreshed each batch).
  bool self_reference = false;
};

void validate(const TrainerConfig& cfg);

struct TrainResult {
  Ranker ranker;
  std::vector<double> train_loss;  // mean loss per list, per epoch
  std::vector<double> valid_ndcg;  // NDCG@5 per epoch when a valid set is given
  int epochs_run = 0;
  int best_epoch = 0;
};

TrainResult train_ranker(std::vector<TrainingList> lists, const BiasParams& params,
                         const Ranker& init, const TrainerConfig& cfg,
                         const Dataset* valid = nullptr);

}  // namespace ultr

#endif  // ULTR_TRAINER_H_
