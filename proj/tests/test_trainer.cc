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

#include <doctest.h>

#include <algorithm>

#include "ultr/errors.h"
#include "ultr/metrics.h"
#include "ultr/simulate.h"
#include "ultr/trainer.h"

using namespace ultr;

TEST_CASE("label source and loss compatibility") {
  CHECK_THROWS_AS(check_compatible(LossVariant::kIpwPairwise, LabelSource::kRelevanceUpperBound),
                  ValidationError);
  CHECK_THROWS_AS(check_compatible(LossVariant::kOpt, LabelSource::kRelevanceUpperBound),
                  ValidationError);
  CHECK_THROWS_AS(
      check_compatible(LossVariant::kIpwPointwise, LabelSource::kSynthesizedContinuous),
      ValidationError);
  CHECK_NOTHROW(check_compatible(LossVariant::kNaivePairwise, LabelSource::kRelevanceUpperBound));
  CHECK_NOTHROW(check_compatible(LossVariant::kOpt, LabelSource::kSynthesizedContinuous));
  CHECK_NOTHROW(check_compatible(LossVariant::kIpwPointwise, LabelSource::kClickCategorical));
  for (auto s : {LabelSource::kRelevanceUpperBound, LabelSource::kClickCategorical,
                 LabelSource::kSynthesizedContinuous}) {
    CHECK(parse_label_source(to_string(s)) == s);
  }
  CHECK(parse_optimizer(to_string(Optimizer::kSgd)) == Optimizer::kSgd);
  CHECK_THROWS_AS(parse_optimizer("rmsprop"), ValidationError);
}

TEST_CASE("training lists") {
  SyntheticGenerator gen(SyntheticSpec{}, 5);
  const auto data = gen.make(4, SplitTag::kTrain, 1);
  auto lists = lists_from_grades(data);
  REQUIRE(lists.size() == 4);
  CHECK(lists[0].labels[3] == data.queries[0].documents[3].relevance);
  CHECK(lists[0].positions[0] == 1);
  CHECK(lists[0].ref_scores.empty());

  Ranker ref(MlpSpec{data.feature_dim, {4}, 2});
  attach_reference(lists, ref);
  CHECK(lists[1].ref_scores[2] == doctest::Approx(ref.score(data.queries[1].documents[2].features)));
  CHECK(lists[1].ref_betas[2] == doctest::Approx(ref.beta(data.queries[1].documents[2].features)));
}

TEST_CASE("adam moves against the gradient") {
  Ranker r(MlpSpec{2, {2}, 1});
  AdamState adam(r.num_parameters());
  const std::vector<double> before(r.parameters().begin(), r.parameters().end());
  Gradients g{std::vector<double>(r.num_parameters(), 0.0)};
  g.values[0] = 3.0;
  g.values[1] = -0.01;
  adam.step(r, g, 0.1);
  // The first bias-corrected step has magnitude lr regardless of gradient scale.
  CHECK(r.parameters()[0] == doctest::Approx(before[0] - 0.1).epsilon(1e-6));
  CHECK(r.parameters()[1] == doctest::Approx(before[1] + 0.1).epsilon(1e-4));
  CHECK(r.parameters()[2] == before[2]);
}

TEST_CASE("training on true grades beats the untrained ranker") {
  SyntheticGenerator gen(SyntheticSpec{}, 7);
  const auto train = gen.make(150, SplitTag::kTrain, 1);
  const auto valid = gen.make(40, SplitTag::kValid, 2);
  const auto test = gen.make(80, SplitTag::kTest, 3);
  Ranker init(MlpSpec{train.feature_dim, {16}, 3});
  TrainerConfig cfg;
  cfg.loss.variant = LossVariant::kNaivePairwise;
  cfg.epochs = 8;
  cfg.seed = 4;
  const auto before = evaluate(init, test).ndcg_at.at(5);
  const auto res = train_ranker(lists_from_grades(train), BiasParams{}, init, cfg, &valid);
  const auto after = evaluate(res.ranker, test).ndcg_at.at(5);
  CHECK(after > before + 0.05);
  CHECK(res.valid_ndcg.size() == static_cast<std::size_t>(res.epochs_run));
  CHECK(res.best_epoch >= 1);
  CHECK(res.valid_ndcg[res.best_epoch - 1] ==
        *std::max_element(res.valid_ndcg.begin(), res.valid_ndcg.end()));
  // The returned ranker is the best validation epoch.
  CHECK(evaluate(res.ranker, valid).ndcg_at.at(5) ==
        doctest::Approx(res.valid_ndcg[res.best_epoch - 1]).epsilon(1e-12));

  const auto again = train_ranker(lists_from_grades(train), BiasParams{}, init, cfg, &valid);
  CHECK(std::equal(res.ranker.parameters().begin(), res.ranker.parameters().end(),
                   again.ranker.parameters().begin()));
}

TEST_CASE("trainer config validation") {
  TrainerConfig cfg;
  cfg.patience = 0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg = TrainerConfig{};
  cfg.lr = -1;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
}
