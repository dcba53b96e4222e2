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

#ifndef ULTR_SIMULATE_H_
#define ULTR_SIMULATE_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ultr/letor_io.h"
#include "ultr/nnrank.h"

namespace ultr {

enum class CombineKind { kWeightedSum, kWeightedProduct };

// How the user-action channels (click, dwell) merge into one label.
struct CombineSpec {
  CombineKind kind = CombineKind::kWeightedSum;
  std::vector<double> weights = {1.0, 1.0};
};

inline constexpr std::size_t kNumActionChannels = 2;

struct SimConfig {
  double eta = 1.0;        // position-bias severity
  double noise_eps = 0.1;  // click/dwell floor for irrelevant items
  int list_size = 10;
  int sessions_per_query = 1;
  std::uint64_t seed = 0;
  CombineSpec combine;
};

void validate(const SimConfig& cfg);

// One presentation of a ranked list. Index k is display position k + 1.
struct Session {
  std::string qid;
  std::vector<std::size_t> ranked_docs;
  std::vector<int> clicks;
  std::vector<double> dwell;
  std::vector<double> synth;

  std::size_t size() const { return ranked_docs.size(); }
  bool operator==(const Session&) const = default;
};

// (1/position)^eta.
double click_propensity(int position, double eta);
// noise + (1 - noise) (2^grade - 1) / (2^4 - 1).
double click_relevance_prob(int grade, double noise_eps);

// Dwell-time factors; the second Normal parameter is a standard deviation.
double dwell_position_mean(int position);
double dwell_position_sd(int position);
double dwell_relevance_mean(int grade, double noise_eps);
double dwell_relevance_sd(int grade, double noise_eps);
double sample_dwell_position(int position, std::mt19937_64& rng);
double sample_dwell_relevance(int grade, double noise_eps, std::mt19937_64& rng);

std::vector<double> combine(std::span<const int> clicks, std::span<const double> dwell,
                            const CombineSpec& spec);

struct ByGradeDesc {};
struct ByScore {
  const Ranker* ranker = nullptr;
};
struct RandomOrder {
  std::uint64_t seed = 0;
};
using RankingPolicy = std::variant<ByGradeDesc, ByScore, RandomOrder>;

// Full permutation of the query's doc indices. Ties break by doc_index.
std::vector<std::size_t> initial_ranking(const Query& query, const RankingPolicy& policy);

// Displays the first min(list_size, |documents|) entries of `ranking`.
Session sample_session(const Query& query, std::span<const std::size_t> ranking,
                       const SimConfig& cfg, std::mt19937_64& rng);

// Random stream owned by session `counter` of query `qid`.
std::mt19937_64 session_stream(std::uint64_t seed, std::string_view qid,
                               std::uint64_t counter);

// sessions_per_query sessions for every query, each from its own stream.
std::vector<Session> simulate_sessions(const Dataset& dataset,
                                       const RankingPolicy& policy,
                                       const SimConfig& cfg);

// Label source for downstream training, chosen per session.
enum class LabelChannel { kClick, kSynth };
std::vector<double> session_labels(const Session& session, LabelChannel channel);

// Line format: `qid \t position \t doc_index \t click \t dwell \t synth`.
// A row with position 1 opens a new session.
void write_sessions(std::ostream& out, std::span<const Session> sessions,
                    std::string_view config_hash = {});
std::vector<Session> read_sessions(std::istream& in);

// Synthetic LETOR-style data with a fixed hidden relevance function.
struct SyntheticSpec {
  std::size_t docs_per_query = 10;
  std::size_t feature_dim = 16;
  double label_noise = 0.35;
};

class SyntheticGenerator {
 public:
  SyntheticGenerator(SyntheticSpec spec, std::uint64_t seed);

  // `stream` separates splits drawn from the same relevance function.
  Dataset make(std::size_t num_queries, SplitTag tag, std::uint64_t stream) const;
  double latent_relevance(std::span<const double> features) const;

 private:
  SyntheticSpec spec_;
  std::uint64_t seed_;
  std::vector<double> weights_;
};

}  // namespace ultr

#endif  // ULTR_SIMULATE_H_
