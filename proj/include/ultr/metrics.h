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

#ifndef ULTR_METRICS_H_
#define ULTR_METRICS_H_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ultr/letor_io.h"
#include "ultr/nnrank.h"

namespace ultr {

// DCG uses gain 2^grade - 1 and discount 1/log2(1 + rank).
inline constexpr const char* kNdcgGainConvention = "2^grade-1";

// nullopt when the ideal DCG is zero (no relevant item).
std::optional<double> ndcg_at_k(std::span<const double> scores, std::span<const int> grades,
                                int k);
// nullopt when no item has grade > 0.
std::optional<double> arp(std::span<const double> scores, std::span<const int> grades);

struct QueryMetrics {
  std::string qid;
  std::map<int, double> ndcg;  // absent cutoffs mean the query was skipped
  std::optional<double> arp;

  bool operator==(const QueryMetrics&) const = default;
};

struct EvalReport {
  std::map<int, double> ndcg_at;
  double arp = 0;
  std::size_t n_queries = 0;
  std::size_t n_skipped = 0;  // queries without relevant items
  std::vector<QueryMetrics> per_query;

  bool operator==(const EvalReport&) const = default;
};

inline const std::vector<int> kDefaultCutoffs = {3, 5, 10};

EvalReport evaluate(const Ranker& ranker, const Dataset& dataset,
                    std::span<const int> cutoffs = kDefaultCutoffs, bool keep_per_query = false);
// Same aggregation from precomputed per-query scores.
EvalReport evaluate_scores(const Dataset& dataset,
                           std::span<const std::vector<double>> scores,
                           std::span<const int> cutoffs = kDefaultCutoffs,
                           bool keep_per_query = false);

// `metric \t cutoff \t value`; ARP and counts use cutoff 0.
void write_report_tsv(std::ostream& out, const EvalReport& report,
                      std::string_view config_hash = {});
EvalReport read_report_tsv(std::istream& in, std::string* config_hash = nullptr);
std::string format_report_table(const EvalReport& report);

}  // namespace ultr

#endif  // ULTR_METRICS_H_
