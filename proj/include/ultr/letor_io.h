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

#ifndef ULTR_LETOR_IO_H_
#define ULTR_LETOR_IO_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ultr {

inline constexpr int kMaxGrade = 4;

struct Document {
  std::vector<double> features;
  int relevance = 0;         // graded, 0..kMaxGrade
  std::size_t doc_index = 0; // ordinal within its query

  bool operator==(const Document&) const = default;
};

struct Query {
  std::string qid;
  std::vector<Document> documents;

  bool operator==(const Query&) const = default;
};

enum class SplitTag { kTrain, kValid, kTest };

std::string_view to_string(SplitTag tag);

// In-memory LETOR dataset. Immutable after construction by convention; share
// by const reference.
struct Dataset {
  std::vector<Query> queries;
  std::size_t feature_dim = 0;
  SplitTag split_tag = SplitTag::kTrain;

  std::size_t num_documents() const;
  bool operator==(const Dataset&) const = default;
};

// Reads `<grade> qid:<id> <idx>:<val> ...` lines (1-based feature indices,
// strictly increasing; '#' starts a comment). Documents with the same qid
// must be contiguous. feature_dim is the largest index seen, or the hint if
// larger.
Dataset parse_letor(std::istream& in,
                    std::optional<std::size_t> max_feature_hint = std::nullopt,
                    SplitTag tag = SplitTag::kTrain);
Dataset parse_letor(std::string_view text,
                    std::optional<std::size_t> max_feature_hint = std::nullopt,
                    SplitTag tag = SplitTag::kTrain);
Dataset load_letor(const std::filesystem::path& path,
                   std::optional<std::size_t> max_feature_hint = std::nullopt,
                   SplitTag tag = SplitTag::kTrain);

// One line per document, zero features omitted, shortest round-trip floats.
void serialize_letor(const Dataset& dataset, std::ostream& out);
std::string serialize_letor(const Dataset& dataset);
void save_letor(const Dataset& dataset, const std::filesystem::path& path);

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

// Deterministic partition of the queries. Each part keeps the original query
// order.
std::array<Dataset, 3> split_queries(const Dataset& dataset,
                                     const SplitFractions& fractions,
                                     std::uint64_t seed);

// Per-feature min-max scaling to [0,1]; statistics come from one split and are
// applied to the others.
struct MinMaxNormalizer {
  std::vector<double> lo;
  std::vector<double> hi;

  static MinMaxNormalizer fit(const Dataset& dataset);
  void apply(Dataset& dataset) const;
  void apply(std::vector<double>& features) const;
  bool empty() const { return lo.empty(); }
};

}  // namespace ultr

#endif  // ULTR_LETOR_IO_H_
