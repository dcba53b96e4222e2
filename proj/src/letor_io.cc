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

#include "ultr/letor_io.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_set>

#include "ultr/errors.h"
#include "ultr/text_format.h"

namespace ultr {

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain:
      return "train";
    case SplitTag::kValid:
      return "valid";
    case SplitTag::kTest:
      return "test";
  }
  return "unknown";
}

std::size_t Dataset::num_documents() const {
  std::size_t n = 0;
  for (const auto& q : queries) n += q.documents.size();
  return n;
}

namespace {

struct ParsedLine {
  int grade = 0;
  std::string qid;
  std::vector<std::pair<std::size_t, double>> features;  // 0-based index
};

ParsedLine parse_line(std::string_view line, std::size_t line_no) {
  const auto tokens = split_ws(line);
  if (tokens.size() < 2) throw ParseError(line_no, "expected '<grade> qid:<id>'");

  ParsedLine parsed;
  const auto grade = parse_int(tokens[0]);
  if (!grade) {
    throw ValidationError("line " + std::to_string(line_no) +
                          ": grade is not an integer: '" +
                          std::string(tokens[0]) + "'");
  }
  if (*grade < 0 || *grade > kMaxGrade) {
    throw ValidationError("line " + std::to_string(line_no) + ": grade " +
                          std::to_string(*grade) + " outside [0," +
                          std::to_string(kMaxGrade) + "]");
  }
  parsed.grade = static_cast<int>(*grade);

  if (tokens[1].substr(0, 4) != "qid:" || tokens[1].size() == 4) {
    throw ParseError(line_no, "second field must be qid:<id>");
  }
  parsed.qid = std::string(tokens[1].substr(4));

  std::size_t last_index = 0;
  for (std::size_t t = 2; t < tokens.size(); ++t) {
    const auto tok = tokens[t];
    const auto colon = tok.find(':');
    if (colon == std::string_view::npos) {
      throw ParseError(line_no, "feature '" + std::string(tok) + "' lacks ':'");
    }
    const auto idx = parse_int(tok.substr(0, colon));
    const auto val = parse_double(tok.substr(colon + 1));
    if (!idx || !val) {
      throw ParseError(line_no, "malformed feature '" + std::string(tok) + "'");
    }
    if (*idx < 1) throw ParseError(line_no, "feature index must be >= 1");
    if (static_cast<std::size_t>(*idx) <= last_index) {
      throw ParseError(line_no, "feature indices must be strictly increasing");
    }
    if (!std::isfinite(*val)) {
      throw ParseError(line_no, "non-finite feature value");
    }
    last_index = static_cast<std::size_t>(*idx);
    parsed.features.emplace_back(last_index - 1, *val);
  }
  return parsed;
}

}  // namespace

Dataset parse_letor(std::istream& in, std::optional<std::size_t> max_feature_hint,
                    SplitTag tag) {
  std::vector<ParsedLine> lines;
  std::string raw;
  std::size_t line_no = 0;
  std::size_t dim = max_feature_hint.value_or(0);
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    lines.push_back(parse_line(line, line_no));
    if (!lines.back().features.empty()) {
      dim = std::max(dim, lines.back().features.back().first + 1);
    }
  }
  if (lines.empty()) throw EmptyDatasetError("LETOR input contains no documents");
  if (dim == 0) throw ValidationError("LETOR input has no features");

  Dataset dataset;
  dataset.feature_dim = dim;
  dataset.split_tag = tag;
  std::unordered_set<std::string> closed;
  for (auto& line : lines) {
    if (dataset.queries.empty() || dataset.queries.back().qid != line.qid) {
      if (!dataset.queries.empty()) closed.insert(dataset.queries.back().qid);
      if (closed.count(line.qid)) {
        throw ValidationError("qid " + line.qid +
                              " reappears after a different qid");
      }
      dataset.queries.push_back(Query{line.qid, {}});
    }
    auto& docs = dataset.queries.back().documents;
    Document doc;
    doc.features.assign(dim, 0.0);
    for (const auto& [idx, val] : line.features) doc.features[idx] = val;
    doc.relevance = line.grade;
    doc.doc_index = docs.size();
    docs.push_back(std::move(doc));
  }
  return dataset;
}

Dataset parse_letor(std::string_view text,
                    std::optional<std::size_t> max_feature_hint, SplitTag tag) {
  std::istringstream in{std::string(text)};
  return parse_letor(in, max_feature_hint, tag);
}

Dataset load_letor(const std::filesystem::path& path,
                   std::optional<std::size_t> max_feature_hint, SplitTag tag) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset " + path.string());
  return parse_letor(in, max_feature_hint, tag);
}

void serialize_letor(const Dataset& dataset, std::ostream& out) {
  for (const auto& query : dataset.queries) {
    for (const auto& doc : query.documents) {
      out << doc.relevance << " qid:" << query.qid;
      for (std::size_t k = 0; k < doc.features.size(); ++k) {
        if (doc.features[k] != 0.0) {
          out << ' ' << (k + 1) << ':' << format_double(doc.features[k]);
        }
      }
      out << '\n';
    }
  }
}

std::string serialize_letor(const Dataset& dataset) {
  std::ostringstream out;
  serialize_letor(dataset, out);
  return out.str();
}

void save_letor(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  serialize_letor(dataset, out);
}

std::array<Dataset, 3> split_queries(const Dataset& dataset,
                                     const SplitFractions& fractions,
                                     std::uint64_t seed) {
  const double sum = fractions.train + fractions.valid + fractions.test;
  if (fractions.train <= 0 || fractions.valid <= 0 || fractions.test <= 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("split fractions must be positive and sum to 1");
  }
  const std::size_t n = dataset.queries.size();
  if (n < 3) throw ValidationError("need at least 3 queries to split");

  auto count = [n](double f) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(f * n)));
  };
  std::size_t n_valid = count(fractions.valid);
  std::size_t n_test = count(fractions.test);
  while (n_valid + n_test > n - 1) {
    if (n_valid >= n_test && n_valid > 1) {
      --n_valid;
    } else {
      --n_test;
    }
  }
  const std::size_t n_train = n - n_valid - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::array<std::vector<std::size_t>, 3> picks;
  picks[0].assign(order.begin(), order.begin() + n_train);
  picks[1].assign(order.begin() + n_train, order.begin() + n_train + n_valid);
  picks[2].assign(order.begin() + n_train + n_valid, order.end());

  constexpr std::array<SplitTag, 3> kTags = {SplitTag::kTrain, SplitTag::kValid,
                                             SplitTag::kTest};
  std::array<Dataset, 3> out;
  for (int s = 0; s < 3; ++s) {
    std::sort(picks[s].begin(), picks[s].end());
    out[s].feature_dim = dataset.feature_dim;
    out[s].split_tag = kTags[s];
    for (std::size_t idx : picks[s]) out[s].queries.push_back(dataset.queries[idx]);
  }
  return out;
}

MinMaxNormalizer MinMaxNormalizer::fit(const Dataset& dataset) {
  MinMaxNormalizer norm;
  norm.lo.assign(dataset.feature_dim, std::numeric_limits<double>::infinity());
  norm.hi.assign(dataset.feature_dim, -std::numeric_limits<double>::infinity());
  for (const auto& q : dataset.queries) {
    for (const auto& d : q.documents) {
      for (std::size_t k = 0; k < dataset.feature_dim; ++k) {
        norm.lo[k] = std::min(norm.lo[k], d.features[k]);
        norm.hi[k] = std::max(norm.hi[k], d.features[k]);
      }
    }
  }
  for (std::size_t k = 0; k < dataset.feature_dim; ++k) {
    if (!std::isfinite(norm.lo[k])) norm.lo[k] = norm.hi[k] = 0.0;
  }
  return norm;
}

void MinMaxNormalizer::apply(std::vector<double>& features) const {
  const std::size_t n = std::min(features.size(), lo.size());
  for (std::size_t k = 0; k < n; ++k) {
    const double range = hi[k] - lo[k];
    features[k] = range > 0 ? (features[k] - lo[k]) / range : 0.0;
  }
}

void MinMaxNormalizer::apply(Dataset& dataset) const {
  for (auto& q : dataset.queries) {
    for (auto& d : q.documents) apply(d.features);
  }
}

}  // namespace ultr
