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

#include "ultr/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ultr/errors.h"
#include "ultr/text_format.h"

namespace ultr {
namespace {

std::vector<std::size_t> order_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double gain(int grade) { return std::exp2(grade) - 1.0; }

void check(std::span<const double> scores, std::span<const int> grades) {
  if (scores.empty()) throw ValidationError("metric: empty input");
  if (scores.size() != grades.size()) throw ValidationError("metric: length mismatch");
}

}  // namespace

std::optional<double> ndcg_at_k(std::span<const double> scores, std::span<const int> grades,
                                int k) {
  check(scores, grades);
  if (k < 1) throw ValidationError("ndcg: cutoff must be >= 1");
  const auto order = order_by_score(scores);
  std::vector<int> ideal(grades.begin(), grades.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const std::size_t depth = std::min<std::size_t>(k, grades.size());
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    const double disc = 1.0 / std::log2(2.0 + r);
    dcg += gain(grades[order[r]]) * disc;
    idcg += gain(ideal[r]) * disc;
  }
  if (!(idcg > 0)) return std::nullopt;
  return dcg / idcg;
}

std::optional<double> arp(std::span<const double> scores, std::span<const int> grades) {
  check(scores, grades);
  const auto order = order_by_score(scores);
  double sum = 0.0;
  int count = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (grades[order[r]] > 0) {
      sum += static_cast<double>(r + 1);
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

EvalReport evaluate_scores(const Dataset& dataset, std::span<const std::vector<double>> scores,
                           std::span<const int> cutoffs, bool keep_per_query) {
  if (dataset.queries.empty()) throw EmptyDatasetError("evaluate: empty dataset");
  if (scores.size() != dataset.queries.size()) {
    throw ValidationError("evaluate: one score vector per query expected");
  }
  EvalReport rep;
  std::map<int, double> sums;
  std::map<int, std::size_t> counts;
  double arp_sum = 0.0;
  std::size_t arp_count = 0;
  for (std::size_t q = 0; q < dataset.queries.size(); ++q) {
    const auto& query = dataset.queries[q];
    std::vector<int> grades;
    for (const auto& d : query.documents) grades.push_back(d.relevance);
    QueryMetrics qm;
    qm.qid = query.qid;
    for (int k : cutoffs) {
      if (auto v = ndcg_at_k(scores[q], grades, k)) {
        qm.ndcg[k] = *v;
        sums[k] += *v;
        ++counts[k];
      }
    }
    qm.arp = arp(scores[q], grades);
    if (qm.arp) {
      arp_sum += *qm.arp;
      ++arp_count;
    } else {
      ++rep.n_skipped;
    }
    ++rep.n_queries;
    if (keep_per_query) rep.per_query.push_back(std::move(qm));
  }
  for (int k : cutoffs) rep.ndcg_at[k] = counts[k] ? sums[k] / counts[k] : 0.0;
  rep.arp = arp_count ? arp_sum / arp_count : 0.0;
  return rep;
}

EvalReport evaluate(const Ranker& ranker, const Dataset& dataset, std::span<const int> cutoffs,
                    bool keep_per_query) {
  std::vector<std::vector<double>> scores;
  scores.reserve(dataset.queries.size());
  for (const auto& q : dataset.queries) {
    std::vector<std::span<const double>> rows;
    for (const auto& d : q.documents) rows.emplace_back(d.features);
    const Eigen::VectorXd s = ranker.score_batch(stack_rows(rows, ranker.spec().input_dim));
    scores.emplace_back(s.data(), s.data() + s.size());
  }
  return evaluate_scores(dataset, scores, cutoffs, keep_per_query);
}

void write_report_tsv(std::ostream& out, const EvalReport& r, std::string_view config_hash) {
  if (!config_hash.empty()) out << "# config_hash " << config_hash << '\n';
  out << "# gain " << kNdcgGainConvention << '\n';
  out << "# metric\tcutoff\tvalue\n";
  for (const auto& [k, v] : r.ndcg_at) out << "ndcg\t" << k << '\t' << format_double(v) << '\n';
  out << "arp\t0\t" << format_double(r.arp) << '\n';
  out << "n_queries\t0\t" << r.n_queries << '\n';
  out << "n_skipped\t0\t" << r.n_skipped << '\n';
}

EvalReport read_report_tsv(std::istream& in, std::string* config_hash) {
  EvalReport r;
  std::string raw;
  std::size_t line_no = 0;
  bool any = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto f = split_ws(line.substr(1));
      if (config_hash && f.size() == 2 && f[0] == "config_hash") {
        *config_hash = std::string(f[1]);
      }
      continue;
    }
    const auto f = split(line, '\t');
    const auto k = f.size() == 3 ? parse_int(f[1]) : std::nullopt;
    const auto v = f.size() == 3 ? parse_double(f[2]) : std::nullopt;
    if (!k || !v) throw ParseError(line_no, "report row must be metric, cutoff, value");
    if (f[0] == "ndcg") {
      r.ndcg_at[static_cast<int>(*k)] = *v;
    } else if (f[0] == "arp") {
      r.arp = *v;
    } else if (f[0] == "n_queries") {
      r.n_queries = static_cast<std::size_t>(*v);
    } else if (f[0] == "n_skipped") {
      r.n_skipped = static_cast<std::size_t>(*v);
    } else {
      throw ParseError(line_no, "unknown report metric '" + std::string(f[0]) + "'");
    }
    any = true;
  }
  if (!any) throw EmptyDatasetError("report is empty");
  return r;
}

std::string format_report_table(const EvalReport& r) {
  std::ostringstream out;
  char buf[64];
  out << "metric      value\n";
  for (const auto& [k, v] : r.ndcg_at) {
    std::snprintf(buf, sizeof buf, "NDCG@%-5d  %.4f\n", k, v);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "ARP         %.4f\n", r.arp);
  out << buf;
  out << "queries     " << r.n_queries << " (" << r.n_skipped << " without relevant items)\n";
  out << "gain        " << kNdcgGainConvention << '\n';
  return out.str();
}

}  // namespace ultr
