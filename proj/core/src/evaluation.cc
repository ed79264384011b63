/*
 * Copyright 2026 The semmatch Authors.
 *
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

#include "semmatch/evaluation.h"

#include <charconv>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "semmatch/error.h"
#include "semmatch/parallel.h"

namespace semmatch {
namespace {

double Discount(size_t rank) {  // 1-based
  return std::log2(static_cast<double>(rank) + 1.0);
}

std::string FormatValue(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void AddValue(MetricSummary& summary, const std::optional<double>& v) {
  if (v.has_value()) {
    summary.per_query.push_back(*v);
  } else {
    ++summary.excluded;
  }
}

std::vector<std::string> RankedIds(const MatchResult& result) {
  std::vector<std::string> ids;
  ids.reserve(result.items.size());
  for (const auto& item : result.items) ids.push_back(item.id);
  return ids;
}

}  // namespace

std::optional<double> RecallAtK(std::span<const std::string> ranked,
                                const IdSet& relevant, size_t k) {
  Require(k >= 1, ErrorCode::kInvalidArgument, "recall: k must be >= 1");
  if (relevant.empty()) return std::nullopt;
  size_t hits = 0;
  for (size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    hits += relevant.count(ranked[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

std::optional<double> AveragePrecision(std::span<const std::string> ranked,
                                       const IdSet& relevant, size_t cutoff) {
  if (relevant.empty()) return std::nullopt;
  size_t hits = 0;
  double sum = 0.0;
  for (size_t i = 0; i < std::min(cutoff, ranked.size()); ++i) {
    if (relevant.count(ranked[i]) == 0) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(relevant.size());
}

std::optional<double> Ndcg(std::span<const std::string> ranked,
                           const GainMap& gains) {
  std::vector<double> ideal;
  for (const auto& [id, g] : gains) {
    Require(g >= 0.0, ErrorCode::kInvalidArgument, "ndcg: negative gain");
    if (g > 0.0) ideal.push_back(g);
  }
  if (ideal.empty()) return std::nullopt;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double dcg = 0.0;
  for (size_t i = 0; i < ranked.size(); ++i) {
    auto it = gains.find(ranked[i]);
    if (it != gains.end()) dcg += it->second / Discount(i + 1);
  }
  double idcg = 0.0;
  for (size_t i = 0; i < std::min(ideal.size(), ranked.size()); ++i) {
    idcg += ideal[i] / Discount(i + 1);
  }
  if (idcg == 0.0) return 0.0;  // empty ranking
  return dcg / idcg;
}

std::optional<double> ReciprocalRank(std::span<const std::string> ranked,
                                     const IdSet& relevant) {
  if (relevant.empty()) return std::nullopt;
  for (size_t i = 0; i < ranked.size(); ++i) {
    if (relevant.count(ranked[i]) != 0) {
      return 1.0 / static_cast<double>(i + 1);
    }
  }
  return 0.0;
}

std::vector<EvalQuery> BuildEvalQueries(std::span<const QueryEntry> queries,
                                        std::span<const LogRecord> eval_log) {
  std::vector<EvalQuery> out;
  std::unordered_map<std::string, size_t> by_text;
  for (const auto& q : queries) {
    if (q.split != Split::kEval) continue;
    if (by_text.emplace(q.text, out.size()).second) {
      out.push_back(EvalQuery{q.id, q.text, {}, {}});
    }
  }
  for (const auto& rec : eval_log) {
    auto it = by_text.find(rec.query);
    Require(it != by_text.end(), ErrorCode::kInvalidArgument,
            "eval log names an unknown eval query: " + rec.query);
    EvalQuery& q = out[it->second];
    if (rec.label == Label3::kPurchased) {
      q.purchased[rec.product_id] += rec.count;
    } else if (rec.label == Label3::kImpressed) {
      q.impressed.insert(rec.product_id);
    }
  }
  for (const auto& q : out) {
    for (const auto& [id, count] : q.purchased) {
      Require(q.impressed.count(id) == 0, ErrorCode::kInvalidArgument,
              "query " + q.id + ": product " + id +
                  " is both purchased and impressed");
    }
  }
  std::erase_if(out, [](const EvalQuery& q) {
    return q.purchased.empty() && q.impressed.empty();
  });
  return out;
}

std::vector<CatalogEntry> BuildMatchingCorpus(
    std::span<const EvalQuery> queries, std::span<const CatalogEntry> catalog,
    size_t corpus_size, Rng& rng) {
  std::unordered_map<std::string, size_t> position;
  for (size_t i = 0; i < catalog.size(); ++i) position.emplace(catalog[i].id, i);
  std::vector<bool> chosen(catalog.size(), false);
  size_t count = 0;
  auto mark = [&](const std::string& id) {
    auto it = position.find(id);
    Require(it != position.end(), ErrorCode::kNotFound,
            "eval product " + id + " is not in the catalog");
    if (!chosen[it->second]) {
      chosen[it->second] = true;
      ++count;
    }
  };
  for (const auto& q : queries) {
    for (const auto& [id, c] : q.purchased) mark(id);
    for (const auto& id : q.impressed) mark(id);
  }
  std::vector<size_t> rest;
  for (size_t i = 0; i < catalog.size(); ++i) {
    if (!chosen[i]) rest.push_back(i);
  }
  std::shuffle(rest.begin(), rest.end(), rng);
  for (size_t i = 0; i < rest.size() && count < corpus_size; ++i, ++count) {
    chosen[rest[i]] = true;
  }
  std::vector<CatalogEntry> out;
  for (size_t i = 0; i < catalog.size(); ++i) {
    if (chosen[i]) out.push_back(catalog[i]);
  }
  return out;
}

double MetricSummary::mean() const {
  if (per_query.empty()) return 0.0;
  double sum = 0.0;
  for (double v : per_query) sum += v;
  return sum / static_cast<double>(per_query.size());
}

void RunMatchingEval(const EmbeddingModel& model, const Vocabulary& vocab,
                     std::span<const EvalQuery> queries,
                     const ProductIndex& index, const EvalOptions& options,
                     MetricReport& report) {
  Require(options.k >= 1, ErrorCode::kInvalidArgument, "eval: k must be >= 1");
  Require(index.fingerprint() == model.Fingerprint(),
          ErrorCode::kFailedPrecondition,
          "eval: index was built from a different model");
  const size_t cutoff = options.map_cutoff == 0 ? options.k : options.map_cutoff;
  const size_t depth = std::max(options.k, cutoff);
  std::vector<std::vector<std::string>> ranked(queries.size());
  ParallelFor(queries.size(), options.workers, [&](size_t i) {
    const Vector q = EmbedQuery(queries[i].text, model, vocab);
    ranked[i] = RankedIds(TopKByEmbedding(q, index, depth, options.threshold));
  });
  report.k = options.k;
  report.recall = {};
  report.map = {};
  report.matching_ndcg = {};
  report.matching_mrr = {};
  for (size_t i = 0; i < queries.size(); ++i) {
    IdSet relevant;
    GainMap gains;
    for (const auto& [id, c] : queries[i].purchased) {
      relevant.insert(id);
      gains[id] = 1.0;
    }
    const std::vector<std::string>& all = ranked[i];
    std::span<const std::string> top(all.data(), std::min(options.k, all.size()));
    AddValue(report.recall, RecallAtK(top, relevant, options.k));
    AddValue(report.map, AveragePrecision(all, relevant, cutoff));
    AddValue(report.matching_ndcg, Ndcg(top, gains));
    AddValue(report.matching_mrr, ReciprocalRank(top, relevant));
  }
}

void RunRankingEval(const EmbeddingModel& model, const Vocabulary& vocab,
                    std::span<const EvalQuery> queries,
                    const ProductIndex& index, const EvalOptions& options,
                    MetricReport& report) {
  Require(index.fingerprint() == model.Fingerprint(),
          ErrorCode::kFailedPrecondition,
          "eval: index was built from a different model");
  std::vector<std::vector<std::string>> ranked(queries.size());
  ParallelFor(queries.size(), options.workers, [&](size_t i) {
    const EvalQuery& q = queries[i];
    if (q.purchased.empty() || q.impressed.empty()) return;
    const Vector emb = EmbedQuery(q.text, model, vocab);
    std::vector<ScoredProduct> scored;
    auto add = [&](const std::string& id) {
      auto row = index.Find(id);
      Require(row.has_value(), ErrorCode::kNotFound,
              "ranking candidate " + id + " is not in the index");
      const auto p = index.embedding(*row);
      double dot = 0.0;
      for (size_t j = 0; j < p.size(); ++j) dot += emb[j] * p[j];
      scored.push_back({id, dot});
    };
    for (const auto& [id, c] : q.purchased) add(id);
    for (const auto& id : q.impressed) add(id);
    std::sort(scored.begin(), scored.end(),
              [](const ScoredProduct& a, const ScoredProduct& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.id < b.id;
              });
    for (const auto& s : scored) ranked[i].push_back(s.id);
  });
  report.ranking_ndcg = {};
  report.ranking_mrr = {};
  for (size_t i = 0; i < queries.size(); ++i) {
    const EvalQuery& q = queries[i];
    if (q.purchased.empty() || q.impressed.empty()) {
      ++report.ranking_ndcg.excluded;
      ++report.ranking_mrr.excluded;
      continue;
    }
    IdSet relevant;
    GainMap gains;
    for (const auto& [id, c] : q.purchased) {
      relevant.insert(id);
      gains[id] = static_cast<double>(c);
    }
    AddValue(report.ranking_ndcg, Ndcg(ranked[i], gains));
    AddValue(report.ranking_mrr, ReciprocalRank(ranked[i], relevant));
  }
}

std::string FormatMetricTable(const MetricReport& report) {
  const std::vector<std::string> headers = {
      "Recall@" + std::to_string(report.k), "MAP",          "Matching NDCG",
      "Matching MRR",                        "Ranking NDCG", "Ranking MRR"};
  const std::vector<const MetricSummary*> values = {
      &report.recall,        &report.map,          &report.matching_ndcg,
      &report.matching_mrr,  &report.ranking_ndcg, &report.ranking_mrr};
  std::string head;
  std::string row;
  for (size_t i = 0; i < headers.size(); ++i) {
    const size_t width = std::max<size_t>(headers[i].size(), 8);
    std::string h = headers[i];
    std::string v = FormatValue(values[i]->mean());
    h.resize(width, ' ');
    v.insert(0, width - std::min(width, v.size()), ' ');
    head += (i ? " | " : "") + h;
    row += (i ? " | " : "") + v;
  }
  return head + "\n" + std::string(head.size(), '-') + "\n" + row + "\n";
}

std::string FormatMetricLines(const MetricReport& report) {
  const std::vector<std::pair<std::string, const MetricSummary*>> metrics = {
      {"recall@" + std::to_string(report.k), &report.recall},
      {"map", &report.map},
      {"matching_ndcg", &report.matching_ndcg},
      {"matching_mrr", &report.matching_mrr},
      {"ranking_ndcg", &report.ranking_ndcg},
      {"ranking_mrr", &report.ranking_mrr}};
  std::string out;
  for (const auto& [name, s] : metrics) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), s->mean());
    out += name + " = " + std::string(buf, res.ptr) + "\n";
    out += name + ".queries = " + std::to_string(s->per_query.size()) + "\n";
    out += name + ".excluded = " + std::to_string(s->excluded) + "\n";
  }
  return out;
}

}  // namespace semmatch
