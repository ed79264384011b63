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

#ifndef SEMMATCH_EVALUATION_H_
#define SEMMATCH_EVALUATION_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "semmatch/data_pipeline.h"
#include "semmatch/model.h"
#include "semmatch/retrieval.h"
#include "semmatch/tokenizer.h"
#include "semmatch/training.h"

namespace semmatch {

using IdSet = std::set<std::string>;
using GainMap = std::map<std::string, double>;

// Each returns nullopt when the metric is undefined for the input (empty
// relevant set, no positive gain).

// |top-K ∩ relevant| / |relevant|. Throws kInvalidArgument when k is 0.
std::optional<double> RecallAtK(std::span<const std::string> ranked,
                                const IdSet& relevant, size_t k);

// Sum over relevant items within the first `cutoff` ranks of the precision at
// their rank, divided by |relevant|.
std::optional<double> AveragePrecision(std::span<const std::string> ranked,
                                       const IdSet& relevant, size_t cutoff);

// DCG with discount log2(i + 1) at 1-based rank i and linear gains, divided
// by the DCG of the gains sorted in non-increasing order over the same number
// of ranks. Ids missing from `gains` have gain 0.
std::optional<double> Ndcg(std::span<const std::string> ranked,
                           const GainMap& gains);

// 1 / rank of the first relevant item, 0 when none is ranked.
std::optional<double> ReciprocalRank(std::span<const std::string> ranked,
                                     const IdSet& relevant);

struct EvalQuery {
  std::string id;
  std::string text;
  std::map<std::string, uint64_t> purchased;  // id -> purchase count
  IdSet impressed;
};

// Eval-split queries that have at least one logged interaction, in query
// file order. Throws kInvalidArgument when a pair is both purchased and
// impressed or a log line names an unknown query text.
std::vector<EvalQuery> BuildEvalQueries(std::span<const QueryEntry> queries,
                                        std::span<const LogRecord> eval_log);

// Every purchased/impressed product of the queries plus uniformly sampled
// catalog products until the corpus holds `corpus_size` entries (or the whole
// catalog). Output keeps catalog order. Throws kNotFound when a query names a
// product missing from the catalog.
std::vector<CatalogEntry> BuildMatchingCorpus(
    std::span<const EvalQuery> queries, std::span<const CatalogEntry> catalog,
    size_t corpus_size, Rng& rng);

struct MetricSummary {
  std::vector<double> per_query;  // defined values, in query order
  size_t excluded = 0;            // queries where the metric is undefined
  double mean() const;
};

struct MetricReport {
  size_t k = 100;
  MetricSummary recall;
  MetricSummary map;
  MetricSummary matching_ndcg;
  MetricSummary matching_mrr;
  MetricSummary ranking_ndcg;
  MetricSummary ranking_mrr;
};

struct EvalOptions {
  size_t k = 100;
  size_t map_cutoff = 0;    // 0 means k
  double threshold = -1.0;  // matching-task pruning; -1 keeps every product
  size_t workers = 1;
};

// Ranks the whole index for every query and scores the top K with purchased
// products as relevant. Fills the four matching fields.
void RunMatchingEval(const EmbeddingModel& model, const Vocabulary& vocab,
                     std::span<const EvalQuery> queries,
                     const ProductIndex& index, const EvalOptions& options,
                     MetricReport& report);

// Ranks each query's purchased + impressed candidates by score (ties by id).
// NDCG uses purchase-count gains, MRR purchased relevance. Queries lacking a
// purchased or an impressed product are excluded. Candidates are looked up
// in `index`; throws kNotFound when one is missing.
void RunRankingEval(const EmbeddingModel& model, const Vocabulary& vocab,
                    std::span<const EvalQuery> queries,
                    const ProductIndex& index, const EvalOptions& options,
                    MetricReport& report);

// Aligned table with the columns Recall, MAP, Matching NDCG, Matching MRR,
// Ranking NDCG, Ranking MRR.
std::string FormatMetricTable(const MetricReport& report);

// One `metric = value` line per metric plus query and exclusion counts.
std::string FormatMetricLines(const MetricReport& report);

}  // namespace semmatch

#endif  // SEMMATCH_EVALUATION_H_
