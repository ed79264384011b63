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

// Exact cosine retrieval over precomputed, unit-scaled product embeddings.

#ifndef SEMMATCH_RETRIEVAL_H_
#define SEMMATCH_RETRIEVAL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semmatch/data_pipeline.h"
#include "semmatch/model.h"
#include "semmatch/tokenizer.h"

namespace semmatch {

// Scales v to unit L2 norm in place; the zero vector is left as is.
void UnitScale(Vector& v);

class ProductIndex {
 public:
  ProductIndex() = default;

  // Unit-scales every row. Throws kInvalidArgument on a duplicate id or a
  // row of the wrong width.
  ProductIndex(std::vector<std::string> ids, const std::vector<Vector>& rows,
               size_t dim, uint64_t fingerprint);

  size_t size() const { return ids_.size(); }
  size_t dim() const { return dim_; }
  uint64_t fingerprint() const { return fingerprint_; }
  const std::string& id(size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> embedding(size_t i) const {
    return {matrix_.data() + i * dim_, dim_};
  }
  std::optional<size_t> Find(std::string_view id) const;

  std::string Serialize() const;
  static ProductIndex Deserialize(std::string_view bytes);
  void Save(const std::string& path) const;
  static ProductIndex Load(const std::string& path);

  bool operator==(const ProductIndex& other) const {
    return dim_ == other.dim_ && fingerprint_ == other.fingerprint_ &&
           ids_ == other.ids_ && matrix_ == other.matrix_;
  }

 private:
  void BuildLookup();

  size_t dim_ = 0;
  uint64_t fingerprint_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> matrix_;  // row-major, size() x dim()
  std::unordered_map<std::string, size_t> lookup_;
};

// Encodes, embeds (inference phase) and unit-scales every product. Throws
// kInvalidArgument on a duplicate product id.
ProductIndex BuildIndex(std::span<const CatalogEntry> products,
                        const EmbeddingModel& model, const Vocabulary& vocab,
                        size_t workers = 1);

// Unit-scaled inference-phase query embedding.
Vector EmbedQuery(std::string_view text, const EmbeddingModel& model,
                  const Vocabulary& vocab);

struct ScoredProduct {
  std::string id;
  double score = 0.0;
  bool operator==(const ScoredProduct&) const = default;
};

struct MatchResult {
  std::string query_id;
  double threshold = 0.0;
  std::vector<ScoredProduct> items;  // score desc, then id asc
};

// Up to k products with score >= threshold. The scan may be split across
// workers; the merge is deterministic. Throws kInvalidArgument when k is 0,
// the threshold is not finite or the query width differs from the index.
MatchResult TopKByEmbedding(std::span<const double> unit_query,
                            const ProductIndex& index, size_t k,
                            double threshold, size_t workers = 1);

// Throws kFailedPrecondition when the index was built from another model.
MatchResult TopK(std::string_view query_text, const ProductIndex& index,
                 const EmbeddingModel& model, const Vocabulary& vocab,
                 size_t k, double threshold, size_t workers = 1);

}  // namespace semmatch

#endif  // SEMMATCH_RETRIEVAL_H_
