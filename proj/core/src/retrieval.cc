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

#include "semmatch/retrieval.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "semmatch/binary_io.h"
#include "semmatch/error.h"
#include "semmatch/parallel.h"

namespace semmatch {
namespace {

constexpr uint32_t kIndexMagic = 0x58494D53;  // "SMIX"
constexpr uint32_t kIndexVersion = 1;

struct Candidate {
  double score;
  size_t row;
};

}  // namespace

void UnitScale(Vector& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
}

ProductIndex::ProductIndex(std::vector<std::string> ids,
                           const std::vector<Vector>& rows, size_t dim,
                           uint64_t fingerprint)
    : dim_(dim), fingerprint_(fingerprint), ids_(std::move(ids)) {
  Require(ids_.size() == rows.size(), ErrorCode::kInvalidArgument,
          "index: id and embedding counts differ");
  matrix_.reserve(ids_.size() * dim_);
  for (const Vector& row : rows) {
    Require(row.size() == dim_, ErrorCode::kInvalidArgument,
            "index: embedding width differs from the index dimension");
    Vector unit = row;
    UnitScale(unit);
    matrix_.insert(matrix_.end(), unit.begin(), unit.end());
  }
  BuildLookup();
}

void ProductIndex::BuildLookup() {
  lookup_.clear();
  lookup_.reserve(ids_.size());
  for (size_t i = 0; i < ids_.size(); ++i) {
    if (!lookup_.emplace(ids_[i], i).second) {
      Fail(ErrorCode::kInvalidArgument, "index: duplicate product id " + ids_[i]);
    }
  }
}

std::optional<size_t> ProductIndex::Find(std::string_view id) const {
  auto it = lookup_.find(std::string(id));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::string ProductIndex::Serialize() const {
  ByteWriter w;
  w.PutU32(kIndexMagic);
  w.PutU32(kIndexVersion);
  w.PutU64(ids_.size());
  w.PutU64(dim_);
  w.PutU64(fingerprint_);
  for (const auto& id : ids_) w.PutString(id);
  w.PutF64s(matrix_);
  return w.Release();
}

ProductIndex ProductIndex::Deserialize(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.GetU32() != kIndexMagic) Fail(ErrorCode::kDataLoss, "bad index magic");
  if (r.GetU32() != kIndexVersion) {
    Fail(ErrorCode::kDataLoss, "unsupported index version");
  }
  ProductIndex index;
  const uint64_t count = r.GetU64();
  index.dim_ = r.GetU64();
  index.fingerprint_ = r.GetU64();
  // Each id costs at least its 4-byte length prefix.
  Require(count <= r.remaining() / 4, ErrorCode::kDataLoss,
          "index: count exceeds file size");
  index.ids_.reserve(count);
  for (uint64_t i = 0; i < count; ++i) index.ids_.push_back(r.GetString());
  Require(index.dim_ == 0 || count <= r.remaining() / 8 / index.dim_,
          ErrorCode::kDataLoss, "index: matrix truncated");
  index.matrix_.resize(count * index.dim_);
  r.GetF64s(index.matrix_);
  Require(r.remaining() == 0, ErrorCode::kDataLoss,
          "index: trailing bytes after matrix");
  try {
    index.BuildLookup();
  } catch (const Error& e) {
    Fail(ErrorCode::kDataLoss, e.what());
  }
  return index;
}

void ProductIndex::Save(const std::string& path) const {
  WriteFileBytes(path, Serialize());
}

ProductIndex ProductIndex::Load(const std::string& path) {
  return Deserialize(ReadFileBytes(path));
}

ProductIndex BuildIndex(std::span<const CatalogEntry> products,
                        const EmbeddingModel& model, const Vocabulary& vocab,
                        size_t workers) {
  std::vector<std::string> ids;
  ids.reserve(products.size());
  for (const auto& p : products) ids.push_back(p.id);
  std::vector<Vector> rows(products.size());
  ParallelFor(products.size(), workers, [&](size_t i) {
    rows[i] = InferEmbedding(vocab.Encode(products[i].text, Side::kProduct),
                             Side::kProduct, model);
  });
  return ProductIndex(std::move(ids), rows, model.dim(), model.Fingerprint());
}

Vector EmbedQuery(std::string_view text, const EmbeddingModel& model,
                  const Vocabulary& vocab) {
  Vector q = InferEmbedding(vocab.Encode(text, Side::kQuery), Side::kQuery,
                            model);
  UnitScale(q);
  return q;
}

MatchResult TopKByEmbedding(std::span<const double> unit_query,
                            const ProductIndex& index, size_t k,
                            double threshold, size_t workers) {
  Require(k >= 1, ErrorCode::kInvalidArgument, "top_k: k must be >= 1");
  Require(std::isfinite(threshold), ErrorCode::kInvalidArgument,
          "top_k: threshold must be finite");
  Require(unit_query.size() == index.dim(), ErrorCode::kInvalidArgument,
          "top_k: query width differs from the index dimension");
  const size_t n = index.size();
  if (workers == 0) workers = 1;
  const size_t parts = std::max<size_t>(1, std::min(workers, n));
  auto row_before = [&](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return index.id(a.row) < index.id(b.row);
  };
  // Each part keeps its own best k of a contiguous row range; the union of
  // the parts' winners always contains the global best k.
  std::vector<std::vector<Candidate>> best(parts);
  ParallelFor(parts, parts, [&](size_t part) {
    const size_t begin = n * part / parts;
    const size_t end = n * (part + 1) / parts;
    std::vector<Candidate>& out = best[part];
    for (size_t i = begin; i < end; ++i) {
      const auto row = index.embedding(i);
      double dot = 0.0;
      for (size_t j = 0; j < row.size(); ++j) dot += unit_query[j] * row[j];
      if (dot >= threshold) out.push_back({dot, i});
    }
    if (out.size() > k) {
      std::nth_element(out.begin(), out.begin() + static_cast<long>(k) - 1,
                       out.end(), row_before);
      out.resize(k);
    }
  });
  std::vector<Candidate> merged;
  for (auto& part : best) merged.insert(merged.end(), part.begin(), part.end());
  std::sort(merged.begin(), merged.end(), row_before);
  if (merged.size() > k) merged.resize(k);

  MatchResult result;
  result.threshold = threshold;
  result.items.reserve(merged.size());
  for (const auto& c : merged) result.items.push_back({index.id(c.row), c.score});
  return result;
}

MatchResult TopK(std::string_view query_text, const ProductIndex& index,
                 const EmbeddingModel& model, const Vocabulary& vocab,
                 size_t k, double threshold, size_t workers) {
  Require(index.fingerprint() == model.Fingerprint(),
          ErrorCode::kFailedPrecondition,
          "top_k: index was built from a different model");
  const Vector q = EmbedQuery(query_text, model, vocab);
  return TopKByEmbedding(q, index, k, threshold, workers);
}

}  // namespace semmatch
