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

// Siamese embedding-bag scorer.
//
//   query bag   -> embedding rows -> mean -> norm(query arm)   --+
//                                                                 cosine
//   product bag -> embedding rows -> mean -> norm(product arm) --+
//
// Embeddings are either one table shared by both arms or one table per arm.
// Each arm always has its own normalization state. Row 0 of every table is
// the padding row: it stays zero and is excluded from the mean.

#ifndef SEMMATCH_MODEL_H_
#define SEMMATCH_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semmatch/tokenizer.h"

namespace semmatch {

using Vector = std::vector<double>;

enum class Normalization { kNone, kBatch, kLayer };
enum class Phase { kTrain, kInfer };

std::string_view NormalizationName(Normalization n);
Normalization ParseNormalization(std::string_view name);

struct ModelConfig {
  size_t embedding_dim = 256;
  bool shared_embeddings = true;
  Normalization normalization = Normalization::kBatch;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-5;

  void Validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Row-major rows x dim matrix.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(size_t rows, size_t dim)
      : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

  size_t rows() const { return rows_; }
  size_t dim() const { return dim_; }
  std::span<double> row(size_t r) { return {data_.data() + r * dim_, dim_}; }
  std::span<const double> row(size_t r) const {
    return {data_.data() + r * dim_, dim_};
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const EmbeddingTable&) const = default;

 private:
  size_t rows_ = 0;
  size_t dim_ = 0;
  std::vector<double> data_;
};

struct NormState {
  Vector gamma;
  Vector beta;
  Vector running_mean;
  Vector running_var;

  explicit NormState(size_t dim = 0)
      : gamma(dim, 1.0), beta(dim, 0.0), running_mean(dim, 0.0),
        running_var(dim, 1.0) {}

  bool operator==(const NormState&) const = default;
};

inline size_t ArmIndex(Side arm) { return arm == Side::kQuery ? 0 : 1; }

class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  // All tables zero, gamma = 1, beta = 0, running stats (0, 1).
  EmbeddingModel(size_t vocab_size, size_t oov_bins, ModelConfig config);

  const ModelConfig& config() const { return config_; }
  size_t vocab_size() const { return vocab_size_; }
  size_t oov_bins() const { return oov_bins_; }
  size_t num_rows() const { return vocab_size_ + oov_bins_ + 1; }
  size_t dim() const { return config_.embedding_dim; }

  size_t num_tables() const { return tables_.size(); }
  // Index of the table backing an arm: always 0 when shared.
  size_t TableIndex(Side arm) const {
    return config_.shared_embeddings ? 0 : ArmIndex(arm);
  }
  EmbeddingTable& table(size_t i) { return tables_[i]; }
  const EmbeddingTable& table(size_t i) const { return tables_[i]; }
  EmbeddingTable& table_for(Side arm) { return tables_[TableIndex(arm)]; }
  const EmbeddingTable& table_for(Side arm) const {
    return tables_[TableIndex(arm)];
  }

  NormState& norm(Side arm) { return norms_[ArmIndex(arm)]; }
  const NormState& norm(Side arm) const { return norms_[ArmIndex(arm)]; }

  // Binary little-endian checkpoint:
  //   u32 magic "SMCK", u32 version, u64 V, u64 B, u64 N, u32 flags,
  //   f64 bn_momentum, f64 bn_epsilon,
  //   tables (1 or 2) row-major f64,
  //   NormState query then product: gamma, beta, running_mean, running_var.
  // flags: bit 0 shared embeddings, bits 1-2 normalization (0 none, 1 batch,
  // 2 layer).
  std::string Serialize() const;
  static EmbeddingModel Deserialize(std::string_view bytes);
  void Save(const std::string& path) const;
  static EmbeddingModel Load(const std::string& path);

  // FNV-1a over the serialized checkpoint.
  uint64_t Fingerprint() const;

  bool operator==(const EmbeddingModel&) const = default;

 private:
  ModelConfig config_;
  size_t vocab_size_ = 0;
  size_t oov_bins_ = 0;
  std::vector<EmbeddingTable> tables_;
  NormState norms_[2];
};

// Mean of the embedding rows of the non-zero ids; zero vector when the bag
// has no valid ids. Throws kOutOfRange for ids beyond the table.
Vector EmbedBag(const TokenBag& bag, Side arm, const EmbeddingModel& model);

// Per-batch statistics kept for backward and for the running-stat update.
struct NormCache {
  Normalization mode = Normalization::kNone;
  Phase phase = Phase::kInfer;
  std::vector<Vector> normalized;  // x_hat, before gamma/beta
  Vector mean;     // batch mode: per-dim; layer mode: per-example
  Vector inv_std;  // same shape as mean
  Vector variance;  // batch mode, train phase only
};

struct NormOutput {
  std::vector<Vector> outputs;
  NormCache cache;
};

// Batch mode standardizes each dimension with batch statistics (train) or
// running statistics (infer). Layer mode standardizes each example across
// dimensions. Both then apply gamma/beta. Population variance, epsilon
// inside the square root. Running statistics are not touched; see
// UpdateRunningStats.
NormOutput Normalize(std::span<const Vector> batch, Side arm,
                     const EmbeddingModel& model, Phase phase);

// running = momentum * running + (1 - momentum) * batch, for a train-phase
// batch-mode cache.
void UpdateRunningStats(const NormCache& cache, double momentum,
                        NormState& state);

// a.b / (|a||b|), or 0 when either norm is 0.
double Cosine(std::span<const double> a, std::span<const double> b);

struct ArmCache {
  std::vector<const TokenBag*> bags;
  std::vector<Vector> pooled;
  NormCache norm;
  std::vector<Vector> outputs;
};

struct ForwardCache {
  Phase phase = Phase::kInfer;
  ArmCache arms[2];
  Vector scores;
};

// Scores a batch of pairs. The cache references the bags, which must outlive
// it.
ForwardCache ForwardBatch(std::span<const TokenBag> queries,
                          std::span<const TokenBag> products,
                          const EmbeddingModel& model, Phase phase);

// Pooled and inference-normalized embedding of one bag; what the retrieval
// index stores (before unit scaling).
Vector InferEmbedding(const TokenBag& bag, Side arm,
                      const EmbeddingModel& model);

// Single-pair convenience wrapper.
double Score(const TokenBag& query, const TokenBag& product,
             const EmbeddingModel& model, Phase phase = Phase::kInfer);

// Accumulates per-row gradients for one table.
class SparseRowGradient {
 public:
  explicit SparseRowGradient(size_t dim = 0) : dim_(dim) {}

  std::span<double> Row(TokenId row);
  const std::vector<TokenId>& rows() const { return rows_; }
  std::span<const double> values(size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  size_t dim() const { return dim_; }
  // Gradient for `row`, or zeros when the row was not touched.
  Vector Get(TokenId row) const;

 private:
  size_t dim_;
  std::vector<TokenId> rows_;
  std::vector<double> values_;
  std::unordered_map<TokenId, size_t> index_;
};

struct Gradients {
  std::vector<SparseRowGradient> tables;  // parallel to model tables
  Vector dgamma[2];
  Vector dbeta[2];
};

// Exact gradients of sum_i dscores[i] * score_i with respect to the
// embedding rows and gamma/beta of both arms. Row 0 is never reported.
Gradients BackwardBatch(const ForwardCache& cache,
                        std::span<const double> dscores,
                        const EmbeddingModel& model);

}  // namespace semmatch

#endif  // SEMMATCH_MODEL_H_
