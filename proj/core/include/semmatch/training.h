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

#ifndef SEMMATCH_TRAINING_H_
#define SEMMATCH_TRAINING_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "semmatch/data_pipeline.h"
#include "semmatch/losses.h"
#include "semmatch/model.h"
#include "semmatch/record_file.h"
#include "semmatch/tokenizer.h"

namespace semmatch {

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Preprocessing

struct PreprocessResult {
  std::vector<TokenRecord> records;
  // Indexed by Label3.
  std::array<size_t, 3> label_counts{};
};

// Groups identical (query, product_id, label) triples, sums their counts into
// the weight and encodes each side once. Record order follows the first
// appearance of each triple. Throws kFailedPrecondition on an empty input.
PreprocessResult PreprocessLogs(std::span<const LogRecord> logs,
                                const Vocabulary& vocab);

// ---------------------------------------------------------------------------
// Epoch sampling

struct TrainingExample {
  TokenBag query;
  TokenBag product;
  Label3 label = Label3::kPurchased;
  double weight = 1.0;
};

struct SamplingConfig {
  size_t impressed_per_purchase = 6;
  size_t random_per_purchase = 7;
  bool shuffle = true;
};

// Records regrouped by query. Queries and products are identified by their
// encoded bags; the product catalog for random negatives is the set of
// distinct product bags in the records.
class TrainingData {
 public:
  explicit TrainingData(std::span<const TokenRecord> records);

  size_t num_queries() const { return queries_.size(); }
  size_t num_products() const { return products_.size(); }
  size_t num_purchases() const;

  struct QueryGroup {
    size_t query;  // index into query bags
    std::vector<size_t> purchased;  // record indices
    std::vector<size_t> impressed;  // record indices
    std::vector<size_t> excluded;   // sorted product indices
  };

  const std::vector<QueryGroup>& groups() const { return groups_; }
  const TokenBag& query_bag(size_t i) const { return queries_[i]; }
  const TokenBag& product_bag(size_t i) const { return products_[i]; }
  const TokenRecord& record(size_t i) const { return records_[i]; }
  size_t record_product(size_t i) const { return record_product_[i]; }

 private:
  std::vector<TokenRecord> records_;
  std::vector<size_t> record_product_;
  std::vector<TokenBag> queries_;
  std::vector<TokenBag> products_;
  std::vector<QueryGroup> groups_;
};

// For every purchased record: the purchase itself, `impressed_per_purchase`
// impressed products of the same query (without replacement when enough
// exist, with replacement otherwise; random products labeled Random when the
// query has none) and `random_per_purchase` random catalog products outside
// the query's purchased/impressed sets. Random negatives get weight 1.
std::vector<TrainingExample> SampleEpoch(const TrainingData& data,
                                         const SamplingConfig& config,
                                         Rng& rng);

// ---------------------------------------------------------------------------
// Initialization and optimization

// rows x dim entries i.i.d. U(-sqrt(3/dim), sqrt(3/dim)); row 0 zeroed.
EmbeddingTable XavierInit(size_t rows, size_t dim, Rng& rng);

// Xavier-initializes every table of the model.
void InitializeModel(EmbeddingModel& model, Rng& rng);

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moments for every parameter of a model. Embedding rows are updated lazily:
// a row whose gradient is absent or all zero is left alone, moments included.
class AdamState {
 public:
  explicit AdamState(const EmbeddingModel& model);

  uint64_t step() const { return step_; }

 private:
  friend void AdamStep(EmbeddingModel& model, const Gradients& grads,
                       AdamState& state, const AdamConfig& config);

  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  uint64_t step_ = 0;
  std::vector<Moments> tables_;
  Moments gamma_[2];
  Moments beta_[2];
};

// One bias-corrected ADAM step. Throws kInvalidArgument when the gradient
// shapes do not match the model.
void AdamStep(EmbeddingModel& model, const Gradients& grads, AdamState& state,
              const AdamConfig& config);

// ---------------------------------------------------------------------------
// Training loop

struct TrainConfig {
  size_t batch_size = 256;
  AdamConfig adam;
  size_t epochs = 10;
  uint64_t seed = 1;
  SamplingConfig sampling;
};

struct EpochStats {
  size_t epoch = 0;
  double mean_loss = 0.0;  // weighted, over the epoch's examples
  size_t examples = 0;
  size_t dropped_empty = 0;    // examples with an empty query or product bag
  size_t skipped_batches = 0;  // batch-norm batches smaller than 2
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

// sum_i w_i * loss_i / sum_i w_i over a train-phase forward of the batch.
double WeightedBatchLoss(std::span<const TrainingExample> batch,
                         const EmbeddingModel& model, const LossSpec& loss);

// Gradients of WeightedBatchLoss with respect to every model parameter.
// Optionally reports the loss. Throws kInternal on a non-finite loss.
Gradients BatchGradients(std::span<const TrainingExample> batch,
                         const EmbeddingModel& model, const LossSpec& loss,
                         double* batch_loss = nullptr);

// Forward, weighted mean loss, backward, ADAM and running-stat update for one
// batch. Returns the batch loss. Throws kInternal on a non-finite loss.
double TrainStep(std::span<const TrainingExample> batch, EmbeddingModel& model,
                 const LossSpec& loss, const AdamConfig& adam,
                 AdamState& state);

using EpochCallback = std::function<void(const EpochStats&)>;

// Trains on a fixed example list for config.epochs epochs (shuffled each
// epoch when config.sampling.shuffle).
TrainHistory TrainOnExamples(std::vector<TrainingExample> examples,
                             EmbeddingModel& model, const LossSpec& loss,
                             const TrainConfig& config,
                             const EpochCallback& on_epoch = {});

// Resamples SampleEpoch every epoch. Deterministic for a fixed seed.
TrainHistory Train(const TrainingData& data, EmbeddingModel& model,
                   const LossSpec& loss, const TrainConfig& config,
                   const EpochCallback& on_epoch = {});

}  // namespace semmatch

#endif  // SEMMATCH_TRAINING_H_
