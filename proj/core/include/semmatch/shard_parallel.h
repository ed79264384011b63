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

// Model-parallel cosine scoring with the embedding dimension split across
// workers. Shard s owns dimensions [r*s, r*(s+1)) with r = k/n. Each shard
// pools its slice of both arms and returns three partial reductions
//   dot_s = sum a_i b_i,  sq_a_s = sum a_i^2,  sq_b_s = sum b_i^2
// from which the aggregator forms
//   cos = sum_s dot_s / (sqrt(sum_s sq_a_s) * sqrt(sum_s sq_b_s)).
//
// Workers are threads that only exchange immutable messages through
// channels; a ledger counts what crosses them.

#ifndef SEMMATCH_SHARD_PARALLEL_H_
#define SEMMATCH_SHARD_PARALLEL_H_

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "semmatch/model.h"
#include "semmatch/tokenizer.h"

namespace semmatch {

class ShardPlan {
 public:
  // Throws kInvalidArgument unless shards >= 1 and shards divides dim.
  ShardPlan(size_t shards, size_t dim);

  size_t shards() const { return shards_; }
  size_t dim() const { return dim_; }
  size_t slice_dim() const { return dim_ / shards_; }
  size_t begin(size_t shard) const { return shard * slice_dim(); }
  size_t end(size_t shard) const { return (shard + 1) * slice_dim(); }

 private:
  size_t shards_;
  size_t dim_;
};

struct ShardPartials {
  double dot = 0.0;
  double sq_a = 0.0;
  double sq_b = 0.0;

  bool operator==(const ShardPartials&) const = default;
};

// One worker's immutable slice of the model: columns [begin, end) of every
// table and of both arms' normalization state.
struct ModelShard {
  size_t index = 0;
  size_t begin = 0;
  size_t end = 0;
  std::vector<EmbeddingTable> tables;
  NormState norms[2];
};

std::vector<ModelShard> SplitModel(const EmbeddingModel& model,
                                   const ShardPlan& plan);

// Reassembles full-width tables from the shards of SplitModel.
std::vector<EmbeddingTable> ConcatenateShards(std::span<const ModelShard> shards);

// Throws kInvalidArgument when the slices differ in length.
ShardPartials ComputeShardPartials(std::span<const double> a_slice,
                                   std::span<const double> b_slice);

// 0 when either total square sum is 0.
double AggregatePartials(std::span<const ShardPartials> partials);

enum class ExchangeMode {
  kPartialSums,  // 3 scalars per shard per pair
  kConcatenate,  // both r-length slices per shard per pair (2k per pair)
};

struct CommLedger {
  size_t pairs = 0;
  size_t input_broadcasts = 0;   // (pair, shard) input deliveries
  size_t scalars_returned = 0;   // total scalars sent back to the aggregator
  std::vector<size_t> scalars_per_pair;
};

struct ShardSimulation {
  Vector scores;
  CommLedger ledger;
};

// Inference-phase scores for each (query, product) pair. Supports the none
// and batch normalizations, which act per dimension; layer normalization
// needs whole-vector statistics and is rejected with kFailedPrecondition.
ShardSimulation SimulateSharded(const ShardPlan& plan,
                                std::span<const TokenBag> queries,
                                std::span<const TokenBag> products,
                                const EmbeddingModel& model,
                                ExchangeMode mode = ExchangeMode::kPartialSums);

// Unbounded multi-producer multi-consumer queue. Receive blocks until a
// message arrives or the channel is closed and drained.
template <typename T>
class Channel {
 public:
  void Send(T message) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      queue_.push_back(std::move(message));
    }
    cv_.notify_one();
  }

  void Close() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::optional<T> Receive() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return std::nullopt;
    T message = std::move(queue_.front());
    queue_.pop_front();
    return message;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> queue_;
  bool closed_ = false;
};

}  // namespace semmatch

#endif  // SEMMATCH_SHARD_PARALLEL_H_
