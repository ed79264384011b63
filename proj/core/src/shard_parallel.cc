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

#include "semmatch/shard_parallel.h"

#include <cmath>
#include <string>
#include <thread>
#include <variant>

#include "semmatch/error.h"

namespace semmatch {
namespace {

Vector SliceOf(const Vector& v, size_t begin, size_t end) {
  return Vector(v.begin() + static_cast<std::ptrdiff_t>(begin),
                v.begin() + static_cast<std::ptrdiff_t>(end));
}

// Pooled + inference-normalized slice for one arm, computed exactly as the
// unsharded path does for the owned dimensions.
Vector ShardEmbedding(const ModelShard& shard, const TokenBag& bag, Side arm,
                      const EmbeddingModel& model) {
  const size_t width = shard.end - shard.begin;
  const EmbeddingTable& table = shard.tables[model.TableIndex(arm)];
  Vector out(width, 0.0);
  size_t count = 0;
  for (TokenId id : bag.ids) {
    if (id == 0) continue;
    if (id >= table.rows()) {
      Fail(ErrorCode::kOutOfRange,
           "token id " + std::to_string(id) + " outside shard table");
    }
    const auto row = table.row(id);
    for (size_t j = 0; j < width; ++j) out[j] += row[j];
    ++count;
  }
  if (count > 0) {
    const double inv = 1.0 / static_cast<double>(count);
    for (double& x : out) x *= inv;
  }
  if (model.config().normalization == Normalization::kBatch) {
    const NormState& ns = shard.norms[ArmIndex(arm)];
    for (size_t j = 0; j < width; ++j) {
      const double inv_std =
          1.0 / std::sqrt(ns.running_var[j] + model.config().bn_epsilon);
      const double xhat = (out[j] - ns.running_mean[j]) * inv_std;
      out[j] = ns.gamma[j] * xhat + ns.beta[j];
    }
  }
  return out;
}

struct InputMessage {
  size_t pair;
  const TokenBag* query;
  const TokenBag* product;
};

struct PartialsMessage {
  size_t shard;
  size_t pair;
  ShardPartials partials;
};

struct SlicesMessage {
  size_t shard;
  size_t pair;
  Vector query_slice;
  Vector product_slice;
};

using ReplyMessage = std::variant<PartialsMessage, SlicesMessage>;

}  // namespace

ShardPlan::ShardPlan(size_t shards, size_t dim) : shards_(shards), dim_(dim) {
  Require(shards >= 1, ErrorCode::kInvalidArgument,
          "shard plan: need at least one shard");
  Require(dim % shards == 0, ErrorCode::kInvalidArgument,
          "shard plan: " + std::to_string(shards) + " shards do not divide dim " +
              std::to_string(dim));
}

std::vector<ModelShard> SplitModel(const EmbeddingModel& model,
                                   const ShardPlan& plan) {
  Require(plan.dim() == model.dim(), ErrorCode::kInvalidArgument,
          "split: plan dimension differs from the model");
  std::vector<ModelShard> shards(plan.shards());
  for (size_t s = 0; s < plan.shards(); ++s) {
    ModelShard& shard = shards[s];
    shard.index = s;
    shard.begin = plan.begin(s);
    shard.end = plan.end(s);
    const size_t width = shard.end - shard.begin;
    for (size_t t = 0; t < model.num_tables(); ++t) {
      const EmbeddingTable& full = model.table(t);
      EmbeddingTable slice(full.rows(), width);
      for (size_t r = 0; r < full.rows(); ++r) {
        const auto src = full.row(r);
        auto dst = slice.row(r);
        for (size_t j = 0; j < width; ++j) dst[j] = src[shard.begin + j];
      }
      shard.tables.push_back(std::move(slice));
    }
    for (Side arm : {Side::kQuery, Side::kProduct}) {
      const NormState& ns = model.norm(arm);
      NormState& out = shard.norms[ArmIndex(arm)];
      out.gamma = SliceOf(ns.gamma, shard.begin, shard.end);
      out.beta = SliceOf(ns.beta, shard.begin, shard.end);
      out.running_mean = SliceOf(ns.running_mean, shard.begin, shard.end);
      out.running_var = SliceOf(ns.running_var, shard.begin, shard.end);
    }
  }
  return shards;
}

std::vector<EmbeddingTable> ConcatenateShards(
    std::span<const ModelShard> shards) {
  Require(!shards.empty(), ErrorCode::kInvalidArgument,
          "concatenate: no shards");
  size_t dim = 0;
  for (const auto& s : shards) dim += s.end - s.begin;
  std::vector<EmbeddingTable> tables;
  for (size_t t = 0; t < shards[0].tables.size(); ++t) {
    const size_t rows = shards[0].tables[t].rows();
    EmbeddingTable full(rows, dim);
    for (const auto& s : shards) {
      for (size_t r = 0; r < rows; ++r) {
        const auto src = s.tables[t].row(r);
        auto dst = full.row(r);
        for (size_t j = 0; j < src.size(); ++j) dst[s.begin + j] = src[j];
      }
    }
    tables.push_back(std::move(full));
  }
  return tables;
}

ShardPartials ComputeShardPartials(std::span<const double> a_slice,
                                   std::span<const double> b_slice) {
  Require(a_slice.size() == b_slice.size(), ErrorCode::kInvalidArgument,
          "shard partials: slice lengths differ");
  ShardPartials p;
  for (size_t i = 0; i < a_slice.size(); ++i) {
    p.dot += a_slice[i] * b_slice[i];
    p.sq_a += a_slice[i] * a_slice[i];
    p.sq_b += b_slice[i] * b_slice[i];
  }
  return p;
}

double AggregatePartials(std::span<const ShardPartials> partials) {
  double dot = 0.0;
  double sq_a = 0.0;
  double sq_b = 0.0;
  for (const auto& p : partials) {
    dot += p.dot;
    sq_a += p.sq_a;
    sq_b += p.sq_b;
  }
  if (sq_a == 0.0 || sq_b == 0.0) return 0.0;
  return dot / (std::sqrt(sq_a) * std::sqrt(sq_b));
}

ShardSimulation SimulateSharded(const ShardPlan& plan,
                                std::span<const TokenBag> queries,
                                std::span<const TokenBag> products,
                                const EmbeddingModel& model,
                                ExchangeMode mode) {
  Require(queries.size() == products.size(), ErrorCode::kInvalidArgument,
          "simulate: query and product counts differ");
  Require(model.config().normalization != Normalization::kLayer,
          ErrorCode::kFailedPrecondition,
          "simulate: layer normalization is not separable across shards");
  const std::vector<ModelShard> shards = SplitModel(model, plan);
  const size_t n = plan.shards();
  const size_t pairs = queries.size();

  std::vector<Channel<InputMessage>> inboxes(n);
  Channel<ReplyMessage> outbox;
  std::vector<std::jthread> workers;
  workers.reserve(n);
  for (size_t s = 0; s < n; ++s) {
    workers.emplace_back([&, s] {
      const ModelShard& shard = shards[s];
      while (auto msg = inboxes[s].Receive()) {
        Vector a = ShardEmbedding(shard, *msg->query, Side::kQuery, model);
        Vector b = ShardEmbedding(shard, *msg->product, Side::kProduct, model);
        if (mode == ExchangeMode::kPartialSums) {
          outbox.Send(PartialsMessage{s, msg->pair, ComputeShardPartials(a, b)});
        } else {
          outbox.Send(SlicesMessage{s, msg->pair, std::move(a), std::move(b)});
        }
      }
    });
  }

  ShardSimulation result;
  result.scores.assign(pairs, 0.0);
  result.ledger.pairs = pairs;
  result.ledger.scalars_per_pair.assign(pairs, 0);
  for (size_t i = 0; i < pairs; ++i) {
    for (size_t s = 0; s < n; ++s) {
      inboxes[s].Send(InputMessage{i, &queries[i], &products[i]});
      ++result.ledger.input_broadcasts;
    }
  }
  for (auto& inbox : inboxes) inbox.Close();

  // Replies arrive in any order; slot them by (pair, shard) and reduce in
  // shard order so the result does not depend on thread timing.
  std::vector<ShardPartials> partials(pairs * n);
  std::vector<Vector> query_full(
      mode == ExchangeMode::kConcatenate ? pairs : 0, Vector(plan.dim(), 0.0));
  std::vector<Vector> product_full = query_full;
  for (size_t received = 0; received < pairs * n; ++received) {
    auto reply = outbox.Receive();
    Require(reply.has_value(), ErrorCode::kInternal,
            "simulate: aggregator channel closed early");
    if (auto* p = std::get_if<PartialsMessage>(&*reply)) {
      partials[p->pair * n + p->shard] = p->partials;
      result.ledger.scalars_per_pair[p->pair] += 3;
      result.ledger.scalars_returned += 3;
    } else {
      auto& sl = std::get<SlicesMessage>(*reply);
      const size_t begin = plan.begin(sl.shard);
      for (size_t j = 0; j < sl.query_slice.size(); ++j) {
        query_full[sl.pair][begin + j] = sl.query_slice[j];
        product_full[sl.pair][begin + j] = sl.product_slice[j];
      }
      const size_t scalars = sl.query_slice.size() + sl.product_slice.size();
      result.ledger.scalars_per_pair[sl.pair] += scalars;
      result.ledger.scalars_returned += scalars;
    }
  }
  workers.clear();

  for (size_t i = 0; i < pairs; ++i) {
    if (mode == ExchangeMode::kPartialSums) {
      result.scores[i] = AggregatePartials(
          std::span<const ShardPartials>(partials.data() + i * n, n));
    } else {
      result.scores[i] = Cosine(query_full[i], product_full[i]);
    }
  }
  return result;
}

}  // namespace semmatch
