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

#include "semmatch/model.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "semmatch/binary_io.h"
#include "semmatch/error.h"

namespace semmatch {
namespace {

constexpr uint32_t kCheckpointMagic = 0x4B434D53;  // "SMCK"
constexpr uint32_t kCheckpointVersion = 1;

uint32_t NormalizationCode(Normalization n) {
  switch (n) {
    case Normalization::kNone:
      return 0;
    case Normalization::kBatch:
      return 1;
    case Normalization::kLayer:
      return 2;
  }
  return 0;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Backward of x_hat = (x - mean) * inv_std over a group of `count` values
// sharing one (mean, inv_std):
//   dx = inv_std / count * (count * dxhat - sum(dxhat) - xhat * sum(dxhat *
//   xhat)).
// Shared by batch mode (group = one dimension across the batch) and layer
// mode (group = one example across dimensions).
template <typename Get, typename Set>
void StandardizeBackward(size_t count, double inv_std, Get get_dxhat_xhat,
                         Set set_dx) {
  double sum_d = 0.0;
  double sum_dx = 0.0;
  for (size_t i = 0; i < count; ++i) {
    const auto [d, xh] = get_dxhat_xhat(i);
    sum_d += d;
    sum_dx += d * xh;
  }
  const double n = static_cast<double>(count);
  for (size_t i = 0; i < count; ++i) {
    const auto [d, xh] = get_dxhat_xhat(i);
    set_dx(i, inv_std / n * (n * d - sum_d - xh * sum_dx));
  }
}

}  // namespace

std::string_view NormalizationName(Normalization n) {
  switch (n) {
    case Normalization::kNone:
      return "none";
    case Normalization::kBatch:
      return "batch";
    case Normalization::kLayer:
      return "layer";
  }
  return "?";
}

Normalization ParseNormalization(std::string_view name) {
  if (name == "none") return Normalization::kNone;
  if (name == "batch") return Normalization::kBatch;
  if (name == "layer") return Normalization::kLayer;
  Fail(ErrorCode::kInvalidArgument,
       "unknown normalization '" + std::string(name) + "'");
}

void ModelConfig::Validate() const {
  Require(embedding_dim >= 1, ErrorCode::kInvalidArgument,
          "model: embedding_dim must be >= 1");
  Require(bn_momentum > 0.0 && bn_momentum < 1.0, ErrorCode::kInvalidArgument,
          "model: bn_momentum must be in (0, 1)");
  Require(bn_epsilon > 0.0, ErrorCode::kInvalidArgument,
          "model: bn_epsilon must be > 0");
}

EmbeddingModel::EmbeddingModel(size_t vocab_size, size_t oov_bins,
                               ModelConfig config)
    : config_(config), vocab_size_(vocab_size), oov_bins_(oov_bins) {
  config_.Validate();
  const size_t n_tables = config_.shared_embeddings ? 1 : 2;
  for (size_t i = 0; i < n_tables; ++i) {
    tables_.emplace_back(num_rows(), config_.embedding_dim);
  }
  norms_[0] = NormState(config_.embedding_dim);
  norms_[1] = NormState(config_.embedding_dim);
}

std::string EmbeddingModel::Serialize() const {
  ByteWriter w;
  w.PutU32(kCheckpointMagic);
  w.PutU32(kCheckpointVersion);
  w.PutU64(vocab_size_);
  w.PutU64(oov_bins_);
  w.PutU64(config_.embedding_dim);
  w.PutU32((config_.shared_embeddings ? 1u : 0u) |
           (NormalizationCode(config_.normalization) << 1));
  w.PutF64(config_.bn_momentum);
  w.PutF64(config_.bn_epsilon);
  for (const auto& t : tables_) w.PutF64s(t.data());
  for (const auto& ns : norms_) {
    w.PutF64s(ns.gamma);
    w.PutF64s(ns.beta);
    w.PutF64s(ns.running_mean);
    w.PutF64s(ns.running_var);
  }
  return w.Release();
}

EmbeddingModel EmbeddingModel::Deserialize(std::string_view bytes) {
  ByteReader r(bytes);
  Require(r.GetU32() == kCheckpointMagic, ErrorCode::kDataLoss,
          "checkpoint: bad magic");
  const uint32_t version = r.GetU32();
  Require(version == kCheckpointVersion, ErrorCode::kDataLoss,
          "checkpoint: unsupported version " + std::to_string(version));
  const uint64_t v = r.GetU64();
  const uint64_t b = r.GetU64();
  ModelConfig cfg;
  cfg.embedding_dim = r.GetU64();
  const uint32_t flags = r.GetU32();
  cfg.shared_embeddings = (flags & 1u) != 0;
  switch ((flags >> 1) & 3u) {
    case 0:
      cfg.normalization = Normalization::kNone;
      break;
    case 1:
      cfg.normalization = Normalization::kBatch;
      break;
    case 2:
      cfg.normalization = Normalization::kLayer;
      break;
    default:
      Fail(ErrorCode::kDataLoss, "checkpoint: bad normalization flag");
  }
  cfg.bn_momentum = r.GetF64();
  cfg.bn_epsilon = r.GetF64();
  const size_t rows = v + b + 1;
  const size_t n_tables = cfg.shared_embeddings ? 1 : 2;
  const size_t expected =
      8 * (n_tables * rows * cfg.embedding_dim + 8 * cfg.embedding_dim);
  Require(r.remaining() == expected, ErrorCode::kDataLoss,
          "checkpoint: payload size mismatch");
  EmbeddingModel model(v, b, cfg);
  for (auto& t : model.tables_) r.GetF64s(t.data());
  for (auto& ns : model.norms_) {
    r.GetF64s(ns.gamma);
    r.GetF64s(ns.beta);
    r.GetF64s(ns.running_mean);
    r.GetF64s(ns.running_var);
  }
  return model;
}

void EmbeddingModel::Save(const std::string& path) const {
  WriteFileBytes(path, Serialize());
}

EmbeddingModel EmbeddingModel::Load(const std::string& path) {
  return Deserialize(ReadFileBytes(path));
}

uint64_t EmbeddingModel::Fingerprint() const { return Fnv1a64(Serialize()); }

Vector EmbedBag(const TokenBag& bag, Side arm, const EmbeddingModel& model) {
  const EmbeddingTable& table = model.table_for(arm);
  Vector out(model.dim(), 0.0);
  size_t count = 0;
  for (TokenId id : bag.ids) {
    if (id == 0) continue;
    if (id >= table.rows()) {
      Fail(ErrorCode::kOutOfRange,
           "token id " + std::to_string(id) + " outside embedding table of " +
               std::to_string(table.rows()) + " rows");
    }
    const auto row = table.row(id);
    for (size_t j = 0; j < out.size(); ++j) out[j] += row[j];
    ++count;
  }
  if (count == 0) return out;
  const double inv = 1.0 / static_cast<double>(count);
  for (double& x : out) x *= inv;
  return out;
}

NormOutput Normalize(std::span<const Vector> batch, Side arm,
                     const EmbeddingModel& model, Phase phase) {
  const ModelConfig& cfg = model.config();
  const NormState& state = model.norm(arm);
  const size_t n = batch.size();
  const size_t dim = model.dim();
  NormOutput result;
  result.cache.mode = cfg.normalization;
  result.cache.phase = phase;

  if (cfg.normalization == Normalization::kNone) {
    result.outputs.assign(batch.begin(), batch.end());
    return result;
  }

  auto& xhat = result.cache.normalized;
  xhat.assign(n, Vector(dim, 0.0));
  auto& mean = result.cache.mean;
  auto& inv_std = result.cache.inv_std;

  if (cfg.normalization == Normalization::kBatch) {
    mean.assign(dim, 0.0);
    inv_std.assign(dim, 0.0);
    if (phase == Phase::kTrain) {
      Require(n >= 2, ErrorCode::kFailedPrecondition,
              "batch normalization needs a batch of at least 2 in training");
      for (const auto& x : batch) {
        for (size_t j = 0; j < dim; ++j) mean[j] += x[j];
      }
      for (double& m : mean) m /= static_cast<double>(n);
      Vector var(dim, 0.0);
      for (const auto& x : batch) {
        for (size_t j = 0; j < dim; ++j) {
          const double d = x[j] - mean[j];
          var[j] += d * d;
        }
      }
      for (size_t j = 0; j < dim; ++j) {
        var[j] /= static_cast<double>(n);
        inv_std[j] = 1.0 / std::sqrt(var[j] + cfg.bn_epsilon);
      }
      result.cache.variance = std::move(var);
    } else {
      for (size_t j = 0; j < dim; ++j) {
        mean[j] = state.running_mean[j];
        inv_std[j] = 1.0 / std::sqrt(state.running_var[j] + cfg.bn_epsilon);
      }
    }
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < dim; ++j) {
        xhat[i][j] = (batch[i][j] - mean[j]) * inv_std[j];
      }
    }
  } else {
    mean.assign(n, 0.0);
    inv_std.assign(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
      double m = 0.0;
      for (double v : batch[i]) m += v;
      m /= static_cast<double>(dim);
      double var = 0.0;
      for (double v : batch[i]) var += (v - m) * (v - m);
      var /= static_cast<double>(dim);
      mean[i] = m;
      inv_std[i] = 1.0 / std::sqrt(var + cfg.bn_epsilon);
      for (size_t j = 0; j < dim; ++j) {
        xhat[i][j] = (batch[i][j] - m) * inv_std[i];
      }
    }
  }

  result.outputs.assign(n, Vector(dim, 0.0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < dim; ++j) {
      result.outputs[i][j] = state.gamma[j] * xhat[i][j] + state.beta[j];
    }
  }
  return result;
}

void UpdateRunningStats(const NormCache& cache, double momentum,
                        NormState& state) {
  if (cache.mode != Normalization::kBatch || cache.phase != Phase::kTrain) {
    return;
  }
  const size_t dim = cache.mean.size();
  for (size_t j = 0; j < dim; ++j) {
    const double var = cache.variance[j];
    state.running_mean[j] =
        momentum * state.running_mean[j] + (1.0 - momentum) * cache.mean[j];
    state.running_var[j] = std::max(
        momentum * state.running_var[j] + (1.0 - momentum) * var,
        std::numeric_limits<double>::min());
  }
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  Require(a.size() == b.size(), ErrorCode::kInvalidArgument,
          "cosine: length mismatch");
  const double na = std::sqrt(Dot(a, a));
  const double nb = std::sqrt(Dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = Dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

ForwardCache ForwardBatch(std::span<const TokenBag> queries,
                          std::span<const TokenBag> products,
                          const EmbeddingModel& model, Phase phase) {
  Require(queries.size() == products.size(), ErrorCode::kInvalidArgument,
          "forward: query and product batch sizes differ");
  ForwardCache cache;
  cache.phase = phase;
  const std::span<const TokenBag> sides[2] = {queries, products};
  for (Side arm : {Side::kQuery, Side::kProduct}) {
    ArmCache& ac = cache.arms[ArmIndex(arm)];
    const auto bags = sides[ArmIndex(arm)];
    ac.bags.reserve(bags.size());
    ac.pooled.reserve(bags.size());
    for (const auto& bag : bags) {
      ac.bags.push_back(&bag);
      ac.pooled.push_back(EmbedBag(bag, arm, model));
    }
    NormOutput norm = Normalize(ac.pooled, arm, model, phase);
    ac.outputs = std::move(norm.outputs);
    ac.norm = std::move(norm.cache);
  }
  cache.scores.resize(queries.size());
  for (size_t i = 0; i < queries.size(); ++i) {
    cache.scores[i] =
        Cosine(cache.arms[0].outputs[i], cache.arms[1].outputs[i]);
  }
  return cache;
}

Vector InferEmbedding(const TokenBag& bag, Side arm,
                      const EmbeddingModel& model) {
  const Vector pooled[1] = {EmbedBag(bag, arm, model)};
  return std::move(Normalize(pooled, arm, model, Phase::kInfer).outputs[0]);
}

double Score(const TokenBag& query, const TokenBag& product,
             const EmbeddingModel& model, Phase phase) {
  return ForwardBatch({&query, 1}, {&product, 1}, model, phase).scores[0];
}

std::span<double> SparseRowGradient::Row(TokenId row) {
  auto [it, inserted] = index_.emplace(row, rows_.size());
  if (inserted) {
    rows_.push_back(row);
    values_.resize(values_.size() + dim_, 0.0);
  }
  return {values_.data() + it->second * dim_, dim_};
}

Vector SparseRowGradient::Get(TokenId row) const {
  const auto it = index_.find(row);
  if (it == index_.end()) return Vector(dim_, 0.0);
  const auto v = values(it->second);
  return Vector(v.begin(), v.end());
}

Gradients BackwardBatch(const ForwardCache& cache,
                        std::span<const double> dscores,
                        const EmbeddingModel& model) {
  const size_t n = cache.scores.size();
  Require(dscores.size() == n, ErrorCode::kInvalidArgument,
          "backward: gradient count differs from batch size");
  const size_t dim = model.dim();

  Gradients grads;
  for (size_t t = 0; t < model.num_tables(); ++t) {
    grads.tables.emplace_back(dim);
  }
  for (int a = 0; a < 2; ++a) {
    grads.dgamma[a].assign(dim, 0.0);
    grads.dbeta[a].assign(dim, 0.0);
  }

  // d score / d normalized outputs.
  std::vector<Vector> dout[2];
  dout[0].assign(n, Vector(dim, 0.0));
  dout[1].assign(n, Vector(dim, 0.0));
  for (size_t i = 0; i < n; ++i) {
    if (dscores[i] == 0.0) continue;
    const Vector& a = cache.arms[0].outputs[i];
    const Vector& b = cache.arms[1].outputs[i];
    const double na = std::sqrt(Dot(a, a));
    const double nb = std::sqrt(Dot(b, b));
    if (na == 0.0 || nb == 0.0) continue;
    const double s = Dot(a, b) / (na * nb);
    const double inv_ab = 1.0 / (na * nb);
    for (size_t j = 0; j < dim; ++j) {
      dout[0][i][j] = dscores[i] * (b[j] * inv_ab - s * a[j] / (na * na));
      dout[1][i][j] = dscores[i] * (a[j] * inv_ab - s * b[j] / (nb * nb));
    }
  }

  for (Side arm : {Side::kQuery, Side::kProduct}) {
    const size_t ai = ArmIndex(arm);
    const ArmCache& ac = cache.arms[ai];
    const NormState& state = model.norm(arm);
    const NormCache& nc = ac.norm;
    std::vector<Vector> dpooled;

    if (nc.mode == Normalization::kNone) {
      dpooled = dout[ai];
    } else {
      std::vector<Vector> dxhat(n, Vector(dim, 0.0));
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < dim; ++j) {
          grads.dgamma[ai][j] += dout[ai][i][j] * nc.normalized[i][j];
          grads.dbeta[ai][j] += dout[ai][i][j];
          dxhat[i][j] = dout[ai][i][j] * state.gamma[j];
        }
      }
      dpooled.assign(n, Vector(dim, 0.0));
      if (nc.mode == Normalization::kBatch && nc.phase == Phase::kInfer) {
        for (size_t i = 0; i < n; ++i) {
          for (size_t j = 0; j < dim; ++j) {
            dpooled[i][j] = dxhat[i][j] * nc.inv_std[j];
          }
        }
      } else if (nc.mode == Normalization::kBatch) {
        for (size_t j = 0; j < dim; ++j) {
          StandardizeBackward(
              n, nc.inv_std[j],
              [&](size_t i) {
                return std::pair{dxhat[i][j], nc.normalized[i][j]};
              },
              [&](size_t i, double v) { dpooled[i][j] = v; });
        }
      } else {
        for (size_t i = 0; i < n; ++i) {
          StandardizeBackward(
              dim, nc.inv_std[i],
              [&](size_t j) {
                return std::pair{dxhat[i][j], nc.normalized[i][j]};
              },
              [&](size_t j, double v) { dpooled[i][j] = v; });
        }
      }
    }

    SparseRowGradient& table_grad = grads.tables[model.TableIndex(arm)];
    for (size_t i = 0; i < n; ++i) {
      const TokenBag& bag = *ac.bags[i];
      if (bag.valid_count == 0) continue;
      size_t count = 0;
      for (TokenId id : bag.ids) count += id != 0;
      const double share = 1.0 / static_cast<double>(count);
      for (TokenId id : bag.ids) {
        if (id == 0) continue;
        auto row = table_grad.Row(id);
        for (size_t j = 0; j < dim; ++j) row[j] += dpooled[i][j] * share;
      }
    }
  }
  return grads;
}

}  // namespace semmatch
