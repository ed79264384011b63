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

#include "semmatch/training.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>

#include "semmatch/error.h"

namespace semmatch {
namespace {

bool AllZero(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return v == 0.0; });
}

void AdamUpdate(std::span<double> params, std::span<const double> grads,
                std::span<double> m, std::span<double> v,
                const AdamConfig& config, double bias1, double bias2) {
  for (size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

size_t SampleRandomProduct(const TrainingData& data,
                           const std::vector<size_t>& excluded, Rng& rng) {
  const size_t n = data.num_products();
  std::uniform_int_distribution<size_t> pick(0, n - 1);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const size_t p = pick(rng);
    if (!std::binary_search(excluded.begin(), excluded.end(), p)) return p;
  }
  // Dense exclusion: draw among the eligible products directly.
  std::vector<size_t> eligible;
  for (size_t p = 0; p < n; ++p) {
    if (!std::binary_search(excluded.begin(), excluded.end(), p)) {
      eligible.push_back(p);
    }
  }
  Require(!eligible.empty(), ErrorCode::kFailedPrecondition,
          "sampling: no product outside a query's purchased/impressed set");
  return eligible[std::uniform_int_distribution<size_t>(0, eligible.size() -
                                                               1)(rng)];
}

}  // namespace

PreprocessResult PreprocessLogs(std::span<const LogRecord> logs,
                                const Vocabulary& vocab) {
  Require(!logs.empty(), ErrorCode::kFailedPrecondition,
          "preprocess: no usable log rows");
  PreprocessResult result;
  std::unordered_map<std::string, size_t> index;
  std::unordered_map<std::string, TokenBag> query_cache;
  std::unordered_map<std::string, TokenBag> product_cache;
  for (const auto& log : logs) {
    std::string key = log.query;
    key.push_back('\t');
    key += log.product_id;
    key.push_back('\t');
    key.push_back(static_cast<char>('0' + static_cast<int>(log.label)));
    const auto [it, inserted] = index.emplace(std::move(key), 0);
    if (!inserted) {
      result.records[it->second].weight += static_cast<double>(log.count);
      continue;
    }
    it->second = result.records.size();
    auto q = query_cache.find(log.query);
    if (q == query_cache.end()) {
      q = query_cache.emplace(log.query, vocab.Encode(log.query, Side::kQuery))
              .first;
    }
    auto p = product_cache.find(log.product_id);
    if (p == product_cache.end()) {
      p = product_cache
              .emplace(log.product_id,
                       vocab.Encode(log.product_text, Side::kProduct))
              .first;
    }
    TokenRecord r;
    r.label = log.label;
    r.weight = static_cast<double>(log.count);
    r.query = q->second;
    r.product = p->second;
    result.records.push_back(std::move(r));
  }
  for (const auto& r : result.records) {
    ++result.label_counts[static_cast<size_t>(r.label)];
  }
  return result;
}

TrainingData::TrainingData(std::span<const TokenRecord> records)
    : records_(records.begin(), records.end()) {
  std::map<std::vector<TokenId>, size_t> query_index;
  std::map<std::vector<TokenId>, size_t> product_index;
  std::vector<size_t> group_of_query;
  for (size_t i = 0; i < records_.size(); ++i) {
    const TokenRecord& r = records_[i];
    auto [qit, qnew] = query_index.emplace(r.query.ids, queries_.size());
    if (qnew) {
      queries_.push_back(r.query);
      group_of_query.push_back(groups_.size());
      groups_.push_back({qit->second, {}, {}, {}});
    }
    auto [pit, pnew] = product_index.emplace(r.product.ids, products_.size());
    if (pnew) products_.push_back(r.product);
    record_product_.push_back(pit->second);

    QueryGroup& g = groups_[group_of_query[qit->second]];
    if (r.label == Label3::kPurchased) {
      g.purchased.push_back(i);
    } else if (r.label == Label3::kImpressed) {
      g.impressed.push_back(i);
    }
    g.excluded.push_back(pit->second);
  }
  for (auto& g : groups_) {
    std::sort(g.excluded.begin(), g.excluded.end());
    g.excluded.erase(std::unique(g.excluded.begin(), g.excluded.end()),
                     g.excluded.end());
  }
}

size_t TrainingData::num_purchases() const {
  size_t n = 0;
  for (const auto& g : groups_) n += g.purchased.size();
  return n;
}

std::vector<TrainingExample> SampleEpoch(const TrainingData& data,
                                         const SamplingConfig& config,
                                         Rng& rng) {
  Require(data.num_purchases() > 0, ErrorCode::kFailedPrecondition,
          "sampling: no purchased records");
  std::vector<TrainingExample> out;
  out.reserve(data.num_purchases() *
              (1 + config.impressed_per_purchase + config.random_per_purchase));
  for (const auto& g : data.groups()) {
    const TokenBag& query = data.query_bag(g.query);
    for (size_t rec : g.purchased) {
      const TokenRecord& purchase = data.record(rec);
      out.push_back({query, purchase.product, Label3::kPurchased,
                     purchase.weight});

      const size_t k = config.impressed_per_purchase;
      if (g.impressed.empty()) {
        for (size_t i = 0; i < k; ++i) {
          const size_t p = SampleRandomProduct(data, g.excluded, rng);
          out.push_back({query, data.product_bag(p), Label3::kRandom, 1.0});
        }
      } else if (g.impressed.size() >= k) {
        std::vector<size_t> pool = g.impressed;
        for (size_t i = 0; i < k; ++i) {
          const size_t j =
              std::uniform_int_distribution<size_t>(i, pool.size() - 1)(rng);
          std::swap(pool[i], pool[j]);
          const TokenRecord& r = data.record(pool[i]);
          out.push_back({query, r.product, Label3::kImpressed, r.weight});
        }
      } else {
        std::uniform_int_distribution<size_t> pick(0, g.impressed.size() - 1);
        for (size_t i = 0; i < k; ++i) {
          const TokenRecord& r = data.record(g.impressed[pick(rng)]);
          out.push_back({query, r.product, Label3::kImpressed, r.weight});
        }
      }

      for (size_t i = 0; i < config.random_per_purchase; ++i) {
        const size_t p = SampleRandomProduct(data, g.excluded, rng);
        out.push_back({query, data.product_bag(p), Label3::kRandom, 1.0});
      }
    }
  }
  if (config.shuffle) std::shuffle(out.begin(), out.end(), rng);
  return out;
}

EmbeddingTable XavierInit(size_t rows, size_t dim, Rng& rng) {
  Require(rows >= 1 && dim >= 1, ErrorCode::kInvalidArgument,
          "xavier: rows and dim must be >= 1");
  EmbeddingTable table(rows, dim);
  const double bound = std::sqrt(3.0 / static_cast<double>(dim));
  std::uniform_real_distribution<double> u(-bound, bound);
  auto data = table.data();
  for (size_t i = dim; i < data.size(); ++i) data[i] = u(rng);
  return table;
}

void InitializeModel(EmbeddingModel& model, Rng& rng) {
  for (size_t t = 0; t < model.num_tables(); ++t) {
    model.table(t) = XavierInit(model.num_rows(), model.dim(), rng);
  }
}

AdamState::AdamState(const EmbeddingModel& model) {
  const size_t n = model.num_rows() * model.dim();
  for (size_t t = 0; t < model.num_tables(); ++t) {
    tables_.push_back({std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
  }
  for (int a = 0; a < 2; ++a) {
    gamma_[a] = {Vector(model.dim(), 0.0), Vector(model.dim(), 0.0)};
    beta_[a] = {Vector(model.dim(), 0.0), Vector(model.dim(), 0.0)};
  }
}

void AdamStep(EmbeddingModel& model, const Gradients& grads, AdamState& state,
              const AdamConfig& config) {
  const size_t dim = model.dim();
  Require(grads.tables.size() == model.num_tables() &&
              state.tables_.size() == model.num_tables(),
          ErrorCode::kInvalidArgument, "adam: table count mismatch");
  for (const auto& g : grads.tables) {
    Require(g.dim() == dim, ErrorCode::kInvalidArgument,
            "adam: gradient dimension mismatch");
  }
  for (int a = 0; a < 2; ++a) {
    Require(grads.dgamma[a].size() == dim && grads.dbeta[a].size() == dim,
            ErrorCode::kInvalidArgument, "adam: norm gradient shape mismatch");
  }

  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);

  for (size_t ti = 0; ti < model.num_tables(); ++ti) {
    EmbeddingTable& table = model.table(ti);
    auto& moments = state.tables_[ti];
    const SparseRowGradient& g = grads.tables[ti];
    for (size_t i = 0; i < g.rows().size(); ++i) {
      const TokenId row = g.rows()[i];
      if (row == 0) continue;
      Require(row < table.rows(), ErrorCode::kInvalidArgument,
              "adam: gradient row outside the table");
      const auto gv = g.values(i);
      if (AllZero(gv)) continue;
      const size_t off = static_cast<size_t>(row) * dim;
      AdamUpdate(table.row(row), gv, {moments.m.data() + off, dim},
                 {moments.v.data() + off, dim}, config, bias1, bias2);
    }
  }

  if (model.config().normalization == Normalization::kNone) return;
  for (Side arm : {Side::kQuery, Side::kProduct}) {
    const size_t a = ArmIndex(arm);
    NormState& ns = model.norm(arm);
    if (!AllZero(grads.dgamma[a])) {
      AdamUpdate(ns.gamma, grads.dgamma[a], state.gamma_[a].m,
                 state.gamma_[a].v, config, bias1, bias2);
    }
    if (!AllZero(grads.dbeta[a])) {
      AdamUpdate(ns.beta, grads.dbeta[a], state.beta_[a].m, state.beta_[a].v,
                 config, bias1, bias2);
    }
  }
}

namespace {

struct BatchView {
  std::vector<TokenBag> queries;
  std::vector<TokenBag> products;
};

BatchView Gather(std::span<const TrainingExample> batch) {
  BatchView v;
  v.queries.reserve(batch.size());
  v.products.reserve(batch.size());
  for (const auto& ex : batch) {
    v.queries.push_back(ex.query);
    v.products.push_back(ex.product);
  }
  return v;
}

double BatchLossFromScores(std::span<const TrainingExample> batch,
                           std::span<const double> scores,
                           const LossSpec& loss, double* total_weight) {
  double num = 0.0;
  double den = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    num += batch[i].weight * Loss(scores[i], batch[i].label, loss);
    den += batch[i].weight;
  }
  if (total_weight) *total_weight = den;
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

double WeightedBatchLoss(std::span<const TrainingExample> batch,
                         const EmbeddingModel& model, const LossSpec& loss) {
  const BatchView view = Gather(batch);
  const ForwardCache cache =
      ForwardBatch(view.queries, view.products, model, Phase::kTrain);
  return BatchLossFromScores(batch, cache.scores, loss, nullptr);
}

namespace {

struct BatchPass {
  ForwardCache cache;
  double loss = 0.0;
  Gradients grads;
};

// Views must outlive the returned cache.
BatchPass ForwardBackward(std::span<const TrainingExample> batch,
                          const BatchView& view, const EmbeddingModel& model,
                          const LossSpec& loss, uint64_t step) {
  BatchPass pass;
  pass.cache = ForwardBatch(view.queries, view.products, model, Phase::kTrain);
  double total_weight = 0.0;
  pass.loss = BatchLossFromScores(batch, pass.cache.scores, loss, &total_weight);
  bool finite = std::isfinite(pass.loss);
  for (double score : pass.cache.scores) finite = finite && std::isfinite(score);
  if (!finite) {
    std::ostringstream msg;
    msg << "training diverged: non-finite batch loss or score, loss " << pass.loss
        << " at step " << step << " (batch of " << batch.size() << ")";
    Fail(ErrorCode::kInternal, msg.str());
  }
  Vector dscores(batch.size(), 0.0);
  for (size_t i = 0; i < batch.size(); ++i) {
    dscores[i] = batch[i].weight *
                 LossGrad(pass.cache.scores[i], batch[i].label, loss) /
                 total_weight;
  }
  pass.grads = BackwardBatch(pass.cache, dscores, model);
  return pass;
}

}  // namespace

Gradients BatchGradients(std::span<const TrainingExample> batch,
                         const EmbeddingModel& model, const LossSpec& loss,
                         double* batch_loss) {
  const BatchView view = Gather(batch);
  BatchPass pass = ForwardBackward(batch, view, model, loss, 0);
  if (batch_loss != nullptr) *batch_loss = pass.loss;
  return std::move(pass.grads);
}

double TrainStep(std::span<const TrainingExample> batch, EmbeddingModel& model,
                 const LossSpec& loss, const AdamConfig& adam,
                 AdamState& state) {
  const BatchView view = Gather(batch);
  const BatchPass pass =
      ForwardBackward(batch, view, model, loss, state.step() + 1);
  AdamStep(model, pass.grads, state, adam);
  for (Side arm : {Side::kQuery, Side::kProduct}) {
    UpdateRunningStats(pass.cache.arms[ArmIndex(arm)].norm,
                       model.config().bn_momentum, model.norm(arm));
  }
  return pass.loss;
}

namespace {

EpochStats RunEpoch(size_t epoch, std::vector<TrainingExample>& examples,
                    EmbeddingModel& model, const LossSpec& loss,
                    const TrainConfig& config, AdamState& state) {
  EpochStats stats;
  stats.epoch = epoch;
  const size_t before = examples.size();
  std::erase_if(examples, [](const TrainingExample& ex) {
    return ex.query.valid_count == 0 || ex.product.valid_count == 0;
  });
  stats.dropped_empty = before - examples.size();
  stats.examples = examples.size();

  const bool batch_norm =
      model.config().normalization == Normalization::kBatch;
  const size_t bs = std::max<size_t>(1, config.batch_size);
  double loss_sum = 0.0;
  double weight_sum = 0.0;
  for (size_t start = 0; start < examples.size(); start += bs) {
    const size_t end = std::min(examples.size(), start + bs);
    const std::span<const TrainingExample> batch(examples.data() + start,
                                                 end - start);
    if (batch_norm && batch.size() < 2) {
      ++stats.skipped_batches;
      continue;
    }
    double w = 0.0;
    for (const auto& ex : batch) w += ex.weight;
    loss_sum += w * TrainStep(batch, model, loss, config.adam, state);
    weight_sum += w;
  }
  stats.mean_loss = weight_sum > 0.0 ? loss_sum / weight_sum : 0.0;
  return stats;
}

void ValidateTrainConfig(const TrainConfig& config, const EmbeddingModel& model,
                         const LossSpec& loss) {
  loss.Validate();
  Require(config.batch_size >= 1, ErrorCode::kInvalidArgument,
          "train: batch_size must be >= 1");
  Require(model.config().normalization != Normalization::kBatch ||
              config.batch_size >= 2,
          ErrorCode::kInvalidArgument,
          "train: batch normalization needs batch_size >= 2");
}

}  // namespace

TrainHistory TrainOnExamples(std::vector<TrainingExample> examples,
                             EmbeddingModel& model, const LossSpec& loss,
                             const TrainConfig& config,
                             const EpochCallback& on_epoch) {
  ValidateTrainConfig(config, model, loss);
  Rng rng(config.seed);
  AdamState state(model);
  TrainHistory history;
  for (size_t e = 0; e < config.epochs; ++e) {
    if (config.sampling.shuffle) std::shuffle(examples.begin(), examples.end(), rng);
    history.epochs.push_back(RunEpoch(e, examples, model, loss, config, state));
    if (on_epoch) on_epoch(history.epochs.back());
  }
  return history;
}

TrainHistory Train(const TrainingData& data, EmbeddingModel& model,
                   const LossSpec& loss, const TrainConfig& config,
                   const EpochCallback& on_epoch) {
  ValidateTrainConfig(config, model, loss);
  Rng rng(config.seed);
  AdamState state(model);
  TrainHistory history;
  for (size_t e = 0; e < config.epochs; ++e) {
    auto examples = SampleEpoch(data, config.sampling, rng);
    history.epochs.push_back(RunEpoch(e, examples, model, loss, config, state));
    if (on_epoch) on_epoch(history.epochs.back());
  }
  return history;
}

}  // namespace semmatch
