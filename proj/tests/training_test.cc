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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "semmatch/error.h"
#include "test_util.h"

namespace semmatch {
namespace {

using semmatch::testing::RandomBag;

TokenBag Bag(std::vector<TokenId> ids) {
  TokenBag b;
  for (TokenId id : ids) b.valid_count += id != 0;
  b.ids = std::move(ids);
  return b;
}

Vocabulary SmallVocab() {
  TokenizerConfig c;
  c.budget_per_class[TokenClass::Unigram()] = 100;
  c.query_max_tokens = 4;
  c.product_max_tokens = 6;
  const CorpusRecord corpus[] = {{Side::kQuery, "red dress blue shoe"},
                                 {Side::kProduct, "crimson gown silk"}};
  return BuildVocabulary(corpus, c);
}

TEST(PreprocessLogs, AggregatesIdenticalTriples) {
  const Vocabulary v = SmallVocab();
  const std::vector<LogRecord> logs = {
      {"red dress", "P1", "crimson gown", Label3::kPurchased, 1},
      {"red dress", "P1", "crimson gown", Label3::kPurchased, 1},
      {"red dress", "P1", "crimson gown", Label3::kImpressed, 4},
      {"blue shoe", "P2", "silk", Label3::kImpressed, 2}};
  const PreprocessResult r = PreprocessLogs(logs, v);
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.records[0].weight, 2.0);
  EXPECT_EQ(r.records[0].label, Label3::kPurchased);
  EXPECT_EQ(r.records[1].weight, 4.0);
  EXPECT_EQ(r.records[1].label, Label3::kImpressed);
  EXPECT_EQ(r.records[0].query, v.Encode("red dress", Side::kQuery));
  EXPECT_EQ(r.records[0].product, v.Encode("crimson gown", Side::kProduct));
  EXPECT_EQ(r.label_counts[0], 1u);
  EXPECT_EQ(r.label_counts[1], 2u);
  EXPECT_EQ(r.label_counts[2], 0u);
}

TEST(PreprocessLogs, EmptyInputFails) {
  try {
    PreprocessLogs({}, SmallVocab());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFailedPrecondition);
  }
}

// Queries 1..q with `purchases` purchases each and `impressed` impressed
// products each, plus a few extra catalog products.
std::vector<TokenRecord> SyntheticRecords(size_t queries, size_t purchases,
                                          size_t impressed) {
  std::vector<TokenRecord> out;
  TokenId next_product = 1000;
  for (TokenId q = 1; q <= queries; ++q) {
    for (size_t i = 0; i < purchases; ++i) {
      out.push_back({Label3::kPurchased, 1.0 + i, Bag({q, 0}),
                     Bag({next_product++, 0, 0})});
    }
    for (size_t i = 0; i < impressed; ++i) {
      out.push_back({Label3::kImpressed, 2.0, Bag({q, 0}),
                     Bag({next_product++, 0, 0})});
    }
  }
  for (int i = 0; i < 40; ++i) {
    out.push_back({Label3::kImpressed, 1.0, Bag({999, 0}),
                   Bag({next_product++, 0, 0})});
  }
  return out;
}

TEST(SampleEpoch, RatioArithmetic) {
  // Ten purchases: 10 + 60 + 70 examples.
  const auto records = SyntheticRecords(5, 2, 3);
  const TrainingData data(records);
  EXPECT_EQ(data.num_purchases(), 10u);
  Rng rng(1);
  const auto epoch = SampleEpoch(data, SamplingConfig{}, rng);
  EXPECT_EQ(epoch.size(), 140u);
  std::map<Label3, size_t> counts;
  for (const auto& ex : epoch) ++counts[ex.label];
  EXPECT_EQ(counts[Label3::kPurchased], 10u);
  EXPECT_EQ(counts[Label3::kImpressed], 60u);
  EXPECT_EQ(counts[Label3::kRandom], 70u);
}

TEST(SampleEpoch, CompositionPerPurchaseAndExclusions) {
  const auto records = SyntheticRecords(6, 3, 8);
  const TrainingData data(records);
  Rng rng(2);
  SamplingConfig cfg;
  cfg.shuffle = false;
  const auto epoch = SampleEpoch(data, cfg, rng);
  ASSERT_EQ(epoch.size(), 18u * 14);
  std::map<TokenId, std::set<TokenId>> own;  // query -> logged products
  for (const auto& r : records) own[r.query.ids[0]].insert(r.product.ids[0]);
  for (size_t start = 0; start < epoch.size(); start += 14) {
    const TokenId q = epoch[start].query.ids[0];
    EXPECT_EQ(epoch[start].label, Label3::kPurchased);
    std::set<TokenId> impressed;
    for (size_t i = 1; i <= 6; ++i) {
      EXPECT_EQ(epoch[start + i].label, Label3::kImpressed);
      EXPECT_EQ(epoch[start + i].weight, 2.0);
      impressed.insert(epoch[start + i].product.ids[0]);
    }
    // Eight impressed available: drawn without replacement.
    EXPECT_EQ(impressed.size(), 6u);
    for (size_t i = 7; i < 14; ++i) {
      EXPECT_EQ(epoch[start + i].label, Label3::kRandom);
      EXPECT_EQ(epoch[start + i].weight, 1.0);
      EXPECT_EQ(epoch[start + i].query.ids[0], q);
      EXPECT_FALSE(own[q].count(epoch[start + i].product.ids[0]));
    }
  }
}

TEST(SampleEpoch, NoImpressedFallsBackToRandom) {
  const auto records = SyntheticRecords(3, 1, 0);
  const TrainingData data(records);
  Rng rng(3);
  SamplingConfig cfg;
  cfg.shuffle = false;
  const auto epoch = SampleEpoch(data, cfg, rng);
  ASSERT_EQ(epoch.size(), 42u);
  for (size_t start = 0; start < 42; start += 14) {
    for (size_t i = 1; i < 14; ++i) {
      EXPECT_EQ(epoch[start + i].label, Label3::kRandom);
    }
  }
}

TEST(SampleEpoch, FewImpressedSampledWithReplacement) {
  const auto records = SyntheticRecords(2, 1, 2);
  const TrainingData data(records);
  Rng rng(4);
  const auto epoch = SampleEpoch(data, SamplingConfig{}, rng);
  std::map<Label3, size_t> counts;
  for (const auto& ex : epoch) ++counts[ex.label];
  EXPECT_EQ(counts[Label3::kImpressed], 12u);
}

TEST(SampleEpoch, UnshuffledQueriesAreContiguous) {
  const auto records = SyntheticRecords(7, 2, 3);
  const TrainingData data(records);
  Rng rng(5);
  SamplingConfig cfg;
  cfg.shuffle = false;
  const auto epoch = SampleEpoch(data, cfg, rng);
  std::set<TokenId> finished;
  TokenId current = epoch[0].query.ids[0];
  for (const auto& ex : epoch) {
    if (ex.query.ids[0] != current) {
      finished.insert(current);
      current = ex.query.ids[0];
    }
    EXPECT_FALSE(finished.count(current));
  }
}

TEST(SampleEpoch, DeterministicForSeed) {
  const auto records = SyntheticRecords(9, 2, 4);
  const TrainingData data(records);
  Rng a(6), b(6);
  const auto ea = SampleEpoch(data, SamplingConfig{}, a);
  const auto eb = SampleEpoch(data, SamplingConfig{}, b);
  ASSERT_EQ(ea.size(), eb.size());
  for (size_t i = 0; i < ea.size(); ++i) {
    EXPECT_EQ(ea[i].query, eb[i].query);
    EXPECT_EQ(ea[i].product, eb[i].product);
    EXPECT_EQ(ea[i].label, eb[i].label);
  }
}

TEST(SampleEpoch, RequiresPurchases) {
  const auto records = SyntheticRecords(2, 0, 3);
  const TrainingData data(records);
  Rng rng(7);
  EXPECT_THROW(SampleEpoch(data, SamplingConfig{}, rng), Error);
}

TEST(XavierInit, SupportMomentAndMask) {
  Rng rng(8);
  const size_t dim = 256;
  const size_t rows = 1000000 / dim + 1;
  const EmbeddingTable t = XavierInit(rows, dim, rng);
  const double bound = std::sqrt(3.0 / dim);
  for (double v : t.row(0)) EXPECT_EQ(v, 0.0);
  double sum = 0, sq = 0;
  size_t n = 0;
  for (size_t r = 1; r < rows; ++r) {
    for (double v : t.row(r)) {
      EXPECT_LE(std::abs(v), bound);
      sum += v;
      sq += v * v;
      ++n;
    }
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_NEAR(var, 1.0 / dim, 0.05 / dim);
}

EmbeddingModel TinyModel(Normalization n = Normalization::kNone) {
  ModelConfig c;
  c.embedding_dim = 4;
  c.normalization = n;
  EmbeddingModel m(6, 0, c);
  Rng rng(9);
  InitializeModel(m, rng);
  return m;
}

TEST(AdamStep, ZeroGradientLeavesParameters) {
  EmbeddingModel m = TinyModel();
  const EmbeddingModel before = m;
  AdamState state(m);
  Gradients g;
  g.tables.emplace_back(4);
  g.tables[0].Row(3);  // present but all zero
  for (int a = 0; a < 2; ++a) {
    g.dgamma[a].assign(4, 0.0);
    g.dbeta[a].assign(4, 0.0);
  }
  AdamStep(m, g, state, AdamConfig{});
  EXPECT_EQ(m, before);
}

TEST(AdamStep, FirstStepMovesBySignTimesRate) {
  EmbeddingModel m = TinyModel(Normalization::kLayer);
  const EmbeddingModel before = m;
  AdamState state(m);
  Gradients g;
  g.tables.emplace_back(4);
  auto row = g.tables[0].Row(2);
  row[0] = 0.37;
  row[1] = -5.0;
  for (int a = 0; a < 2; ++a) {
    g.dgamma[a].assign(4, 0.0);
    g.dbeta[a].assign(4, 0.0);
  }
  g.dgamma[1][3] = 1e-3;
  AdamStep(m, g, state, AdamConfig{});
  EXPECT_EQ(state.step(), 1u);
  const double lr = 0.001;
  EXPECT_NEAR(m.table(0).row(2)[0] - before.table(0).row(2)[0], -lr, 1e-10);
  EXPECT_NEAR(m.table(0).row(2)[1] - before.table(0).row(2)[1], lr, 1e-10);
  EXPECT_EQ(m.table(0).row(2)[2], before.table(0).row(2)[2]);
  EXPECT_NEAR(m.norm(Side::kProduct).gamma[3] - 1.0, -lr, 1e-8);
  // Untouched rows and blocks stay put.
  for (size_t r : {0u, 1u, 3u, 4u}) {
    for (size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(m.table(0).row(r)[j], before.table(0).row(r)[j]);
    }
  }
  EXPECT_EQ(m.norm(Side::kQuery), before.norm(Side::kQuery));
}

TEST(AdamStep, ShapeMismatchFails) {
  EmbeddingModel m = TinyModel();
  AdamState state(m);
  Gradients g;
  g.tables.emplace_back(3);
  g.tables[0].Row(1)[0] = 1;
  for (int a = 0; a < 2; ++a) {
    g.dgamma[a].assign(4, 0.0);
    g.dbeta[a].assign(4, 0.0);
  }
  try {
    AdamStep(m, g, state, AdamConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

std::vector<TrainingExample> RandomExamples(size_t n, size_t rows, Rng& rng) {
  std::vector<TrainingExample> out;
  std::uniform_real_distribution<double> w(1.0, 4.0);
  for (size_t i = 0; i < n; ++i) {
    out.push_back({RandomBag(4, 1 + i % 4, rows, rng),
                   RandomBag(6, 1 + i % 6, rows, rng),
                   static_cast<Label3>(i % 3), w(rng)});
  }
  return out;
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  for (Normalization n : {Normalization::kNone, Normalization::kBatch,
                          Normalization::kLayer}) {
    EmbeddingModel m = TinyModel(n);
    const EmbeddingModel before = m;
    Rng rng(10);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.adam.learning_rate = 0.0;
    TrainOnExamples(RandomExamples(10, 7, rng), m, LossSpec{}, cfg);
    for (size_t t = 0; t < m.num_tables(); ++t) {
      EXPECT_EQ(m.table(t), before.table(t));
    }
    for (Side arm : {Side::kQuery, Side::kProduct}) {
      EXPECT_EQ(m.norm(arm).gamma, before.norm(arm).gamma);
      EXPECT_EQ(m.norm(arm).beta, before.norm(arm).beta);
    }
  }
}

TEST(Train, WeightedMeanIdentity) {
  Rng rng(11);
  for (LossKind k : {LossKind::kMse, LossKind::kMae, LossKind::kBce,
                     LossKind::kHinge2, LossKind::kHinge3}) {
    for (Normalization n : {Normalization::kNone, Normalization::kLayer}) {
      LossSpec loss;
      loss.kind = k;
      const EmbeddingModel m = TinyModel(n);
      auto batch = RandomExamples(7, 7, rng);
      auto dup = batch;
      dup.push_back(batch[2]);
      auto doubled = batch;
      doubled[2].weight *= 2;
      EXPECT_NEAR(WeightedBatchLoss(dup, m, loss),
                  WeightedBatchLoss(doubled, m, loss), 1e-15);
    }
  }
}

// Eight queries, each with its own purchased, impressed and two random
// products; no token is shared between any two texts.
std::vector<TrainingExample> SeparableExamples() {
  std::vector<TrainingExample> out;
  TokenId next = 1;
  for (int q = 0; q < 8; ++q) {
    const TokenBag query = Bag({next, static_cast<TokenId>(next + 1), 0});
    next += 2;
    const Label3 labels[] = {Label3::kPurchased, Label3::kImpressed,
                             Label3::kRandom, Label3::kRandom};
    for (Label3 l : labels) {
      out.push_back({query, Bag({next, static_cast<TokenId>(next + 1), 0}), l,
                     1.0});
      next += 2;
    }
  }
  return out;
}

TEST(Train, OverfitsSeparableFixture) {
  ModelConfig mc;
  mc.embedding_dim = 16;
  mc.normalization = Normalization::kNone;
  EmbeddingModel m(80, 0, mc);
  Rng rng(12);
  InitializeModel(m, rng);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 32;
  cfg.adam.learning_rate = 0.01;
  cfg.sampling.shuffle = false;
  const TrainHistory h = TrainOnExamples(SeparableExamples(), m, LossSpec{}, cfg);
  ASSERT_EQ(h.epochs.size(), 200u);
  EXPECT_LT(h.epochs.back().mean_loss, 1e-3);
  for (size_t e = 11; e < h.epochs.size(); ++e) {
    EXPECT_LE(h.epochs[e].mean_loss, h.epochs[e - 1].mean_loss + 1e-6) << e;
  }
  for (double v : m.table(0).row(0)) EXPECT_EQ(v, 0.0);
}

TEST(Train, DeterministicAndRowZeroStaysZero) {
  const auto records = SyntheticRecords(12, 2, 5);
  // Remap product ids into a small vocabulary.
  std::vector<TokenRecord> small = records;
  for (auto& r : small) {
    r.query.ids[0] = r.query.ids[0] % 40 + 1;
    r.product.ids[0] = r.product.ids[0] % 97 + 41;
    r.product.ids[1] = r.product.ids[0] % 7 + 1;
    r.product.valid_count = 2;
  }
  const TrainingData data(small);
  ModelConfig mc;
  mc.embedding_dim = 8;
  mc.shared_embeddings = false;
  auto run = [&] {
    EmbeddingModel m(140, 5, mc);
    Rng rng(13);
    InitializeModel(m, rng);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 16;
    cfg.seed = 99;
    Train(data, m, LossSpec{}, cfg);
    return m;
  };
  const EmbeddingModel a = run();
  const EmbeddingModel b = run();
  EXPECT_EQ(a.Serialize(), b.Serialize());
  for (size_t t = 0; t < a.num_tables(); ++t) {
    for (double v : a.table(t).row(0)) EXPECT_EQ(v, 0.0);
  }
}

TEST(Train, DropsEmptyBagsAndSkipsTinyBatchNormBatches) {
  EmbeddingModel m = TinyModel(Normalization::kBatch);
  Rng rng(14);
  auto examples = RandomExamples(9, 7, rng);
  examples[3].query = Bag({0, 0, 0, 0});
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.sampling.shuffle = false;
  const TrainHistory h = TrainOnExamples(examples, m, LossSpec{}, cfg);
  EXPECT_EQ(h.epochs[0].dropped_empty, 1u);
  EXPECT_EQ(h.epochs[0].examples, 8u);
  EXPECT_EQ(h.epochs[0].skipped_batches, 0u);
  examples.pop_back();  // 8 examples: 4 + 3 after the drop, then none
  examples.push_back(examples[0]);
  examples.push_back(examples[1]);
  // 10 examples - 1 empty = 9: batches of 4, 4, 1 -> last one skipped.
  const TrainHistory h2 = TrainOnExamples(examples, m, LossSpec{}, cfg);
  EXPECT_EQ(h2.epochs[0].skipped_batches, 1u);
}

TEST(Train, NonFiniteLossAborts) {
  EmbeddingModel m = TinyModel();
  m.table(0).row(1)[0] = std::numeric_limits<double>::quiet_NaN();
  std::vector<TrainingExample> ex = {
      {Bag({1, 0}), Bag({2, 0}), Label3::kPurchased, 1.0}};
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    TrainOnExamples(ex, m, LossSpec{}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInternal);
  }
}

}  // namespace
}  // namespace semmatch
