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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "semmatch/error.h"
#include "test_util.h"

namespace semmatch {
namespace {

using semmatch::testing::TempDir;

std::vector<ScoredProduct> NaiveTopK(const Vector& q, const ProductIndex& index,
                                     size_t k, double threshold) {
  std::vector<ScoredProduct> all;
  for (size_t i = 0; i < index.size(); ++i) {
    double s = 0;
    const auto e = index.embedding(i);
    for (size_t j = 0; j < q.size(); ++j) s += q[j] * e[j];
    if (s >= threshold) all.push_back({index.id(i), s});
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

std::vector<std::string> Ids(const MatchResult& r) {
  std::vector<std::string> out;
  for (const auto& item : r.items) out.push_back(item.id);
  return out;
}

TEST(UnitScale, NormOneOrZero) {
  Vector v = {3, 4};
  UnitScale(v);
  EXPECT_DOUBLE_EQ(v[0], 0.6);
  EXPECT_DOUBLE_EQ(v[1], 0.8);
  Vector z = {0, 0, 0};
  UnitScale(z);
  EXPECT_EQ(z, Vector(3, 0.0));
}

ProductIndex ToyIndex() {
  return ProductIndex({"a", "b", "c", "d", "e"},
                      {{1, 0}, {0, 1}, {1, 1}, {-1, 0}, {3, 4}}, 2, 7);
}

TEST(TopKByEmbedding, HandComputedToyRanking) {
  const ProductIndex index = ToyIndex();
  const Vector q = {1, 0};
  const MatchResult r = TopKByEmbedding(q, index, 10, -1.0);
  ASSERT_EQ(r.items.size(), 5u);
  EXPECT_EQ(Ids(r), (std::vector<std::string>{"a", "c", "e", "b", "d"}));
  EXPECT_DOUBLE_EQ(r.items[0].score, 1.0);
  EXPECT_NEAR(r.items[1].score, 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(r.items[2].score, 0.6, 1e-15);
  EXPECT_NEAR(r.items[3].score, 0.0, 1e-15);
  EXPECT_NEAR(r.items[4].score, -1.0, 1e-15);

  const MatchResult pruned = TopKByEmbedding(q, index, 10, 0.55);
  EXPECT_EQ(Ids(pruned), (std::vector<std::string>{"a", "c", "e"}));
  EXPECT_EQ(pruned.threshold, 0.55);
  EXPECT_EQ(Ids(TopKByEmbedding(q, index, 2, -1.0)),
            (std::vector<std::string>{"a", "c"}));
  // Just above 1 keeps nothing; the exact-1 score survives a threshold of 1.
  EXPECT_TRUE(TopKByEmbedding(q, index, 10, std::nextafter(1.0, 2.0))
                  .items.empty());
  EXPECT_EQ(TopKByEmbedding(q, index, 10, 1.0).items.size(), 1u);
}

TEST(TopKByEmbedding, TiesBreakByAscendingId) {
  const ProductIndex index({"z", "m", "a", "q"}, {{1, 0}, {2, 0}, {5, 0}, {0, 1}},
                           2, 0);
  const Vector q = {1, 0};
  EXPECT_EQ(Ids(TopKByEmbedding(q, index, 4, -1.0)),
            (std::vector<std::string>{"a", "m", "z", "q"}));
  EXPECT_EQ(Ids(TopKByEmbedding(q, index, 2, -1.0)),
            (std::vector<std::string>{"a", "m"}));
}

TEST(TopKByEmbedding, MatchesNaiveOracle) {
  Rng rng(1);
  std::uniform_int_distribution<int> level(-3, 3);
  for (int trial = 0; trial < 30; ++trial) {
    const size_t n = 1 + trial * 331 % 2000;
    const size_t dim = 1 + trial % 5;
    std::vector<std::string> ids;
    std::vector<Vector> rows;
    for (size_t i = 0; i < n; ++i) {
      ids.push_back("p" + std::to_string((i * 7919) % 100003));
      Vector row(dim);
      // Coarse levels make exact ties common.
      for (double& x : row) x = level(rng);
      rows.push_back(row);
    }
    const ProductIndex index(ids, rows, dim, 0);
    Vector q(dim);
    for (double& x : q) x = level(rng);
    UnitScale(q);
    for (size_t k : {size_t{1}, size_t{5}, size_t{50}, n + 3}) {
      for (double t : {-1.0, 0.0, 0.3}) {
        const auto expected = NaiveTopK(q, index, k, t);
        for (size_t workers : {1, 3, 8}) {
          EXPECT_EQ(TopKByEmbedding(q, index, k, t, workers).items, expected)
              << trial << " k=" << k << " t=" << t << " w=" << workers;
        }
      }
    }
  }
}

TEST(TopKByEmbedding, RaisingThresholdNeverAdds) {
  Rng rng(2);
  std::vector<std::string> ids;
  std::vector<Vector> rows;
  for (int i = 0; i < 500; ++i) {
    ids.push_back("p" + std::to_string(i));
    rows.push_back(semmatch::testing::RandomVector(6, rng));
  }
  const ProductIndex index(ids, rows, 6, 0);
  for (int trial = 0; trial < 20; ++trial) {
    Vector q = semmatch::testing::RandomVector(6, rng);
    UnitScale(q);
    std::vector<std::string> prev;
    bool first = true;
    for (double t = -1.0; t <= 1.0; t += 0.05) {
      auto cur = Ids(TopKByEmbedding(q, index, 1000, t));
      std::sort(cur.begin(), cur.end());
      if (!first) {
        EXPECT_TRUE(std::includes(prev.begin(), prev.end(), cur.begin(),
                                  cur.end()));
      }
      prev = cur;
      first = false;
    }
  }
}

TEST(TopKByEmbedding, ArgumentChecks) {
  const ProductIndex index = ToyIndex();
  const Vector q = {1, 0};
  EXPECT_THROW(TopKByEmbedding(q, index, 0, 0.0), Error);
  EXPECT_THROW(TopKByEmbedding(q, index, 1, std::nan("")), Error);
  const Vector wide = {1, 0, 0};
  EXPECT_THROW(TopKByEmbedding(wide, index, 1, 0.0), Error);
}

TEST(ProductIndex, ConstructionChecks) {
  try {
    ProductIndex({"a", "a"}, {{1, 0}, {0, 1}}, 2, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
  EXPECT_THROW(ProductIndex({"a"}, {{1, 0, 0}}, 2, 0), Error);
  const ProductIndex index = ToyIndex();
  EXPECT_EQ(index.Find("e"), 4u);
  EXPECT_FALSE(index.Find("nope").has_value());
  for (size_t i = 0; i < index.size(); ++i) {
    double sq = 0;
    for (double x : index.embedding(i)) sq += x * x;
    EXPECT_NEAR(sq, 1.0, 1e-15);
  }
}

TEST(ProductIndex, FileRoundTripAndCorruption) {
  TempDir dir;
  const ProductIndex index = ToyIndex();
  index.Save(dir.File("toy.idx"));
  EXPECT_EQ(ProductIndex::Load(dir.File("toy.idx")), index);

  std::string bytes = index.Serialize();
  EXPECT_EQ(ProductIndex::Deserialize(bytes), index);
  EXPECT_THROW(ProductIndex::Deserialize(bytes.substr(0, bytes.size() - 3)),
               Error);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(ProductIndex::Deserialize(bad_magic), Error);
  EXPECT_THROW(ProductIndex::Load(dir.File("missing.idx")), Error);
}

struct Fixture {
  Vocabulary vocab;
  EmbeddingModel model;
  std::vector<CatalogEntry> catalog;
};

Fixture MakeFixture(Normalization norm = Normalization::kNone) {
  Fixture f;
  f.catalog = {{"P3", "red cotton dress"},
               {"P1", "blue running shoe"},
               {"P2", "wireless phone charger"},
               {"P4", "green garden hose"},
               {"P5", "leather phone case"}};
  TokenizerConfig tc;
  tc.budget_per_class[TokenClass::Unigram()] = 100;
  tc.ngram_orders = {2};
  tc.budget_per_class[TokenClass::WordNgram(2)] = 100;
  tc.query_max_tokens = 8;
  tc.product_max_tokens = 8;
  std::vector<CorpusRecord> corpus;
  for (const auto& c : f.catalog) corpus.push_back({Side::kProduct, c.text});
  corpus.push_back({Side::kQuery, "phone case"});
  f.vocab = BuildVocabulary(corpus, tc);
  ModelConfig mc;
  mc.embedding_dim = 16;
  mc.normalization = norm;
  f.model = EmbeddingModel(f.vocab.size(), 0, mc);
  Rng rng(3);
  InitializeModel(f.model, rng);
  return f;
}

TEST(BuildIndex, EmptyAndSingle) {
  Fixture f = MakeFixture();
  const ProductIndex empty = BuildIndex({}, f.model, f.vocab);
  EXPECT_EQ(empty.size(), 0u);
  EXPECT_EQ(empty.dim(), 16u);
  EXPECT_TRUE(TopKByEmbedding(Vector(16, 0.1), empty, 5, -1.0).items.empty());
  const ProductIndex one =
      BuildIndex(std::span(f.catalog).first(1), f.model, f.vocab);
  ASSERT_EQ(one.size(), 1u);
  double sq = 0;
  for (double x : one.embedding(0)) sq += x * x;
  EXPECT_NEAR(sq, 1.0, 1e-14);
  EXPECT_EQ(one.fingerprint(), f.model.Fingerprint());
}

TEST(BuildIndex, DeterministicAndWorkerInvariant) {
  Fixture f = MakeFixture(Normalization::kBatch);
  const ProductIndex a = BuildIndex(f.catalog, f.model, f.vocab);
  const ProductIndex b = BuildIndex(f.catalog, f.model, f.vocab, 4);
  EXPECT_EQ(a.Serialize(), b.Serialize());
  auto dup = f.catalog;
  dup.push_back(dup[0]);
  EXPECT_THROW(BuildIndex(dup, f.model, f.vocab), Error);
}

TEST(TopK, IdenticalTextScoresOne) {
  Fixture f = MakeFixture();
  const ProductIndex index = BuildIndex(f.catalog, f.model, f.vocab);
  for (const auto& entry : f.catalog) {
    const MatchResult r = TopK(entry.text, index, f.model, f.vocab, 3, -1.0);
    ASSERT_FALSE(r.items.empty());
    EXPECT_EQ(r.items[0].id, entry.id);
    EXPECT_NEAR(r.items[0].score, 1.0, 1e-12);
    for (size_t i = 1; i < r.items.size(); ++i) {
      EXPECT_LE(r.items[i].score, r.items[i - 1].score);
    }
  }
}

TEST(TopK, RejectsForeignIndex) {
  Fixture f = MakeFixture();
  const ProductIndex index = BuildIndex(f.catalog, f.model, f.vocab);
  EmbeddingModel other = f.model;
  other.table(0).row(1)[0] += 1.0;
  try {
    TopK("phone", index, other, f.vocab, 3, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFailedPrecondition);
  }
}

}  // namespace
}  // namespace semmatch
