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

#include "semmatch/record_file.h"

#include <gtest/gtest.h>

#include <random>

#include "semmatch/binary_io.h"
#include "semmatch/error.h"
#include "test_util.h"

namespace semmatch {
namespace {

std::vector<TokenRecord> RandomRecords(size_t n, size_t qmax, size_t pmax,
                                       Rng& rng) {
  std::uniform_real_distribution<double> w(1.0, 9.0);
  std::vector<TokenRecord> out;
  for (size_t i = 0; i < n; ++i) {
    TokenRecord r;
    r.label = static_cast<Label3>(i % 3);
    r.weight = w(rng);
    r.query = semmatch::testing::RandomBag(qmax, 1 + i % qmax, 1000, rng);
    r.product = semmatch::testing::RandomBag(pmax, 1 + i % pmax, 1000, rng);
    out.push_back(r);
  }
  return out;
}

TEST(RecordFile, RoundTripsAndRandomAccess) {
  Rng rng(1);
  const auto records = RandomRecords(57, 4, 9, rng);
  semmatch::testing::TempDir dir;
  WriteRecordFile(dir.File("r.bin"), 4, 9, records);
  const RecordFile file = RecordFile::Open(dir.File("r.bin"));
  EXPECT_EQ(file.size(), 57u);
  EXPECT_EQ(file.query_max_tokens(), 4u);
  EXPECT_EQ(file.product_max_tokens(), 9u);
  EXPECT_EQ(file.RecordBytes(), 1u + 8 + 4 * 4 + 4 * 9);
  for (size_t i : {56u, 0u, 31u}) {
    const TokenRecord r = file.Get(i);
    EXPECT_EQ(r.label, records[i].label);
    EXPECT_EQ(r.weight, records[i].weight);
    EXPECT_EQ(r.query, records[i].query);
    EXPECT_EQ(r.product, records[i].product);
  }
  EXPECT_EQ(file.ReadAll().size(), 57u);
  EXPECT_THROW(file.Get(57), Error);
  const std::string bytes = ReadFileBytes(dir.File("r.bin"));
  EXPECT_EQ(bytes, SerializeRecords(4, 9, records));
  EXPECT_EQ(bytes.size(), RecordFile::kHeaderBytes + 57 * file.RecordBytes());
}

TEST(RecordFile, MovesOwnership) {
  Rng rng(2);
  semmatch::testing::TempDir dir;
  WriteRecordFile(dir.File("r.bin"), 2, 2, RandomRecords(3, 2, 2, rng));
  RecordFile a = RecordFile::Open(dir.File("r.bin"));
  RecordFile b = std::move(a);
  EXPECT_EQ(b.size(), 3u);
  EXPECT_EQ(b.Get(2).label, Label3::kRandom);
}

TEST(RecordFile, RejectsBadFiles) {
  Rng rng(3);
  semmatch::testing::TempDir dir;
  EXPECT_THROW(RecordFile::Open(dir.File("missing.bin")), Error);
  std::string bytes = SerializeRecords(2, 3, RandomRecords(5, 2, 3, rng));
  WriteFileBytes(dir.File("short.bin"), bytes.substr(0, bytes.size() - 1));
  EXPECT_THROW(RecordFile::Open(dir.File("short.bin")), Error);
  bytes[0] ^= 0x55;
  WriteFileBytes(dir.File("magic.bin"), bytes);
  try {
    RecordFile::Open(dir.File("magic.bin"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDataLoss);
  }
  TokenRecord wrong;
  wrong.query.ids = {1};
  wrong.product.ids = {1, 2, 3};
  EXPECT_THROW(SerializeRecords(2, 3, std::vector<TokenRecord>{wrong}), Error);
}

}  // namespace
}  // namespace semmatch
