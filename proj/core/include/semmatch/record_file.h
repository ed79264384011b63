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

// Fixed-width binary store of encoded training pairs, read through mmap.
//
// Layout (little-endian):
//   header  u32 magic "SMRF" | u32 version | u32 query_max_tokens
//           | u32 product_max_tokens | u64 record_count
//   record  u8 label | f64 weight | u32 x query_max_tokens
//           | u32 x product_max_tokens
//
// Record i starts at kHeaderBytes + i * RecordBytes().

#ifndef SEMMATCH_RECORD_FILE_H_
#define SEMMATCH_RECORD_FILE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semmatch/losses.h"
#include "semmatch/tokenizer.h"

namespace semmatch {

struct TokenRecord {
  Label3 label = Label3::kPurchased;
  double weight = 1.0;
  TokenBag query;
  TokenBag product;

  bool operator==(const TokenRecord&) const = default;
};

std::string SerializeRecords(size_t query_max_tokens,
                             size_t product_max_tokens,
                             std::span<const TokenRecord> records);
void WriteRecordFile(const std::string& path, size_t query_max_tokens,
                     size_t product_max_tokens,
                     std::span<const TokenRecord> records);

// Read-only memory-mapped view. Movable, not copyable.
class RecordFile {
 public:
  static constexpr size_t kHeaderBytes = 24;

  static RecordFile Open(const std::string& path);

  RecordFile(RecordFile&& other) noexcept;
  RecordFile& operator=(RecordFile&& other) noexcept;
  RecordFile(const RecordFile&) = delete;
  RecordFile& operator=(const RecordFile&) = delete;
  ~RecordFile();

  size_t size() const { return count_; }
  size_t query_max_tokens() const { return query_max_; }
  size_t product_max_tokens() const { return product_max_; }
  size_t RecordBytes() const { return 1 + 8 + 4 * (query_max_ + product_max_); }

  // Decodes record i; throws kOutOfRange past the end.
  TokenRecord Get(size_t i) const;
  std::vector<TokenRecord> ReadAll() const;

 private:
  RecordFile() = default;
  void Reset();

  const unsigned char* data_ = nullptr;
  size_t length_ = 0;
  size_t query_max_ = 0;
  size_t product_max_ = 0;
  size_t count_ = 0;
};

}  // namespace semmatch

#endif  // SEMMATCH_RECORD_FILE_H_
