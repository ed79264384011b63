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

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <bit>
#include <utility>

#include "semmatch/binary_io.h"
#include "semmatch/error.h"

namespace semmatch {
namespace {

constexpr uint32_t kRecordMagic = 0x46524D53;  // "SMRF"
constexpr uint32_t kRecordVersion = 1;

void PutBag(ByteWriter& w, const TokenBag& bag, size_t width) {
  Require(bag.ids.size() == width, ErrorCode::kInvalidArgument,
          "record: bag length " + std::to_string(bag.ids.size()) +
              " != configured " + std::to_string(width));
  for (TokenId id : bag.ids) w.PutU32(id);
}

TokenBag LoadBag(const unsigned char* p, size_t width) {
  TokenBag bag;
  bag.ids.resize(width);
  for (size_t i = 0; i < width; ++i) {
    bag.ids[i] = LoadU32(p + 4 * i);
    bag.valid_count += bag.ids[i] != 0;
  }
  return bag;
}

}  // namespace

std::string SerializeRecords(size_t query_max_tokens,
                             size_t product_max_tokens,
                             std::span<const TokenRecord> records) {
  ByteWriter w;
  w.PutU32(kRecordMagic);
  w.PutU32(kRecordVersion);
  w.PutU32(static_cast<uint32_t>(query_max_tokens));
  w.PutU32(static_cast<uint32_t>(product_max_tokens));
  w.PutU64(records.size());
  for (const auto& r : records) {
    w.PutU8(static_cast<uint8_t>(r.label));
    w.PutF64(r.weight);
    PutBag(w, r.query, query_max_tokens);
    PutBag(w, r.product, product_max_tokens);
  }
  return w.Release();
}

void WriteRecordFile(const std::string& path, size_t query_max_tokens,
                     size_t product_max_tokens,
                     std::span<const TokenRecord> records) {
  WriteFileBytes(path,
                 SerializeRecords(query_max_tokens, product_max_tokens, records));
}

RecordFile RecordFile::Open(const std::string& path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) Fail(ErrorCode::kNotFound, "cannot open " + path);
  struct stat st {};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    Fail(ErrorCode::kDataLoss, "cannot stat " + path);
  }
  const size_t length = static_cast<size_t>(st.st_size);
  if (length < kHeaderBytes) {
    ::close(fd);
    Fail(ErrorCode::kDataLoss, path + ": shorter than the record header");
  }
  void* addr = ::mmap(nullptr, length, PROT_READ, MAP_PRIVATE, fd, 0);
  ::close(fd);
  if (addr == MAP_FAILED) Fail(ErrorCode::kDataLoss, "mmap failed for " + path);

  RecordFile file;
  file.data_ = static_cast<const unsigned char*>(addr);
  file.length_ = length;
  if (LoadU32(file.data_) != kRecordMagic) {
    Fail(ErrorCode::kDataLoss, path + ": bad record file magic");
  }
  if (LoadU32(file.data_ + 4) != kRecordVersion) {
    Fail(ErrorCode::kDataLoss, path + ": unsupported record file version");
  }
  file.query_max_ = LoadU32(file.data_ + 8);
  file.product_max_ = LoadU32(file.data_ + 12);
  file.count_ = LoadU64(file.data_ + 16);
  if (kHeaderBytes + file.count_ * file.RecordBytes() != length) {
    Fail(ErrorCode::kDataLoss, path + ": size does not match record count");
  }
  return file;
}

RecordFile::RecordFile(RecordFile&& other) noexcept { *this = std::move(other); }

RecordFile& RecordFile::operator=(RecordFile&& other) noexcept {
  if (this != &other) {
    Reset();
    data_ = std::exchange(other.data_, nullptr);
    length_ = std::exchange(other.length_, 0);
    query_max_ = other.query_max_;
    product_max_ = other.product_max_;
    count_ = std::exchange(other.count_, 0);
  }
  return *this;
}

RecordFile::~RecordFile() { Reset(); }

void RecordFile::Reset() {
  if (data_ != nullptr) {
    ::munmap(const_cast<unsigned char*>(data_), length_);
    data_ = nullptr;
  }
}

TokenRecord RecordFile::Get(size_t i) const {
  Require(i < count_, ErrorCode::kOutOfRange,
          "record index " + std::to_string(i) + " out of range");
  const unsigned char* p = data_ + kHeaderBytes + i * RecordBytes();
  TokenRecord r;
  Require(p[0] <= 2, ErrorCode::kDataLoss, "record: bad label byte");
  r.label = static_cast<Label3>(p[0]);
  r.weight = std::bit_cast<double>(LoadU64(p + 1));
  r.query = LoadBag(p + 9, query_max_);
  r.product = LoadBag(p + 9 + 4 * query_max_, product_max_);
  return r;
}

std::vector<TokenRecord> RecordFile::ReadAll() const {
  std::vector<TokenRecord> out;
  out.reserve(count_);
  for (size_t i = 0; i < count_; ++i) out.push_back(Get(i));
  return out;
}

}  // namespace semmatch
