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

#include "semmatch/binary_io.h"

#include <fstream>
#include <iterator>
#include <sstream>

#include "semmatch/error.h"

namespace semmatch {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid_argument";
    case ErrorCode::kOutOfRange:
      return "out_of_range";
    case ErrorCode::kFailedPrecondition:
      return "failed_precondition";
    case ErrorCode::kNotFound:
      return "not_found";
    case ErrorCode::kDataLoss:
      return "data_loss";
    case ErrorCode::kInternal:
      return "internal";
  }
  return "unknown";
}

void ByteReader::Need(size_t n) const {
  if (data_.size() - pos_ < n) {
    std::ostringstream msg;
    msg << "truncated input: need " << n << " bytes at offset " << pos_
        << ", have " << (data_.size() - pos_);
    Fail(ErrorCode::kDataLoss, msg.str());
  }
}

uint8_t ByteReader::GetU8() {
  Need(1);
  return static_cast<uint8_t>(data_[pos_++]);
}

uint32_t ByteReader::GetU32() {
  Need(4);
  uint32_t v =
      LoadU32(reinterpret_cast<const unsigned char*>(data_.data() + pos_));
  pos_ += 4;
  return v;
}

uint64_t ByteReader::GetU64() {
  Need(8);
  uint64_t v =
      LoadU64(reinterpret_cast<const unsigned char*>(data_.data() + pos_));
  pos_ += 8;
  return v;
}

std::string ByteReader::GetString() {
  const uint32_t n = GetU32();
  Need(n);
  std::string s(data_.substr(pos_, n));
  pos_ += n;
  return s;
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kNotFound, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kNotFound, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorCode::kDataLoss, "short write to " + path);
}

}  // namespace semmatch
