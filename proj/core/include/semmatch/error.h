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

#ifndef SEMMATCH_ERROR_H_
#define SEMMATCH_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace semmatch {

enum class ErrorCode {
  kInvalidArgument,
  kOutOfRange,
  kFailedPrecondition,
  kNotFound,
  kDataLoss,
  kInternal,
};

std::string_view ErrorCodeName(ErrorCode code);

// The single exception type thrown by the library. The CLI turns it into a
// one-line `error code=<name> message=<text>` report.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void Require(bool condition, ErrorCode code,
                    const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace semmatch

#endif  // SEMMATCH_ERROR_H_
