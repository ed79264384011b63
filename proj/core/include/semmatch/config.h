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

// Run configuration: a line-oriented `key = value` file with `#` comments.

#ifndef SEMMATCH_CONFIG_H_
#define SEMMATCH_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "semmatch/data_pipeline.h"
#include "semmatch/evaluation.h"
#include "semmatch/losses.h"
#include "semmatch/model.h"
#include "semmatch/tokenizer.h"
#include "semmatch/training.h"

namespace semmatch {

struct RunConfig {
  RunConfig();

  TokenizerConfig tokenizer;
  ModelConfig model;
  LossSpec loss;
  TrainConfig train;
  EvalOptions eval;
  size_t eval_corpus_size = 10000;
  SynthConfig synth;
  uint64_t seed = 1;
  size_t workers = 0;  // 0 means the number of hardware threads

  // Throws kInvalidArgument on an unknown key or a malformed value.
  void Set(std::string_view key, std::string_view value);

  // Applies `text` line by line on top of the current values.
  void Merge(std::string_view text);

  // Copies the single seed into the module configs and validates them.
  void Resolve();

  // Every key with its current value, one `key = value` line each, in a
  // fixed order. Parsing the output reproduces the config.
  std::string Dump() const;

  // Known keys, excluding the per-class `tokenizer.budget.<class>` family.
  static std::vector<std::string> Keys();
};

RunConfig ParseRunConfig(std::string_view text);

// Throws kNotFound when the file cannot be read.
RunConfig LoadRunConfig(const std::string& path);

}  // namespace semmatch

#endif  // SEMMATCH_CONFIG_H_
