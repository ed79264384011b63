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

#ifndef SEMMATCH_TESTS_TEST_UTIL_H_
#define SEMMATCH_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <random>
#include <string>
#include <system_error>
#include <vector>

#include "semmatch/model.h"
#include "semmatch/tokenizer.h"
#include "semmatch/training.h"

namespace semmatch::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("semmatch_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string File(const std::string& name) const {
    return (path_ / name).string();
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline Vector RandomVector(size_t n, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Bag of `len` slots with `valid` random ids in [1, rows).
inline TokenBag RandomBag(size_t len, size_t valid, size_t rows, Rng& rng) {
  std::uniform_int_distribution<TokenId> id(1, static_cast<TokenId>(rows - 1));
  TokenBag bag;
  bag.ids.assign(len, 0);
  for (size_t i = 0; i < valid && i < len; ++i) bag.ids[i] = id(rng);
  bag.valid_count = std::min(valid, len);
  return bag;
}

// Model with every parameter drawn at random, including normalization state.
inline EmbeddingModel RandomModel(size_t vocab, size_t bins,
                                  const ModelConfig& config, Rng& rng) {
  EmbeddingModel model(vocab, bins, config);
  InitializeModel(model, rng);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  for (Side arm : {Side::kQuery, Side::kProduct}) {
    NormState& ns = model.norm(arm);
    for (size_t j = 0; j < model.dim(); ++j) {
      ns.gamma[j] = pos(rng);
      ns.beta[j] = u(rng);
      ns.running_mean[j] = u(rng) * 0.2;
      ns.running_var[j] = pos(rng) * 0.1;
    }
  }
  return model;
}

}  // namespace semmatch::testing

#endif  // SEMMATCH_TESTS_TEST_UTIL_H_
