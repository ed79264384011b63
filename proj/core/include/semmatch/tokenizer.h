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

// Bag-of-tokens text representation: word unigrams, '#'-joined word n-grams
// and '#'-wrapped character trigrams, mapped through a frequency-ranked
// vocabulary. Tokens outside the vocabulary are either masked to id 0 or
// hashed into a block of OOV bins placed right after the vocabulary ids.
//
// Id layout for a vocabulary with V entries and B bins:
//   0            padding / masked
//   [1, V]       in-vocabulary tokens, dense
//   [V+1, V+B]   OOV bins

#ifndef SEMMATCH_TOKENIZER_H_
#define SEMMATCH_TOKENIZER_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace semmatch {

using TokenId = uint32_t;

enum class Side { kQuery, kProduct };

std::string_view SideName(Side side);

class TokenClass {
 public:
  enum class Kind : uint8_t { kUnigram, kWordNgram, kCharTrigram };

  static TokenClass Unigram() { return TokenClass(Kind::kUnigram, 1); }
  static TokenClass WordNgram(int order) {
    return TokenClass(Kind::kWordNgram, order);
  }
  static TokenClass CharTrigram() { return TokenClass(Kind::kCharTrigram, 3); }

  // Parses "unigram", "ngram<N>" or "char3".
  static TokenClass Parse(std::string_view name);

  Kind kind() const { return kind_; }
  int order() const { return order_; }

  // "unigram", "ngram2", "ngram3", ..., "char3".
  std::string Name() const;

  // Single byte prepended to the token before OOV hashing, so identical
  // strings from different classes land in independent bins.
  uint8_t Tag() const;

  auto operator<=>(const TokenClass&) const = default;

 private:
  TokenClass(Kind kind, int order) : kind_(kind), order_(order) {}

  Kind kind_;
  int order_;
};

struct TokenizerConfig {
  bool lowercase = true;
  bool use_unigrams = true;
  std::vector<int> ngram_orders;
  bool use_char_trigrams = false;
  std::map<TokenClass, size_t> budget_per_class;
  size_t oov_bins = 0;
  // 0 means "derive from the corpus at the 99th percentile".
  size_t query_max_tokens = 0;
  size_t product_max_tokens = 0;

  // Enabled classes in bag order: unigrams, n-grams by listed order,
  // char trigrams.
  std::vector<TokenClass> EnabledClasses() const;

  size_t BudgetFor(const TokenClass& cls) const;

  // Throws Error(kInvalidArgument) on a violated invariant.
  void Validate() const;
};

// Lowercases (if asked) and splits on whitespace runs.
std::vector<std::string> WordUnigrams(std::string_view text,
                                      bool lowercase = true);

// Consecutive n-word windows joined with '#'. Requires n >= 2.
std::vector<std::string> WordNgrams(std::span<const std::string> tokens,
                                    int n);

// Three-character windows over "#w1#w2#...#", where w_i are the normalized
// words. Operates on bytes.
std::vector<std::string> CharTrigrams(std::string_view text,
                                      bool lowercase = true);

// All tokens of one class for a text.
std::vector<std::string> TokensOfClass(std::string_view text,
                                       const TokenClass& cls, bool lowercase);

// V + 1 + (FNV-1a(tag || token) mod B).
TokenId HashOov(const TokenClass& cls, std::string_view token, size_t bins,
                size_t vocab_size);

struct TokenBag {
  std::vector<TokenId> ids;
  size_t valid_count = 0;

  size_t size() const { return ids.size(); }
  bool empty_bag() const { return valid_count == 0; }
  bool operator==(const TokenBag&) const = default;
};

struct CorpusRecord {
  Side side;
  std::string text;
};

class Vocabulary {
 public:
  Vocabulary() = default;

  size_t size() const { return size_; }  // V
  size_t oov_bins() const { return config_.oov_bins; }  // B
  // Number of embedding rows needed: V + B + 1.
  size_t num_rows() const { return size_ + config_.oov_bins + 1; }
  const TokenizerConfig& config() const { return config_; }
  size_t max_tokens(Side side) const {
    return side == Side::kQuery ? config_.query_max_tokens
                                : config_.product_max_tokens;
  }
  const std::map<TokenClass, size_t>& class_counts() const {
    return class_counts_;
  }

  // In-vocabulary id, or nullopt.
  std::optional<TokenId> Find(const TokenClass& cls,
                              std::string_view token) const;

  // In-vocabulary id, else an OOV bin id, else 0 when there are no bins.
  TokenId Lookup(const TokenClass& cls, std::string_view token) const;

  // Combined bag, truncated and right-padded to the side's max length.
  TokenBag Encode(std::string_view text, Side side) const;

  // (class, token) for every id in [1, V], in id order.
  std::vector<std::pair<TokenClass, std::string>> Entries() const;

  // Text format: header `V=<int> B=<int> ...settings`, then one
  // `<class>\t<token>\t<id>` line per entry.
  void Save(const std::string& path) const;
  std::string Serialize() const;
  static Vocabulary Load(const std::string& path);
  static Vocabulary Parse(std::string_view text);

  bool operator==(const Vocabulary& other) const;

 private:
  friend Vocabulary BuildVocabulary(std::span<const CorpusRecord> corpus,
                                    const TokenizerConfig& config);

  void Insert(const TokenClass& cls, std::string token, TokenId id);

  TokenizerConfig config_;
  size_t size_ = 0;
  std::map<TokenClass, std::unordered_map<std::string, TokenId>> ids_;
  std::map<TokenClass, size_t> class_counts_;
};

// Counts token frequencies per enabled class, keeps the top budget of each
// (frequency desc, token asc) and assigns dense ids class by class. Max token
// lengths left at 0 in `config` are resolved to the nearest-rank 99th
// percentile of per-side token counts.
Vocabulary BuildVocabulary(std::span<const CorpusRecord> corpus,
                           const TokenizerConfig& config);

// Nearest-rank percentile (p in (0, 100]) of a non-empty sample.
size_t NearestRankPercentile(std::vector<size_t> values, double p);

}  // namespace semmatch

#endif  // SEMMATCH_TOKENIZER_H_
