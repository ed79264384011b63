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

#include "semmatch/tokenizer.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "semmatch/binary_io.h"
#include "semmatch/error.h"

namespace semmatch {
namespace {

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

char Lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

size_t ParseSize(std::string_view s, std::string_view what) {
  size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    Fail(ErrorCode::kDataLoss,
         "bad integer for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> SplitOn(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::string_view SideName(Side side) {
  return side == Side::kQuery ? "query" : "product";
}

TokenClass TokenClass::Parse(std::string_view name) {
  if (name == "unigram") return Unigram();
  if (name == "char3") return CharTrigram();
  if (name.starts_with("ngram")) {
    const size_t order = ParseSize(name.substr(5), "n-gram order");
    if (order >= 2 && order < 240) return WordNgram(static_cast<int>(order));
  }
  Fail(ErrorCode::kInvalidArgument,
       "unknown token class '" + std::string(name) + "'");
}

std::string TokenClass::Name() const {
  switch (kind_) {
    case Kind::kUnigram:
      return "unigram";
    case Kind::kWordNgram:
      return "ngram" + std::to_string(order_);
    case Kind::kCharTrigram:
      return "char3";
  }
  return "?";
}

uint8_t TokenClass::Tag() const {
  switch (kind_) {
    case Kind::kUnigram:
      return 0x01;
    case Kind::kCharTrigram:
      return 0x02;
    case Kind::kWordNgram:
      return static_cast<uint8_t>(0x10 + order_);
  }
  return 0;
}

std::vector<TokenClass> TokenizerConfig::EnabledClasses() const {
  std::vector<TokenClass> classes;
  if (use_unigrams) classes.push_back(TokenClass::Unigram());
  for (int n : ngram_orders) classes.push_back(TokenClass::WordNgram(n));
  if (use_char_trigrams) classes.push_back(TokenClass::CharTrigram());
  return classes;
}

size_t TokenizerConfig::BudgetFor(const TokenClass& cls) const {
  const auto it = budget_per_class.find(cls);
  return it == budget_per_class.end() ? 0 : it->second;
}

void TokenizerConfig::Validate() const {
  const auto classes = EnabledClasses();
  Require(!classes.empty(), ErrorCode::kInvalidArgument,
          "tokenizer: at least one token class must be enabled");
  for (int n : ngram_orders) {
    Require(n >= 2 && n < 240, ErrorCode::kInvalidArgument,
            "tokenizer: n-gram orders must be >= 2");
  }
  for (size_t i = 0; i < classes.size(); ++i) {
    for (size_t j = i + 1; j < classes.size(); ++j) {
      Require(!(classes[i] == classes[j]), ErrorCode::kInvalidArgument,
              "tokenizer: duplicate n-gram order");
    }
    Require(BudgetFor(classes[i]) > 0, ErrorCode::kInvalidArgument,
            "tokenizer: budget for " + classes[i].Name() + " must be > 0");
  }
}

std::vector<std::string> WordUnigrams(std::string_view text, bool lowercase) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (IsSpace(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(lowercase ? Lower(c) : c);
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

std::vector<std::string> WordNgrams(std::span<const std::string> tokens,
                                    int n) {
  Require(n >= 2, ErrorCode::kInvalidArgument, "WordNgrams: n must be >= 2");
  std::vector<std::string> out;
  const size_t order = static_cast<size_t>(n);
  if (tokens.size() < order) return out;
  out.reserve(tokens.size() - order + 1);
  for (size_t i = 0; i + order <= tokens.size(); ++i) {
    std::string gram = tokens[i];
    for (size_t k = 1; k < order; ++k) {
      gram.push_back('#');
      gram += tokens[i + k];
    }
    out.push_back(std::move(gram));
  }
  return out;
}

std::vector<std::string> CharTrigrams(std::string_view text, bool lowercase) {
  const auto words = WordUnigrams(text, lowercase);
  std::vector<std::string> out;
  if (words.empty()) return out;
  std::string wrapped = "#";
  for (const auto& w : words) {
    wrapped += w;
    wrapped.push_back('#');
  }
  out.reserve(wrapped.size() - 2);
  for (size_t i = 0; i + 3 <= wrapped.size(); ++i) {
    out.push_back(wrapped.substr(i, 3));
  }
  return out;
}

std::vector<std::string> TokensOfClass(std::string_view text,
                                       const TokenClass& cls, bool lowercase) {
  switch (cls.kind()) {
    case TokenClass::Kind::kUnigram:
      return WordUnigrams(text, lowercase);
    case TokenClass::Kind::kWordNgram:
      return WordNgrams(WordUnigrams(text, lowercase), cls.order());
    case TokenClass::Kind::kCharTrigram:
      return CharTrigrams(text, lowercase);
  }
  return {};
}

TokenId HashOov(const TokenClass& cls, std::string_view token, size_t bins,
                size_t vocab_size) {
  Require(bins >= 1, ErrorCode::kInvalidArgument, "HashOov: bins must be >= 1");
  const char tag = static_cast<char>(cls.Tag());
  const uint64_t h = Fnv1a64(token, Fnv1a64(std::string_view(&tag, 1)));
  return static_cast<TokenId>(vocab_size + 1 + (h % bins));
}

std::optional<TokenId> Vocabulary::Find(const TokenClass& cls,
                                        std::string_view token) const {
  const auto cit = ids_.find(cls);
  if (cit == ids_.end()) return std::nullopt;
  // Heterogeneous lookup needs C++20 transparent hashing; a temporary is fine
  // at these string sizes.
  const auto it = cit->second.find(std::string(token));
  if (it == cit->second.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::Lookup(const TokenClass& cls,
                           std::string_view token) const {
  if (const auto id = Find(cls, token)) return *id;
  if (config_.oov_bins == 0) return 0;
  return HashOov(cls, token, config_.oov_bins, size_);
}

TokenBag Vocabulary::Encode(std::string_view text, Side side) const {
  const size_t max_len = max_tokens(side);
  TokenBag bag;
  bag.ids.assign(max_len, 0);
  size_t pos = 0;
  const auto words = WordUnigrams(text, config_.lowercase);
  for (const auto& cls : config_.EnabledClasses()) {
    if (pos == max_len) break;
    std::vector<std::string> tokens;
    switch (cls.kind()) {
      case TokenClass::Kind::kUnigram:
        tokens = words;
        break;
      case TokenClass::Kind::kWordNgram:
        tokens = WordNgrams(words, cls.order());
        break;
      case TokenClass::Kind::kCharTrigram:
        tokens = CharTrigrams(text, config_.lowercase);
        break;
    }
    for (const auto& t : tokens) {
      if (pos == max_len) break;
      const TokenId id = Lookup(cls, t);
      bag.ids[pos++] = id;
      if (id != 0) ++bag.valid_count;
    }
  }
  return bag;
}

void Vocabulary::Insert(const TokenClass& cls, std::string token, TokenId id) {
  auto [it, inserted] = ids_[cls].emplace(std::move(token), id);
  Require(inserted, ErrorCode::kDataLoss,
          "vocabulary: duplicate token '" + it->first + "' in class " +
              cls.Name());
  ++class_counts_[cls];
}

std::vector<std::pair<TokenClass, std::string>> Vocabulary::Entries() const {
  std::vector<std::pair<TokenClass, std::string>> out(
      size_, {TokenClass::Unigram(), std::string()});
  for (const auto& [cls, map] : ids_) {
    for (const auto& [token, id] : map) out[id - 1] = {cls, token};
  }
  return out;
}

std::string Vocabulary::Serialize() const {
  std::ostringstream out;
  out << "V=" << size_ << " B=" << config_.oov_bins
      << " lowercase=" << (config_.lowercase ? 1 : 0)
      << " unigrams=" << (config_.use_unigrams ? 1 : 0) << " ngrams=";
  for (size_t i = 0; i < config_.ngram_orders.size(); ++i) {
    if (i) out << ',';
    out << config_.ngram_orders[i];
  }
  if (config_.ngram_orders.empty()) out << '-';
  out << " char3=" << (config_.use_char_trigrams ? 1 : 0)
      << " query_max_tokens=" << config_.query_max_tokens
      << " product_max_tokens=" << config_.product_max_tokens << '\n';
  const auto entries = Entries();
  for (size_t i = 0; i < entries.size(); ++i) {
    out << entries[i].first.Name() << '\t' << entries[i].second << '\t'
        << (i + 1) << '\n';
  }
  return out.str();
}

void Vocabulary::Save(const std::string& path) const {
  WriteFileBytes(path, Serialize());
}

Vocabulary Vocabulary::Load(const std::string& path) {
  return Parse(ReadFileBytes(path));
}

Vocabulary Vocabulary::Parse(std::string_view text) {
  Vocabulary vocab;
  auto lines = SplitOn(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  Require(!lines.empty(), ErrorCode::kDataLoss, "vocabulary: empty file");

  TokenizerConfig& cfg = vocab.config_;
  cfg.use_unigrams = false;
  bool saw_v = false;
  bool saw_b = false;
  size_t declared_v = 0;
  for (std::string_view field : SplitOn(lines[0], ' ')) {
    if (field.empty()) continue;
    const size_t eq = field.find('=');
    Require(eq != std::string_view::npos, ErrorCode::kDataLoss,
            "vocabulary: bad header field '" + std::string(field) + "'");
    const std::string_view key = field.substr(0, eq);
    const std::string_view value = field.substr(eq + 1);
    if (key == "V") {
      declared_v = ParseSize(value, "V");
      saw_v = true;
    } else if (key == "B") {
      cfg.oov_bins = ParseSize(value, "B");
      saw_b = true;
    } else if (key == "lowercase") {
      cfg.lowercase = ParseSize(value, key) != 0;
    } else if (key == "unigrams") {
      cfg.use_unigrams = ParseSize(value, key) != 0;
    } else if (key == "ngrams") {
      if (value != "-") {
        for (auto part : SplitOn(value, ',')) {
          cfg.ngram_orders.push_back(static_cast<int>(ParseSize(part, key)));
        }
      }
    } else if (key == "char3") {
      cfg.use_char_trigrams = ParseSize(value, key) != 0;
    } else if (key == "query_max_tokens") {
      cfg.query_max_tokens = ParseSize(value, key);
    } else if (key == "product_max_tokens") {
      cfg.product_max_tokens = ParseSize(value, key);
    } else {
      Fail(ErrorCode::kDataLoss,
           "vocabulary: unknown header key '" + std::string(key) + "'");
    }
  }
  Require(saw_v && saw_b, ErrorCode::kDataLoss,
          "vocabulary: header must start with V=<int> B=<int>");

  for (size_t i = 1; i < lines.size(); ++i) {
    const auto fields = SplitOn(lines[i], '\t');
    Require(fields.size() == 3, ErrorCode::kDataLoss,
            "vocabulary: line " + std::to_string(i + 1) +
                " must have 3 tab-separated fields");
    const TokenClass cls = TokenClass::Parse(fields[0]);
    const size_t id = ParseSize(fields[2], "id");
    Require(id == i, ErrorCode::kDataLoss,
            "vocabulary: ids must be dense and ascending (line " +
                std::to_string(i + 1) + ")");
    vocab.Insert(cls, std::string(fields[1]), static_cast<TokenId>(id));
  }
  vocab.size_ = lines.size() - 1;
  Require(vocab.size_ == declared_v, ErrorCode::kDataLoss,
          "vocabulary: header V does not match entry count");
  // Budgets are not persisted; the retained counts stand in for them.
  for (const auto& cls : cfg.EnabledClasses()) {
    cfg.budget_per_class[cls] = std::max<size_t>(1, vocab.class_counts_[cls]);
  }
  return vocab;
}

bool Vocabulary::operator==(const Vocabulary& other) const {
  return Serialize() == other.Serialize();
}

size_t NearestRankPercentile(std::vector<size_t> values, double p) {
  Require(!values.empty(), ErrorCode::kInvalidArgument,
          "percentile of an empty sample");
  Require(p > 0.0 && p <= 100.0, ErrorCode::kInvalidArgument,
          "percentile must be in (0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(values.size()));
  const size_t idx = static_cast<size_t>(std::max(1.0, rank)) - 1;
  return values[std::min(idx, values.size() - 1)];
}

Vocabulary BuildVocabulary(std::span<const CorpusRecord> corpus,
                           const TokenizerConfig& config) {
  config.Validate();
  Require(!corpus.empty(), ErrorCode::kFailedPrecondition,
          "build_vocabulary: corpus is empty");

  const auto classes = config.EnabledClasses();
  std::map<TokenClass, std::unordered_map<std::string, size_t>> counts;
  std::vector<size_t> query_lengths;
  std::vector<size_t> product_lengths;
  for (const auto& record : corpus) {
    size_t length = 0;
    for (const auto& cls : classes) {
      auto tokens = TokensOfClass(record.text, cls, config.lowercase);
      length += tokens.size();
      auto& table = counts[cls];
      for (auto& t : tokens) ++table[std::move(t)];
    }
    (record.side == Side::kQuery ? query_lengths : product_lengths)
        .push_back(length);
  }

  Vocabulary vocab;
  vocab.config_ = config;
  TokenId next_id = 1;
  for (const auto& cls : classes) {
    std::vector<std::pair<std::string, size_t>> ranked(counts[cls].begin(),
                                                       counts[cls].end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    const size_t keep = std::min(ranked.size(), config.BudgetFor(cls));
    for (size_t i = 0; i < keep; ++i) {
      vocab.Insert(cls, std::move(ranked[i].first), next_id++);
    }
  }
  vocab.size_ = next_id - 1;

  auto resolve = [](size_t explicit_len, const std::vector<size_t>& lengths) {
    if (explicit_len > 0) return explicit_len;
    if (lengths.empty()) return size_t{1};
    return std::max<size_t>(1, NearestRankPercentile(lengths, 99.0));
  };
  vocab.config_.query_max_tokens =
      resolve(config.query_max_tokens, query_lengths);
  vocab.config_.product_max_tokens =
      resolve(config.product_max_tokens, product_lengths);
  return vocab;
}

}  // namespace semmatch
