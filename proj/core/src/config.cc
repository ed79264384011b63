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

#include "semmatch/config.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>

#include "semmatch/binary_io.h"
#include "semmatch/error.h"

namespace semmatch {
namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void BadValue(std::string_view key, std::string_view value) {
  Fail(ErrorCode::kInvalidArgument, "config: bad value '" + std::string(value) +
                                        "' for key " + std::string(key));
}

uint64_t ToU64(std::string_view key, std::string_view v) {
  uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    BadValue(key, v);
  }
  return out;
}

double ToDouble(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() ||
      !std::isfinite(out)) {
    BadValue(key, v);
  }
  return out;
}

bool ToBool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  BadValue(key, v);
}

std::string FromDouble(double v) {
  // Shortest text that parses back to the same double.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string FromBool(bool v) { return v ? "true" : "false"; }

std::string FromOrders(const std::vector<int>& orders) {
  if (orders.empty()) return "none";
  std::string out;
  for (size_t i = 0; i < orders.size(); ++i) {
    out += (i ? "," : "") + std::to_string(orders[i]);
  }
  return out;
}

std::vector<int> ToOrders(std::string_view key, std::string_view v) {
  std::vector<int> out;
  if (v == "none") return out;
  size_t start = 0;
  while (start <= v.size()) {
    const size_t comma = std::min(v.find(',', start), v.size());
    const uint64_t n = ToU64(key, Trim(v.substr(start, comma - start)));
    if (n < 2 || n >= 240) BadValue(key, v);
    out.push_back(static_cast<int>(n));
    start = comma + 1;
  }
  return out;
}

struct Field {
  std::function<void(RunConfig&, std::string_view key, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field SizeField(T RunConfig::*group, size_t T::*member) {
  return {[=](RunConfig& c, std::string_view k, std::string_view v) {
            c.*group.*member = static_cast<size_t>(ToU64(k, v));
          },
          [=](const RunConfig& c) { return std::to_string(c.*group.*member); }};
}

template <typename T>
Field DoubleField(T RunConfig::*group, double T::*member) {
  return {[=](RunConfig& c, std::string_view k, std::string_view v) {
            c.*group.*member = ToDouble(k, v);
          },
          [=](const RunConfig& c) { return FromDouble(c.*group.*member); }};
}

template <typename T>
Field BoolField(T RunConfig::*group, bool T::*member) {
  return {[=](RunConfig& c, std::string_view k, std::string_view v) {
            c.*group.*member = ToBool(k, v);
          },
          [=](const RunConfig& c) { return FromBool(c.*group.*member); }};
}

const std::map<std::string, Field>& Fields() {
  static const auto* fields = new std::map<std::string, Field>{
      {"tokenizer.lowercase", BoolField(&RunConfig::tokenizer,
                                        &TokenizerConfig::lowercase)},
      {"tokenizer.unigrams", BoolField(&RunConfig::tokenizer,
                                       &TokenizerConfig::use_unigrams)},
      {"tokenizer.ngrams",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.tokenizer.ngram_orders = ToOrders(k, v);
        },
        [](const RunConfig& c) {
          return FromOrders(c.tokenizer.ngram_orders);
        }}},
      {"tokenizer.char3", BoolField(&RunConfig::tokenizer,
                                    &TokenizerConfig::use_char_trigrams)},
      {"tokenizer.oov_bins", SizeField(&RunConfig::tokenizer,
                                       &TokenizerConfig::oov_bins)},
      {"tokenizer.query_max_tokens",
       SizeField(&RunConfig::tokenizer, &TokenizerConfig::query_max_tokens)},
      {"tokenizer.product_max_tokens",
       SizeField(&RunConfig::tokenizer, &TokenizerConfig::product_max_tokens)},
      {"model.dim", SizeField(&RunConfig::model, &ModelConfig::embedding_dim)},
      {"model.shared", BoolField(&RunConfig::model,
                                 &ModelConfig::shared_embeddings)},
      {"model.normalization",
       {[](RunConfig& c, std::string_view, std::string_view v) {
          c.model.normalization = ParseNormalization(v);
        },
        [](const RunConfig& c) {
          return std::string(NormalizationName(c.model.normalization));
        }}},
      {"model.bn_momentum", DoubleField(&RunConfig::model,
                                        &ModelConfig::bn_momentum)},
      {"model.bn_epsilon", DoubleField(&RunConfig::model,
                                       &ModelConfig::bn_epsilon)},
      {"loss.kind",
       {[](RunConfig& c, std::string_view, std::string_view v) {
          c.loss.kind = ParseLossKind(v);
        },
        [](const RunConfig& c) { return std::string(LossKindName(c.loss.kind)); }}},
      {"loss.m",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.loss.m = static_cast<int>(ToU64(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.loss.m); }}},
      {"loss.eps_plus", DoubleField(&RunConfig::loss, &LossSpec::eps_plus)},
      {"loss.eps_minus", DoubleField(&RunConfig::loss, &LossSpec::eps_minus)},
      {"loss.eps_zero", DoubleField(&RunConfig::loss, &LossSpec::eps_zero)},
      {"train.batch_size", SizeField(&RunConfig::train,
                                     &TrainConfig::batch_size)},
      {"train.epochs", SizeField(&RunConfig::train, &TrainConfig::epochs)},
      {"train.learning_rate",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.adam.learning_rate = ToDouble(k, v);
        },
        [](const RunConfig& c) {
          return FromDouble(c.train.adam.learning_rate);
        }}},
      {"train.beta1",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.adam.beta1 = ToDouble(k, v);
        },
        [](const RunConfig& c) { return FromDouble(c.train.adam.beta1); }}},
      {"train.beta2",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.adam.beta2 = ToDouble(k, v);
        },
        [](const RunConfig& c) { return FromDouble(c.train.adam.beta2); }}},
      {"train.adam_epsilon",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.adam.epsilon = ToDouble(k, v);
        },
        [](const RunConfig& c) { return FromDouble(c.train.adam.epsilon); }}},
      {"train.impressed_per_purchase",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.sampling.impressed_per_purchase = ToU64(k, v);
        },
        [](const RunConfig& c) {
          return std::to_string(c.train.sampling.impressed_per_purchase);
        }}},
      {"train.random_per_purchase",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.sampling.random_per_purchase = ToU64(k, v);
        },
        [](const RunConfig& c) {
          return std::to_string(c.train.sampling.random_per_purchase);
        }}},
      {"train.shuffle",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.train.sampling.shuffle = ToBool(k, v);
        },
        [](const RunConfig& c) { return FromBool(c.train.sampling.shuffle); }}},
      {"eval.k", SizeField(&RunConfig::eval, &EvalOptions::k)},
      {"eval.map_cutoff", SizeField(&RunConfig::eval, &EvalOptions::map_cutoff)},
      {"eval.threshold", DoubleField(&RunConfig::eval, &EvalOptions::threshold)},
      {"eval.corpus_size",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.eval_corpus_size = ToU64(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.eval_corpus_size); }}},
      {"synth.concepts", SizeField(&RunConfig::synth, &SynthConfig::concepts)},
      {"synth.synonyms", SizeField(&RunConfig::synth, &SynthConfig::synonyms)},
      {"synth.products", SizeField(&RunConfig::synth, &SynthConfig::products)},
      {"synth.queries", SizeField(&RunConfig::synth, &SynthConfig::queries)},
      {"synth.typo_rate", DoubleField(&RunConfig::synth,
                                      &SynthConfig::typo_rate)},
      {"synth.morph_rate", DoubleField(&RunConfig::synth,
                                       &SynthConfig::morph_rate)},
      {"synth.impressed_per_purchase",
       SizeField(&RunConfig::synth, &SynthConfig::impressed_per_purchase)},
      {"synth.signature_size",
       SizeField(&RunConfig::synth, &SynthConfig::signature_size)},
      {"synth.min_query_concepts",
       SizeField(&RunConfig::synth, &SynthConfig::min_query_concepts)},
      {"synth.max_query_concepts",
       SizeField(&RunConfig::synth, &SynthConfig::max_query_concepts)},
      {"synth.brands", SizeField(&RunConfig::synth, &SynthConfig::brands)},
      {"synth.colors", SizeField(&RunConfig::synth, &SynthConfig::colors)},
      {"synth.eval_fraction", DoubleField(&RunConfig::synth,
                                          &SynthConfig::eval_fraction)},
      {"synth.code_rate", DoubleField(&RunConfig::synth,
                                      &SynthConfig::code_rate)},
      {"synth.query_code_rate",
       DoubleField(&RunConfig::synth, &SynthConfig::query_code_rate)},
      {"synth.query_color_rate",
       DoubleField(&RunConfig::synth, &SynthConfig::query_color_rate)},
      {"synth.query_brand_rate",
       DoubleField(&RunConfig::synth, &SynthConfig::query_brand_rate)},
      {"synth.twin_rate", DoubleField(&RunConfig::synth,
                                      &SynthConfig::twin_rate)},
      {"synth.lexical_gap_fraction",
       DoubleField(&RunConfig::synth, &SynthConfig::lexical_gap_fraction)},
      {"synth.second_purchase_rate",
       DoubleField(&RunConfig::synth, &SynthConfig::second_purchase_rate)},
      {"seed",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.seed = ToU64(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"workers",
       {[](RunConfig& c, std::string_view k, std::string_view v) {
          c.workers = ToU64(k, v);
        },
        [](const RunConfig& c) { return std::to_string(c.workers); }}},
  };
  return *fields;
}

constexpr std::string_view kBudgetPrefix = "tokenizer.budget.";

}  // namespace

RunConfig::RunConfig() {
  tokenizer.ngram_orders = {2};
  tokenizer.use_char_trigrams = true;
  tokenizer.budget_per_class[TokenClass::Unigram()] = 20000;
  tokenizer.budget_per_class[TokenClass::WordNgram(2)] = 50000;
  tokenizer.budget_per_class[TokenClass::CharTrigram()] = 20000;
}

void RunConfig::Set(std::string_view key, std::string_view value) {
  if (key.starts_with(kBudgetPrefix)) {
    const TokenClass cls = TokenClass::Parse(key.substr(kBudgetPrefix.size()));
    tokenizer.budget_per_class[cls] = ToU64(key, value);
    return;
  }
  const auto& fields = Fields();
  auto it = fields.find(std::string(key));
  if (it == fields.end()) {
    Fail(ErrorCode::kInvalidArgument,
         "config: unknown key '" + std::string(key) + "'");
  }
  it->second.set(*this, key, value);
}

void RunConfig::Merge(std::string_view text) {
  size_t line_no = 0;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      Fail(ErrorCode::kInvalidArgument,
           "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = Trim(line.substr(0, eq));
    const std::string_view value = Trim(line.substr(eq + 1));
    try {
      Set(key, value);
    } catch (const Error& e) {
      Fail(e.code(), "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::Resolve() {
  train.seed = seed;
  synth.seed = seed;
  eval.workers = workers;
  tokenizer.Validate();
  model.Validate();
  loss.Validate();
  synth.Validate();
  Require(train.batch_size >= 1, ErrorCode::kInvalidArgument,
          "config: train.batch_size must be >= 1");
  Require(eval.k >= 1, ErrorCode::kInvalidArgument, "config: eval.k must be >= 1");
}

std::string RunConfig::Dump() const {
  std::string out;
  for (const auto& [key, field] : Fields()) {
    out += key + " = " + field.get(*this) + "\n";
  }
  for (const auto& [cls, budget] : tokenizer.budget_per_class) {
    out += std::string(kBudgetPrefix) + cls.Name() + " = " +
           std::to_string(budget) + "\n";
  }
  return out;
}

std::vector<std::string> RunConfig::Keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : Fields()) keys.push_back(key);
  return keys;
}

RunConfig ParseRunConfig(std::string_view text) {
  RunConfig config;
  config.Merge(text);
  return config;
}

RunConfig LoadRunConfig(const std::string& path) {
  return ParseRunConfig(ReadFileBytes(path));
}

}  // namespace semmatch
