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

#include "semmatch/data_pipeline.h"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_set>

#include "semmatch/error.h"

namespace semmatch {
namespace {

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool IsBlank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

std::string_view StripCr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::ifstream OpenOrThrow(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kNotFound, "cannot open " + path);
  return in;
}

template <typename Fn>
void ForEachLine(const std::string& path, size_t expected_fields, Fn fn) {
  auto in = OpenOrThrow(path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = StripCr(line);
    if (IsBlank(view)) continue;
    const auto fields = SplitTabs(view);
    if (fields.size() != expected_fields) {
      Fail(ErrorCode::kDataLoss, path + ":" + std::to_string(lineno) +
                                     ": expected " +
                                     std::to_string(expected_fields) +
                                     " tab-separated fields");
    }
    fn(fields);
  }
}

std::string FormatId(char prefix, size_t n, int width) {
  std::ostringstream out;
  out << prefix << std::setw(width) << std::setfill('0') << n;
  return out.str();
}

// --- synthetic generator helpers -------------------------------------------

class WordFactory {
 public:
  explicit WordFactory(std::mt19937_64& rng) : rng_(rng) {}

  std::string Word(size_t min_syllables, size_t max_syllables) {
    static constexpr std::string_view kConsonants = "bcdfghjklmnprstvwz";
    static constexpr std::string_view kVowels = "aeiou";
    while (true) {
      const size_t syllables = Uniform(min_syllables, max_syllables);
      std::string w;
      for (size_t i = 0; i < syllables; ++i) {
        w.push_back(kConsonants[Uniform(0, kConsonants.size() - 1)]);
        w.push_back(kVowels[Uniform(0, kVowels.size() - 1)]);
      }
      if (used_.insert(w).second) return w;
    }
  }

  std::string Code() {
    static constexpr std::string_view kLetters = "qxzkvwy";
    while (true) {
      std::string w;
      w.push_back(kLetters[Uniform(0, kLetters.size() - 1)]);
      w.push_back(kLetters[Uniform(0, kLetters.size() - 1)]);
      for (int i = 0; i < 4; ++i) {
        w.push_back(static_cast<char>('0' + Uniform(0, 9)));
      }
      if (used_.insert(w).second) return w;
    }
  }

 private:
  size_t Uniform(size_t lo, size_t hi) {
    return std::uniform_int_distribution<size_t>(lo, hi)(rng_);
  }

  std::mt19937_64& rng_;
  std::unordered_set<std::string> used_;
};

struct SynthProduct {
  std::vector<size_t> signature;
  std::vector<size_t> forms;  // synonym index per signature slot
  size_t brand = 0;
  size_t color = 0;
  std::string code;  // empty when none
  std::string text;
};

std::string MorphVariant(const std::string& w) {
  if (w.size() > 3 && w.back() == 's') return w.substr(0, w.size() - 1);
  return w + "s";
}

std::string Typo(const std::string& w, std::mt19937_64& rng) {
  if (w.size() < 3) return w;
  auto uniform = [&](size_t lo, size_t hi) {
    return std::uniform_int_distribution<size_t>(lo, hi)(rng);
  };
  const char letter = static_cast<char>('a' + uniform(0, 25));
  std::string out = w;
  const size_t pos = uniform(1, w.size() - 1);
  switch (uniform(0, 3)) {
    case 0:  // substitution
      out[pos] = letter == out[pos] ? (letter == 'z' ? 'a' : letter + 1)
                                    : letter;
      break;
    case 1:  // deletion
      out.erase(pos, 1);
      break;
    case 2:  // insertion
      out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), letter);
      break;
    default:  // transposition
      if (out[pos - 1] == out[pos]) {
        out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), letter);
      } else {
        std::swap(out[pos - 1], out[pos]);
      }
      break;
  }
  return out;
}

bool ContainsRun(const std::vector<size_t>& signature,
                 const std::vector<size_t>& run) {
  if (run.size() > signature.size()) return false;
  for (size_t o = 0; o + run.size() <= signature.size(); ++o) {
    if (std::equal(run.begin(), run.end(), signature.begin() + o)) return true;
  }
  return false;
}

}  // namespace

std::vector<LogRecord> ParseLog(std::istream& in, ParseStats* stats) {
  std::vector<LogRecord> records;
  ParseStats local;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view view = StripCr(line);
    if (IsBlank(view)) continue;
    ++local.lines;
    const auto fields = SplitTabs(view);
    if (fields.size() != 5 || fields[0].empty() || fields[1].empty()) {
      ++local.malformed;
      continue;
    }
    LogRecord r;
    if (fields[3] == "purchased") {
      r.label = Label3::kPurchased;
    } else if (fields[3] == "impressed") {
      r.label = Label3::kImpressed;
    } else {
      ++local.malformed;
      continue;
    }
    uint64_t count = 0;
    const auto [ptr, ec] = std::from_chars(
        fields[4].data(), fields[4].data() + fields[4].size(), count);
    if (ec != std::errc() || ptr != fields[4].data() + fields[4].size() ||
        count == 0) {
      ++local.malformed;
      continue;
    }
    r.query = std::string(fields[0]);
    r.product_id = std::string(fields[1]);
    r.product_text = std::string(fields[2]);
    r.count = count;
    records.push_back(std::move(r));
  }
  if (stats) *stats = local;
  if (local.malformed * 10 > local.lines) {
    std::ostringstream msg;
    msg << "log: " << local.malformed << " of " << local.lines
        << " lines malformed (limit 10%)";
    Fail(ErrorCode::kDataLoss, msg.str());
  }
  return records;
}

std::vector<LogRecord> ReadLogFile(const std::string& path,
                                   ParseStats* stats) {
  auto in = OpenOrThrow(path);
  return ParseLog(in, stats);
}

void WriteLog(std::ostream& out, const std::vector<LogRecord>& records) {
  for (const auto& r : records) {
    out << r.query << '\t' << r.product_id << '\t' << r.product_text << '\t'
        << Label3Name(r.label) << '\t' << r.count << '\n';
  }
}

std::vector<CatalogEntry> ReadCatalogFile(const std::string& path) {
  std::vector<CatalogEntry> out;
  ForEachLine(path, 2, [&](const auto& f) {
    out.push_back({std::string(f[0]), std::string(f[1])});
  });
  return out;
}

void WriteCatalog(std::ostream& out, const std::vector<CatalogEntry>& catalog) {
  for (const auto& e : catalog) out << e.id << '\t' << e.text << '\n';
}

std::vector<QueryEntry> ReadQueriesFile(const std::string& path) {
  std::vector<QueryEntry> out;
  ForEachLine(path, 3, [&](const auto& f) {
    QueryEntry q;
    q.id = std::string(f[0]);
    if (f[1] == "train") {
      q.split = Split::kTrain;
    } else if (f[1] == "eval") {
      q.split = Split::kEval;
    } else {
      Fail(ErrorCode::kDataLoss, path + ": bad split '" + std::string(f[1]) +
                                     "'");
    }
    q.text = std::string(f[2]);
    out.push_back(std::move(q));
  });
  return out;
}

void WriteQueries(std::ostream& out, const std::vector<QueryEntry>& queries) {
  for (const auto& q : queries) {
    out << q.id << '\t' << (q.split == Split::kTrain ? "train" : "eval")
        << '\t' << q.text << '\n';
  }
}

std::vector<GroundTruthPair> ReadGroundTruthFile(const std::string& path) {
  std::vector<GroundTruthPair> out;
  ForEachLine(path, 2, [&](const auto& f) {
    out.push_back({std::string(f[0]), std::string(f[1])});
  });
  return out;
}

void WriteGroundTruth(std::ostream& out,
                      const std::vector<GroundTruthPair>& pairs) {
  for (const auto& p : pairs) out << p.query_id << '\t' << p.product_id << '\n';
}

void SynthConfig::Validate() const {
  Require(concepts >= 1 && synonyms >= 1 && products >= 1 && queries >= 1 &&
              brands >= 1 && colors >= 1,
          ErrorCode::kInvalidArgument, "synth: all counts must be >= 1");
  Require(signature_size >= 1 && signature_size <= concepts,
          ErrorCode::kInvalidArgument,
          "synth: signature_size must be in [1, concepts]");
  Require(min_query_concepts >= 1 && min_query_concepts <= max_query_concepts,
          ErrorCode::kInvalidArgument,
          "synth: need 1 <= min_query_concepts <= max_query_concepts");
  for (double r : {typo_rate, morph_rate, eval_fraction, code_rate,
                   query_code_rate, query_color_rate, query_brand_rate,
                   twin_rate, lexical_gap_fraction, second_purchase_rate}) {
    Require(r >= 0.0 && r <= 1.0, ErrorCode::kInvalidArgument,
            "synth: rates must be in [0, 1]");
  }
}

SynthCorpus GenerateSynthetic(const SynthConfig& config) {
  config.Validate();
  std::mt19937_64 rng(config.seed);
  auto uniform = [&](size_t lo, size_t hi) {
    return std::uniform_int_distribution<size_t>(lo, hi)(rng);
  };
  auto coin = [&](double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
  };

  WordFactory words(rng);
  std::vector<std::vector<std::string>> forms(config.concepts);
  for (auto& f : forms) {
    for (size_t s = 0; s < config.synonyms; ++s) f.push_back(words.Word(2, 4));
  }
  std::vector<std::string> brands;
  for (size_t i = 0; i < config.brands; ++i) brands.push_back(words.Word(2, 3));
  std::vector<std::string> colors;
  for (size_t i = 0; i < config.colors; ++i) colors.push_back(words.Word(2, 2));

  // Products.
  std::vector<SynthProduct> products;
  products.reserve(config.products);
  std::set<std::vector<size_t>> used_signatures;
  while (products.size() < config.products) {
    SynthProduct p;
    std::vector<size_t> pool(config.concepts);
    for (size_t c = 0; c < pool.size(); ++c) pool[c] = c;
    for (size_t k = 0; k < config.signature_size; ++k) {
      const size_t pick = uniform(k, pool.size() - 1);
      std::swap(pool[k], pool[pick]);
      p.signature.push_back(pool[k]);
    }
    for (size_t k = 0; k < config.signature_size; ++k) {
      p.forms.push_back(uniform(0, config.synonyms - 1));
    }
    p.brand = uniform(0, config.brands - 1);
    p.color = uniform(0, config.colors - 1);
    if (coin(config.code_rate)) p.code = words.Code();
    const bool twin = config.signature_size >= 2 && coin(config.twin_rate) &&
                      products.size() + 1 < config.products;
    products.push_back(p);
    if (twin) {
      SynthProduct t = p;
      std::swap(t.signature[0], t.signature[1]);
      std::swap(t.forms[0], t.forms[1]);
      t.brand = uniform(0, config.brands - 1);
      t.code = p.code.empty() ? std::string() : words.Code();
      products.push_back(std::move(t));
    }
  }
  std::vector<std::vector<size_t>> by_concept(config.concepts);
  SynthCorpus corpus;
  for (size_t i = 0; i < products.size(); ++i) {
    auto& p = products[i];
    std::string text;
    for (size_t k = 0; k < p.signature.size(); ++k) {
      if (!text.empty()) text.push_back(' ');
      text += forms[p.signature[k]][p.forms[k]];
      by_concept[p.signature[k]].push_back(i);
    }
    text += ' ' + brands[p.brand] + ' ' + colors[p.color];
    if (!p.code.empty()) text += ' ' + p.code;
    p.text = text;
    corpus.catalog.push_back({FormatId('P', i, 6), text});
  }

  const size_t train_count = static_cast<size_t>(
      static_cast<double>(config.queries) * (1.0 - config.eval_fraction) + 0.5);
  std::unordered_set<std::string> seen_queries;
  for (size_t qi = 0; qi < config.queries; ++qi) {
    size_t target = 0;
    std::vector<size_t> run;
    std::string qtext;
    bool use_color = false;
    bool use_brand = false;
    bool use_code = false;
    // Redraw until the query text is new, so no text is shared between
    // queries (and hence between the train and eval splits).
    for (int attempt = 0; attempt < 1000; ++attempt) {
      target = uniform(0, products.size() - 1);
      const SynthProduct& tp = products[target];
      const size_t max_len =
          std::min(config.max_query_concepts, tp.signature.size());
      const size_t min_len = std::min(config.min_query_concepts, max_len);
      const size_t len = uniform(min_len, max_len);
      const size_t start = uniform(0, tp.signature.size() - len);
      run.assign(tp.signature.begin() + start,
                 tp.signature.begin() + start + len);
      const bool gap = config.synonyms >= 2 && coin(config.lexical_gap_fraction);

      std::vector<std::string> qwords;
      for (size_t k = 0; k < len; ++k) {
        const size_t product_form = tp.forms[start + k];
        size_t form = uniform(0, config.synonyms - 1);
        if (gap) {
          form = uniform(0, config.synonyms - 2);
          if (form >= product_form) ++form;
        }
        std::string w = forms[run[k]][form];
        if (coin(config.morph_rate)) w = MorphVariant(w);
        if (coin(config.typo_rate)) w = Typo(w, rng);
        qwords.push_back(std::move(w));
      }
      use_color = false;
      use_brand = false;
      use_code = false;
      if (!gap) {
        use_color = coin(config.query_color_rate);
        use_brand = coin(config.query_brand_rate);
        use_code = !tp.code.empty() && coin(config.query_code_rate);
      }
      if (use_brand) qwords.insert(qwords.begin(), brands[tp.brand]);
      if (use_color) qwords.push_back(colors[tp.color]);
      if (use_code) qwords.push_back(tp.code);
      qtext.clear();
      for (const auto& w : qwords) {
        if (!qtext.empty()) qtext.push_back(' ');
        qtext += w;
      }
      if (seen_queries.insert(qtext).second) break;
    }
    const SynthProduct& tp = products[target];

    // Relevant: contains the concept run in order and agrees on every quoted
    // attribute.
    std::vector<size_t> relevant;
    std::vector<size_t> strong_partial;  // all run concepts, other order
    std::vector<size_t> partial;         // some run concepts
    {
      std::set<size_t> candidates;
      for (size_t c : run) {
        candidates.insert(by_concept[c].begin(), by_concept[c].end());
      }
      for (size_t pi : candidates) {
        const auto& p = products[pi];
        size_t shared = 0;
        for (size_t c : run) {
          shared += std::count(p.signature.begin(), p.signature.end(), c);
        }
        const bool attrs = (!use_color || p.color == tp.color) &&
                           (!use_brand || p.brand == tp.brand) &&
                           (!use_code || pi == target);
        if (ContainsRun(p.signature, run) && attrs) {
          relevant.push_back(pi);
        } else if (shared == run.size()) {
          strong_partial.push_back(pi);
        } else {
          partial.push_back(pi);
        }
      }
    }

    const std::string qid = FormatId('Q', qi, 5);
    const Split split = qi < train_count ? Split::kTrain : Split::kEval;
    corpus.queries.push_back({qid, split, qtext});
    for (size_t pi : relevant) {
      corpus.ground_truth.push_back({qid, corpus.catalog[pi].id});
    }

    std::vector<size_t> purchased = {target};
    std::vector<size_t> others;
    for (size_t pi : relevant) {
      if (pi != target) others.push_back(pi);
    }
    std::shuffle(others.begin(), others.end(), rng);
    if (!others.empty() && coin(config.second_purchase_rate)) {
      purchased.push_back(others.back());
      others.pop_back();
    }

    std::unordered_set<size_t> taken(purchased.begin(), purchased.end());
    std::vector<size_t> impressed;
    const size_t want = config.impressed_per_purchase * purchased.size();
    std::shuffle(strong_partial.begin(), strong_partial.end(), rng);
    std::shuffle(partial.begin(), partial.end(), rng);
    auto take_from = [&](std::vector<size_t>& pool) {
      while (!pool.empty()) {
        const size_t pi = pool.back();
        pool.pop_back();
        if (taken.insert(pi).second) {
          impressed.push_back(pi);
          return true;
        }
      }
      return false;
    };
    for (size_t attempts = 0; impressed.size() < want && attempts < 4 * want;
         ++attempts) {
      const bool relevant_slot = coin(0.25);
      if (relevant_slot && take_from(others)) continue;
      if (take_from(strong_partial)) continue;
      if (take_from(partial)) continue;
      if (take_from(others)) continue;
      const size_t pi = uniform(0, products.size() - 1);
      if (taken.insert(pi).second) impressed.push_back(pi);
    }

    auto& log = split == Split::kTrain ? corpus.train_log : corpus.eval_log;
    for (size_t pi : purchased) {
      uint64_t count = 1;
      while (count < 5 && coin(0.5)) ++count;
      log.push_back({qtext, corpus.catalog[pi].id, products[pi].text,
                     Label3::kPurchased, count});
    }
    for (size_t pi : impressed) {
      log.push_back({qtext, corpus.catalog[pi].id, products[pi].text,
                     Label3::kImpressed, uniform(1, 3)});
    }
  }
  return corpus;
}

void WriteSyntheticCorpus(const SynthCorpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir + "/" + name, std::ios::trunc);
    if (!out) Fail(ErrorCode::kNotFound, "cannot write " + dir + "/" + name);
    return out;
  };
  {
    auto out = open("catalog.tsv");
    WriteCatalog(out, corpus.catalog);
  }
  {
    auto out = open("queries.tsv");
    WriteQueries(out, corpus.queries);
  }
  {
    auto out = open("train.tsv");
    WriteLog(out, corpus.train_log);
  }
  {
    auto out = open("eval.tsv");
    WriteLog(out, corpus.eval_log);
  }
  {
    auto out = open("ground_truth.tsv");
    WriteGroundTruth(out, corpus.ground_truth);
  }
}

}  // namespace semmatch
