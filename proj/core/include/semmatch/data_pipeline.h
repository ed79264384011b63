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

// Interaction-log ingestion and the synthetic corpus generator.
//
// Log line (tab separated):  query  product_id  product_text  label  count
// where label is "purchased" or "impressed" and count >= 1.
// Catalog line:              product_id  product_text
// Query line:                query_id  split  query_text
// Ground-truth line:         query_id  product_id

#ifndef SEMMATCH_DATA_PIPELINE_H_
#define SEMMATCH_DATA_PIPELINE_H_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "semmatch/losses.h"

namespace semmatch {

struct LogRecord {
  std::string query;
  std::string product_id;
  std::string product_text;
  Label3 label = Label3::kPurchased;
  uint64_t count = 1;

  bool operator==(const LogRecord&) const = default;
};

struct ParseStats {
  size_t lines = 0;  // non-blank lines seen
  size_t malformed = 0;
};

// Parses every line; malformed lines are skipped and counted. Throws
// kDataLoss when more than 10% of the non-blank lines are malformed.
std::vector<LogRecord> ParseLog(std::istream& in, ParseStats* stats = nullptr);
std::vector<LogRecord> ReadLogFile(const std::string& path,
                                   ParseStats* stats = nullptr);
void WriteLog(std::ostream& out, const std::vector<LogRecord>& records);

struct CatalogEntry {
  std::string id;
  std::string text;
  bool operator==(const CatalogEntry&) const = default;
};

std::vector<CatalogEntry> ReadCatalogFile(const std::string& path);
void WriteCatalog(std::ostream& out, const std::vector<CatalogEntry>& catalog);

enum class Split { kTrain, kEval };

struct QueryEntry {
  std::string id;
  Split split = Split::kTrain;
  std::string text;
};

std::vector<QueryEntry> ReadQueriesFile(const std::string& path);
void WriteQueries(std::ostream& out, const std::vector<QueryEntry>& queries);

struct GroundTruthPair {
  std::string query_id;
  std::string product_id;
};

std::vector<GroundTruthPair> ReadGroundTruthFile(const std::string& path);
void WriteGroundTruth(std::ostream& out,
                      const std::vector<GroundTruthPair>& pairs);

struct SynthConfig {
  size_t concepts = 100;
  size_t synonyms = 3;
  size_t products = 10000;
  size_t queries = 2000;
  double typo_rate = 0.05;    // per query word
  double morph_rate = 0.05;   // per query word
  size_t impressed_per_purchase = 6;
  uint64_t seed = 1;

  size_t signature_size = 3;      // concepts per product title
  size_t min_query_concepts = 2;  // contiguous run of the target's signature
  size_t max_query_concepts = 3;
  size_t brands = 40;
  size_t colors = 12;
  double eval_fraction = 0.2;
  // Products carrying a unique model-code token, and queries quoting it.
  double code_rate = 0.5;
  double query_code_rate = 0.2;
  double query_color_rate = 0.3;
  double query_brand_rate = 0.1;
  // Products followed by a twin with the first two concepts swapped.
  double twin_rate = 0.1;
  // Queries forced to avoid every surface token of their target product.
  double lexical_gap_fraction = 0.3;
  // Chance a query gets a second purchase among its other relevant products.
  double second_purchase_rate = 0.3;

  void Validate() const;
};

struct SynthCorpus {
  std::vector<CatalogEntry> catalog;
  std::vector<QueryEntry> queries;
  std::vector<LogRecord> train_log;
  std::vector<LogRecord> eval_log;
  std::vector<GroundTruthPair> ground_truth;
};

// Concept clusters with synonym surface forms; products are ordered concept
// signatures rendered with one form per concept plus brand, color and an
// optional model code. Each query targets one product through a contiguous
// run of its concepts, rendered with (possibly different) forms, morphological
// variants and typos. Fully determined by config.seed.
SynthCorpus GenerateSynthetic(const SynthConfig& config);

// Writes catalog.tsv, queries.tsv, train.tsv, eval.tsv, ground_truth.tsv.
void WriteSyntheticCorpus(const SynthCorpus& corpus, const std::string& dir);

}  // namespace semmatch

#endif  // SEMMATCH_DATA_PIPELINE_H_
