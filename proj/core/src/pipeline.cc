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

#include "semmatch/pipeline.h"

#include <filesystem>
#include <set>
#include <string_view>

#include "semmatch/error.h"

namespace semmatch {
namespace {

// Keeps the corpus draw independent of the initialization stream.
constexpr uint64_t kEvalStream = 0x9e3779b97f4a7c15ULL;

}  // namespace

SynthCorpus LoadDataset(const std::string& dir) {
  const std::filesystem::path root(dir);
  SynthCorpus data;
  data.catalog = ReadCatalogFile((root / "catalog.tsv").string());
  data.queries = ReadQueriesFile((root / "queries.tsv").string());
  data.train_log = ReadLogFile((root / "train.tsv").string());
  data.eval_log = ReadLogFile((root / "eval.tsv").string());
  if (std::filesystem::exists(root / "ground_truth.tsv")) {
    data.ground_truth = ReadGroundTruthFile((root / "ground_truth.tsv").string());
  }
  return data;
}

Vocabulary BuildDatasetVocabulary(const SynthCorpus& data,
                                  const TokenizerConfig& config) {
  std::vector<CorpusRecord> corpus;
  std::set<std::string_view> seen_queries;
  std::set<std::string_view> seen_products;
  for (const auto& r : data.train_log) {
    if (seen_queries.insert(r.query).second) {
      corpus.push_back({Side::kQuery, r.query});
    }
    if (seen_products.insert(r.product_id).second) {
      corpus.push_back({Side::kProduct, r.product_text});
    }
  }
  return BuildVocabulary(corpus, config);
}

EmbeddingModel NewModel(const Vocabulary& vocab, const ModelConfig& config,
                        uint64_t seed) {
  EmbeddingModel model(vocab.size(), vocab.oov_bins(), config);
  Rng rng(seed);
  InitializeModel(model, rng);
  return model;
}

EvalSetup PrepareEval(const SynthCorpus& data, const RunConfig& config) {
  EvalSetup setup;
  setup.queries = BuildEvalQueries(data.queries, data.eval_log);
  Rng rng(config.seed ^ kEvalStream);
  setup.corpus = BuildMatchingCorpus(setup.queries, data.catalog,
                                     config.eval_corpus_size, rng);
  return setup;
}

MetricReport Evaluate(const EmbeddingModel& model, const Vocabulary& vocab,
                      const EvalSetup& setup, const RunConfig& config) {
  const ProductIndex index =
      BuildIndex(setup.corpus, model, vocab, config.eval.workers);
  MetricReport report;
  RunMatchingEval(model, vocab, setup.queries, index, config.eval, report);
  RunRankingEval(model, vocab, setup.queries, index, config.eval, report);
  return report;
}

Experiment RunExperiment(const SynthCorpus& data, const RunConfig& config,
                         const EpochCallback& on_epoch) {
  Experiment out;
  out.vocab = BuildDatasetVocabulary(data, config.tokenizer);
  out.model = NewModel(out.vocab, config.model, config.seed);
  const PreprocessResult pre = PreprocessLogs(data.train_log, out.vocab);
  const TrainingData training(pre.records);
  out.history = Train(training, out.model, config.loss, config.train, on_epoch);
  out.report = Evaluate(out.model, out.vocab, PrepareEval(data, config), config);
  return out;
}

}  // namespace semmatch
