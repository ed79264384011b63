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

// End-to-end glue shared by the command-line tool and the acceptance run:
// vocabulary from the training side of a dataset, training, and both
// evaluation tasks.

#ifndef SEMMATCH_PIPELINE_H_
#define SEMMATCH_PIPELINE_H_

#include <string>
#include <vector>

#include "semmatch/config.h"
#include "semmatch/data_pipeline.h"
#include "semmatch/evaluation.h"
#include "semmatch/model.h"
#include "semmatch/retrieval.h"
#include "semmatch/tokenizer.h"
#include "semmatch/training.h"

namespace semmatch {

// The five files written by WriteSyntheticCorpus; ground truth is optional.
SynthCorpus LoadDataset(const std::string& dir);

// Each distinct query and product of the training log, once. Eval queries
// and products never logged in training stay unseen.
Vocabulary BuildDatasetVocabulary(const SynthCorpus& data,
                                  const TokenizerConfig& config);

// Fresh model sized for `vocab`, initialized from `seed`.
EmbeddingModel NewModel(const Vocabulary& vocab, const ModelConfig& config,
                        uint64_t seed);

struct EvalSetup {
  std::vector<EvalQuery> queries;
  std::vector<CatalogEntry> corpus;
};

// Eval queries plus a matching corpus of `config.eval_corpus_size` products
// drawn with a stream derived from the seed.
EvalSetup PrepareEval(const SynthCorpus& data, const RunConfig& config);

MetricReport Evaluate(const EmbeddingModel& model, const Vocabulary& vocab,
                      const EvalSetup& setup, const RunConfig& config);

struct Experiment {
  Vocabulary vocab;
  EmbeddingModel model;
  TrainHistory history;
  MetricReport report;
};

// `config` must already be resolved.
Experiment RunExperiment(const SynthCorpus& data, const RunConfig& config,
                         const EpochCallback& on_epoch = {});

}  // namespace semmatch

#endif  // SEMMATCH_PIPELINE_H_
