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

// semmatch: one binary, one subcommand per pipeline stage.
//
// Exit status: 0 on success, 1 on a runtime error (reported as a single
// `error code=<name> message=<text>` line on stderr), 2 on a usage error.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "semmatch/config.h"
#include "semmatch/data_pipeline.h"
#include "semmatch/error.h"
#include "semmatch/evaluation.h"
#include "semmatch/model.h"
#include "semmatch/pipeline.h"
#include "semmatch/record_file.h"
#include "semmatch/retrieval.h"
#include "semmatch/shard_parallel.h"
#include "semmatch/tokenizer.h"
#include "semmatch/training.h"

namespace semmatch {
namespace {

// Options every subcommand accepts.
struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  std::optional<size_t> workers;
  bool quiet = false;
};

void AddCommon(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "key = value run configuration");
  cmd->add_option("--set", opts.overrides,
                  "override one config key, as key=value (repeatable)");
  cmd->add_option("--seed", opts.seed, "seed for every random stream");
  cmd->add_option("--workers", opts.workers, "worker threads, 0 = all cores");
  cmd->add_flag("--quiet", opts.quiet, "log warnings and errors only");
}

RunConfig ResolveConfig(const CommonOptions& opts) {
  RunConfig config;
  if (!opts.config_path.empty()) config = LoadRunConfig(opts.config_path);
  for (const auto& kv : opts.overrides) {
    const size_t eq = kv.find('=');
    Require(eq != std::string::npos, ErrorCode::kInvalidArgument,
            "--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    config.Set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (opts.seed) config.seed = *opts.seed;
  if (opts.workers) config.workers = *opts.workers;
  config.Resolve();
  spdlog::set_level(opts.quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::info("resolved config:");
  std::string dump = config.Dump();
  size_t start = 0;
  while (start < dump.size()) {
    const size_t end = dump.find('\n', start);
    spdlog::info("  {}", dump.substr(start, end - start));
    start = end + 1;
  }
  return config;
}

std::string RequireFile(const std::string& path, const char* what) {
  Require(std::filesystem::exists(path), ErrorCode::kNotFound,
          std::string(what) + " not found: " + path);
  return path;
}

// ------------------------------------------------------------------

int GenSynthetic(const CommonOptions& opts, const std::string& out) {
  const RunConfig config = ResolveConfig(opts);
  const SynthCorpus corpus = GenerateSynthetic(config.synth);
  WriteSyntheticCorpus(corpus, out);
  std::ofstream(std::filesystem::path(out) / "run.conf") << config.Dump();
  spdlog::info("wrote {} products, {} queries, {} train and {} eval log lines to {}",
               corpus.catalog.size(), corpus.queries.size(),
               corpus.train_log.size(), corpus.eval_log.size(), out);
  return 0;
}

int BuildVocab(const CommonOptions& opts, const std::string& data,
               const std::string& out) {
  const RunConfig config = ResolveConfig(opts);
  SynthCorpus dataset;
  if (std::filesystem::is_directory(data)) {
    dataset = LoadDataset(data);
  } else {
    dataset.train_log = ReadLogFile(RequireFile(data, "log file"));
  }
  const Vocabulary vocab = BuildDatasetVocabulary(dataset, config.tokenizer);
  vocab.Save(out);
  spdlog::info("vocabulary: V={} B={} query_max={} product_max={}", vocab.size(),
               vocab.oov_bins(), vocab.max_tokens(Side::kQuery),
               vocab.max_tokens(Side::kProduct));
  return 0;
}

int Preprocess(const CommonOptions& opts, const std::string& log_path,
               const std::string& vocab_path, const std::string& out) {
  ResolveConfig(opts);
  const Vocabulary vocab = Vocabulary::Load(RequireFile(vocab_path, "vocabulary"));
  ParseStats stats;
  const auto logs = ReadLogFile(RequireFile(log_path, "log file"), &stats);
  const PreprocessResult pre = PreprocessLogs(logs, vocab);
  WriteRecordFile(out, vocab.max_tokens(Side::kQuery),
                  vocab.max_tokens(Side::kProduct), pre.records);
  spdlog::info("{} lines ({} malformed) -> {} records: {} purchased, {} impressed",
               stats.lines, stats.malformed, pre.records.size(),
               pre.label_counts[static_cast<size_t>(Label3::kPurchased)],
               pre.label_counts[static_cast<size_t>(Label3::kImpressed)]);
  return 0;
}

int TrainCommand(const CommonOptions& opts, const std::string& records_path,
                 const std::string& vocab_path, const std::string& out) {
  const RunConfig config = ResolveConfig(opts);
  const Vocabulary vocab = Vocabulary::Load(RequireFile(vocab_path, "vocabulary"));
  const RecordFile records = RecordFile::Open(RequireFile(records_path, "record file"));
  const std::vector<TokenRecord> all = records.ReadAll();
  const TrainingData data(all);
  EmbeddingModel model = NewModel(vocab, config.model, config.seed);
  spdlog::info("training on {} records, {} purchases, {} rows x {} dims",
               all.size(), data.num_purchases(), model.num_rows(), model.dim());
  Train(data, model, config.loss, config.train, [](const EpochStats& s) {
    spdlog::info("epoch {}: loss {:.6f} over {} examples ({} empty dropped, {} "
                 "batches skipped)",
                 s.epoch + 1, s.mean_loss, s.examples, s.dropped_empty,
                 s.skipped_batches);
  });
  model.Save(out);
  spdlog::info("model fingerprint {:016x} -> {}", model.Fingerprint(), out);
  return 0;
}

int EmbedProducts(const CommonOptions& opts, const std::string& model_path,
                  const std::string& vocab_path, const std::string& catalog_path,
                  const std::string& out) {
  const RunConfig config = ResolveConfig(opts);
  const EmbeddingModel model = EmbeddingModel::Load(RequireFile(model_path, "model"));
  const Vocabulary vocab = Vocabulary::Load(RequireFile(vocab_path, "vocabulary"));
  const auto catalog = ReadCatalogFile(RequireFile(catalog_path, "catalog"));
  const ProductIndex index = BuildIndex(catalog, model, vocab, config.eval.workers);
  index.Save(out);
  spdlog::info("indexed {} products -> {}", index.size(), out);
  return 0;
}

int Query(const CommonOptions& opts, const std::string& model_path,
          const std::string& vocab_path, const std::string& index_path,
          const std::string& text, size_t k, double threshold) {
  const RunConfig config = ResolveConfig(opts);
  const EmbeddingModel model = EmbeddingModel::Load(RequireFile(model_path, "model"));
  const Vocabulary vocab = Vocabulary::Load(RequireFile(vocab_path, "vocabulary"));
  const ProductIndex index = ProductIndex::Load(RequireFile(index_path, "index"));
  const MatchResult result =
      TopK(text, index, model, vocab, k, threshold, config.eval.workers);
  for (const auto& item : result.items) {
    std::printf("%s\t%.6f\n", item.id.c_str(), item.score);
  }
  return 0;
}

int EvaluateCommand(const CommonOptions& opts, const std::string& task,
                    const std::string& model_path, const std::string& vocab_path,
                    const std::string& data_dir, std::optional<size_t> k,
                    const std::string& out) {
  CommonOptions local = opts;
  if (k) local.overrides.push_back("eval.k=" + std::to_string(*k));
  const RunConfig config = ResolveConfig(local);
  const EmbeddingModel model = EmbeddingModel::Load(RequireFile(model_path, "model"));
  const Vocabulary vocab = Vocabulary::Load(RequireFile(vocab_path, "vocabulary"));
  const EvalSetup setup = PrepareEval(LoadDataset(data_dir), config);
  const ProductIndex index =
      BuildIndex(setup.corpus, model, vocab, config.eval.workers);
  spdlog::info("{} eval queries against a corpus of {} products", setup.queries.size(),
               index.size());
  MetricReport report;
  report.k = config.eval.k;
  if (task == "matching" || task == "both") {
    RunMatchingEval(model, vocab, setup.queries, index, config.eval, report);
  }
  if (task == "ranking" || task == "both") {
    RunRankingEval(model, vocab, setup.queries, index, config.eval, report);
  }
  std::fputs(FormatMetricTable(report).c_str(), stdout);
  if (!out.empty()) {
    std::ofstream file(out);
    file << FormatMetricLines(report);
    Require(static_cast<bool>(file), ErrorCode::kDataLoss,
            "cannot write metrics to " + out);
  }
  return 0;
}

int ShardCheck(const CommonOptions& opts, size_t n, size_t dim, size_t pairs) {
  const RunConfig config = ResolveConfig(opts);
  const ShardPlan plan(n, dim);
  ModelConfig mc = config.model;
  mc.embedding_dim = dim;
  constexpr size_t kVocab = 999;
  EmbeddingModel model(kVocab, 0, mc);
  Rng rng(config.seed);
  InitializeModel(model, rng);
  std::uniform_int_distribution<TokenId> id(1, kVocab);
  std::uniform_int_distribution<size_t> len(1, 16);
  auto bag = [&](size_t slots) {
    TokenBag b;
    b.ids.assign(slots, 0);
    b.valid_count = std::min(slots, len(rng));
    for (size_t i = 0; i < b.valid_count; ++i) b.ids[i] = id(rng);
    return b;
  };
  std::vector<TokenBag> queries, products;
  for (size_t i = 0; i < pairs; ++i) {
    queries.push_back(bag(8));
    products.push_back(bag(16));
  }
  const auto partial = SimulateSharded(plan, queries, products, model);
  const auto naive = SimulateSharded(plan, queries, products, model,
                                     ExchangeMode::kConcatenate);
  double worst = 0.0;
  for (size_t i = 0; i < pairs; ++i) {
    worst = std::max(worst,
                     std::abs(partial.scores[i] - Score(queries[i], products[i], model)));
  }
  std::printf("shards = %zu\ndim = %zu\nslice_dim = %zu\npairs = %zu\n", n, dim,
              plan.slice_dim(), pairs);
  std::printf("max_abs_deviation = %.6g\n", worst);
  std::printf("input_broadcasts = %zu\n", partial.ledger.input_broadcasts);
  std::printf("scalars_returned = %zu\n", partial.ledger.scalars_returned);
  std::printf("scalars_per_pair = %zu\n",
              pairs == 0 ? size_t{0} : partial.ledger.scalars_per_pair[0]);
  std::printf("concatenate_scalars_per_pair = %zu\n",
              pairs == 0 ? size_t{0} : naive.ledger.scalars_per_pair[0]);
  return 0;
}

int Run(int argc, char** argv) {
  CLI::App app{"semantic product search: tokenize, train, index, query, evaluate"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  CommonOptions common;
  std::function<int()> action;

  std::string out, data, vocab_path = "vocab.txt", model_path = "model.ckpt",
                         index_path = "products.idx", log_path, records_path,
                         catalog_path, text, task = "both";
  size_t k = 10;
  std::optional<size_t> eval_k;
  double threshold = 0.55;
  size_t shards = 8, dim = 256, pairs = 1000;

  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic corpus");
  AddCommon(gen, common);
  gen->add_option("--out", out, "output directory")->required();
  gen->callback([&] { action = [&] { return GenSynthetic(common, out); }; });

  auto* bv = app.add_subcommand("build-vocab", "build the token vocabulary");
  AddCommon(bv, common);
  bv->add_option("--data,--input", data,
                 "dataset directory or a single training log")->required();
  bv->add_option("--out", out, "vocabulary file")->required();
  bv->callback([&] { action = [&] { return BuildVocab(common, data, out); }; });

  auto* pp = app.add_subcommand("preprocess", "encode a log into a record file");
  AddCommon(pp, common);
  pp->add_option("--log", log_path, "tab-separated interaction log")->required();
  pp->add_option("--vocab", vocab_path, "vocabulary file")->capture_default_str();
  pp->add_option("--out", out, "record file")->required();
  pp->callback([&] {
    action = [&] { return Preprocess(common, log_path, vocab_path, out); };
  });

  auto* tr = app.add_subcommand("train", "train a model on a record file");
  AddCommon(tr, common);
  tr->add_option("--records", records_path, "record file")->required();
  tr->add_option("--vocab", vocab_path, "vocabulary file")->capture_default_str();
  tr->add_option("--out", out, "checkpoint file")->required();
  tr->callback([&] {
    action = [&] { return TrainCommand(common, records_path, vocab_path, out); };
  });

  auto* ep = app.add_subcommand("embed-products", "build the product index");
  AddCommon(ep, common);
  ep->add_option("--model", model_path, "checkpoint")->capture_default_str();
  ep->add_option("--vocab", vocab_path, "vocabulary file")->capture_default_str();
  ep->add_option("--catalog", catalog_path, "catalog file")->required();
  ep->add_option("--out", out, "index file")->required();
  ep->callback([&] {
    action = [&] {
      return EmbedProducts(common, model_path, vocab_path, catalog_path, out);
    };
  });

  auto* q = app.add_subcommand("query", "top-k products for one query");
  AddCommon(q, common);
  q->add_option("--text", text, "query text")->required();
  q->add_option("--k", k, "result count")->capture_default_str()->check(
      CLI::PositiveNumber);
  q->add_option("--threshold", threshold, "minimum score")->capture_default_str();
  q->add_option("--model", model_path, "checkpoint")->capture_default_str();
  q->add_option("--vocab", vocab_path, "vocabulary file")->capture_default_str();
  q->add_option("--index", index_path, "index file")->capture_default_str();
  q->callback([&] {
    action = [&] {
      return Query(common, model_path, vocab_path, index_path, text, k, threshold);
    };
  });

  auto* ev = app.add_subcommand("evaluate", "matching and ranking metrics");
  AddCommon(ev, common);
  ev->add_option("--task", task, "matching, ranking or both")
      ->capture_default_str()
      ->check(CLI::IsMember({"matching", "ranking", "both"}));
  ev->add_option("--model", model_path, "checkpoint")->capture_default_str();
  ev->add_option("--vocab", vocab_path, "vocabulary file")->capture_default_str();
  ev->add_option("--data", data, "dataset directory")->required();
  ev->add_option("--k", eval_k, "recall cutoff (default from config)")
      ->check(CLI::PositiveNumber);
  ev->add_option("--out", out, "write `metric = value` lines here");
  ev->callback([&] {
    action = [&] {
      return EvaluateCommand(common, task, model_path, vocab_path, data, eval_k, out);
    };
  });

  auto* sc = app.add_subcommand("shard-check", "sharded versus direct scoring");
  AddCommon(sc, common);
  sc->add_option("--n", shards, "shards")->capture_default_str();
  sc->add_option("--dim", dim, "embedding dimension")->capture_default_str();
  sc->add_option("--pairs", pairs, "random pairs")->capture_default_str();
  sc->callback([&] {
    action = [&] { return ShardCheck(common, shards, dim, pairs); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action();
  } catch (const Error& e) {
    std::fprintf(stderr, "error code=%s message=%s\n",
                 std::string(ErrorCodeName(e.code())).c_str(), e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error code=internal message=%s\n", e.what());
  }
  return 1;
}

}  // namespace
}  // namespace semmatch

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("semmatch");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] %v");
  return semmatch::Run(argc, argv);
}
