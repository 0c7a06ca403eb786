/*
 * Copyright (c) 2026, The frnet-cpp Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "frnet/checkpoint.hpp"
#include "frnet/config.hpp"
#include "frnet/data.hpp"
#include "frnet/error.hpp"
#include "frnet/models.hpp"
#include "frnet/training.hpp"

namespace frnet::run {

/// Where the records come from: one file split by ratio, or three explicit files.
struct DataArgs {
  std::string data;
  std::string train, val, test;
  std::string split = "7:2:1";
  char delimiter = ',';

  bool explicit_files() const { return !train.empty() || !val.empty() || !test.empty(); }
};

inline data::PreparedData load_data(const DataArgs& args, const TrainConfig& cfg) {
  if (args.explicit_files()) {
    if (args.train.empty() || args.val.empty() || args.test.empty() || !args.data.empty()) {
      throw UsageError("give either --data, or all of --train/--val/--test");
    }
    return data::prepare_from_files(data::read_table(args.train, args.delimiter), data::read_table(args.val, args.delimiter),
                                     data::read_table(args.test, args.delimiter), cfg.numeric_fields,
                                     cfg.min_feature_count);
  }
  if (args.data.empty()) throw UsageError("no input data: pass --data or --train/--val/--test");
  return data::prepare_from_single(data::read_table(args.data, args.delimiter), cfg.numeric_fields,
                                   data::parse_ratios(args.split), cfg.seed, cfg.min_feature_count);
}

inline char parse_delimiter(const std::string& text) {
  if (text == "\\t" || text == "tab" || text == "\t") return '\t';
  if (text == "comma") return ',';
  if (text.size() != 1) throw UsageError("delimiter must be a single character, 'tab' or '\\t'");
  return text[0];
}

/// Config echo stored in checkpoints: the training config plus model/data extents.
inline std::string config_echo(const TrainConfig& cfg, const ModelShape& shape, char delimiter) {
  std::ostringstream os;
  os << cfg.to_text() << "model.num_fields = " << shape.num_fields << '\n'
     << "model.num_features = " << shape.num_features << '\n'
     << "data.delimiter = " << static_cast<int>(static_cast<unsigned char>(delimiter)) << '\n';
  return os.str();
}

/// Checkpoint, vocabulary and the settings needed to encode new data for it.
struct LoadedRun {
  TrainConfig config;
  ModelShape shape;
  char delimiter = ',';
  data::Vocabulary vocab;
  Model<float> model;
};

inline LoadedRun load_run(const std::string& checkpoint_path, const std::string& vocab_path) {
  const auto ckpt = checkpoint::load(checkpoint_path);
  LoadedRun run;
  for (const auto& [key, value] : ckpt.config_map()) {
    if (key == "model.num_fields") run.shape.num_fields = std::stoul(value);
    else if (key == "model.num_features") run.shape.num_features = std::stoul(value);
    else if (key == "data.delimiter") run.delimiter = static_cast<char>(std::stoi(value));
    else run.config.set(key, value);
  }
  run.config.validate();
  run.shape.embed_dim = run.config.embed_dim;
  run.shape.attn_dim = run.config.effective_attn_dim();
  run.shape.cie_hidden = run.config.cie_hidden;
  run.shape.variant = run.config.variant_id();
  run.model = checkpoint::restore<float>(ckpt, run.shape);

  std::ifstream in(vocab_path);
  if (!in) throw DataError(vocab_path + ": cannot open vocabulary dump");
  run.vocab = data::Vocabulary::read(in, vocab_path, run.config.numeric_fields);
  if (run.vocab.num_features() != run.shape.num_features || run.vocab.num_fields() != run.shape.num_fields) {
    throw DataError(vocab_path + ": vocabulary does not match checkpoint " + checkpoint_path);
  }
  return run;
}

inline data::Dataset encode_file(const LoadedRun& run, const std::string& path) {
  return data::encode(data::read_table(path, run.delimiter), run.vocab);
}

inline std::string default_vocab_path(const std::string& checkpoint_path) {
  return (std::filesystem::path(checkpoint_path).parent_path() / "vocab.tsv").string();
}

/// Artifacts of one training run written under `out_dir`.
struct TrainArtifacts {
  std::filesystem::path checkpoint, metrics, vocab, summary;
};

inline std::filesystem::path ensure_dir(const std::string& out_dir) {
  std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_summary(const std::filesystem::path& path, const EvalResult& test, std::size_t best_epoch) {
  std::ofstream os(path);
  char buf[160];
  std::snprintf(buf, sizeof buf, "best_epoch = %zu\ntest_auc = %.17g\ntest_logloss = %.17g\n", best_epoch, test.auc,
                test.logloss);
  os << buf;
}

struct RunSummary {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  EvalResult test;
};

/// Train at precision T and write model.frn, metrics.csv, vocab.tsv and summary.txt to `out_dir`.
template <typename T>
RunSummary train_and_save_as(const data::PreparedData& prepared, const TrainConfig& cfg, char delimiter,
                             const std::string& out_dir, std::ostream* log = nullptr) {
  const auto dir = ensure_dir(out_dir);
  TrainArtifacts files{dir / "model.frn", dir / "metrics.csv", dir / "vocab.tsv", dir / "summary.txt"};
  {
    std::ofstream vocab(files.vocab);
    prepared.vocab.write(vocab);
  }
  std::ofstream metrics_csv(files.metrics);
  write_metrics_header(metrics_csv);
  auto result = train<T>(prepared, cfg, [&](const EpochLog& row) {
    write_metrics_row(metrics_csv, row);
    metrics_csv.flush();
    if (log) write_metrics_row(*log, row);
  });
  checkpoint::save(files.checkpoint.string(),
                   checkpoint::snapshot(result.best, config_echo(cfg, result.best.shape(), delimiter)));
  write_summary(files.summary, result.test, result.best_epoch);
  return {std::move(result.log), result.best_epoch, result.test};
}

/// Dispatches on cfg.precision; checkpoints always hold float32 values.
inline RunSummary train_and_save(const data::PreparedData& prepared, const TrainConfig& cfg, char delimiter,
                                 const std::string& out_dir, std::ostream* log = nullptr) {
  if (cfg.precision == "double") return train_and_save_as<double>(prepared, cfg, delimiter, out_dir, log);
  return train_and_save_as<float>(prepared, cfg, delimiter, out_dir, log);
}

}  // namespace frnet::run
