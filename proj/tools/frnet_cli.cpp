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

// Command line front end: train, eval, ablate, gradcheck, gatestats,
// embed-dump and synth.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "frnet/analysis.hpp"
#include "frnet/checkpoint.hpp"
#include "frnet/config.hpp"
#include "frnet/error.hpp"
#include "frnet/gradcheck.hpp"
#include "frnet/run.hpp"
#include "frnet/synthetic.hpp"
#include "frnet/training.hpp"

namespace {

using frnet::ExitCode;

// Flags shared by train and ablate; unset optionals leave the config file value alone.
struct TrainFlags {
  std::string config_path;
  frnet::run::DataArgs data;
  std::string delimiter = ",";
  std::string out_dir = "frnet_out";
  std::optional<std::string> variant, cie_hidden, precision, numeric_fields;
  std::optional<std::size_t> embed_dim, attn_dim, batch, max_epochs, min_count, early_stop;
  std::optional<double> lr, dropout;
  std::optional<std::uint64_t> seed;
  bool log_timing = false;

  void attach(CLI::App* cmd, bool with_variant) {
    cmd->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--data", data.data, "single data file, split by --split");
    cmd->add_option("--split", data.split, "train:val:test ratio for --data")->capture_default_str();
    cmd->add_option("--train", data.train, "explicit training file");
    cmd->add_option("--val", data.val, "explicit validation file");
    cmd->add_option("--test", data.test, "explicit test file");
    cmd->add_option("--delimiter", delimiter, "column delimiter (',' or 'tab')")->capture_default_str();
    cmd->add_option("--out-dir", out_dir, "directory for every output")->capture_default_str();
    if (with_variant) cmd->add_option("--variant", variant, "fm | frnet | frnet-vec | 1..13");
    cmd->add_option("--embed-dim", embed_dim, "embedding size d");
    cmd->add_option("--attn-dim", attn_dim, "attention size d_k (default: d)");
    cmd->add_option("--cie-hidden", cie_hidden, "comma-separated CIE hidden widths");
    cmd->add_option("--batch", batch, "mini-batch size");
    cmd->add_option("--lr", lr, "initial learning rate");
    cmd->add_option("--dropout", dropout, "CIE hidden-layer dropout rate");
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--max-epochs", max_epochs, "epoch limit");
    cmd->add_option("--early-stop", early_stop, "early-stopping patience in epochs");
    cmd->add_option("--min-count", min_count, "fold features seen fewer times into <unknown>");
    cmd->add_option("--numeric-fields", numeric_fields, "comma-separated numeric columns to discretize");
    cmd->add_option("--precision", precision, "float | double");
    cmd->add_flag("--log-timing", log_timing, "record wall-clock seconds in metrics.csv");
  }

  frnet::TrainConfig config() const {
    frnet::TrainConfig cfg;
    if (!config_path.empty()) cfg = frnet::TrainConfig::load(config_path);
    if (variant) cfg.set("variant", *variant);
    if (embed_dim) cfg.embed_dim = *embed_dim;
    if (attn_dim) cfg.attn_dim = *attn_dim;
    if (cie_hidden) cfg.set("cie_hidden", *cie_hidden);
    if (batch) cfg.batch_size = *batch;
    if (lr) cfg.lr = *lr;
    if (dropout) cfg.dropout = *dropout;
    if (seed) cfg.seed = *seed;
    if (max_epochs) cfg.max_epochs = *max_epochs;
    if (early_stop) cfg.early_stop_patience = *early_stop;
    if (min_count) cfg.min_feature_count = *min_count;
    if (numeric_fields) cfg.set("numeric_fields", *numeric_fields);
    if (precision) cfg.precision = *precision;
    if (log_timing) cfg.log_timing = true;
    cfg.validate();
    return cfg;
  }
};

void print_metrics(const char* label, const frnet::EvalResult& r) {
  std::printf("%s auc=%.6f logloss=%.6f\n", label, r.auc, r.logloss);
}

int cmd_train(const TrainFlags& flags) {
  auto cfg = flags.config();
  auto data_args = flags.data;
  data_args.delimiter = frnet::run::parse_delimiter(flags.delimiter);
  const auto prepared = frnet::run::load_data(data_args, cfg);
  std::fprintf(stderr, "fields=%zu features=%zu train=%zu val=%zu test=%zu variant=%s\n", prepared.vocab.num_fields(),
               prepared.vocab.num_features(), prepared.train.size(), prepared.val.size(), prepared.test.size(),
               cfg.variant.c_str());
  const auto summary = frnet::run::train_and_save(prepared, cfg, data_args.delimiter, flags.out_dir, &std::cerr);
  std::printf("best_epoch=%zu\n", summary.best_epoch);
  print_metrics("test", summary.test);
  return 0;
}

int cmd_ablate(const TrainFlags& flags, const std::string& variants_text, std::size_t seeds) {
  auto cfg = flags.config();
  auto data_args = flags.data;
  data_args.delimiter = frnet::run::parse_delimiter(flags.delimiter);
  // One encoding for every variant and seed.
  const auto prepared = frnet::run::load_data(data_args, cfg);
  std::vector<frnet::Variant> variants;
  if (variants_text.empty()) {
    for (int id = 1; id <= frnet::kNumVariants; ++id) variants.push_back(static_cast<frnet::Variant>(id));
  } else {
    std::stringstream ss(variants_text);
    std::string part;
    while (std::getline(ss, part, ',')) variants.push_back(frnet::parse_variant(part));
  }
  if (seeds == 0) throw frnet::UsageError("--seeds must be >= 1");

  const auto dir = frnet::run::ensure_dir(flags.out_dir);
  std::ofstream csv(dir / "ablation.csv");
  csv << "variant,formula,seeds,val_auc,test_auc,test_logloss\n";
  for (auto v : variants) {
    double val_auc = 0.0, test_auc = 0.0, test_ll = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
      auto run_cfg = cfg;
      run_cfg.variant = std::to_string(static_cast<int>(v));
      run_cfg.seed = cfg.seed + s;
      const auto sub = dir / ("variant_" + std::to_string(static_cast<int>(v)) + "_seed_" + std::to_string(run_cfg.seed));
      const auto summary = frnet::run::train_and_save(prepared, run_cfg, data_args.delimiter, sub.string());
      double best_val = 0.0;
      for (const auto& row : summary.log) best_val = std::max(best_val, row.val_auc);
      val_auc += best_val;
      test_auc += summary.test.auc;
      test_ll += summary.test.logloss;
    }
    const double n = static_cast<double>(seeds);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,\"%s\",%zu,%.6f,%.6f,%.6f\n", static_cast<int>(v), frnet::variant_formula(v), seeds,
                  val_auc / n, test_auc / n, test_ll / n);
    csv << buf;
    csv.flush();
    std::fputs(buf, stdout);
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& vocab, const std::string& data) {
  const auto run = frnet::run::load_run(checkpoint, vocab.empty() ? frnet::run::default_vocab_path(checkpoint) : vocab);
  const auto ds = frnet::run::encode_file(run, data);
  print_metrics("eval", frnet::evaluate(run.model, ds, run.config.batch_size));
  return 0;
}

int cmd_gradcheck(std::size_t seeds, double threshold) {
  const auto report = frnet::gradcheck::run_suite(seeds);
  bool ok = true;
  for (const auto& r : report.worst) {
    const bool pass = r.max_rel_err < threshold;
    ok = ok && pass;
    std::printf("%-28s %s max_rel_err=%.3e entries=%zu\n", r.name.c_str(), pass ? "PASS" : "FAIL", r.max_rel_err, r.entries);
  }
  std::printf("overall max_rel_err=%.3e threshold=%.1e\n", report.max_rel_err, threshold);
  return ok ? 0 : static_cast<int>(ExitCode::kNumeric);
}

int cmd_gatestats(const std::string& checkpoint, const std::string& vocab, const std::string& data, std::size_t sample,
                  const std::string& out_dir) {
  const auto run = frnet::run::load_run(checkpoint, vocab.empty() ? frnet::run::default_vocab_path(checkpoint) : vocab);
  const auto ds = frnet::run::encode_file(run, data);
  const auto stats = frnet::analysis::gate_stats(run.model, ds, sample, run.config.seed, run.config.batch_size);
  const auto dir = frnet::run::ensure_dir(out_dir);
  {
    std::ofstream csv(dir / "gate_histogram.csv");
    frnet::analysis::write_histogram_csv(csv, stats.histogram);
  }
  std::ofstream summary(dir / "gate_summary.txt");
  char buf[256];
  std::snprintf(buf, sizeof buf, "instances = %zu\nweights = %zu\nmean_gate = %.9f\nmean_complement = %.9f\n",
                stats.instances, stats.histogram.total, stats.mean, stats.complement_mean);
  summary << buf;
  std::fputs(buf, stdout);
  return 0;
}

int cmd_embed_dump(const std::string& checkpoint, const std::string& vocab, const std::string& data, std::size_t rows,
                   const std::string& out_dir) {
  const auto run = frnet::run::load_run(checkpoint, vocab.empty() ? frnet::run::default_vocab_path(checkpoint) : vocab);
  const auto dir = frnet::run::ensure_dir(out_dir);
  {
    std::ofstream csv(dir / "embeddings.csv");
    frnet::analysis::write_embeddings_csv(csv, run.model);
  }
  if (!data.empty()) {
    const auto ds = frnet::run::encode_file(run, data);
    std::ofstream csv(dir / "refined.csv");
    frnet::analysis::write_refined_csv(csv, run.model, ds, frnet::analysis::sample_rows(ds.size(), rows, run.config.seed));
  }
  return 0;
}

int cmd_synth(const frnet::synthetic::Config& cfg, const std::string& out_dir, std::size_t split_files) {
  const auto table = frnet::synthetic::generate(cfg);
  const auto dir = frnet::run::ensure_dir(out_dir);
  if (split_files == 0) {
    std::ofstream os(dir / "synthetic.csv");
    frnet::synthetic::write_csv(os, table);
    return 0;
  }
  // Same 7:2:1 cut the trainer uses, written as three files.
  const auto split = frnet::data::split_by_ratio(table.num_records(), {7, 2, 1}, cfg.seed);
  const std::pair<const char*, const std::vector<std::size_t>*> parts[] = {
      {"train.csv", &split.train}, {"val.csv", &split.val}, {"test.csv", &split.test}};
  for (const auto& [name, rows] : parts) {
    frnet::data::RawTable sub;
    sub.fields = table.fields;
    for (auto r : *rows) {
      sub.labels.push_back(table.labels[r]);
      for (std::size_t f = 0; f < table.num_fields(); ++f) sub.cells.emplace_back(table.cell(r, f));
    }
    std::ofstream os(dir / name);
    frnet::synthetic::write_csv(os, sub);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FRNet: context-aware feature refinement for FM-based CTR prediction"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train one model and write checkpoint, metrics and vocabulary");
  train_flags.attach(train, true);

  TrainFlags ablate_flags;
  std::string ablate_variants;
  std::size_t ablate_seeds = 1;
  auto* ablate = app.add_subcommand("ablate", "train the variants 1..13 and write ablation.csv");
  ablate_flags.attach(ablate, false);
  ablate->add_option("--variants", ablate_variants, "comma-separated subset (default: all 13)");
  ablate->add_option("--seeds", ablate_seeds, "runs per variant (seed, seed+1, ...), averaged")->capture_default_str();

  std::string ckpt, vocab, data, out_dir = "frnet_out";
  auto* eval = app.add_subcommand("eval", "print AUC and Logloss of a checkpoint on a data file");
  eval->add_option("--checkpoint", ckpt, "model.frn")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data, "labelled data file")->required()->check(CLI::ExistingFile);
  eval->add_option("--vocab", vocab, "vocabulary dump (default: vocab.tsv next to the checkpoint)");

  std::size_t gc_seeds = 50;
  double gc_threshold = 1e-6;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every gradient in double precision");
  gradcheck->add_option("--seeds", gc_seeds, "random seeds per case")->capture_default_str();
  gradcheck->add_option("--threshold", gc_threshold, "maximum relative error")->capture_default_str();

  std::size_t sample = 100000;
  auto* gatestats = app.add_subcommand("gatestats", "histogram of the selection gate over sampled instances");
  gatestats->add_option("--checkpoint", ckpt, "model.frn")->required()->check(CLI::ExistingFile);
  gatestats->add_option("--data", data, "labelled data file")->required()->check(CLI::ExistingFile);
  gatestats->add_option("--vocab", vocab, "vocabulary dump (default: vocab.tsv next to the checkpoint)");
  gatestats->add_option("--sample", sample, "instances to sample")->capture_default_str();
  gatestats->add_option("--out-dir", out_dir, "output directory")->capture_default_str();

  std::size_t dump_rows = 1000;
  auto* dump = app.add_subcommand("embed-dump", "write embeddings (and refined rows for --data) as CSV");
  dump->add_option("--checkpoint", ckpt, "model.frn")->required()->check(CLI::ExistingFile);
  dump->add_option("--vocab", vocab, "vocabulary dump (default: vocab.tsv next to the checkpoint)");
  dump->add_option("--data", data, "also dump E_r for sampled instances of this file");
  dump->add_option("--rows", dump_rows, "instances to sample with --data")->capture_default_str();
  dump->add_option("--out-dir", out_dir, "output directory")->capture_default_str();

  frnet::synthetic::Config synth_cfg;
  std::size_t synth_split = 0;
  auto* synth = app.add_subcommand("synth", "generate a Frappe-shaped synthetic dataset");
  synth->add_option("--rows", synth_cfg.rows, "number of records")->capture_default_str();
  synth->add_option("--seed", synth_cfg.seed, "generator seed")->capture_default_str();
  synth->add_option("--affinity-scale", synth_cfg.affinity_scale, "user-item affinity scale")->capture_default_str();
  synth->add_option("--context-strength", synth_cfg.context_strength, "context re-weighting strength")->capture_default_str();
  synth->add_option("--installed", synth_cfg.installed, "apps installed per user")->capture_default_str();
  synth->add_option("--hard-negatives", synth_cfg.hard_negative_rate, "share of negatives drawn from installed apps")->capture_default_str();
  synth->add_option("--split-files", synth_split, "1: write train/val/test.csv at 7:2:1 instead of one file");
  synth->add_option("--out-dir", out_dir, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*train) return cmd_train(train_flags);
    if (*ablate) return cmd_ablate(ablate_flags, ablate_variants, ablate_seeds);
    if (*eval) return cmd_eval(ckpt, vocab, data);
    if (*gradcheck) return cmd_gradcheck(gc_seeds, gc_threshold);
    if (*gatestats) return cmd_gatestats(ckpt, vocab, data, sample, out_dir);
    if (*dump) return cmd_embed_dump(ckpt, vocab, data, dump_rows, out_dir);
    if (*synth) return cmd_synth(synth_cfg, out_dir, synth_split);
  } catch (const frnet::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kUsage);
}
