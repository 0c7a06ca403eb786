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
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "frnet/error.hpp"
#include "frnet/frnet.hpp"

namespace frnet {

/// Every run-defining hyper-parameter. Keys in config files match the field names.
struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 4096;
  double dropout = 0.5;  // CIE hidden-layer dropout
  std::size_t embed_dim = 20;
  std::size_t attn_dim = 0;  // 0 follows embed_dim
  std::vector<std::size_t> cie_hidden{128};
  double scheduler_factor = 0.1;
  std::size_t scheduler_patience = 4;
  std::string scheduler_metric = "auc";  // auc | logloss
  double min_delta = 1e-5;
  std::size_t early_stop_patience = 5;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 2022;
  std::string variant = "frnet";
  std::string precision = "float";  // float | double
  std::size_t min_feature_count = 1;
  std::vector<std::string> numeric_fields;
  bool log_timing = false;

  std::size_t effective_attn_dim() const { return attn_dim == 0 ? embed_dim : attn_dim; }
  Variant variant_id() const { return parse_variant(variant); }

  void validate() const {
    auto fail = [](const std::string& what) { throw UsageError("invalid config: " + what); };
    if (!(lr > 0.0)) fail("lr must be > 0");
    if (batch_size == 0) fail("batch_size must be > 0");
    if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
    if (embed_dim == 0) fail("embed_dim must be > 0");
    for (auto w : cie_hidden) {
      if (w == 0) fail("cie_hidden widths must be > 0");
    }
    if (!(scheduler_factor > 0.0 && scheduler_factor < 1.0)) fail("scheduler_factor must lie in (0, 1)");
    if (scheduler_patience < 1) fail("scheduler_patience must be >= 1");
    if (early_stop_patience < 1) fail("early_stop_patience must be >= 1");
    if (scheduler_metric != "auc" && scheduler_metric != "logloss") fail("scheduler_metric must be auc or logloss");
    if (min_delta < 0.0) fail("min_delta must be >= 0");
    if (precision != "float" && precision != "double") fail("precision must be float or double");
    if (min_feature_count < 1) fail("min_feature_count must be >= 1");
    variant_id();
  }

  /// Apply one `key = value` setting.
  void set(const std::string& key, const std::string& value) {
    try {
      if (key == "lr") lr = std::stod(value);
      else if (key == "batch_size") batch_size = std::stoul(value);
      else if (key == "dropout" || key == "cie_dropout") dropout = std::stod(value);
      else if (key == "embed_dim") embed_dim = std::stoul(value);
      else if (key == "attn_dim") attn_dim = std::stoul(value);
      else if (key == "cie_hidden") cie_hidden = parse_widths(value);
      else if (key == "scheduler_factor") scheduler_factor = std::stod(value);
      else if (key == "scheduler_patience") scheduler_patience = std::stoul(value);
      else if (key == "scheduler_metric") scheduler_metric = value;
      else if (key == "min_delta") min_delta = std::stod(value);
      else if (key == "early_stop_patience") early_stop_patience = std::stoul(value);
      else if (key == "max_epochs") max_epochs = std::stoul(value);
      else if (key == "seed") seed = std::stoull(value);
      else if (key == "variant") variant = value;
      else if (key == "precision") precision = value;
      else if (key == "min_feature_count") min_feature_count = std::stoul(value);
      else if (key == "numeric_fields") numeric_fields = split_list(value);
      else if (key == "log_timing") log_timing = parse_bool(value);
      else throw UsageError("unknown config key '" + key + "'");
    } catch (const UsageError&) {
      throw;
    } catch (const std::exception&) {
      throw UsageError("bad value for config key '" + key + "': '" + value + "'");
    }
  }

  /// Parse flat `key = value` text; `#` starts a comment.
  static TrainConfig parse(std::istream& in, const std::string& source, TrainConfig base) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw UsageError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
      }
      base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
  }

  static TrainConfig parse(std::istream& in, const std::string& source) { return parse(in, source, TrainConfig()); }

  static TrainConfig load(const std::string& path) { return load(path, TrainConfig()); }

  static TrainConfig load(const std::string& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw UsageError(path + ": cannot open config file");
    return parse(in, path, std::move(base));
  }

  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "lr = " << lr << '\n'
       << "batch_size = " << batch_size << '\n'
       << "dropout = " << dropout << '\n'
       << "embed_dim = " << embed_dim << '\n'
       << "attn_dim = " << effective_attn_dim() << '\n'
       << "cie_hidden = " << join(cie_hidden) << '\n'
       << "scheduler_factor = " << scheduler_factor << '\n'
       << "scheduler_patience = " << scheduler_patience << '\n'
       << "scheduler_metric = " << scheduler_metric << '\n'
       << "min_delta = " << min_delta << '\n'
       << "early_stop_patience = " << early_stop_patience << '\n'
       << "max_epochs = " << max_epochs << '\n'
       << "seed = " << seed << '\n'
       << "variant = " << variant << '\n'
       << "precision = " << precision << '\n'
       << "min_feature_count = " << min_feature_count << '\n'
       << "numeric_fields = " << join(numeric_fields) << '\n'
       << "log_timing = " << (log_timing ? "true" : "false") << '\n';
    return os.str();
  }

  static std::vector<std::size_t> parse_widths(const std::string& text) {
    std::vector<std::size_t> out;
    for (const auto& part : split_list(text)) {
      std::size_t used = 0;
      out.push_back(std::stoul(part, &used));
      if (used != part.size()) throw UsageError("bad layer width '" + part + "'");
    }
    return out;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
      part = trim(part);
      if (!part.empty()) out.push_back(part);
    }
    return out;
  }

  static bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("expected a boolean, got '" + v + "'");
  }

  template <typename C>
  static std::string join(const C& items) {
    std::ostringstream os;
    bool first = true;
    for (const auto& x : items) {
      os << (first ? "" : ",") << x;
      first = false;
    }
    return os.str();
  }
};

}  // namespace frnet
