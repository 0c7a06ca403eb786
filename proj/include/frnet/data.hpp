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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "frnet/error.hpp"

namespace frnet::data {

inline constexpr std::string_view kMissingToken = "⟨missing⟩";
inline constexpr std::string_view kUnknownToken = "⟨unknown⟩";

/// Header plus raw string cells; cell (r, i) is field i of record r.
struct RawTable {
  std::string source;
  std::vector<std::string> fields;
  std::vector<std::uint8_t> labels;
  std::vector<std::string> cells;

  std::size_t num_records() const noexcept { return labels.size(); }
  std::size_t num_fields() const noexcept { return fields.size(); }
  std::string_view cell(std::size_t record, std::size_t field) const { return cells[record * fields.size() + field]; }
};

namespace detail {

inline std::vector<std::string> split_line(std::string_view line, char delimiter) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

}  // namespace detail

inline std::uint8_t parse_label(std::string_view text, const std::string& where) {
  if (text == "1" || text == "1.0") return 1;
  if (text == "0" || text == "0.0") return 0;
  throw DataError(where + ": label must be 0 or 1, got '" + std::string(text) + "'");
}

/**
 * Read a header-bearing delimited file whose first column is `label`.
 * Every record must have exactly as many cells as the header.
 */
inline RawTable read_table(std::istream& in, const std::string& source, char delimiter = ',') {
  RawTable table;
  table.source = source;
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty file, expected a header line");
  detail::strip_cr(line);
  auto header = detail::split_line(line, delimiter);
  if (header.empty() || header.front() != "label") {
    throw DataError(source + ": first header column must be 'label'");
  }
  if (header.size() < 2) throw DataError(source + ": no feature columns after 'label'");
  table.fields.assign(header.begin() + 1, header.end());
  std::set<std::string> seen;
  for (const auto& name : table.fields) {
    if (!seen.insert(name).second) throw DataError(source + ": duplicate column '" + name + "'");
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    if (line.empty()) continue;
    auto parts = detail::split_line(line, delimiter);
    const std::string where = source + ":" + std::to_string(line_no);
    if (parts.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " columns, got " +
                      std::to_string(parts.size()));
    }
    table.labels.push_back(parse_label(parts.front(), where));
    for (std::size_t i = 1; i < parts.size(); ++i) table.cells.push_back(std::move(parts[i]));
  }
  return table;
}

inline RawTable read_table(const std::string& path, char delimiter = ',') {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open file");
  return read_table(in, path, delimiter);
}

/**
 * Map a non-negative count-like value to a categorical token:
 * floor(ln(v)^2) for v > 2, round(v) otherwise.
 */
inline std::string discretize_numeric(std::optional<double> value, std::size_t record = 0) {
  if (!value) return std::string(kMissingToken);
  const double v = *value;
  if (!std::isfinite(v) || v < 0.0) {
    throw DataError("record " + std::to_string(record) + ": numeric value must be finite and >= 0, got " +
                    std::to_string(v));
  }
  if (v > 2.0) {
    const double l = std::log(v);
    return std::to_string(static_cast<long long>(std::floor(l * l)));
  }
  return std::to_string(static_cast<long long>(std::llround(v)));
}

/// Field names plus which of them hold numeric values needing discretization.
struct Schema {
  std::vector<std::string> fields;
  std::vector<bool> numeric;

  static Schema from_table(const RawTable& table, const std::vector<std::string>& numeric_fields) {
    Schema s;
    s.fields = table.fields;
    s.numeric.assign(s.fields.size(), false);
    for (const auto& name : numeric_fields) {
      auto it = std::find(s.fields.begin(), s.fields.end(), name);
      if (it == s.fields.end()) throw DataError(table.source + ": numeric field '" + name + "' not in header");
      s.numeric[static_cast<std::size_t>(it - s.fields.begin())] = true;
    }
    return s;
  }

  std::string token(std::size_t field, std::string_view cell, std::size_t record) const {
    if (!numeric[field]) return cell.empty() ? std::string(kMissingToken) : std::string(cell);
    if (cell.empty()) return discretize_numeric(std::nullopt, record);
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(std::string(cell), &used);
      if (used != cell.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DataError("record " + std::to_string(record) + ": field '" + fields[field] +
                      "' is not numeric: '" + std::string(cell) + "'");
    }
    return discretize_numeric(v, record);
  }
};

/**
 * Per-field token dictionary. Local index 0 is the unknown slot; kept tokens
 * get 1, 2, ... in first-seen order. Folded tokens stay listed with their
 * counts but resolve to the unknown slot.
 */
class FieldVocab {
 public:
  FieldVocab() = default;
  explicit FieldVocab(std::string name) : name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return kept_ + 1; }
  std::size_t folded_count() const noexcept { return folded_count_; }

  std::uint32_t lookup(const std::string& token) const {
    auto it = position_.find(token);
    return it == position_.end() ? 0 : entries_[it->second].index;
  }

  struct Entry {
    std::string token;
    std::size_t count = 0;
    std::uint32_t index = 0;  // local; 0 when folded
  };
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  void count(const std::string& token) {
    auto [it, inserted] = position_.try_emplace(token, entries_.size());
    if (inserted) entries_.push_back({token, 0, 0});
    ++entries_[it->second].count;
  }

  void freeze(std::size_t min_count) {
    kept_ = 0;
    folded_count_ = 0;
    for (auto& e : entries_) {
      if (e.count >= min_count) {
        e.index = static_cast<std::uint32_t>(++kept_);
      } else {
        e.index = 0;
        folded_count_ += e.count;
      }
    }
  }

  /// Restore one entry exactly as dumped.
  void restore(std::string token, std::size_t count, std::uint32_t local_index) {
    if (local_index != 0 && local_index != kept_ + 1) {
      throw DataError("vocabulary field '" + name_ + "': non-contiguous index for token '" + token + "'");
    }
    if (!position_.try_emplace(token, entries_.size()).second) {
      throw DataError("vocabulary field '" + name_ + "': duplicate token '" + token + "'");
    }
    if (local_index != 0) ++kept_; else folded_count_ += count;
    entries_.push_back({std::move(token), count, local_index});
  }

 private:
  std::string name_;
  std::unordered_map<std::string, std::size_t> position_;
  std::vector<Entry> entries_;
  std::size_t kept_ = 0;
  std::size_t folded_count_ = 0;
};

/// All field vocabularies; global index = field offset + local index.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(Schema schema, std::vector<FieldVocab> fields) : schema_(std::move(schema)), fields_(std::move(fields)) {
    recompute_offsets();
  }

  const Schema& schema() const noexcept { return schema_; }
  const std::vector<FieldVocab>& fields() const noexcept { return fields_; }
  std::size_t num_fields() const noexcept { return fields_.size(); }
  std::size_t num_features() const noexcept { return total_; }
  std::uint32_t offset(std::size_t field) const { return offsets_.at(field); }

  std::uint32_t global_index(std::size_t field, const std::string& token) const {
    return offsets_[field] + fields_[field].lookup(token);
  }

  /// Tab-separated dump: field, token, global index, count; one unknown line leads each field.
  void write(std::ostream& out) const {
    out << "field\ttoken\tindex\tcount\n";
    for (std::size_t f = 0; f < fields_.size(); ++f) {
      const auto& fv = fields_[f];
      out << fv.name() << '\t' << kUnknownToken << '\t' << offsets_[f] << '\t' << fv.folded_count() << '\n';
      for (const auto& e : fv.entries()) {
        out << fv.name() << '\t' << e.token << '\t' << offsets_[f] + e.index << '\t' << e.count << '\n';
      }
    }
  }

  /// Inverse of write(); `numeric` marks fields that are discretized on encode.
  static Vocabulary read(std::istream& in, const std::string& source, const std::vector<std::string>& numeric_fields) {
    std::string line;
    if (!std::getline(in, line) || (detail::strip_cr(line), line != "field\ttoken\tindex\tcount")) {
      throw DataError(source + ": not a vocabulary dump");
    }
    std::vector<FieldVocab> fields;
    Schema schema;
    std::uint32_t offset = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      detail::strip_cr(line);
      if (line.empty()) continue;
      auto parts = detail::split_line(line, '\t');
      const std::string where = source + ":" + std::to_string(line_no);
      if (parts.size() != 4) throw DataError(where + ": expected 4 tab-separated columns");
      std::uint64_t index = 0, count = 0;
      try {
        index = std::stoull(parts[2]);
        count = std::stoull(parts[3]);
      } catch (const std::exception&) {
        throw DataError(where + ": malformed index or count");
      }
      if (parts[1] == kUnknownToken) {
        if (!fields.empty()) offset += static_cast<std::uint32_t>(fields.back().size());
        if (index != offset) throw DataError(where + ": field offset " + std::to_string(index) + " != " + std::to_string(offset));
        fields.emplace_back(parts[0]);
        schema.fields.push_back(parts[0]);
        continue;
      }
      if (fields.empty() || fields.back().name() != parts[0]) throw DataError(where + ": token before its field header");
      if (index < offset) throw DataError(where + ": index below field offset");
      fields.back().restore(parts[1], count, static_cast<std::uint32_t>(index - offset));
    }
    schema.numeric.assign(schema.fields.size(), false);
    for (const auto& name : numeric_fields) {
      auto it = std::find(schema.fields.begin(), schema.fields.end(), name);
      if (it == schema.fields.end()) throw DataError(source + ": numeric field '" + name + "' not in vocabulary");
      schema.numeric[static_cast<std::size_t>(it - schema.fields.begin())] = true;
    }
    return Vocabulary(std::move(schema), std::move(fields));
  }

 private:
  void recompute_offsets() {
    offsets_.clear();
    std::uint32_t off = 0;
    for (const auto& fv : fields_) {
      offsets_.push_back(off);
      off += static_cast<std::uint32_t>(fv.size());
    }
    total_ = off;
  }

  Schema schema_;
  std::vector<FieldVocab> fields_;
  std::vector<std::uint32_t> offsets_;
  std::size_t total_ = 0;
};

/**
 * Count tokens over `records` of `table` (the training portion) and fold every
 * token seen fewer than `min_count` times into its field's unknown slot.
 */
inline Vocabulary build_vocab(const RawTable& table, const std::vector<std::size_t>& records, const Schema& schema,
                              std::size_t min_count) {
  if (min_count < 1) throw UsageError("min_feature_count must be >= 1");
  std::vector<FieldVocab> fields;
  fields.reserve(schema.fields.size());
  for (const auto& name : schema.fields) fields.emplace_back(name);
  for (auto r : records) {
    for (std::size_t f = 0; f < fields.size(); ++f) fields[f].count(schema.token(f, table.cell(r, f), r));
  }
  for (auto& fv : fields) fv.freeze(min_count);
  return Vocabulary(schema, std::move(fields));
}

inline Vocabulary build_vocab(const RawTable& table, const Schema& schema, std::size_t min_count) {
  std::vector<std::size_t> all(table.num_records());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return build_vocab(table, all, schema, min_count);
}

/// One labelled record as f global feature indices.
struct Instance {
  std::uint8_t label = 0;
  std::vector<std::uint32_t> features;
};

/// Encoded instances in flat row-major storage (record r occupies features[r*f, (r+1)*f)).
struct Dataset {
  std::size_t num_fields = 0;
  std::size_t num_features = 0;
  std::vector<std::uint32_t> features;
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }

  Instance instance(std::size_t i) const {
    return {labels[i], {features.begin() + static_cast<std::ptrdiff_t>(i * num_fields),
                        features.begin() + static_cast<std::ptrdiff_t>((i + 1) * num_fields)}};
  }

  void push_back(const Instance& inst) {
    if (inst.features.size() != num_fields) {
      throw DataError("instance has " + std::to_string(inst.features.size()) + " features, expected " +
                      std::to_string(num_fields));
    }
    if (inst.label > 1) throw DataError("label must be 0 or 1");
    for (auto idx : inst.features) {
      if (idx >= num_features) throw DataError("feature index " + std::to_string(idx) + " out of range");
    }
    labels.push_back(inst.label);
    features.insert(features.end(), inst.features.begin(), inst.features.end());
  }

  Dataset subset(const std::vector<std::size_t>& rows) const {
    Dataset out{num_fields, num_features, {}, {}};
    out.features.reserve(rows.size() * num_fields);
    out.labels.reserve(rows.size());
    for (auto r : rows) {
      out.labels.push_back(labels[r]);
      out.features.insert(out.features.end(), features.begin() + static_cast<std::ptrdiff_t>(r * num_fields),
                          features.begin() + static_cast<std::ptrdiff_t>((r + 1) * num_fields));
    }
    return out;
  }
};

inline Instance encode(const RawTable& table, std::size_t record, const Vocabulary& vocab) {
  if (table.fields != vocab.schema().fields) {
    throw DataError(table.source + ": columns do not match the vocabulary's fields");
  }
  Instance inst;
  inst.label = table.labels[record];
  inst.features.resize(vocab.num_fields());
  for (std::size_t f = 0; f < vocab.num_fields(); ++f) {
    inst.features[f] = vocab.global_index(f, vocab.schema().token(f, table.cell(record, f), record));
  }
  return inst;
}

inline Dataset encode(const RawTable& table, const std::vector<std::size_t>& records, const Vocabulary& vocab) {
  Dataset ds{vocab.num_fields(), vocab.num_features(), {}, {}};
  ds.labels.reserve(records.size());
  ds.features.reserve(records.size() * vocab.num_fields());
  for (auto r : records) ds.push_back(encode(table, r, vocab));
  return ds;
}

inline Dataset encode(const RawTable& table, const Vocabulary& vocab) {
  std::vector<std::size_t> all(table.num_records());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return encode(table, all, vocab);
}

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/**
 * Seeded shuffle of [0, n) cut at ceil(n * cumulative_ratio / total), so a
 * 7:2:1 split of 288,609 rows gives 202,027 / 57,722 / 28,860.
 */
inline SplitIndices split_by_ratio(std::size_t n, const std::vector<std::size_t>& ratios, std::uint64_t seed) {
  if (ratios.size() != 3) throw UsageError("split needs three ratios (train:val:test)");
  const std::size_t total = ratios[0] + ratios[1] + ratios[2];
  if (total == 0 || ratios[0] == 0) throw UsageError("split ratios must have a positive train part");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto cut = [&](std::size_t cum) { return (n * cum + total - 1) / total; };
  const std::size_t a = cut(ratios[0]);
  const std::size_t b = cut(ratios[0] + ratios[1]);
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(a));
  out.val.assign(order.begin() + static_cast<std::ptrdiff_t>(a), order.begin() + static_cast<std::ptrdiff_t>(b));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(b), order.end());
  return out;
}

inline std::vector<std::size_t> parse_ratios(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoul(part, &used));
      if (used != part.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError("bad split ratio '" + text + "', expected e.g. 7:2:1");
    }
  }
  if (out.size() != 3) throw UsageError("bad split ratio '" + text + "', expected e.g. 7:2:1");
  return out;
}

/// Vocabulary plus the three encoded partitions.
struct PreparedData {
  Vocabulary vocab;
  Dataset train, val, test;
};

/// Single file split by ratio; the vocabulary sees the training rows only.
inline PreparedData prepare_from_single(const RawTable& table, const std::vector<std::string>& numeric_fields,
                                        const std::vector<std::size_t>& ratios, std::uint64_t seed,
                                        std::size_t min_count) {
  const auto schema = Schema::from_table(table, numeric_fields);
  const auto split = split_by_ratio(table.num_records(), ratios, seed);
  PreparedData out;
  out.vocab = build_vocab(table, split.train, schema, min_count);
  out.train = encode(table, split.train, out.vocab);
  out.val = encode(table, split.val, out.vocab);
  out.test = encode(table, split.test, out.vocab);
  return out;
}

/// Explicit train/val/test files, used as given without shuffling.
inline PreparedData prepare_from_files(const RawTable& train, const RawTable& val, const RawTable& test,
                                       const std::vector<std::string>& numeric_fields, std::size_t min_count) {
  for (const RawTable* t : {&val, &test}) {
    if (t->fields != train.fields) throw DataError(t->source + ": columns differ from " + train.source);
  }
  const auto schema = Schema::from_table(train, numeric_fields);
  PreparedData out;
  out.vocab = build_vocab(train, schema, min_count);
  out.train = encode(train, out.vocab);
  out.val = encode(val, out.vocab);
  out.test = encode(test, out.vocab);
  return out;
}

}  // namespace frnet::data
