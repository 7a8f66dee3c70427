/*
 * Copyright 2026 The redist Authors.
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

/*!@file
 * Ingestion of embedding matrices, group labels, group tables and prompt
 * heads.
 *
 * Two matrix encodings are understood:
 *  - EMB1: little-endian, magic "EMB1", u32 n, u32 d, then n*d float32 in
 *    row-major order. Reading and writing are bit-exact.
 *  - CSV: one row per line, comma-separated decimals. Selected by a ".csv" or
 *    ".txt" extension; every other path must be EMB1.
 *
 * Everything is upcast to double on load and normalized in double.
 */

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "redist/error.hpp"
#include "redist/linalg.hpp"

namespace redist {

/// Ordered set of demographic groups plus the group to be forgotten.
class GroupTable {
 public:
  GroupTable() = default;

  GroupTable(std::vector<std::string> names, int forget_index)
      : names_(std::move(names)), forget_(forget_index) {
    if (names_.empty()) throw ValidationError("group table has no groups");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) {
        throw ValidationError("group " + std::to_string(i) + " has an empty name");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (names_[i] == names_[j]) {
          throw ValidationError("duplicate group name '" + names_[i] + "'");
        }
      }
    }
    if (forget_ < 0 || forget_ >= size()) {
      throw IndexError("forget index " + std::to_string(forget_) +
                       " outside [0, " + std::to_string(size()) + ")");
    }
  }

  static GroupTable from_names(std::vector<std::string> names,
                               std::string_view forget) {
    const auto it = std::find(names.begin(), names.end(), forget);
    if (it == names.end()) {
      throw ValidationError("forget group '" + std::string(forget) +
                            "' is not in the group table");
    }
    const int index = static_cast<int>(it - names.begin());
    return GroupTable(std::move(names), index);
  }

  /// Names G0..G{k-1} with group 0 as the forget target.
  static GroupTable numbered(int k, int forget_index = 0) {
    std::vector<std::string> names;
    for (int i = 0; i < k; ++i) names.push_back("G" + std::to_string(i));
    return GroupTable(std::move(names), forget_index);
  }

  int size() const { return static_cast<int>(names_.size()); }
  int forget_index() const { return forget_; }
  const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& names() const { return names_; }

  std::optional<int> index_of(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<int>(it - names_.begin());
  }

  bool valid_index(int index) const { return index >= 0 && index < size(); }

  /// Same groups, different forget target.
  GroupTable with_forget(int forget_index) const { return GroupTable(names_, forget_index); }

  friend bool operator==(const GroupTable&, const GroupTable&) = default;

 private:
  std::vector<std::string> names_;
  int forget_ = 0;
};

/// The canonical four intersectional groups, forgetting Young Female.
inline GroupTable standard_group_table() {
  return GroupTable({"Young Female", "Young Male", "Old Female", "Old Male"}, 0);
}

/// Row-normalized image embeddings with one group label per row.
struct EmbeddingDataset {
  Matrix embeddings;
  std::vector<int> labels;
  GroupTable groups;
  std::vector<std::string> warnings;

  int dim() const { return static_cast<int>(embeddings.cols()); }
  std::size_t size() const { return labels.size(); }
  int num_groups() const { return groups.size(); }
};

/// Row-normalized prompt embeddings, one row per group. All-zero rows are
/// inactive classes.
struct PromptHead {
  Matrix weights;
  GroupTable groups;

  int dim() const { return static_cast<int>(weights.cols()); }
  int num_classes() const { return static_cast<int>(weights.rows()); }
};

inline constexpr std::array<char, 4> kEmb1Magic = {'E', 'M', 'B', '1'};
inline constexpr double kLoadNormTolerance = 1e-5;

namespace detail {

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline std::uint32_t load_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void store_u32_le(std::uint32_t v, std::string& out) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xFFu));
  }
}

inline std::string_view trim(std::string_view s) {
  const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r' && c != '\n'; };
  while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    const std::size_t stop = end == std::string_view::npos ? text.size() : end;
    lines.push_back(text.substr(start, stop - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return lines;
}

inline bool has_csv_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".csv" || ext == ".txt";
}

inline double parse_double(std::string_view field, std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw FormatError("line " + std::to_string(line) + ": cannot parse '" +
                      std::string(field) + "' as a number");
  }
  return value;
}

inline void check_finite(const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j))) {
        throw DataError("non-finite value at row " + std::to_string(i) + ", column " +
                        std::to_string(j));
      }
    }
  }
}

}  // namespace detail

/// Decodes an in-memory EMB1 image.
inline Matrix parse_emb1(const std::vector<unsigned char>& bytes) {
  constexpr std::size_t kHeader = 12;
  if (bytes.size() < kHeader) throw FormatError("EMB1 header truncated");
  if (!std::equal(kEmb1Magic.begin(), kEmb1Magic.end(), bytes.begin(),
                  [](char a, unsigned char b) { return static_cast<unsigned char>(a) == b; })) {
    throw FormatError("bad magic, expected \"EMB1\"");
  }
  const std::uint64_t n = detail::load_u32_le(bytes.data() + 4);
  const std::uint64_t d = detail::load_u32_le(bytes.data() + 8);
  if (d == 0) throw FormatError("EMB1 header declares zero columns");
  const std::uint64_t expected = kHeader + n * d * 4;
  if (bytes.size() < expected) {
    throw FormatError("EMB1 payload truncated: expected " + std::to_string(expected) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw FormatError("EMB1 payload has " + std::to_string(bytes.size() - expected) +
                      " trailing bytes");
  }
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const unsigned char* p = bytes.data() + kHeader;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j, p += 4) {
      m(i, j) = static_cast<double>(std::bit_cast<float>(detail::load_u32_le(p)));
    }
  }
  detail::check_finite(m);
  return m;
}

/// Parses comma-separated rows; blank lines are skipped.
inline Matrix parse_csv_matrix(std::string_view text) {
  std::vector<std::vector<double>> rows;
  const auto lines = detail::split_lines(text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string_view line = detail::trim(lines[ln]);
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      row.push_back(detail::parse_double(line.substr(start, comma - start), ln + 1));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError("line " + std::to_string(ln + 1) + " has " + std::to_string(row.size()) +
                        " columns, expected " + std::to_string(rows.front().size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError("CSV matrix is empty");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  detail::check_finite(m);
  return m;
}

inline Matrix load_embeddings(const std::filesystem::path& path) {
  if (detail::has_csv_extension(path)) return parse_csv_matrix(detail::read_text(path));
  return parse_emb1(detail::read_bytes(path));
}

inline std::string encode_emb1(const Matrix& m) {
  std::string out(kEmb1Magic.begin(), kEmb1Magic.end());
  detail::store_u32_le(static_cast<std::uint32_t>(m.rows()), out);
  detail::store_u32_le(static_cast<std::uint32_t>(m.cols()), out);
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 4);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      detail::store_u32_le(std::bit_cast<std::uint32_t>(static_cast<float>(m(i, j))), out);
    }
  }
  return out;
}

/// Writes float32 EMB1. Values loaded from EMB1 survive a round trip exactly.
inline void write_embeddings(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  const std::string bytes = encode_emb1(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ValidationError("write to '" + path.string() + "' failed");
}

/// Scales every row to unit Euclidean norm.
inline Matrix normalize_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = detail::ordered_norm(m.row(i));
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw DegenerateEmbeddingError(static_cast<std::size_t>(i), "cannot normalize zero row");
    }
    if (detail::is_unit(norm)) {
      out.row(i) = m.row(i);
    } else {
      out.row(i) = m.row(i) / norm;
    }
  }
  return out;
}

/// Reads "index,group" label rows, returning group names ordered by index.
inline std::vector<std::string> parse_labels_csv(std::string_view text) {
  const auto lines = detail::split_lines(text);
  std::size_t ln = 0;
  while (ln < lines.size() && detail::trim(lines[ln]).empty()) ++ln;
  if (ln == lines.size() || detail::trim(lines[ln]) != "index,group") {
    throw FormatError("labels file must start with header \"index,group\"");
  }
  std::vector<std::pair<long long, std::string>> entries;
  for (++ln; ln < lines.size(); ++ln) {
    const std::string_view line = detail::trim(lines[ln]);
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string_view::npos) {
      throw FormatError("labels line " + std::to_string(ln + 1) + " lacks a comma");
    }
    const std::string_view idx = detail::trim(line.substr(0, comma));
    long long index = 0;
    const auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), index);
    if (idx.empty() || ec != std::errc() || ptr != idx.data() + idx.size()) {
      throw FormatError("labels line " + std::to_string(ln + 1) + ": bad index '" +
                        std::string(idx) + "'");
    }
    entries.emplace_back(index, std::string(detail::trim(line.substr(comma + 1))));
  }
  std::vector<std::string> names(entries.size());
  std::vector<bool> seen(entries.size(), false);
  for (const auto& [index, name] : entries) {
    if (index < 0 || static_cast<std::size_t>(index) >= entries.size()) {
      throw DataError("label index " + std::to_string(index) + " outside [0, " +
                      std::to_string(entries.size()) + ")");
    }
    const auto slot = static_cast<std::size_t>(index);
    if (seen[slot]) throw DataError("duplicate label index " + std::to_string(index));
    seen[slot] = true;
    names[slot] = name;
  }
  return names;
}

inline std::vector<std::string> load_labels(const std::filesystem::path& path) {
  return parse_labels_csv(detail::read_text(path));
}

inline std::string encode_labels_csv(const std::vector<int>& labels, const GroupTable& groups) {
  std::string out = "index,group\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(i) + "," + groups.name(labels[i]) + "\n";
  }
  return out;
}

inline void write_labels(const std::filesystem::path& path, const std::vector<int>& labels,
                         const GroupTable& groups) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << encode_labels_csv(labels, groups);
}

inline GroupTable group_table_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("groups") || !j["groups"].is_array()) {
    throw FormatError("group manifest needs a \"groups\" array");
  }
  std::vector<std::string> names;
  for (const auto& g : j["groups"]) {
    if (!g.is_string()) throw FormatError("group names must be strings");
    names.push_back(g.get<std::string>());
  }
  if (!j.contains("forget") || !j["forget"].is_string()) {
    throw FormatError("group manifest needs a \"forget\" string");
  }
  return GroupTable::from_names(std::move(names), j["forget"].get<std::string>());
}

inline nlohmann::json group_table_to_json(const GroupTable& table) {
  return {{"groups", table.names()}, {"forget", table.name(table.forget_index())}};
}

inline GroupTable load_group_table(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("group manifest '" + path.string() + "': " + e.what());
  }
  return group_table_from_json(j);
}

/// Builds a validated, normalized dataset from a raw matrix and label names.
inline EmbeddingDataset assemble_dataset(const Matrix& raw,
                                         const std::vector<std::string>& label_names,
                                         const GroupTable& groups) {
  if (static_cast<std::size_t>(raw.rows()) != label_names.size()) {
    throw DataError("embedding rows (" + std::to_string(raw.rows()) +
                    ") do not match label count (" + std::to_string(label_names.size()) + ")");
  }
  if (raw.rows() < 1) throw DataError("dataset has no samples");
  if (raw.cols() < 2) throw DataError("embedding dimension must be at least 2");
  detail::check_finite(raw);

  EmbeddingDataset ds;
  ds.groups = groups;
  ds.labels.reserve(label_names.size());
  for (std::size_t i = 0; i < label_names.size(); ++i) {
    const auto index = groups.index_of(label_names[i]);
    if (!index) {
      throw DataError("row " + std::to_string(i) + ": unknown group '" + label_names[i] + "'");
    }
    ds.labels.push_back(*index);
  }

  std::size_t off_unit = 0;
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    if (std::abs(detail::ordered_norm(raw.row(i)) - 1.0) > kLoadNormTolerance) ++off_unit;
  }
  if (off_unit > 0) {
    ds.warnings.push_back(std::to_string(off_unit) +
                          " input rows were not unit norm and have been normalized");
  }
  ds.embeddings = normalize_rows(raw);

  std::vector<std::size_t> counts(static_cast<std::size_t>(groups.size()), 0);
  for (int label : ds.labels) ++counts[static_cast<std::size_t>(label)];
  for (int k = 0; k < groups.size(); ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      ds.warnings.push_back("group '" + groups.name(k) + "' has no samples");
    }
  }
  return ds;
}

/// Same as above with integer labels.
inline EmbeddingDataset assemble_dataset(const Matrix& raw, const std::vector<int>& labels,
                                         const GroupTable& groups) {
  std::vector<std::string> names;
  names.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!groups.valid_index(labels[i])) {
      throw DataError("row " + std::to_string(i) + ": label " + std::to_string(labels[i]) +
                      " is not a group index");
    }
    names.push_back(groups.name(labels[i]));
  }
  return assemble_dataset(raw, names, groups);
}

inline EmbeddingDataset assemble_dataset(const Matrix& raw,
                                         const std::filesystem::path& labels_path,
                                         const GroupTable& groups) {
  return assemble_dataset(raw, load_labels(labels_path), groups);
}

inline std::vector<std::size_t> group_counts(const EmbeddingDataset& ds) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(ds.num_groups()), 0);
  for (int label : ds.labels) ++counts[static_cast<std::size_t>(label)];
  return counts;
}

/// Validates a head matrix: one row per group, each row either all zero
/// (inactive) or unit norm within the load tolerance.
inline PromptHead make_head(const Matrix& weights, const GroupTable& groups) {
  if (weights.rows() != groups.size()) {
    throw DimensionError("head has " + std::to_string(weights.rows()) + " rows but there are " +
                         std::to_string(groups.size()) + " groups");
  }
  if (weights.cols() < 2) throw DimensionError("head dimension must be at least 2");
  detail::check_finite(weights);
  PromptHead head{weights, groups};
  for (Eigen::Index k = 0; k < weights.rows(); ++k) {
    const double norm = detail::ordered_norm(weights.row(k));
    if (norm == 0.0) continue;
    if (std::abs(norm - 1.0) > kLoadNormTolerance) {
      throw DataError("head row " + std::to_string(k) + " has norm " + std::to_string(norm) +
                      ", expected unit norm");
    }
    head.weights.row(k) /= norm;
  }
  return head;
}

inline PromptHead load_head(const std::filesystem::path& path, const GroupTable& groups) {
  return make_head(load_embeddings(path), groups);
}

}  // namespace redist
