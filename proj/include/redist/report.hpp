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
 * JSON and CSV encodings of audit, geometry and sweep reports.
 *
 * JSON doubles use the shortest representation that parses back to the same
 * value (never more than 17 significant digits); undefined values are null.
 * CSV doubles are printed with %.17g and undefined values as "nan".
 * Every JSON document carries "schema_version": "1".
 */

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "redist/embedding_store.hpp"
#include "redist/error.hpp"
#include "redist/geometry.hpp"
#include "redist/linalg.hpp"
#include "redist/metrics.hpp"
#include "redist/sweep.hpp"
#include "redist/unlearning.hpp"

namespace redist {

inline constexpr const char* kSchemaVersion = "1";

namespace detail {

inline nlohmann::json number(double x) {
  if (!is_defined(x)) return nullptr;
  return x;
}

inline double number_from(const nlohmann::json& j) {
  return j.is_null() ? kUndefined : j.get<double>();
}

inline nlohmann::json numbers(const std::vector<double>& xs) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : xs) out.push_back(number(x));
  return out;
}

template <typename Row>
nlohmann::json row_numbers(const Row& row) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index j = 0; j < row.size(); ++j) out.push_back(number(row[j]));
  return out;
}

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(row_numbers(m.row(i)));
  return out;
}

inline std::vector<double> numbers_from(const nlohmann::json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(number_from(x));
  return out;
}

}  // namespace detail

/// %.17g, or "nan" for undefined values.
inline std::string format_double(double x) {
  if (!is_defined(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ValidationError("write to '" + path.string() + "' failed");
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// ---- audit -----------------------------------------------------------------

inline nlohmann::json audit_to_json(const AuditReport& r) {
  std::vector<bool> flags(r.flags.begin(), r.flags.end());
  return {{"schema_version", kSchemaVersion},
          {"model", r.model},
          {"method", r.method},
          {"groups", r.groups.names()},
          {"forget", r.groups.name(r.forget)},
          {"forget_index", r.forget},
          {"epsilon", detail::number(r.epsilon)},
          {"fa", detail::number(r.fa)},
          {"ra", detail::number(r.ra)},
          {"dp_before", detail::number(r.dp_before)},
          {"dp_after", detail::number(r.dp_after)},
          {"rs", detail::number(r.rs)},
          {"per_group_acc_before", detail::numbers(r.per_group_acc_before)},
          {"per_group_acc_after", detail::numbers(r.per_group_acc_after)},
          {"delta_acc", detail::numbers(r.delta_acc)},
          {"flags", flags},
          {"warnings", r.warnings}};
}

inline AuditReport audit_from_json(const nlohmann::json& j) {
  try {
    AuditReport r;
    r.model = j.at("model").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.forget = j.at("forget_index").get<int>();
    r.groups = GroupTable(j.at("groups").get<std::vector<std::string>>(), r.forget);
    r.epsilon = detail::number_from(j.at("epsilon"));
    r.fa = detail::number_from(j.at("fa"));
    r.ra = detail::number_from(j.at("ra"));
    r.dp_before = detail::number_from(j.at("dp_before"));
    r.dp_after = detail::number_from(j.at("dp_after"));
    r.rs = detail::number_from(j.at("rs"));
    r.per_group_acc_before = detail::numbers_from(j.at("per_group_acc_before"));
    r.per_group_acc_after = detail::numbers_from(j.at("per_group_acc_after"));
    r.delta_acc = detail::numbers_from(j.at("delta_acc"));
    for (const auto& f : j.at("flags")) r.flags.push_back(f.get<bool>());
    r.warnings = j.value("warnings", std::vector<std::string>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("audit report: ") + e.what());
  }
}

/// Column order: model, method, fa, ra, dp_before, dp_after, rs, then one
/// delta_acc column per group by index.
inline std::string audit_csv_header(const GroupTable& groups) {
  std::string h = "model,method,fa,ra,dp_before,dp_after,rs";
  for (const auto& name : groups.names()) h += ",delta_acc_" + name;
  return h;
}

inline std::string audit_csv_row(const AuditReport& r) {
  std::string row = r.model + "," + r.method;
  for (double x : {r.fa, r.ra, r.dp_before, r.dp_after, r.rs}) row += "," + format_double(x);
  for (double d : r.delta_acc) row += "," + format_double(d);
  return row;
}

inline std::string audit_to_csv(const AuditReport& r) {
  return audit_csv_header(r.groups) + "\n" + audit_csv_row(r) + "\n";
}

// ---- geometry --------------------------------------------------------------

inline nlohmann::json geometry_to_json(const GeometryReport& g) {
  return {{"schema_version", kSchemaVersion},
          {"groups", g.groups.names()},
          {"forget", g.groups.name(g.groups.forget_index())},
          {"forget_index", g.groups.forget_index()},
          {"samples_used", g.samples_used},
          {"group_means", detail::matrix_json(g.group_means)},
          {"cosine_matrix", detail::matrix_json(g.cosine_matrix)},
          {"collinearity", detail::number(g.collinearity)},
          {"predicted_target", g.groups.name(g.predicted_target)},
          {"predicted_target_index", g.predicted_target}};
}

/// Square table with group names as header row and first column.
inline std::string cosine_matrix_csv(const Matrix& cos, const GroupTable& groups) {
  std::string out = "group";
  for (const auto& name : groups.names()) out += "," + name;
  out += "\n";
  for (Eigen::Index i = 0; i < cos.rows(); ++i) {
    out += groups.name(static_cast<int>(i));
    for (Eigen::Index j = 0; j < cos.cols(); ++j) out += "," + format_double(cos(i, j));
    out += "\n";
  }
  return out;
}

// ---- sweep -----------------------------------------------------------------

inline std::string sweep_to_csv(const SweepResult& s) {
  std::vector<bool> on_front(s.points.size(), false);
  for (std::size_t i : s.pareto) on_front[i] = true;
  std::string out = "lambda,fa,ra,dp,rs,pareto\n";
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const auto& p = s.points[i];
    out += format_double(p.lambda) + "," + format_double(p.fa) + "," + format_double(p.ra) + "," +
           format_double(p.dp) + "," + format_double(p.rs) + "," + (on_front[i] ? "1" : "0") + "\n";
  }
  return out;
}

inline nlohmann::json sweep_to_json(const SweepResult& s) {
  std::vector<bool> on_front(s.points.size(), false);
  for (std::size_t i : s.pareto) on_front[i] = true;
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const auto& p = s.points[i];
    points.push_back({{"lambda", detail::number(p.lambda)},
                      {"fa", detail::number(p.fa)},
                      {"ra", detail::number(p.ra)},
                      {"dp", detail::number(p.dp)},
                      {"rs", detail::number(p.rs)},
                      {"pareto", static_cast<bool>(on_front[i])}});
  }
  return {{"schema_version", kSchemaVersion},
          {"points", points},
          {"pareto", s.pareto},
          {"direction", detail::row_numbers(s.direction)}};
}

// ---- projector -------------------------------------------------------------

inline nlohmann::json projector_to_json(const Projector& p, bool project_head) {
  return {{"schema_version", kSchemaVersion},
          {"direction", detail::row_numbers(p.direction)},
          {"lambda", p.strength},
          {"project_head", project_head}};
}

inline Projector projector_from_json(const nlohmann::json& j) {
  try {
    const auto v = j.at("direction").get<std::vector<double>>();
    Projector p;
    p.direction = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    p.strength = j.at("lambda").get<double>();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("projector: ") + e.what());
  }
}

}  // namespace redist
