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
 * Forget/retain accuracy, per-group accuracy shift, parity gap and the
 * redistribution score.
 *
 * Accuracies live in [0, 1]. Accuracy shifts and the redistribution score are
 * in percentage points; delta_acc() is the only place that converts.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "redist/classifier.hpp"
#include "redist/embedding_store.hpp"
#include "redist/error.hpp"
#include "redist/linalg.hpp"
#include "redist/unlearning.hpp"

namespace redist {

inline constexpr double kDefaultEpsilon = 2.0;  // percentage points

struct AuditReport {
  std::string model;
  std::string method;
  GroupTable groups;
  int forget = 0;
  std::vector<double> per_group_acc_before;
  std::vector<double> per_group_acc_after;
  double fa = kUndefined;
  double ra = kUndefined;
  std::vector<double> delta_acc;
  double dp_before = kUndefined;
  double dp_after = kUndefined;
  double rs = kUndefined;
  std::vector<bool> flags;
  double epsilon = kDefaultEpsilon;
  std::vector<std::string> warnings;
};

namespace detail {

inline void check_index(std::size_t size, int t) {
  if (t < 0 || static_cast<std::size_t>(t) >= size) {
    throw IndexError("group index " + std::to_string(t) + " outside [0, " +
                     std::to_string(size) + ")");
  }
}

}  // namespace detail

inline double forget_accuracy(const std::vector<double>& acc_after, int t) {
  detail::check_index(acc_after.size(), t);
  return acc_after[static_cast<std::size_t>(t)];
}

/// Unweighted mean over retained groups; undefined entries are skipped and
/// noted in `warnings` when given.
inline double retain_accuracy(const std::vector<double>& acc_after, int t,
                              std::vector<std::string>* warnings = nullptr) {
  detail::check_index(acc_after.size(), t);
  if (acc_after.size() < 2) throw MetricError("retain accuracy needs at least two groups");
  double sum = 0.0;
  int defined = 0;
  for (std::size_t k = 0; k < acc_after.size(); ++k) {
    if (static_cast<int>(k) == t) continue;
    if (!is_defined(acc_after[k])) {
      if (warnings) {
        warnings->push_back("retained group " + std::to_string(k) +
                            " has undefined accuracy; excluded from RA");
      }
      continue;
    }
    sum += acc_after[k];
    ++defined;
  }
  if (defined == 0) throw MetricError("every retained group accuracy is undefined");
  return sum / defined;
}

/// Signed change per group in percentage points.
inline std::vector<double> delta_acc(const std::vector<double>& before,
                                     const std::vector<double>& after) {
  if (before.size() != after.size()) throw DimensionError("accuracy vectors differ in length");
  std::vector<double> d(before.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = (after[k] - before[k]) * 100.0;
  return d;
}

/// max - min over the defined rates, forget group included.
inline double dp_gap(const std::vector<double>& rates) {
  double lo = 0.0;
  double hi = 0.0;
  int defined = 0;
  for (double r : rates) {
    if (!is_defined(r)) continue;
    if (defined == 0) {
      lo = hi = r;
    } else {
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    ++defined;
  }
  if (defined < 2) throw MetricError("parity gap needs at least two defined rates");
  return hi - lo;
}

/// Mean |delta| over retained groups (K - 1 of them when all are defined).
inline double redistribution_score(const std::vector<double>& delta, int t) {
  detail::check_index(delta.size(), t);
  if (delta.size() < 2) throw MetricError("redistribution score needs at least two groups");
  double sum = 0.0;
  int defined = 0;
  for (std::size_t k = 0; k < delta.size(); ++k) {
    if (static_cast<int>(k) == t || !is_defined(delta[k])) continue;
    sum += std::abs(delta[k]);
    ++defined;
  }
  return defined == 0 ? kUndefined : sum / defined;
}

/// flags[k] = |delta[k]| > epsilon for retained k; the forget slot is false.
inline std::vector<bool> redistribution_flags(const std::vector<double>& delta, int t,
                                              double epsilon = kDefaultEpsilon) {
  detail::check_index(delta.size(), t);
  if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be non-negative");
  std::vector<bool> flags(delta.size(), false);
  for (std::size_t k = 0; k < delta.size(); ++k) {
    if (static_cast<int>(k) == t || !is_defined(delta[k])) continue;
    flags[k] = std::abs(delta[k]) > epsilon;
  }
  return flags;
}

/// Assembles every metric from before/after per-group accuracies.
inline AuditReport build_audit(const std::vector<double>& before, const std::vector<double>& after,
                               const GroupTable& groups, int t,
                               double epsilon = kDefaultEpsilon) {
  if (before.size() != static_cast<std::size_t>(groups.size()) || after.size() != before.size()) {
    throw DimensionError("accuracy vectors must have one entry per group");
  }
  AuditReport r;
  r.groups = groups;
  r.forget = t;
  r.epsilon = epsilon;
  r.per_group_acc_before = before;
  r.per_group_acc_after = after;
  r.fa = forget_accuracy(after, t);
  r.ra = retain_accuracy(after, t, &r.warnings);
  r.delta_acc = delta_acc(before, after);
  r.dp_before = dp_gap(before);
  r.dp_after = dp_gap(after);
  r.rs = redistribution_score(r.delta_acc, t);
  r.flags = redistribution_flags(r.delta_acc, t, epsilon);
  return r;
}

/// Runs the baseline and the unlearned classifier over `ds` and audits the
/// difference.
inline AuditReport run_audit(const EmbeddingDataset& ds, const PromptHead& head,
                             const UnlearnResult& result, double epsilon = kDefaultEpsilon) {
  const int t = ds.groups.forget_index();
  const auto before =
      per_group_accuracy(predict_unlearned(ds, identity_result(head)), ds);
  const auto after = per_group_accuracy(predict_unlearned(ds, result), ds);
  AuditReport r = build_audit(before, after, ds.groups, t, epsilon);
  r.warnings.insert(r.warnings.begin(), ds.warnings.begin(), ds.warnings.end());
  return r;
}

/// Recomputes every derived field from the stored accuracies; returns the
/// violated relations (empty when consistent).
inline std::vector<std::string> self_check(const AuditReport& r, double tol = 1e-9) {
  std::vector<std::string> problems;
  const auto near = [tol](double a, double b) {
    return (!is_defined(a) && !is_defined(b)) || std::abs(a - b) <= tol;
  };
  const auto k_count = r.per_group_acc_after.size();
  if (r.per_group_acc_before.size() != k_count || r.delta_acc.size() != k_count ||
      r.flags.size() != k_count || static_cast<std::size_t>(r.groups.size()) != k_count) {
    problems.emplace_back("vector lengths disagree with group count");
    return problems;
  }
  if (!near(r.fa, r.per_group_acc_after[static_cast<std::size_t>(r.forget)])) {
    problems.emplace_back("fa != acc_after[forget]");
  }
  try {
    if (!near(r.ra, retain_accuracy(r.per_group_acc_after, r.forget))) {
      problems.emplace_back("ra != mean retained accuracy");
    }
  } catch (const MetricError&) {
    problems.emplace_back("ra undefined");
  }
  const auto d = delta_acc(r.per_group_acc_before, r.per_group_acc_after);
  for (std::size_t k = 0; k < k_count; ++k) {
    if (!near(d[k], r.delta_acc[k])) problems.push_back("delta_acc[" + std::to_string(k) + "]");
  }
  if (!near(r.rs, redistribution_score(r.delta_acc, r.forget))) {
    problems.emplace_back("rs != mean |delta_acc| over retained groups");
  }
  if (r.flags != redistribution_flags(r.delta_acc, r.forget, r.epsilon)) {
    problems.emplace_back("flags disagree with epsilon threshold");
  }
  try {
    if (!near(r.dp_before, dp_gap(r.per_group_acc_before))) problems.emplace_back("dp_before");
    if (!near(r.dp_after, dp_gap(r.per_group_acc_after))) problems.emplace_back("dp_after");
  } catch (const MetricError&) {
    problems.emplace_back("dp undefined");
  }
  return problems;
}

}  // namespace redist
