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
 * Group-mean geometry of an embedding dataset.
 *
 * Means are arithmetic means of the normalized rows and are never
 * renormalized here; the forget/retain pair below is the one definition used
 * both by the audit and by the refusal direction fit.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "redist/embedding_store.hpp"
#include "redist/error.hpp"
#include "redist/linalg.hpp"

namespace redist {

/// How the retained mean is formed.
struct MeanOptions {
  /// Average of retained group means instead of the pooled sample mean.
  bool balanced_retain = false;
  /// Scale both means to unit norm before they are used.
  bool renormalize = false;
};

struct ForgetRetainMeans {
  Vector forget;
  Vector retain;
};

/// K x d matrix of group means; rows of empty groups are kUndefined.
inline Matrix group_means(const EmbeddingDataset& ds) {
  const int k_count = ds.num_groups();
  Matrix sums = Matrix::Zero(k_count, ds.dim());
  std::vector<std::size_t> counts(static_cast<std::size_t>(k_count), 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    sums.row(ds.labels[i]) += ds.embeddings.row(static_cast<Eigen::Index>(i));
    ++counts[static_cast<std::size_t>(ds.labels[i])];
  }
  for (int k = 0; k < k_count; ++k) {
    const auto c = counts[static_cast<std::size_t>(k)];
    if (c == 0) {
      sums.row(k).setConstant(kUndefined);
    } else {
      sums.row(k) /= static_cast<double>(c);
    }
  }
  return sums;
}

/// Keeps at most `cap` samples per group, in original row order.
inline EmbeddingDataset cap_per_group(const EmbeddingDataset& ds, std::size_t cap) {
  std::vector<std::size_t> taken(static_cast<std::size_t>(ds.num_groups()), 0);
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto& t = taken[static_cast<std::size_t>(ds.labels[i])];
    if (t < cap) {
      ++t;
      rows.push_back(static_cast<Eigen::Index>(i));
    }
  }
  EmbeddingDataset out;
  out.groups = ds.groups;
  out.warnings = ds.warnings;
  out.embeddings.resize(static_cast<Eigen::Index>(rows.size()), ds.embeddings.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.embeddings.row(static_cast<Eigen::Index>(r)) = ds.embeddings.row(rows[r]);
    out.labels.push_back(ds.labels[static_cast<std::size_t>(rows[r])]);
  }
  return out;
}

inline ForgetRetainMeans forget_retain_means(const EmbeddingDataset& ds, int forget,
                                             const MeanOptions& options = {}) {
  if (!ds.groups.valid_index(forget)) {
    throw IndexError("forget index " + std::to_string(forget) + " out of range");
  }
  Vector forget_sum = Vector::Zero(ds.dim());
  Vector retain_sum = Vector::Zero(ds.dim());
  std::size_t forget_count = 0;
  std::size_t retain_count = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto row = ds.embeddings.row(static_cast<Eigen::Index>(i)).transpose();
    if (ds.labels[i] == forget) {
      forget_sum += row;
      ++forget_count;
    } else {
      retain_sum += row;
      ++retain_count;
    }
  }
  if (forget_count == 0) throw DataError("forget group has no samples");
  if (retain_count == 0) throw DataError("retained groups have no samples");

  ForgetRetainMeans means{forget_sum / static_cast<double>(forget_count),
                          retain_sum / static_cast<double>(retain_count)};
  if (options.balanced_retain) {
    const Matrix all = group_means(ds);
    Vector acc = Vector::Zero(ds.dim());
    int defined = 0;
    for (int k = 0; k < ds.num_groups(); ++k) {
      if (k == forget || !is_defined(all(k, 0))) continue;
      acc += all.row(k).transpose();
      ++defined;
    }
    means.retain = acc / static_cast<double>(defined);
  }
  if (options.renormalize) {
    for (Vector* v : {&means.forget, &means.retain}) {
      const double norm = detail::ordered_norm(*v);
      if (norm == 0.0) throw DegenerateDirectionError("mean embedding has zero norm");
      *v /= norm;
    }
  }
  return means;
}

namespace detail {

inline double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const double na = ordered_norm(a);
  const double nb = ordered_norm(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateDirectionError("cosine of a zero-norm vector");
  return std::clamp(ordered_dot(a, b) / (na * nb), -1.0, 1.0);
}

}  // namespace detail

/// K x K cosine matrix. Pairs touching an undefined mean are kUndefined.
inline Matrix pairwise_cosines(const Matrix& means) {
  const Eigen::Index k_count = means.rows();
  Matrix cos = Matrix::Constant(k_count, k_count, kUndefined);
  std::vector<bool> defined(static_cast<std::size_t>(k_count));
  for (Eigen::Index i = 0; i < k_count; ++i) {
    defined[static_cast<std::size_t>(i)] = means.row(i).allFinite();
    if (defined[static_cast<std::size_t>(i)] && detail::ordered_norm(means.row(i)) == 0.0) {
      throw DegenerateDirectionError("group mean " + std::to_string(i) + " has zero norm");
    }
  }
  for (Eigen::Index i = 0; i < k_count; ++i) {
    if (!defined[static_cast<std::size_t>(i)]) continue;
    cos(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < k_count; ++j) {
      if (!defined[static_cast<std::size_t>(j)]) continue;
      cos(i, j) = detail::cosine(means.row(i).transpose(), means.row(j).transpose());
      cos(j, i) = cos(i, j);
    }
  }
  return cos;
}

/// cos(forget mean, retained mean) under the same pooling as the refusal fit.
inline double collinearity(const EmbeddingDataset& ds, int forget,
                           const MeanOptions& options = {}) {
  const auto means = forget_retain_means(ds, forget, options);
  return detail::cosine(means.forget, means.retain);
}

/// Retained group whose mean is most cosine-similar to the forget mean.
inline int predict_redistribution_target(const Matrix& means, int forget) {
  if (forget < 0 || forget >= means.rows()) {
    throw IndexError("forget index " + std::to_string(forget) + " out of range");
  }
  if (!means.row(forget).allFinite()) throw DataError("forget group mean is undefined");
  int best = -1;
  double best_cos = 0.0;
  for (Eigen::Index k = 0; k < means.rows(); ++k) {
    if (k == forget || !means.row(k).allFinite()) continue;
    const double c = detail::cosine(means.row(forget).transpose(), means.row(k).transpose());
    if (best < 0 || c > best_cos) {
      best = static_cast<int>(k);
      best_cos = c;
    }
  }
  if (best < 0) throw DataError("no retained group mean is defined");
  return best;
}

struct GeometryReport {
  GroupTable groups;
  Matrix group_means;
  Matrix cosine_matrix;
  double collinearity = kUndefined;
  int predicted_target = -1;
  std::size_t samples_used = 0;
};

struct GeometryOptions {
  MeanOptions means;
  std::size_t per_group_cap = 0;  // 0 keeps every sample
};

inline GeometryReport geometry_report(const EmbeddingDataset& full,
                                      const GeometryOptions& options = {}) {
  const EmbeddingDataset ds =
      options.per_group_cap > 0 ? cap_per_group(full, options.per_group_cap) : full;
  const int forget = ds.groups.forget_index();
  GeometryReport report;
  report.groups = ds.groups;
  report.samples_used = ds.size();
  report.group_means = group_means(ds);
  report.cosine_matrix = pairwise_cosines(report.group_means);
  report.collinearity = collinearity(ds, forget, options.means);
  report.predicted_target = predict_redistribution_target(report.group_means, forget);
  return report;
}

}  // namespace redist
