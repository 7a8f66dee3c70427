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

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "redist/embedding_store.hpp"
#include "redist/error.hpp"
#include "redist/linalg.hpp"

namespace redist {

/// Which classes may win the argmax. At least one class is always active.
class ActiveMask {
 public:
  explicit ActiveMask(std::vector<bool> active) : active_(std::move(active)) { check(); }

  static ActiveMask all(int k) { return ActiveMask(std::vector<bool>(static_cast<std::size_t>(k), true)); }

  /// Zero rows of the head are inactive.
  static ActiveMask from_head(const PromptHead& head) {
    std::vector<bool> active(static_cast<std::size_t>(head.num_classes()));
    for (int k = 0; k < head.num_classes(); ++k) {
      active[static_cast<std::size_t>(k)] = !head.weights.row(k).isZero(0.0);
    }
    return ActiveMask(std::move(active));
  }

  int size() const { return static_cast<int>(active_.size()); }
  bool active(int k) const { return active_.at(static_cast<std::size_t>(k)); }
  const std::vector<bool>& bits() const { return active_; }

  ActiveMask without(int k) const {
    if (k < 0 || k >= size()) throw IndexError("class " + std::to_string(k) + " out of range");
    auto bits = active_;
    bits[static_cast<std::size_t>(k)] = false;
    return ActiveMask(std::move(bits));
  }

  friend bool operator==(const ActiveMask&, const ActiveMask&) = default;

 private:
  void check() const {
    for (bool b : active_) {
      if (b) return;
    }
    throw ValidationError("active mask must keep at least one class");
  }

  std::vector<bool> active_;
};

struct PredictionSet {
  std::vector<int> predicted;
  Matrix scores;  // n x K, dot(embedding_i, w_k)
};

/// Zero-shot rule: each row goes to the active class with the largest dot
/// product. Ties resolve to the lowest class index.
inline PredictionSet predict_all(const Matrix& embeddings, const Matrix& head,
                                 const ActiveMask& mask) {
  if (embeddings.cols() != head.cols()) {
    throw DimensionError("embedding dimension " + std::to_string(embeddings.cols()) +
                         " does not match head dimension " + std::to_string(head.cols()));
  }
  if (mask.size() != head.rows()) {
    throw DimensionError("mask has " + std::to_string(mask.size()) + " entries for " +
                         std::to_string(head.rows()) + " classes");
  }
  const Eigen::Index n = embeddings.rows();
  const Eigen::Index k_count = head.rows();
  PredictionSet out;
  out.scores.resize(n, k_count);
  out.predicted.assign(static_cast<std::size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = -1;
    double best_score = 0.0;
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const double s = detail::ordered_dot(embeddings.row(i), head.row(k));
      out.scores(i, k) = s;
      if (!mask.active(static_cast<int>(k))) continue;
      if (best < 0 || s > best_score) {
        best = static_cast<int>(k);
        best_score = s;
      }
    }
    out.predicted[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

inline PredictionSet predict_all(const EmbeddingDataset& ds, const PromptHead& head,
                                 const ActiveMask& mask) {
  return predict_all(ds.embeddings, head.weights, mask);
}

/// Fraction of each group's samples predicted as that group; kUndefined for
/// groups without samples.
inline std::vector<double> per_group_accuracy(const std::vector<int>& predicted,
                                              const std::vector<int>& labels, int num_groups) {
  if (predicted.size() != labels.size()) {
    throw DimensionError("prediction count " + std::to_string(predicted.size()) +
                         " does not match label count " + std::to_string(labels.size()));
  }
  std::vector<std::size_t> total(static_cast<std::size_t>(num_groups), 0);
  std::vector<std::size_t> correct(static_cast<std::size_t>(num_groups), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto g = static_cast<std::size_t>(labels[i]);
    ++total[g];
    if (predicted[i] == labels[i]) ++correct[g];
  }
  std::vector<double> acc(static_cast<std::size_t>(num_groups), kUndefined);
  for (std::size_t g = 0; g < acc.size(); ++g) {
    if (total[g] > 0) acc[g] = static_cast<double>(correct[g]) / static_cast<double>(total[g]);
  }
  return acc;
}

inline std::vector<double> per_group_accuracy(const PredictionSet& predictions,
                                              const EmbeddingDataset& ds) {
  return per_group_accuracy(predictions.predicted, ds.labels, ds.num_groups());
}

}  // namespace redist
