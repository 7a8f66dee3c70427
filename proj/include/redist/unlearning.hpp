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
 * Zero-shot unlearning of one group.
 *
 *  - Prompt erasure zeroes the forget row of the head and masks the class.
 *  - Prompt reweighting folds the forget row into every retained row,
 *    weighted by a temperature softmax of the cosines, then erases it.
 *  - The refusal vector is the unit direction from the retained mean to the
 *    forget mean. It is projected out of image embeddings at strength lambda
 *    (and, by default, out of the head rows at the same strength).
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "redist/classifier.hpp"
#include "redist/embedding_store.hpp"
#include "redist/error.hpp"
#include "redist/geometry.hpp"
#include "redist/linalg.hpp"

namespace redist {

enum class Method { kNone, kPromptErasure, kPromptReweighting, kRefusalVector };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::kNone: return "none";
    case Method::kPromptErasure: return "pe";
    case Method::kPromptReweighting: return "pr";
    case Method::kRefusalVector: return "rv";
  }
  return "none";
}

inline Method parse_method(const std::string& s) {
  if (s == "none") return Method::kNone;
  if (s == "pe") return Method::kPromptErasure;
  if (s == "pr") return Method::kPromptReweighting;
  if (s == "rv") return Method::kRefusalVector;
  throw ValidationError("unknown method '" + s + "' (expected none, pe, pr or rv)");
}

/// Image-space projection applied at inference time.
struct Projector {
  Vector direction;  // unit norm
  double strength = 1.0;
};

struct UnlearnResult {
  PromptHead head;
  ActiveMask mask;
  std::optional<Projector> image_projector;
};

struct ReweightParams {
  double alpha = 1.0;
  double tau = 0.07;
};

struct RefusalOptions {
  MeanOptions means;
  bool project_head = true;
};

/// Default refusal strength grid.
inline const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> grid = {0.0, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0};
  return grid;
}

namespace detail {

inline void check_forget(const PromptHead& head, int forget) {
  if (forget < 0 || forget >= head.num_classes()) {
    throw IndexError("forget index " + std::to_string(forget) + " outside [0, " +
                     std::to_string(head.num_classes()) + ")");
  }
}

inline void check_projection(const Vector& v, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("projection strength must be finite and non-negative");
  }
  if (std::abs(ordered_norm(v) - 1.0) > 1e-10) {
    throw ValidationError("projection direction must be unit norm");
  }
}

}  // namespace detail

inline UnlearnResult prompt_erasure(const PromptHead& head, int forget) {
  detail::check_forget(head, forget);
  PromptHead out = head;
  out.weights.row(forget).setZero();
  return {std::move(out), ActiveMask::from_head(head).without(forget), std::nullopt};
}

/// Softmax routing masses s_k over the retained active classes; s is zero at
/// the forget index and at inactive classes.
inline std::vector<double> reweight_masses(const PromptHead& head, int forget, double tau) {
  detail::check_forget(head, forget);
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("tau must be positive");
  if (head.num_classes() < 2) throw ValidationError("reweighting needs at least two classes");
  const ActiveMask mask = ActiveMask::from_head(head);
  if (!mask.active(forget)) throw DataError("forget row is already zero");

  const Vector wt = head.weights.row(forget).transpose();
  std::vector<double> logits(static_cast<std::size_t>(head.num_classes()), 0.0);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < head.num_classes(); ++k) {
    if (k == forget || !mask.active(k)) continue;
    logits[static_cast<std::size_t>(k)] =
        detail::cosine(wt, head.weights.row(k).transpose()) / tau;
    max_logit = std::max(max_logit, logits[static_cast<std::size_t>(k)]);
  }
  if (!std::isfinite(max_logit)) throw DataError("no active retained class to reweight into");

  std::vector<double> s(logits.size(), 0.0);
  double total = 0.0;
  for (int k = 0; k < head.num_classes(); ++k) {
    if (k == forget || !mask.active(k)) continue;
    const auto kk = static_cast<std::size_t>(k);
    s[kk] = std::exp(logits[kk] - max_logit);
    total += s[kk];
  }
  for (double& x : s) x /= total;
  return s;
}

inline UnlearnResult prompt_reweighting(const PromptHead& head, int forget,
                                        const ReweightParams& params = {}) {
  const std::vector<double> s = reweight_masses(head, forget, params.tau);
  const ActiveMask mask = ActiveMask::from_head(head);
  PromptHead out = head;
  const Vector wt = head.weights.row(forget).transpose();
  for (int k = 0; k < head.num_classes(); ++k) {
    if (k == forget || !mask.active(k)) continue;
    const Vector updated =
        head.weights.row(k).transpose() + params.alpha * s[static_cast<std::size_t>(k)] * wt;
    const double norm = detail::ordered_norm(updated);
    if (!(norm > 0.0)) {
      throw DegenerateEmbeddingError(static_cast<std::size_t>(k),
                                     "reweighted head row vanished");
    }
    out.weights.row(k) = updated.transpose() / norm;
  }
  out.weights.row(forget).setZero();
  return {std::move(out), mask.without(forget), std::nullopt};
}

inline constexpr double kDegenerateDirectionTol = 1e-12;

/// v = normalize(mu_f - mu_r).
inline Vector refusal_vector_fit(const EmbeddingDataset& ds, int forget,
                                 const MeanOptions& options = {}) {
  const auto means = forget_retain_means(ds, forget, options);
  const Vector diff = means.forget - means.retain;
  const double norm = detail::ordered_norm(diff);
  if (!(norm > kDegenerateDirectionTol)) {
    throw DegenerateDirectionError("forget and retained means coincide");
  }
  return diff / norm;
}

/// Each row phi becomes normalize(phi - lambda (phi.v) v). lambda = 0 returns
/// the input unchanged.
inline Matrix refusal_vector_apply(const Matrix& rows, const Vector& v, double lambda) {
  if (rows.cols() != v.size()) {
    throw DimensionError("projection direction has dimension " + std::to_string(v.size()) +
                         ", rows have " + std::to_string(rows.cols()));
  }
  detail::check_projection(v, lambda);
  if (lambda == 0.0) return rows;
  Matrix out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double along = detail::ordered_dot(rows.row(i), v);
    const Eigen::RowVectorXd projected = rows.row(i) - (lambda * along) * v.transpose();
    const double norm = detail::ordered_norm(projected);
    if (!(norm > kDegenerateDirectionTol)) {
      throw DegenerateEmbeddingError(static_cast<std::size_t>(i),
                                     "row vanished under projection");
    }
    out.row(i) = projected / norm;
  }
  return out;
}

/// Refusal projection of the head's active rows; zero rows stay zero.
inline PromptHead project_head(const PromptHead& head, const Vector& v, double lambda) {
  PromptHead out = head;
  for (int k = 0; k < head.num_classes(); ++k) {
    if (head.weights.row(k).isZero(0.0)) continue;
    try {
      out.weights.row(k) = refusal_vector_apply(head.weights.row(k), v, lambda).row(0);
    } catch (const DegenerateEmbeddingError&) {
      throw DegenerateEmbeddingError(static_cast<std::size_t>(k),
                                     "head row vanished under projection");
    }
  }
  return out;
}

/// Refusal vector unlearning with a pre-fitted direction.
inline UnlearnResult refusal_vector_with(const PromptHead& head, const Vector& v, double lambda,
                                         bool with_head_projection) {
  if (v.size() != head.dim()) throw DimensionError("projection direction does not match head");
  detail::check_projection(v, lambda);
  PromptHead out = with_head_projection ? project_head(head, v, lambda) : head;
  ActiveMask mask = ActiveMask::from_head(head);
  return {std::move(out), std::move(mask), Projector{v, lambda}};
}

inline UnlearnResult refusal_vector(const EmbeddingDataset& ds, const PromptHead& head,
                                    int forget, double lambda, const RefusalOptions& options = {}) {
  detail::check_forget(head, forget);
  if (ds.dim() != head.dim()) {
    throw DimensionError("dataset dimension " + std::to_string(ds.dim()) +
                         " does not match head dimension " + std::to_string(head.dim()));
  }
  const Vector v = refusal_vector_fit(ds, forget, options.means);
  return refusal_vector_with(head, v, lambda, options.project_head);
}

/// Image embeddings as seen by the unlearned classifier.
inline Matrix transformed_embeddings(const UnlearnResult& result, const Matrix& embeddings) {
  if (!result.image_projector) return embeddings;
  return refusal_vector_apply(embeddings, result.image_projector->direction,
                              result.image_projector->strength);
}

inline PredictionSet predict_unlearned(const EmbeddingDataset& ds, const UnlearnResult& result) {
  return predict_all(transformed_embeddings(result, ds.embeddings), result.head.weights,
                     result.mask);
}

/// No-op result: the head as given, zero rows masked.
inline UnlearnResult identity_result(const PromptHead& head) {
  return {head, ActiveMask::from_head(head), std::nullopt};
}

struct MethodConfig {
  Method method = Method::kPromptErasure;
  ReweightParams reweight;
  double lambda = 1.0;
  RefusalOptions refusal;
};

inline UnlearnResult apply_method(const EmbeddingDataset& ds, const PromptHead& head, int forget,
                                  const MethodConfig& config) {
  switch (config.method) {
    case Method::kNone:
      return identity_result(head);
    case Method::kPromptErasure:
      return prompt_erasure(head, forget);
    case Method::kPromptReweighting:
      return prompt_reweighting(head, forget, config.reweight);
    case Method::kRefusalVector:
      return refusal_vector(ds, head, forget, config.lambda, config.refusal);
  }
  return identity_result(head);
}

}  // namespace redist
