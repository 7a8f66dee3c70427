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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "redist/classifier.hpp"
#include "redist/embedding_store.hpp"
#include "redist/error.hpp"
#include "redist/metrics.hpp"
#include "redist/unlearning.hpp"

namespace redist {

struct SweepPoint {
  double lambda = 0.0;
  double fa = kUndefined;
  double ra = kUndefined;
  double dp = kUndefined;
  double rs = kUndefined;
};

struct SweepResult {
  std::vector<SweepPoint> points;  // ascending lambda
  std::vector<std::size_t> pareto;
  Vector direction;
};

struct SweepOptions {
  RefusalOptions refusal;
  double epsilon = kDefaultEpsilon;
};

/// Indices of points not dominated in (fa, rs), both minimized. A point is
/// dominated when another is no worse in both and strictly better in one.
inline std::vector<std::size_t> pareto_front(const std::vector<SweepPoint>& points) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < points.size() && !dominated; ++j) {
      if (j == i) continue;
      const auto& a = points[j];
      const auto& b = points[i];
      dominated = a.fa <= b.fa && a.rs <= b.rs && (a.fa < b.fa || a.rs < b.rs);
    }
    if (!dominated) front.push_back(i);
  }
  return front;
}

inline void validate_lambdas(const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw ValidationError("lambda list is empty");
  for (double l : lambdas) {
    if (!std::isfinite(l) || l < 0.0) {
      throw ValidationError("lambda values must be finite and non-negative, got " +
                            std::to_string(l));
    }
  }
}

/// Refusal strength sweep. The direction is fitted once on the unmodified
/// dataset and every point is audited against the unmodified baseline.
inline SweepResult run_lambda_sweep(const EmbeddingDataset& ds, const PromptHead& head,
                                    const std::vector<double>& lambdas,
                                    const SweepOptions& options = {}) {
  validate_lambdas(lambdas);
  const int t = ds.groups.forget_index();
  if (ds.dim() != head.dim()) throw DimensionError("dataset and head dimensions differ");

  SweepResult result;
  result.direction = refusal_vector_fit(ds, t, options.refusal.means);
  const auto before = per_group_accuracy(predict_unlearned(ds, identity_result(head)), ds);

  std::vector<std::size_t> order(lambdas.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lambdas[a] < lambdas[b]; });

  for (std::size_t idx : order) {
    const double lambda = lambdas[idx];
    const UnlearnResult unlearned =
        refusal_vector_with(head, result.direction, lambda, options.refusal.project_head);
    const auto after = per_group_accuracy(predict_unlearned(ds, unlearned), ds);
    const AuditReport audit = build_audit(before, after, ds.groups, t, options.epsilon);
    result.points.push_back({lambda, audit.fa, audit.ra, audit.dp_after, audit.rs});
  }
  result.pareto = pareto_front(result.points);
  return result;
}

}  // namespace redist
