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

#include <cmath>
#include <cstddef>
#include <limits>

#include <Eigen/Core>

namespace redist {

// Row-major so that one embedding is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Sentinel for metrics over empty groups.
inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

inline bool is_defined(double x) { return !std::isnan(x); }

namespace detail {

// Sequential dot product so results do not depend on SIMD reduction order.
template <typename A, typename B>
double ordered_dot(const A& a, const B& b) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

template <typename A>
double ordered_norm(const A& a) {
  return std::sqrt(ordered_dot(a, a));
}

// Rows this close to unit norm are left as they are, which makes row
// normalization bitwise idempotent.
inline constexpr double kUnitSnap = 64 * std::numeric_limits<double>::epsilon();

inline bool is_unit(double norm) { return std::abs(norm - 1.0) <= kUnitSnap; }

}  // namespace detail
}  // namespace redist
