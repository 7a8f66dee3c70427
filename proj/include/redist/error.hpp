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
#include <stdexcept>
#include <string>
#include <string_view>

namespace redist {

enum class ErrorKind {
  kValidation,
  kIndex,
  kDimension,
  kSpec,
  kFormat,
  kData,
  kDegenerateEmbedding,
  kDegenerateDirection,
  kMetric,
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation: return "ValidationError";
    case ErrorKind::kIndex: return "IndexError";
    case ErrorKind::kDimension: return "DimensionError";
    case ErrorKind::kSpec: return "SpecError";
    case ErrorKind::kFormat: return "FormatError";
    case ErrorKind::kData: return "DataError";
    case ErrorKind::kDegenerateEmbedding: return "DegenerateEmbeddingError";
    case ErrorKind::kDegenerateDirection: return "DegenerateDirectionError";
    case ErrorKind::kMetric: return "MetricError";
  }
  return "Error";
}

/// Process exit code for an error category: 2 validation, 3 data/format,
/// 4 numeric degeneracy.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kValidation:
    case ErrorKind::kIndex:
    case ErrorKind::kDimension:
    case ErrorKind::kSpec:
      return 2;
    case ErrorKind::kFormat:
    case ErrorKind::kData:
      return 3;
    case ErrorKind::kDegenerateEmbedding:
    case ErrorKind::kDegenerateDirection:
    case ErrorKind::kMetric:
      return 4;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return error_kind_name(kind_); }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class TypedError : public Error {
 public:
  explicit TypedError(const std::string& message) : Error(K, message) {}
};

using ValidationError = TypedError<ErrorKind::kValidation>;
using IndexError = TypedError<ErrorKind::kIndex>;
using DimensionError = TypedError<ErrorKind::kDimension>;
using SpecError = TypedError<ErrorKind::kSpec>;
using FormatError = TypedError<ErrorKind::kFormat>;
using DataError = TypedError<ErrorKind::kData>;
using DegenerateDirectionError = TypedError<ErrorKind::kDegenerateDirection>;
using MetricError = TypedError<ErrorKind::kMetric>;

/// Raised when a row cannot be normalized; carries the offending row.
class DegenerateEmbeddingError : public Error {
 public:
  DegenerateEmbeddingError(std::size_t row, const std::string& what)
      : Error(ErrorKind::kDegenerateEmbedding,
              what + " (row " + std::to_string(row) + ")"),
        row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace redist
