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
 * Synthetic embedding datasets with a prescribed cosine structure between
 * group mean directions.
 *
 * Unit mean directions are recovered from the target Gram matrix through its
 * symmetric eigendecomposition (G = Q diag(l) Q^T, rows of Q diag(sqrt(l))),
 * zero-padded to the requested dimension. Samples are
 * normalize(m_k + sigma * g) with g standard normal. Each group draws from its
 * own generator seeded by (seed, group), so adding a group leaves earlier
 * groups untouched.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "redist/embedding_store.hpp"
#include "redist/error.hpp"
#include "redist/linalg.hpp"

namespace redist {

inline constexpr double kGramTolerance = 1e-10;

struct GeometrySpec {
  int dim = 8;
  Matrix gram;
  double noise_sigma = 0.25;
  std::vector<std::size_t> samples_per_group;
  std::uint64_t seed = 42;
  GroupTable groups;
  double head_perturb_sigma = 0.0;

  int num_groups() const { return static_cast<int>(gram.rows()); }
};

/// Group-mean cosines used as the default fixture, ordered YF, YM, OF, OM.
/// The YF-OM and YM-OF entries are free choices below every other value.
inline Matrix reference_gram() {
  Matrix g(4, 4);
  // clang-format off
  g << 1.000, 0.885, 0.945, 0.870,
       0.885, 1.000, 0.870, 0.935,
       0.945, 0.870, 1.000, 0.878,
       0.870, 0.935, 0.878, 1.000;
  // clang-format on
  return g;
}

/// The default four-group fixture: reference Gram, dim 8, sigma 0.25,
/// 500 samples per group, seed 42, head perturbation 0.05.
inline GeometrySpec reference_spec() {
  GeometrySpec spec;
  spec.dim = 8;
  spec.gram = reference_gram();
  spec.noise_sigma = 0.25;
  spec.samples_per_group = {500, 500, 500, 500};
  spec.seed = 42;
  spec.groups = standard_group_table();
  spec.head_perturb_sigma = 0.05;
  return spec;
}

inline double min_eigenvalue(const Matrix& gram) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(Eigen::MatrixXd{gram},
                                                        Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

inline void validate_gram(const Matrix& gram) {
  if (gram.rows() != gram.cols() || gram.rows() < 1) throw SpecError("gram must be square");
  if (!gram.allFinite()) throw SpecError("gram has non-finite entries");
  for (Eigen::Index i = 0; i < gram.rows(); ++i) {
    if (std::abs(gram(i, i) - 1.0) > kGramTolerance) {
      throw SpecError("gram diagonal entry " + std::to_string(i) + " is not 1");
    }
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(gram(i, j) - gram(j, i)) > kGramTolerance) {
        throw SpecError("gram is not symmetric at (" + std::to_string(i) + ", " +
                        std::to_string(j) + ")");
      }
    }
  }
  const double lo = min_eigenvalue(gram);
  if (lo < -kGramTolerance) {
    throw SpecError("gram is not positive semidefinite (minimum eigenvalue " +
                    std::to_string(lo) + ")");
  }
}

/// Unit rows in R^dim whose pairwise dot products reproduce `gram`.
inline Matrix means_from_gram(const Matrix& gram, int dim) {
  validate_gram(gram);
  const Eigen::Index k_count = gram.rows();
  if (dim < k_count) {
    throw SpecError("dimension " + std::to_string(dim) + " is smaller than the group count " +
                    std::to_string(k_count));
  }
  const Eigen::MatrixXd dense = gram;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
  const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd factor = solver.eigenvectors() * roots.asDiagonal();

  Matrix means = Matrix::Zero(k_count, dim);
  means.leftCols(k_count) = factor;
  return normalize_rows(means);
}

namespace detail {

inline std::mt19937_64 substream(std::uint64_t seed, std::uint32_t stream, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xFFFFFFFFu),
                    static_cast<std::uint32_t>(seed >> 32), stream, index};
  return std::mt19937_64(seq);
}

inline constexpr std::uint32_t kSampleStream = 0x53414d50u;  // "SAMP"
inline constexpr std::uint32_t kHeadStream = 0x48454144u;    // "HEAD"

inline Vector perturbed_unit(const Eigen::Ref<const Vector>& center, double sigma,
                             std::mt19937_64& rng) {
  Vector x = center;
  if (sigma > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] += sigma * normal(rng);
  }
  const double norm = ordered_norm(x);
  if (!(norm > 0.0)) throw DegenerateEmbeddingError(0, "sampled zero vector");
  return is_unit(norm) ? x : Vector(x / norm);
}

}  // namespace detail

inline void validate_spec(const GeometrySpec& spec) {
  validate_gram(spec.gram);
  const int k_count = spec.num_groups();
  if (spec.dim < 2) throw SpecError("dimension must be at least 2");
  if (spec.dim < k_count) throw SpecError("dimension must be at least the group count");
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw SpecError("noise_sigma must be finite and non-negative");
  }
  if (!(spec.head_perturb_sigma >= 0.0) || !std::isfinite(spec.head_perturb_sigma)) {
    throw SpecError("head_perturb_sigma must be finite and non-negative");
  }
  if (spec.samples_per_group.size() != static_cast<std::size_t>(k_count)) {
    throw SpecError("samples_per_group needs one entry per group");
  }
  for (std::size_t n : spec.samples_per_group) {
    if (n == 0) throw SpecError("every group needs at least one sample");
  }
  if (spec.groups.size() != k_count) throw SpecError("group table size differs from gram");
}

inline EmbeddingDataset sample_dataset(const GeometrySpec& spec, const Matrix& means) {
  validate_spec(spec);
  std::size_t total = 0;
  for (std::size_t n : spec.samples_per_group) total += n;
  Matrix rows(static_cast<Eigen::Index>(total), spec.dim);
  std::vector<int> labels;
  labels.reserve(total);
  Eigen::Index r = 0;
  for (int k = 0; k < spec.num_groups(); ++k) {
    auto rng = detail::substream(spec.seed, detail::kSampleStream, static_cast<std::uint32_t>(k));
    const Vector center = means.row(k).transpose();
    for (std::size_t s = 0; s < spec.samples_per_group[static_cast<std::size_t>(k)]; ++s, ++r) {
      rows.row(r) = detail::perturbed_unit(center, spec.noise_sigma, rng).transpose();
      labels.push_back(k);
    }
  }
  return assemble_dataset(rows, labels, spec.groups);
}

inline EmbeddingDataset sample_dataset(const GeometrySpec& spec) {
  validate_spec(spec);
  return sample_dataset(spec, means_from_gram(spec.gram, spec.dim));
}

/// Prompt head near the group means: w_k = normalize(m_k + sigma * g).
inline PromptHead surrogate_head(const Matrix& means, double perturb_sigma, std::uint64_t seed,
                                 const GroupTable& groups) {
  if (!(perturb_sigma >= 0.0)) throw SpecError("perturb_sigma must be non-negative");
  Matrix w(means.rows(), means.cols());
  for (Eigen::Index k = 0; k < means.rows(); ++k) {
    auto rng = detail::substream(seed, detail::kHeadStream, static_cast<std::uint32_t>(k));
    w.row(k) = detail::perturbed_unit(means.row(k).transpose(), perturb_sigma, rng).transpose();
  }
  return make_head(w, groups);
}

struct SyntheticData {
  Matrix means;
  EmbeddingDataset dataset;
  PromptHead head;
};

inline SyntheticData generate(const GeometrySpec& spec) {
  validate_spec(spec);
  SyntheticData out;
  out.means = means_from_gram(spec.gram, spec.dim);
  out.dataset = sample_dataset(spec, out.means);
  out.head = surrogate_head(out.means, spec.head_perturb_sigma, spec.seed, spec.groups);
  return out;
}

inline GeometrySpec spec_from_json(const nlohmann::json& j) {
  try {
    GeometrySpec spec;
    spec.dim = j.at("dim").get<int>();
    const auto& rows = j.at("gram");
    const auto k_count = static_cast<Eigen::Index>(rows.size());
    spec.gram.resize(k_count, k_count);
    for (Eigen::Index i = 0; i < k_count; ++i) {
      const auto& row = rows.at(static_cast<std::size_t>(i));
      if (static_cast<Eigen::Index>(row.size()) != k_count) throw SpecError("gram must be square");
      for (Eigen::Index c = 0; c < k_count; ++c) {
        spec.gram(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
      }
    }
    spec.noise_sigma = j.value("noise_sigma", 0.25);
    spec.samples_per_group = j.at("samples_per_group").get<std::vector<std::size_t>>();
    spec.seed = j.value("seed", std::uint64_t{42});
    spec.head_perturb_sigma = j.value("head_perturb_sigma", 0.0);
    if (j.contains("groups")) {
      auto names = j.at("groups").get<std::vector<std::string>>();
      const std::string forget = j.contains("forget") ? j.at("forget").get<std::string>() : names.at(0);
      spec.groups = GroupTable::from_names(std::move(names), forget);
    } else {
      spec.groups = GroupTable::numbered(static_cast<int>(k_count));
    }
    validate_spec(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("geometry spec: ") + e.what());
  }
}

inline nlohmann::json spec_to_json(const GeometrySpec& spec) {
  nlohmann::json gram = nlohmann::json::array();
  for (Eigen::Index i = 0; i < spec.gram.rows(); ++i) {
    std::vector<double> row(spec.gram.row(i).data(), spec.gram.row(i).data() + spec.gram.cols());
    gram.push_back(row);
  }
  return {{"dim", spec.dim},
          {"gram", gram},
          {"noise_sigma", spec.noise_sigma},
          {"samples_per_group", spec.samples_per_group},
          {"seed", spec.seed},
          {"groups", spec.groups.names()},
          {"forget", spec.groups.name(spec.groups.forget_index())},
          {"head_perturb_sigma", spec.head_perturb_sigma}};
}

inline GeometrySpec load_spec(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("geometry spec '" + path.string() + "': " + e.what());
  }
  return spec_from_json(j);
}

}  // namespace redist
