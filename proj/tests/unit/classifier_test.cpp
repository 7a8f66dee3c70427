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

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "redist/classifier.hpp"
#include "support/oracles.hpp"

namespace redist {
namespace {

Matrix rows2(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size() / 2), 2);
  auto it = v.begin();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    m(i, 0) = *it++;
    m(i, 1) = *it++;
  }
  return m;
}

TEST(ClassifierTest, OrthonormalCase) {
  const auto p = predict_all(rows2({1, 0}), rows2({1, 0, 0, 1}), ActiveMask::all(2));
  EXPECT_EQ(p.predicted[0], 0);
  EXPECT_EQ(p.scores(0, 0), 1.0);
  EXPECT_EQ(p.scores(0, 1), 0.0);
}

TEST(ClassifierTest, MaskOverridesScore) {
  const auto p = predict_all(rows2({1, 0}), rows2({1, 0, 0, 1}), ActiveMask({false, true}));
  EXPECT_EQ(p.predicted[0], 1);
}

TEST(ClassifierTest, MaskBeatsZeroScore) {
  // A zeroed class scores 0 and would win against negative cosines.
  const auto p = predict_all(rows2({-1, 0}), rows2({0, 0, 0.6, 0.8}), ActiveMask({false, true}));
  EXPECT_EQ(p.predicted[0], 1);
}

TEST(ClassifierTest, TieGoesToLowestIndex) {
  const double h = std::sqrt(0.5);
  const auto p = predict_all(rows2({h, h}), rows2({1, 0, 0, 1}), ActiveMask::all(2));
  EXPECT_EQ(p.scores(0, 0), p.scores(0, 1));
  EXPECT_EQ(p.predicted[0], 0);
}

TEST(ClassifierTest, DimensionMismatch) {
  EXPECT_THROW(predict_all(Matrix::Ones(1, 3), rows2({1, 0, 0, 1}), ActiveMask::all(2)),
               DimensionError);
  EXPECT_THROW(predict_all(rows2({1, 0}), rows2({1, 0, 0, 1}), ActiveMask::all(3)),
               DimensionError);
}

TEST(ActiveMaskTest, NeedsOneActive) {
  EXPECT_THROW(ActiveMask({false, false}), ValidationError);
  EXPECT_THROW(ActiveMask({true, false}).without(0), ValidationError);
  EXPECT_EQ(ActiveMask::all(3).without(1).bits(), (std::vector<bool>{true, false, true}));
}

TEST(AccuracyTest, Examples) {
  EXPECT_EQ(per_group_accuracy({0, 1, 1}, {0, 1, 1}, 2), (std::vector<double>{1.0, 1.0}));
  const auto acc = per_group_accuracy({0, 0, 0, 1, 1}, {0, 0, 0, 0, 1}, 3);
  EXPECT_EQ(acc[0], 0.75);
  EXPECT_EQ(acc[1], 1.0);
  EXPECT_TRUE(std::isnan(acc[2]));
}

// Random small instances against the two-pass oracle, including exact ties
// planted by duplicating head rows.
TEST(ClassifierProperty, MatchesOracleAndRespectsMask) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int k_count = 2 + trial % 5;
    const int d = 2 + trial % 7;
    const auto ds = oracle::random_dataset(rng, k_count, d, 25);
    auto head = oracle::random_head(rng, k_count, d);
    if (trial % 3 == 0) head.weights.row(k_count - 1) = head.weights.row(0);
    std::vector<bool> active(k_count, true);
    active[trial % k_count] = trial % 2 == 0;
    const ActiveMask mask(active);

    const auto p = predict_all(ds, head, mask);
    const auto expected = oracle::predict(oracle::to_rows(ds.embeddings),
                                          oracle::to_rows(head.weights), active);
    ASSERT_EQ(p.predicted, expected) << "trial " << trial;
    for (int y : p.predicted) EXPECT_TRUE(mask.active(y));
    const auto acc = per_group_accuracy(p, ds);
    const auto want = oracle::accuracy(expected, ds.labels, k_count);
    for (int k = 0; k < k_count; ++k) EXPECT_EQ(acc[k], want[k]);
  }
}

TEST(ClassifierProperty, PositiveScalingBeforeNormalization) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> c(0.01, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix raw = oracle::gaussian_rows(rng, 40, 6);
    std::vector<int> labels(40);
    for (int i = 0; i < 40; ++i) labels[i] = i % 3;
    const auto g = GroupTable::numbered(3);
    const auto head = oracle::random_head(rng, 3, 6);
    const auto a = predict_all(assemble_dataset(raw, labels, g), head, ActiveMask::all(3));
    const auto b = predict_all(assemble_dataset(raw * c(rng), labels, g), head, ActiveMask::all(3));
    EXPECT_EQ(a.predicted, b.predicted);
  }
}

}  // namespace
}  // namespace redist
