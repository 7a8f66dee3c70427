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
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "redist/report.hpp"
#include "redist/synth.hpp"
#include "support/oracles.hpp"

namespace redist {
namespace {

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0 || (std::isnan(a) && std::isnan(b));
}

AuditReport sample_report() {
  std::mt19937_64 rng(61);
  const auto ds = oracle::random_dataset(rng, 4, 7, 97);
  const auto head = oracle::random_head(rng, 4, 7);
  AuditReport r = run_audit(ds, head, prompt_reweighting(head, 0));
  r.model = "toy";
  r.method = "pr";
  return r;
}

TEST(ReportTest, FormatDouble) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(ReportTest, AuditJsonRoundTripIsExact) {
  AuditReport r = sample_report();
  r.per_group_acc_before[2] = std::nan("");  // undefined group survives as null
  const auto text = dump(audit_to_json(r));
  const AuditReport back = audit_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back.model, r.model);
  EXPECT_EQ(back.groups, r.groups);
  EXPECT_EQ(back.flags, r.flags);
  for (auto [a, b] : {std::pair{r.fa, back.fa}, {r.ra, back.ra}, {r.rs, back.rs},
                      {r.dp_before, back.dp_before}, {r.dp_after, back.dp_after}}) {
    EXPECT_TRUE(same_bits(a, b));
  }
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_TRUE(same_bits(r.per_group_acc_before[k], back.per_group_acc_before[k]));
    EXPECT_TRUE(same_bits(r.delta_acc[k], back.delta_acc[k]));
  }
  EXPECT_EQ(dump(audit_to_json(back)), text);
  EXPECT_EQ(nlohmann::json::parse(text)["schema_version"], "1");
}

TEST(ReportTest, AuditCsvLayout) {
  const AuditReport r = sample_report();
  const std::string csv = audit_to_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "model,method,fa,ra,dp_before,dp_after,rs,delta_acc_G0,delta_acc_G1,"
            "delta_acc_G2,delta_acc_G3");
  const std::string row = csv.substr(csv.find('\n') + 1);
  EXPECT_EQ(row.rfind("toy,pr,", 0), 0u);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 10);
}

TEST(ReportTest, AuditFromJsonErrors) {
  EXPECT_THROW(audit_from_json(nlohmann::json::parse("{}")), FormatError);
}

TEST(ReportTest, GeometryJsonAndCsv) {
  auto spec = reference_spec();
  spec.samples_per_group = {50, 50, 50, 50};
  const auto g = geometry_report(sample_dataset(spec));
  const auto j = nlohmann::json::parse(dump(geometry_to_json(g)));
  EXPECT_EQ(j["predicted_target"], "Old Female");
  EXPECT_TRUE(same_bits(j["collinearity"].get<double>(), g.collinearity));
  EXPECT_TRUE(same_bits(j["cosine_matrix"][0][2].get<double>(), g.cosine_matrix(0, 2)));
  const std::string csv = cosine_matrix_csv(g.cosine_matrix, g.groups);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "group,Young Female,Young Male,Old Female,Old Male");
}

TEST(ReportTest, SweepOutputs) {
  SweepResult s;
  s.points = {{0.0, 0.5, 0.6, 0.1, 0.0}, {1.0, 0.2, 0.5, 0.3, 4.0}, {2.0, 0.5, 0.6, 0.1, 1.0}};
  s.pareto = pareto_front(s.points);
  s.direction = Vector::Unit(3, 1);
  EXPECT_EQ(sweep_to_csv(s),
            "lambda,fa,ra,dp,rs,pareto\n"
            "0,0.5,0.59999999999999998,0.10000000000000001,0,1\n"
            "1,0.20000000000000001,0.5,0.29999999999999999,4,1\n"
            "2,0.5,0.59999999999999998,0.10000000000000001,1,0\n");
  const auto j = sweep_to_json(s);
  EXPECT_EQ(j["points"].size(), 3u);
  EXPECT_EQ(j["pareto"], nlohmann::json::parse("[0, 1]"));
}

TEST(ReportTest, ProjectorRoundTrip) {
  std::mt19937_64 rng(62);
  const auto ds = oracle::random_dataset(rng, 3, 9, 30);
  const Projector p{refusal_vector_fit(ds, 0), 1.5};
  const Projector back =
      projector_from_json(nlohmann::json::parse(dump(projector_to_json(p, true))));
  EXPECT_TRUE(back.direction == p.direction);
  EXPECT_EQ(back.strength, 1.5);
  EXPECT_THROW(projector_from_json(nlohmann::json::parse("{}")), FormatError);
}

}  // namespace
}  // namespace redist
