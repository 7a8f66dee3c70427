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

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "support/files.hpp"

namespace redist::cli {
namespace {

using testing_support::TempDir;
using testing_support::read_file;
using testing_support::write_file;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ASSERT_EQ(invoke({"synth", "--out", data_.path().string()}).code, 0);
  }

  std::vector<std::string> inputs(std::vector<std::string> extra = {}) const {
    std::vector<std::string> args = {"--embeddings", (data_ / "embeddings.emb1").string(),
                                     "--labels",     (data_ / "labels.csv").string(),
                                     "--groups",     (data_ / "groups.json").string(),
                                     "--head",       (data_ / "head.emb1").string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  }

  std::vector<std::string> command(const std::string& name, std::vector<std::string> extra) const {
    auto args = inputs(std::move(extra));
    args.insert(args.begin(), name);
    args.push_back("--out");
    args.push_back(out_.path().string());
    return args;
  }

  TempDir data_;
  TempDir out_;
};

TEST_F(CliTest, AuditPe) {
  const auto r = invoke(command("audit", {"--method", "pe", "--model", "synthetic"}));
  ASSERT_EQ(r.code, 0) << r.err;
  const AuditReport report = audit_from_json(read_json(out_ / "audit.json"));
  EXPECT_EQ(report.fa, 0.0);
  EXPECT_EQ(report.model, "synthetic");
  EXPECT_TRUE(self_check(report).empty());
  const std::string csv = read_file(out_ / "audit.csv");
  EXPECT_EQ(csv.rfind("model,method,fa,ra,dp_before,dp_after,rs,delta_acc_Young Female", 0), 0u);
}

TEST_F(CliTest, AuditPrFieldsPresentAndConsistent) {
  const auto r = invoke(command("audit", {"--method", "pr", "--alpha", "1.0", "--tau", "0.07"}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = read_json(out_ / "audit.json");
  for (const char* key : {"schema_version", "fa", "ra", "delta_acc", "dp_before", "dp_after",
                          "rs", "flags", "epsilon", "per_group_acc_before",
                          "per_group_acc_after"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_TRUE(self_check(audit_from_json(j)).empty());
}

// The reference fixture has forget/retain collinearity above 0.9; a single
// refusal direction removes only part of the forget group's accuracy.
TEST_F(CliTest, AuditRvOnCollinearFixture) {
  const auto geo = invoke(command("geometry", {}));
  ASSERT_EQ(geo.code, 0) << geo.err;
  EXPECT_GE(read_json(out_ / "geometry.json")["collinearity"].get<double>(), 0.9);

  const auto r = invoke(command("audit", {"--method", "rv", "--lambda", "1.0"}));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = audit_from_json(read_json(out_ / "audit.json"));
  EXPECT_GT(report.fa, 0.0);
  EXPECT_LT(report.fa, report.per_group_acc_before[0]);
}

TEST_F(CliTest, GeometryCosinesMatchGram) {
  ASSERT_EQ(invoke(command("geometry", {})).code, 0);
  std::istringstream csv(read_file(out_ / "cosines.csv"));
  std::string line;
  std::getline(csv, line);
  const Matrix gram = reference_gram();
  for (int i = 0; i < 4; ++i) {
    std::getline(csv, line);
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    for (int j = 0; j < 4; ++j) {
      std::getline(row, cell, ',');
      EXPECT_NEAR(std::stod(cell), gram(i, j), 0.02);
    }
  }
}

TEST_F(CliTest, GeometryNeedsNoHead) {
  const auto r = invoke({"geometry", "--embeddings", (data_ / "embeddings.emb1").string(),
                         "--labels", (data_ / "labels.csv").string(), "--out",
                         out_.path().string()});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, SweepSingleAndDefault) {
  ASSERT_EQ(invoke(command("audit", {"--method", "none"})).code, 0);
  const double baseline_fa = read_json(out_ / "audit.json")["fa"].get<double>();

  ASSERT_EQ(invoke(command("sweep", {"--lambdas", "0"})).code, 0);
  auto j = read_json(out_ / "sweep.json");
  ASSERT_EQ(j["points"].size(), 1u);
  EXPECT_EQ(j["points"][0]["fa"].get<double>(), baseline_fa);

  ASSERT_EQ(invoke(command("sweep", {})).code, 0);
  j = read_json(out_ / "sweep.json");
  ASSERT_EQ(j["points"].size(), 10u);
  for (std::size_t i = 1; i < 10; ++i) {
    EXPECT_LT(j["points"][i - 1]["lambda"].get<double>(), j["points"][i]["lambda"].get<double>());
  }
  const std::string csv = read_file(out_ / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 11);
}

TEST_F(CliTest, SweepRejectsNegativeLambda) {
  const auto r = invoke(command("sweep", {"--lambdas", "0,-1"}));
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"]["kind"], "ValidationError");
  EXPECT_EQ(invoke(command("sweep", {"--lambdas", "0,abc"})).code, 2);
}

TEST_F(CliTest, UnlearnWritesHeadAndProjector) {
  ASSERT_EQ(invoke(command("unlearn", {"--method", "rv"})).code, 0);
  const Projector p = projector_from_json(read_json(out_ / "projector.json"));
  EXPECT_NEAR(p.direction.norm(), 1.0, 1e-10);
  EXPECT_EQ(p.strength, 1.0);
  const Matrix head = load_embeddings(out_ / "head.emb1");
  EXPECT_EQ(head.rows(), 4);

  TempDir pe_out;
  auto args = inputs({"--method", "pe", "--out", pe_out.path().string()});
  args.insert(args.begin(), "unlearn");
  ASSERT_EQ(invoke(args).code, 0);
  const Matrix erased = load_embeddings(pe_out / "head.emb1");
  EXPECT_EQ(erased.row(0).norm(), 0.0);
  EXPECT_FALSE(fs::exists(pe_out / "projector.json"));
  // A saved erased head reloads with the forget class inactive.
  const auto reloaded = make_head(erased, standard_group_table());
  EXPECT_FALSE(ActiveMask::from_head(reloaded).active(0));
}

TEST_F(CliTest, SynthIsDeterministic) {
  TempDir a, b;
  ASSERT_EQ(invoke({"synth", "--seed", "42", "--out", a.path().string()}).code, 0);
  ASSERT_EQ(invoke({"synth", "--seed", "42", "--out", b.path().string()}).code, 0);
  for (const char* f : {"embeddings.emb1", "labels.csv", "groups.json", "head.emb1", "spec.json"}) {
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
  TempDir c;
  ASSERT_EQ(invoke({"synth", "--seed", "7", "--out", c.path().string()}).code, 0);
  EXPECT_NE(read_file(a / "embeddings.emb1"), read_file(c / "embeddings.emb1"));
}

TEST_F(CliTest, RerunIsByteIdenticalAndInputsUntouched) {
  std::vector<std::string> before;
  for (const char* f : {"embeddings.emb1", "labels.csv", "groups.json", "head.emb1"}) {
    before.push_back(read_file(data_ / f));
  }
  for (const char* method : {"pe", "pr", "rv"}) {
    ASSERT_EQ(invoke(command("audit", {"--method", method})).code, 0);
    const std::string first = read_file(out_ / "audit.json");
    ASSERT_EQ(invoke(command("audit", {"--method", method})).code, 0);
    EXPECT_EQ(read_file(out_ / "audit.json"), first);
  }
  ASSERT_EQ(invoke(command("sweep", {})).code, 0);
  std::size_t i = 0;
  for (const char* f : {"embeddings.emb1", "labels.csv", "groups.json", "head.emb1"}) {
    EXPECT_EQ(read_file(data_ / f), before[i++]) << f;
  }
}

TEST_F(CliTest, SynthSpecInput) {
  auto spec = reference_spec();
  spec.samples_per_group = {30, 30, 30, 30};
  write_file(data_ / "spec.json", dump(spec_to_json(spec)));
  const auto r = invoke({"audit", "--synth-spec", (data_ / "spec.json").string(), "--method",
                         "pe", "--out", out_.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json(out_ / "audit.json")["fa"].get<double>(), 0.0);
}

TEST_F(CliTest, ConfigFileAndPrecedence) {
  write_file(data_ / "config.json",
             nlohmann::json{{"method", "pr"},
                            {"tau", 0.5},
                            {"embeddings", (data_ / "embeddings.emb1").string()},
                            {"labels", (data_ / "labels.csv").string()},
                            {"groups", (data_ / "groups.json").string()},
                            {"head", (data_ / "head.emb1").string()},
                            {"model", "from-config"}}
                 .dump());
  const std::string cfg = (data_ / "config.json").string();
  ASSERT_EQ(invoke({"audit", "--config", cfg, "--out", out_.path().string()}).code, 0);
  auto j = read_json(out_ / "audit.json");
  EXPECT_EQ(j["method"], "pr");
  EXPECT_EQ(j["model"], "from-config");

  ASSERT_EQ(invoke({"audit", "--config", cfg, "--method", "pe", "--out", out_.path().string()})
                .code,
            0);
  j = read_json(out_ / "audit.json");
  EXPECT_EQ(j["method"], "pe");
  EXPECT_EQ(j["fa"].get<double>(), 0.0);

  write_file(data_ / "bad.json", R"({"no-such-flag": 1})");
  EXPECT_EQ(invoke({"audit", "--config", (data_ / "bad.json").string()}).code, 2);
  write_file(data_ / "broken.json", "{");
  EXPECT_EQ(invoke({"audit", "--config", (data_ / "broken.json").string()}).code, 3);
}

TEST_F(CliTest, ConfigBooleansAndLists) {
  write_file(data_ / "config.json", nlohmann::json{{"project-head", false},
                                                   {"lambdas", {0.0, 1.0}},
                                                   {"balanced-retain-mean", true}}
                                        .dump());
  auto args = command("sweep", {"--config", (data_ / "config.json").string()});
  const auto r = invoke(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json(out_ / "sweep.json")["points"].size(), 2u);
}

TEST_F(CliTest, EnvironmentOutputDirectory) {
  TempDir env_out;
  ::setenv("REDIST_OUT_DIR", env_out.path().c_str(), 1);
  auto args = inputs({"--method", "pe"});
  args.insert(args.begin(), "audit");
  const auto r = invoke(args);
  ::unsetenv("REDIST_OUT_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(env_out / "audit.json"));
}

TEST_F(CliTest, ValidationErrors) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"bogus"}).code, 2);
  EXPECT_EQ(invoke(command("audit", {"--method", "xx"})).code, 2);
  EXPECT_EQ(invoke(command("audit", {"--tau", "0"})).code, 2);
  EXPECT_EQ(invoke(command("audit", {"--lambda", "-1"})).code, 2);
  EXPECT_EQ(invoke(command("audit", {"--epsilon", "-1"})).code, 2);
  EXPECT_EQ(invoke(command("audit", {"--forget", "Nobody"})).code, 2);
  EXPECT_EQ(invoke({"audit", "--embeddings", "/nonexistent.emb1", "--labels", "x", "--head", "y"})
                .code,
            2);
  const auto r = invoke({"audit"});
  EXPECT_EQ(r.code, 2);
  const auto err = nlohmann::json::parse(r.err);
  EXPECT_EQ(err["error"]["exit_code"], 2);
  EXPECT_FALSE(err["error"]["message"].get<std::string>().empty());
}

TEST_F(CliTest, DataAndFormatErrors) {
  write_file(data_ / "embeddings.emb1", "EMB1\x01\x00\x00\x00");
  const auto r = invoke(command("audit", {}));
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"]["kind"], "FormatError");
}

TEST_F(CliTest, DegenerateDirectionExitCode) {
  // Every sample at the same point: forget and retained means coincide.
  write_file(data_ / "flat.csv", "1,0\n1,0\n1,0\n1,0\n");
  write_file(data_ / "head.csv", "1,0\n0,1\n0.6,0.8\n0.8,0.6\n");
  const auto r = invoke({"audit", "--embeddings", (data_ / "flat.csv").string(), "--labels",
                         (data_ / "labels4.csv").string(), "--head",
                         (data_ / "head.csv").string(), "--method", "rv", "--out",
                         out_.path().string()});
  EXPECT_EQ(r.code, 2);  // labels4.csv missing: validation
  write_file(data_ / "labels4.csv",
             "index,group\n0,Young Female\n1,Young Male\n2,Old Female\n3,Old Male\n");
  const auto d = invoke({"audit", "--embeddings", (data_ / "flat.csv").string(), "--labels",
                         (data_ / "labels4.csv").string(), "--head",
                         (data_ / "head.csv").string(), "--method", "rv", "--out",
                         out_.path().string()});
  EXPECT_EQ(d.code, 4) << d.err;
  EXPECT_EQ(nlohmann::json::parse(d.err)["error"]["kind"], "DegenerateDirectionError");
}

TEST(CliBinaryTest, ExitCodesFromProcess) {
  const std::string exe = REDIST_CLI_PATH;
  EXPECT_EQ(std::system((exe + " --help > /dev/null").c_str()), 0);
  const int rc = std::system((exe + " sweep --lambdas 0,-1 2> /dev/null").c_str());
  ASSERT_TRUE(WIFEXITED(rc));
  EXPECT_EQ(WEXITSTATUS(rc), 2);
}

}  // namespace
}  // namespace redist::cli
