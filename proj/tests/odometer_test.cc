// Copyright 2026 The RiskScope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "riskscope/odometer.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gtest/gtest.h"
#include "riskscope/fixtures.h"
#include "riskscope/report.h"

namespace riskscope {
namespace {

std::string FixedClock() { return "2026-01-01T00:00:00Z"; }

EpsilonAmount Eps(double v) { return *EpsilonAmount::FromDouble(v); }

std::string TempPath(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "riskscope_odometer_test";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove(p);
  return p.string();
}

TEST(EpsilonAmountTest, ParseAndFormat) {
  EXPECT_EQ(Eps(3).ToString(), "3.000");
  EXPECT_EQ(Eps(0.1).ToString(), "0.100");
  EXPECT_EQ(Eps(0.0001).ToString(), "0.0001");
  EXPECT_EQ(EpsilonAmount::Parse("0.7")->units(), 700000000);
  EXPECT_FALSE(EpsilonAmount::Parse("-1").ok());
  EXPECT_FALSE(EpsilonAmount::Parse("1e3").ok());
  EXPECT_FALSE(EpsilonAmount::Parse("0.0000000001").ok());
  // Sums of grid values stay exact regardless of order.
  EXPECT_EQ(Eps(0.1) + Eps(0.2), Eps(0.3));
  EXPECT_EQ(Eps(0.7) + Eps(0.1) + Eps(0.2), Eps(0.2) + Eps(0.1) + Eps(0.7));
}

TEST(TruncateTest, StrictFilter) {
  OdometerState s;
  const auto g = EpsilonGrid::Default37();
  EXPECT_EQ(TruncateGrid(g, s).values(), g.values());
  s.eps_c = Eps(0.7);
  const auto t = TruncateGrid(g, s);
  std::vector<double> want = {10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0.9, 0.8};
  EXPECT_EQ(t.values(), want);
  s.eps_c = Eps(10);
  EXPECT_TRUE(TruncateGrid(g, s).empty());
}

TEST(ChargeTest, SumsAndDuplicates) {
  OdometerState s;
  s = *Charge(s, "a", 1.0, 0, "rdr");
  s = *Charge(s, "b", 0.5, 0, "rdr");
  EXPECT_EQ(s.eps_c, Eps(1.5));
  EXPECT_EQ(s.entries.size(), 2u);
  EXPECT_EQ(Charge(s, "a", 1, 0, "rdr").status().code(), absl::StatusCode::kAlreadyExists);
  EXPECT_FALSE(Charge(s, "c", 0, 0, "rdr").ok());
  EXPECT_EQ(ComputeCompBound(s).value, Eps(1.5));
  EXPECT_FALSE(ComputeCompBound(s).infinite);
}

TEST(CompBoundTest, DeltaBudget) {
  OdometerState s;
  EXPECT_EQ(ComputeCompBound(s).value, Eps(0));
  s.delta_g = 1e-5;
  for (const char* id : {"a", "b", "c"}) s = *Charge(s, id, 1, 1e-5, "rdr");
  EXPECT_TRUE(ComputeCompBound(s).infinite);
  EXPECT_EQ(ComputeCompBound(s).ToJson(), "infinity");
  s.delta_g = 3e-5;
  EXPECT_FALSE(ComputeCompBound(s).infinite);
}

TEST(JournalTest, LineFormat) {
  OdometerState s;
  s = *Charge(s, "q-7", 3.0, 0, "svt", "t0");
  const auto j = s.entries[0].ToJson();
  EXPECT_EQ(j["query_id"], "q-7");
  EXPECT_EQ(j["eps"], "3.000");
  EXPECT_EQ(j["delta"], "0");
  EXPECT_EQ(j["alg"], "svt");
  EXPECT_EQ(j["ts"], "t0");
}

TEST(JournalTest, PersistAndReplay) {
  const std::string path = TempPath("replay.jsonl");
  {
    auto odo = Odometer::Open(path, "d1", 0, FixedClock);
    ASSERT_TRUE(odo.ok()) << odo.status();
    ASSERT_TRUE((*odo)->Charge("a", 0.1, 0, "rdr").ok());
    ASSERT_TRUE((*odo)->Charge("b", 0.2, 0, "rdr").ok());
    ASSERT_TRUE((*odo)->Charge("c", 2.386, 0, "svt").ok());
  }
  auto again = Odometer::Open(path, "d1", 0, FixedClock);
  ASSERT_TRUE(again.ok()) << again.status();
  const auto s = (*again)->Snapshot();
  EXPECT_EQ(s.entries.size(), 3u);
  EXPECT_EQ(s.eps_c, Eps(2.686));
  // The fold from entry 0 reproduces the running total.
  EpsilonAmount fold;
  for (const auto& e : s.entries) fold = fold + e.eps;
  EXPECT_EQ(fold, s.eps_c);
}

TEST(JournalTest, CorruptedTotalIsDataLoss) {
  const std::string path = TempPath("corrupt.jsonl");
  std::ofstream(path) << R"({"query_id":"a","eps":"1.000","delta":"0","alg":"rdr","ts":"t","eps_c":"2.000"})"
                      << "\n";
  EXPECT_EQ(Odometer::Open(path, "d", 0).status().code(), absl::StatusCode::kDataLoss);
}

TEST(JournalTest, MissingFileIsEmpty) {
  auto odo = Odometer::Open(TempPath("missing.jsonl"), "d", 0);
  ASSERT_TRUE(odo.ok());
  EXPECT_EQ((*odo)->Snapshot().eps_c, Eps(0));
}

class AnswerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dataset_ = PatientDataset();
    ctx_ = *PrepareQuery(dataset_, PatientCountQuery(), {});
  }
  AnswerRequest Request(std::string id) {
    AnswerRequest r;
    r.query_id = std::move(id);
    r.preference = MinMaxRatio{0.9};
    return r;
  }
  Dataset dataset_ = PatientDataset();
  QueryContext ctx_;
  EpsilonGrid grid_ = *EpsilonGrid::Create({1, 0.1, 0.01});
};

TEST_F(AnswerTest, SecondQueryRejectedAfterTruncation) {
  Odometer odo("p", 0, FixedClock);
  auto first = AnswerQuery(odo, ctx_, grid_, Request("q1"));
  ASSERT_TRUE(first.ok()) << first.status();
  EXPECT_TRUE(first->answered);
  EXPECT_EQ(*first->result.chosen_epsilon, 0.1);
  EXPECT_EQ(odo.Snapshot().eps_c, Eps(0.1));
  auto second = AnswerQuery(odo, ctx_, grid_, Request("q2"));
  ASSERT_TRUE(second.ok());
  EXPECT_FALSE(second->answered);
  EXPECT_EQ(second->candidates, std::vector<double>{1});
  EXPECT_FALSE(second->result.output.has_value());
  EXPECT_EQ(odo.Snapshot().eps_c, Eps(0.1));
  EXPECT_EQ(odo.Snapshot().entries.size(), 1u);
}

TEST_F(AnswerTest, EmptyGridRejectsWithoutCharge) {
  Odometer odo("p", 0, FixedClock);
  ASSERT_TRUE(odo.Charge("seed", 10, 0, "rdr").ok());
  auto d = AnswerQuery(odo, ctx_, EpsilonGrid::Default37(), Request("q"));
  ASSERT_TRUE(d.ok());
  EXPECT_FALSE(d->answered);
  EXPECT_TRUE(d->candidates.empty());
  EXPECT_EQ(odo.Snapshot().entries.size(), 1u);
}

TEST_F(AnswerTest, GaussianNeedsDeltaBudget) {
  Odometer odo("p", 0, FixedClock);
  PrepareOptions go;
  go.family = MechanismFamily::kGaussian;
  auto gctx = PrepareQuery(dataset_, PatientCountQuery(), go);
  AnswerRequest r = Request("g");
  r.family = MechanismSpec::Gaussian(1, 1e-5);
  r.preference = MinMaxRatio{0.1};
  auto d = AnswerQuery(odo, *gctx, EpsilonGrid::Default37(), r);
  ASSERT_TRUE(d.ok());
  EXPECT_FALSE(d->answered);
  EXPECT_TRUE(odo.Snapshot().entries.empty());
}

TEST_F(AnswerTest, SvtChargeIsEpsPlusSvt) {
  Odometer odo("p", 0, FixedClock);
  AnswerRequest r = Request("s");
  r.algorithm = Algorithm::kSvt;
  r.eps_svt = 1;
  r.tau_var = 1;  // variance of values in (0,1] never exceeds 1/4
  r.seed = 5;
  auto d = AnswerQuery(odo, ctx_, EpsilonGrid::Default37(), r);
  ASSERT_TRUE(d.ok()) << d.status();
  if (d->answered) {
    EXPECT_EQ(odo.Snapshot().entries[0].eps, Eps(*d->result.chosen_epsilon + 1));
    EXPECT_EQ(odo.Snapshot().entries[0].algorithm, "svt");
  }
}

TEST_F(AnswerTest, ErrorsBecomeRejections) {
  Query q = PatientCountQuery();
  q.kind = QueryKind::kAvg;
  q.target = "D";
  q.predicate->literals = {int64_t{1}};
  // Removing the only match leaves an empty AVG; preparation fails, which the
  // caller turns into a rejection.
  EXPECT_FALSE(PrepareQuery(dataset_, q, {}).ok());
}

TEST(ReportTest, PatientRows) {
  const Dataset d = PatientDataset();
  auto ctx = PrepareQuery(d, PatientCountQuery(), {});
  auto r = BuildAnalysisReport(*ctx, MechanismSpec::Laplace(1),
                               *EpsilonGrid::Create({1, 0.1, 0.01}), {});
  ASSERT_TRUE(r.ok()) << r.status();
  const auto& j = *r;
  EXPECT_EQ(j["report_version"], kReportVersion);
  ASSERT_EQ(j["rows"].size(), 4u);
  EXPECT_EQ(j["rows"][0]["epsilon"], "infinity");
  EXPECT_EQ(j["rows"][1]["rdr_min"], 1.0);
  EXPECT_EQ(j["rows"][1]["rdr_max"], 2.0);
  EXPECT_NEAR(j["rows"][2]["ratio"].get<double>(), 10.0 / 11, 1e-12);
  EXPECT_EQ(j["rows"][3]["rdr_max"], 101.0);
  EXPECT_EQ(j["rows"][1]["histogram"].size(), 16u);
  EXPECT_FALSE(j["no_candidates"].get<bool>());
  // Byte-stable.
  EXPECT_EQ(BuildAnalysisReport(*ctx, MechanismSpec::Laplace(1),
                                *EpsilonGrid::Create({1, 0.1, 0.01}), {})
                ->dump(),
            j.dump());
}

TEST(ReportTest, TruncatedAndEmpty) {
  const Dataset d = PatientDataset();
  auto ctx = PrepareQuery(d, PatientCountQuery(), {});
  AnalysisOptions opts;
  OdometerState s;
  s.eps_c = Eps(0.1);
  opts.odometer = s;
  auto r = BuildAnalysisReport(*ctx, MechanismSpec::Laplace(1),
                               *EpsilonGrid::Create({1, 0.1, 0.01}), opts);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ((*r)["rows"].size(), 2u);  // infinity + eps=1
  s.eps_c = Eps(5);
  opts.odometer = s;
  r = BuildAnalysisReport(*ctx, MechanismSpec::Laplace(1), *EpsilonGrid::Create({1, 0.1, 0.01}),
                          opts);
  EXPECT_TRUE((*r)["no_candidates"].get<bool>());
}

}  // namespace
}  // namespace riskscope
