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

#include "riskscope/rdr.h"

#include <cmath>
#include <memory>

#include "gtest/gtest.h"
#include "riskscope/fixtures.h"
#include "test_util.h"

namespace riskscope {
namespace {

using ::riskscope::testing::RandomInstances;

std::shared_ptr<const PisTable> PatientPis() {
  static const Dataset* d = new Dataset(PatientDataset());
  auto p = ProjectQueryAttributes(*d, PatientCountQuery());
  return std::make_shared<const PisTable>(
      *PerInstanceSensitivity(*p, PatientCountQuery(), {Norm::kL1, 1}));
}

std::vector<double> Rows(const RdrProfile& p) {
  std::vector<double> out;
  for (size_t i = 0; i < p.num_rows(); ++i) out.push_back(p.per_row(i));
  return out;
}

TEST(RdrProfileTest, PatientLaplaceColumns) {
  auto pis = PatientPis();
  EXPECT_EQ(Rows(*ComputeRdrProfile(pis, MechanismSpec::Laplace(kNoPrivacy), 1, 1)),
            (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(Rows(*ComputeRdrProfile(pis, MechanismSpec::Laplace(1), 1, 1)),
            (std::vector<double>{1, 1, 2}));
  EXPECT_EQ(Rows(*ComputeRdrProfile(pis, MechanismSpec::Laplace(0.1), 1, 1)),
            (std::vector<double>{10, 10, 11}));
  auto p01 = ComputeRdrProfile(pis, MechanismSpec::Laplace(0.01), 1, 1);
  EXPECT_EQ(Rows(*p01), (std::vector<double>{100, 100, 101}));
  EXPECT_NEAR(p01->ratio(), 100.0 / 101, 1e-12);
}

TEST(RdrProfileTest, RejectsNonPositiveEpsilonAndNormMismatch) {
  auto pis = PatientPis();
  EXPECT_FALSE(ComputeRdrProfile(pis, MechanismSpec::Laplace(0), 1, 1).ok());
  EXPECT_FALSE(ComputeRdrProfile(pis, MechanismSpec::Gaussian(1, 1e-5), 1, 1).ok());
}

TEST(RdrProfileTest, GaussianZeroPisIsNoiseTerm) {
  auto pis = std::make_shared<PisTable>();
  pis->norm = Norm::kL2;
  pis->per_unique = {0};
  pis->row_key = {0, 0, 0};
  pis->unique_count = {3};
  const auto spec = MechanismSpec::Gaussian(0.5, 1e-5);
  const double s2 = ComputeNoiseParams(spec, 1)->variance_sigma2;
  auto p = ComputeRdrProfile(pis, spec, 4, 1);
  ASSERT_TRUE(p.ok());
  for (double v : Rows(*p)) EXPECT_DOUBLE_EQ(v, std::sqrt(4 * s2));
  EXPECT_EQ(p->ratio(), 1);
}

TEST(RdrProfileTest, GaussianLimitApproachesPis) {
  auto pis = std::make_shared<PisTable>();
  pis->norm = Norm::kL2;
  pis->per_unique = {0.5, 2, 7};
  pis->row_key = {0, 1, 2};
  pis->unique_count = {1, 1, 1};
  auto p = ComputeRdrProfile(pis, MechanismSpec::Gaussian(1e6, 1e-5), 1, 1);
  ASSERT_TRUE(p.ok());
  for (size_t u = 0; u < 3; ++u) {
    EXPECT_NEAR(p->per_unique()[u], pis->per_unique[u], 1e-3 * pis->per_unique[u]);
  }
}

TEST(RdrProfileTest, StatisticsAndHistogram) {
  auto p = ComputeRdrProfile(PatientPis(), MechanismSpec::Laplace(0.1), 1, 1);
  ASSERT_TRUE(p.ok());
  EXPECT_EQ(p->rdr_min(), 10);
  EXPECT_EQ(p->rdr_max(), 11);
  EXPECT_NEAR(p->normalized_variance(), 2.0 / 1089, 1e-15);
  const auto h = p->histogram();
  EXPECT_EQ(h.front(), 2u);
  EXPECT_EQ(h.back(), 1u);
  EXPECT_EQ(*p->median_of({0, 1, 2}), 10);
  EXPECT_EQ(*p->median_of({1, 2}), 10);  // lower median
  EXPECT_FALSE(p->median_of({}).ok());
}

TEST(RdrProfileTest, RatioNonIncreasingInEpsilon) {
  RandomInstances gen(99);
  const auto grid = std::vector<double>{0.001, 0.01, 0.05, 0.1, 0.5, 1, 2, 5, 10};
  for (int t = 0; t < 50; ++t) {
    const Dataset d = gen.SmallDataset(5 + gen.Below(60));
    const Query q = gen.RandomQuery();
    auto proj = ProjectQueryAttributes(d, q);
    auto table = PerInstanceSensitivity(*proj, q, {Norm::kL1, 1});
    if (!table.ok()) continue;
    auto pis = std::make_shared<const PisTable>(*std::move(table));
    const double delta = *GlobalSensitivity(q, d.schema(), d.num_rows(), Norm::kL1);
    double prev = 2;
    for (double eps : grid) {  // ascending epsilon
      const double r = ComputeRdrProfile(pis, MechanismSpec::Laplace(eps), q.k(), delta)->ratio();
      EXPECT_LE(r, prev + 1e-15);
      prev = r;
    }
  }
}

TEST(ExPostTest, HandValues) {
  const QueryOutput full{{1}}, neighbor{{0}};
  EXPECT_NEAR(*ExPostLoss(QueryOutput{{1.3}}, full, neighbor, MechanismSpec::Laplace(1), 1),
              1.0, 1e-12);
  EXPECT_EQ(*ExPostLoss(QueryOutput{{1.3}}, full, full, MechanismSpec::Laplace(1), 1), 0);
  // sigma^2 = 2 needs 2 ln(1.25/delta) / eps^2 = 2 with delta = 0.05, eps^2 = ln 25.
  const auto g = MechanismSpec::Gaussian(std::sqrt(std::log(25.0)), 0.05);
  EXPECT_NEAR(ComputeNoiseParams(g, 1)->variance_sigma2, 2, 1e-12);
  EXPECT_NEAR(*ExPostLoss(QueryOutput{{2}}, full, neighbor, g, 1), 0.75, 1e-12);
  EXPECT_FALSE(ExPostLoss(QueryOutput{{2, 3}}, full, neighbor, g, 1).ok());
}

TEST(ExPostTest, AbsoluteValueBreaksOrderingOnAConcreteOutput) {
  // Patient COUNT: q(x) = 1, q(x_{-A}) = 1, q(x_{-C}) = 0, realized o = 0.
  const QueryOutput full{{1}}, minus_a{{1}}, minus_c{{0}}, o{{0}};
  const auto spec = MechanismSpec::Laplace(1);
  const double rdr_a = *OutputDependentRdr(o, minus_a, Norm::kL1);
  const double rdr_c = *OutputDependentRdr(o, minus_c, Norm::kL1);
  EXPECT_GT(rdr_a, rdr_c);
  // |loss| orders the other way ...
  EXPECT_LT(*ExPostLoss(o, full, minus_a, spec, 1), *ExPostLoss(o, full, minus_c, spec, 1));
  // ... while the signed log-ratio follows the oRDR order.
  EXPECT_GT(*SignedPrivacyLoss(o, full, minus_a, spec, 1),
            *SignedPrivacyLoss(o, full, minus_c, spec, 1));
}

TEST(ExPostTest, SignedLossFollowsOutputDependentRdr) {
  RandomInstances gen(314);
  size_t pairs = 0;
  for (int t = 0; t < 400; ++t) {
    const Dataset d = gen.SmallDataset(2 + gen.Below(49));
    const Query q = gen.RandomQuery();
    auto full = EvaluateQuery(d, q);
    if (!full.ok()) continue;
    std::vector<QueryOutput> neighbors;
    bool ok = true;
    for (size_t i = 0; i < d.num_rows() && ok; ++i) {
      auto v = EvaluateQuery(*d.WithoutRows({i}), q);
      ok = v.ok();
      if (ok) neighbors.push_back(*v);
    }
    if (!ok) continue;
    const bool laplace = gen.Below(2) == 0;
    const auto spec = laplace ? MechanismSpec::Laplace(0.5)
                              : MechanismSpec::Gaussian(0.5, 1e-5);
    const double delta = *GlobalSensitivity(q, d.schema(), d.num_rows(), spec.norm());
    NoiseStream s = NoiseStream::Derive(t, "expost", StreamPurpose::kTest, 0);
    const QueryOutput o = *ApplyMechanism(*full, spec, delta, s);
    for (size_t i = 0; i < neighbors.size(); ++i) {
      for (size_t j = 0; j < neighbors.size(); ++j) {
        const double ri = *OutputDependentRdr(o, neighbors[i], spec.norm());
        const double rj = *OutputDependentRdr(o, neighbors[j], spec.norm());
        if (!(ri > rj)) continue;
        ++pairs;
        EXPECT_GT(*SignedPrivacyLoss(o, *full, neighbors[i], spec, delta),
                  *SignedPrivacyLoss(o, *full, neighbors[j], spec, delta));
      }
    }
  }
  EXPECT_GT(pairs, 1000u);
}

}  // namespace
}  // namespace riskscope
