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

#include "riskscope/service.h"

#include <filesystem>
#include <thread>

#include "gtest/gtest.h"
#include "httplib.h"
#include "service_harness.h"

namespace riskscope {
namespace {

using ::riskscope::testing::LeakedKeys;
using ::riskscope::testing::ServiceHarness;

nlohmann::json RdrAnswer(double tau_p, uint64_t seed = 1) {
  return {{"algorithm", "rdr"},
          {"preference", {{"type", "min_max_ratio"}, {"tau_p", tau_p}}},
          {"grid", {1, 0.1, 0.01}},
          {"seed", seed}};
}

TEST(ServiceTest, AuthAndRoles) {
  ServiceHarness h;
  HttpRequest anon{"GET", "/datasets", {}, "", ""};
  EXPECT_EQ(h.service().Handle(anon).status, 401);
  anon.authorization = "Bearer nope";
  EXPECT_EQ(h.service().Handle(anon).status, 401);
  const std::string d = h.RegisterPatients();
  ASSERT_EQ(d, "d1");
  // Analysts cannot reach controller endpoints, and the reverse for submit.
  EXPECT_EQ(h.Call("GET", "/odometer/d1", Role::kAnalyst).status, 403);
  EXPECT_EQ(h.Call("POST", "/datasets", Role::kAnalyst, {{"csv", ""}}).status, 403);
  const std::string t = h.Submit(d, PatientCountQuery());
  EXPECT_EQ(h.Call("GET", "/queries/" + t + "/analysis", Role::kAnalyst).status, 403);
  EXPECT_EQ(h.Call("POST", "/queries/" + t + "/answer", Role::kAnalyst, RdrAnswer(0.9)).status,
            403);
  EXPECT_EQ(h.Call("POST", "/queries", Role::kController,
                   {{"dataset_id", d}, {"query", PatientCountQuery().ToJson()}})
                .status,
            403);
  EXPECT_EQ(h.Call("GET", "/nowhere", Role::kController).status, 404);
  EXPECT_EQ(h.Call("POST", "/odometer/d1", Role::kController).status, 405);
  const auto err = h.Call("GET", "/odometer/zz", Role::kController);
  EXPECT_EQ(err.status, 404);
  EXPECT_TRUE(err.body["error"].contains("code"));
  EXPECT_TRUE(err.body["error"].contains("message"));
}

TEST(ServiceTest, DatasetRegistration) {
  ServiceHarness h;
  auto bad = h.Call("POST", "/datasets", Role::kController,
                    {{"csv", "P,D\nA,0\n"}, {"schema", {{"columns", 3}}}});
  EXPECT_EQ(bad.status, 400);
  auto empty = h.Call("POST", "/datasets", Role::kController,
                      {{"csv", "P,D\n"}, {"schema", PatientSchema().ToJson()}});
  EXPECT_EQ(empty.status, 400);
  const std::string a = h.RegisterPatients();
  const std::string b = h.RegisterPatients();
  EXPECT_NE(a, b);
  // Independent journals.
  const std::string t = h.Submit(a, PatientCountQuery());
  ASSERT_EQ(h.Call("POST", "/queries/" + t + "/answer", Role::kController, RdrAnswer(0.9)).status,
            200);
  EXPECT_EQ(h.Call("GET", "/odometer/" + a, Role::kController).body["eps_c"], "0.100");
  EXPECT_EQ(h.Call("GET", "/odometer/" + b, Role::kController).body["eps_c"], "0.000");
}

TEST(ServiceTest, SubmitValidation) {
  ServiceHarness h;
  const std::string d = h.RegisterPatients();
  Query q = PatientCountQuery();
  q.predicate->attr = "unknown";
  auto res = h.Call("POST", "/queries", Role::kAnalyst, {{"dataset_id", d}, {"query", q.ToJson()}});
  EXPECT_EQ(res.status, 422);
  res = h.Call("POST", "/queries", Role::kAnalyst, {{"dataset_id", d}, {"query", {{"kind", "median"}}}});
  EXPECT_EQ(res.status, 400);
  res = h.Call("POST", "/queries", Role::kAnalyst,
               {{"dataset_id", "d9"}, {"query", PatientCountQuery().ToJson()}});
  EXPECT_EQ(res.status, 404);
  HttpRequest raw{"POST", "/queries", {}, "Bearer analyst-token", "not json"};
  EXPECT_EQ(h.service().Handle(raw).status, 400);
  res = h.Call("POST", "/queries", Role::kAnalyst,
               {{"dataset_id", d}, {"query", PatientCountQuery().ToJson()}});
  EXPECT_EQ(res.status, 201);
  EXPECT_EQ(res.body["state"], "Submitted");
}

TEST(ServiceTest, AnalysisMatchesPatientTable) {
  ServiceHarness h;
  const std::string d = h.RegisterPatients();
  const std::string t = h.Submit(d, PatientCountQuery());
  auto res = h.Call("GET", "/queries/" + t + "/analysis", Role::kController, nullptr,
                    {{"grid", "1,0.1,0.01"}});
  ASSERT_EQ(res.status, 200) << res.body.dump();
  const auto& rows = res.body["rows"];
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0]["rdr_max"], 1.0);
  EXPECT_EQ(rows[1]["rdr_min"], 1.0);
  EXPECT_EQ(rows[1]["rdr_max"], 2.0);
  EXPECT_EQ(rows[2]["rdr_max"], 11.0);
  EXPECT_EQ(rows[3]["rdr_max"], 101.0);
  EXPECT_EQ(h.Call("GET", "/queries/" + t, Role::kAnalyst).body["state"], "Analyzed");
  // Cached: same object.
  EXPECT_EQ(h.Call("GET", "/queries/" + t + "/analysis", Role::kController, nullptr,
                   {{"grid", "1,0.1,0.01"}})
                .body,
            res.body);
  EXPECT_EQ(h.Call("GET", "/queries/" + t + "/analysis", Role::kController, nullptr,
                   {{"grid", "1,x"}})
                .status,
            422);
}

TEST(ServiceTest, AnalysisReflectsTruncation) {
  ServiceHarness h;
  const std::string d = h.RegisterPatients();
  const std::string t1 = h.Submit(d, PatientCountQuery());
  ASSERT_EQ(h.Call("POST", "/queries/" + t1 + "/answer", Role::kController, RdrAnswer(0.9)).status,
            200);
  const std::string t2 = h.Submit(d, PatientCountQuery());
  auto res = h.Call("GET", "/queries/" + t2 + "/analysis", Role::kController, nullptr,
                    {{"grid", "1,0.1,0.01"}});
  ASSERT_EQ(res.status, 200);
  EXPECT_EQ(res.body["rows"].size(), 2u);  // no-DP row and eps = 1
  EXPECT_EQ(res.body["eps_c"], "0.100");
  const std::string t3 = h.Submit(d, PatientCountQuery());
  auto ans = h.Call("POST", "/queries/" + t2 + "/answer", Role::kController, RdrAnswer(0.9));
  EXPECT_EQ(ans.body["state"], "Rejected");
  auto big = h.Call("POST", "/queries/" + t3 + "/answer", Role::kController,
                    {{"algorithm", "rdr"},
                     {"preference", {{"type", "min_max_ratio"}, {"tau_p", 0.1}}},
                     {"grid", {1, 0.1, 0.01}}});
  EXPECT_EQ(big.body["state"], "Answered");  // eps = 1 passes tau_p = 0.1
  const std::string t4 = h.Submit(d, PatientCountQuery());
  res = h.Call("GET", "/queries/" + t4 + "/analysis", Role::kController, nullptr,
               {{"grid", "1,0.1,0.01"}});
  EXPECT_TRUE(res.body["no_candidates"].get<bool>());
}

TEST(ServiceTest, AnswerFlowAndIdempotence) {
  ServiceHarness h;
  const std::string d = h.RegisterPatients();
  const std::string t = h.Submit(d, PatientCountQuery());
  auto res = h.Call("POST", "/queries/" + t + "/answer", Role::kController, RdrAnswer(0.9, 7));
  ASSERT_EQ(res.status, 200) << res.body.dump();
  EXPECT_EQ(res.body["state"], "Answered");
  EXPECT_EQ(res.body["chosen_epsilon"], 0.1);
  EXPECT_FALSE(res.body["analyst_view"].contains("epsilon"));
  EXPECT_EQ(res.body["seed"], 7);
  auto again = h.Call("POST", "/queries/" + t + "/answer", Role::kController, RdrAnswer(0.9));
  EXPECT_EQ(again.status, 409);
  auto odo = h.Call("GET", "/odometer/" + d, Role::kController).body;
  EXPECT_EQ(odo["entries"].size(), 1u);
  EXPECT_EQ(odo["eps_c"], "0.100");
  EXPECT_EQ(odo["comp_bound"], "0.100");
}

TEST(ServiceTest, SvtAnswerReleasesEpsilon) {
  ServiceHarness h;
  const std::string d = h.RegisterPatients();
  const std::string t = h.Submit(d, PatientCountQuery());
  auto res = h.Call("POST", "/queries/" + t + "/answer", Role::kController,
                    {{"algorithm", "svt"}, {"eps_svt", 1}, {"tau_var", 1}, {"seed", 3}});
  ASSERT_EQ(res.status, 200) << res.body.dump();
  ASSERT_EQ(res.body["state"], "Answered") << res.body.dump();
  const double eps = res.body["analyst_view"]["epsilon"].get<double>();
  EXPECT_EQ(res.body["eps_charged"].get<double>(), eps + 1);
  auto view = h.Call("GET", "/queries/" + t, Role::kAnalyst).body;
  EXPECT_EQ(view["epsilon"].get<double>(), eps);
}

TEST(ServiceTest, OdometerCompInfinity) {
  ServiceHarness h;
  const std::string d = h.RegisterPatients(1e-5);
  // First answer at eps = 1, the second above it; each spends delta = 1e-5.
  for (auto grid : {nlohmann::json({1}), nlohmann::json({10, 5})}) {
    const std::string t = h.Submit(d, PatientCountQuery());
    auto res = h.Call("POST", "/queries/" + t + "/answer", Role::kController,
                      {{"algorithm", "rdr"},
                       {"mechanism", "gaussian"},
                       {"delta", 1e-5},
                       {"grid", grid},
                       {"preference", {{"type", "min_max_ratio"}, {"tau_p", 0.01}}}});
    ASSERT_EQ(res.body["state"], "Answered") << res.body.dump();
  }
  auto odo = h.Call("GET", "/odometer/" + d, Role::kController).body;
  EXPECT_EQ(odo["eps_c"], "11.000");
  EXPECT_EQ(odo["comp_bound"], "infinity");
}

TEST(ServiceTest, EmptyAvgRejectsWithoutCharge) {
  ServiceHarness h;
  const std::string d = h.RegisterPatients();
  Query q = PatientCountQuery();
  q.kind = QueryKind::kAvg;
  q.target = "D";
  const std::string t = h.Submit(d, q);
  EXPECT_EQ(h.Call("GET", "/queries/" + t + "/analysis", Role::kController).status, 422);
  auto res = h.Call("POST", "/queries/" + t + "/answer", Role::kController, RdrAnswer(0.5));
  EXPECT_EQ(res.body["state"], "Rejected");
  EXPECT_EQ(h.Call("GET", "/odometer/" + d, Role::kController).body["entries"].size(), 0u);
}

TEST(ServiceTest, AnalystPayloadsNeverLeak) {
  ServiceHarness h;
  const std::string d = h.RegisterPatients();
  const std::string submitted = h.Submit(d, PatientCountQuery());
  const std::string analyzed = h.Submit(d, PatientCountQuery());
  h.Call("GET", "/queries/" + analyzed + "/analysis", Role::kController);
  const std::string rdr = h.Submit(d, PatientCountQuery());
  ASSERT_EQ(h.Call("POST", "/queries/" + rdr + "/answer", Role::kController, RdrAnswer(0.9))
                .body["state"],
            "Answered");
  const std::string rejected = h.Submit(d, PatientCountQuery());
  ASSERT_EQ(h.Call("POST", "/queries/" + rejected + "/answer", Role::kController, RdrAnswer(0.9))
                .body["state"],
            "Rejected");
  for (const auto& id : {submitted, analyzed, rdr, rejected}) {
    auto res = h.Call("GET", "/queries/" + id, Role::kAnalyst);
    EXPECT_TRUE(LeakedKeys(res.body, false).empty()) << res.body.dump();
  }
  auto list = h.Call("GET", "/queries", Role::kAnalyst);
  EXPECT_TRUE(LeakedKeys(list.body, false).empty()) << list.body.dump();
  auto rdr_view = h.Call("GET", "/queries/" + rdr, Role::kAnalyst).body;
  ASSERT_TRUE(rdr_view.contains("output"));
  EXPECT_NE(rdr_view["output"][0].get<double>(), 1.0);  // noisy, not q(x)
  auto rejected_view = h.Call("GET", "/queries/" + rejected, Role::kAnalyst).body;
  EXPECT_FALSE(rejected_view.contains("output"));
}

TEST(ServiceTest, PersistsAcrossRestart) {
  const auto dir = std::filesystem::temp_directory_path() / "riskscope_service_test";
  std::filesystem::remove_all(dir);
  ServiceConfig c;
  c.tokens = {{"c", Role::kController}, {"a", Role::kAnalyst}};
  c.data_dir = dir.string();
  auto call = [](Service& s, std::string method, std::string path, std::string token,
                 nlohmann::json body) {
    return s.Handle({method, path, {}, "Bearer " + token, body.is_null() ? "" : body.dump()});
  };
  {
    auto s = *Service::Create(c);
    auto reg = call(*s, "POST", "/datasets", "c",
                    {{"csv", SerializeCsv(PatientDataset())}, {"schema", PatientSchema().ToJson()}});
    ASSERT_EQ(reg.status, 201);
    auto t = call(*s, "POST", "/queries", "a",
                  {{"dataset_id", "d1"}, {"query", PatientCountQuery().ToJson()}});
    auto ans = call(*s, "POST", "/queries/t1/answer", "c", RdrAnswer(0.9));
    ASSERT_EQ(ans.body["state"], "Answered");
  }
  auto s = *Service::Create(c);
  auto odo = call(*s, "GET", "/odometer/d1", "c", nullptr);
  EXPECT_EQ(odo.body["eps_c"], "0.100");
  auto t = call(*s, "POST", "/queries", "a",
                {{"dataset_id", "d1"}, {"query", PatientCountQuery().ToJson()}});
  EXPECT_EQ(t.body["ticket_id"], "t2");  // does not reuse a journaled id
}

TEST(ServiceTest, LiveHttpRoundTrip) {
  ServiceConfig c;
  c.tokens = {{"ctl", Role::kController}, {"ana", Role::kAnalyst}};
  auto service = *Service::Create(c);
  httplib::Server server;
  service->Mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  httplib::Headers ctl = {{"Authorization", "Bearer ctl"}};
  httplib::Headers ana = {{"Authorization", "Bearer ana"}};
  auto reg = client.Post("/datasets", ctl,
                         nlohmann::json({{"csv", SerializeCsv(PatientDataset())},
                                         {"schema", PatientSchema().ToJson()}})
                             .dump(),
                         "application/json");
  ASSERT_TRUE(reg);
  EXPECT_EQ(reg->status, 201);
  EXPECT_EQ(reg->get_header_value("Content-Type"), "application/json");
  auto sub = client.Post(
      "/queries", ana,
      nlohmann::json({{"dataset_id", "d1"}, {"query", PatientCountQuery().ToJson()}}).dump(),
      "application/json");
  ASSERT_TRUE(sub);
  EXPECT_EQ(sub->status, 201);
  auto analysis = client.Get("/queries/t1/analysis?grid=1,0.1,0.01", ctl);
  ASSERT_TRUE(analysis);
  EXPECT_EQ(analysis->status, 200);
  EXPECT_EQ(nlohmann::json::parse(analysis->body)["rows"].size(), 4u);
  auto ans = client.Post("/queries/t1/answer", ctl, RdrAnswer(0.9).dump(), "application/json");
  ASSERT_TRUE(ans);
  EXPECT_EQ(nlohmann::json::parse(ans->body)["state"], "Answered");
  auto view = client.Get("/queries/t1", ana);
  ASSERT_TRUE(view);
  EXPECT_TRUE(LeakedKeys(nlohmann::json::parse(view->body), false).empty());
  auto forbidden = client.Get("/odometer/d1", ana);
  ASSERT_TRUE(forbidden);
  EXPECT_EQ(forbidden->status, 403);

  server.stop();
  th.join();
}

}  // namespace
}  // namespace riskscope
