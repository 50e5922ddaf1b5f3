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

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "httplib.h"
#include "riskscope/report.h"

namespace riskscope {

namespace fs = std::filesystem;

struct Service::DatasetEntry {
  std::string id;
  std::unique_ptr<Dataset> dataset;
  std::unique_ptr<Odometer> odometer;
  double delta_g = 0;
};

struct Service::Ticket {
  std::string id;
  std::string dataset_id;
  Query query;
  std::mutex mu;  // serializes analysis and decisions on this ticket
  TicketState state = TicketState::kSubmitted;
  // Prepared contexts keyed by mechanism family and sensitivity override.
  std::map<std::string, std::shared_ptr<const QueryContext>> contexts;
  std::map<std::string, nlohmann::json> analyses;
  std::optional<nlohmann::json> decision;  // controller view
  std::optional<AnalystRelease> release;   // set only after the charge
};

namespace {

HttpResponse Error(int status, const std::string& code, const std::string& message) {
  return {status,
          {{"error", {{"code", code}, {"message", message}}}}};
}

HttpResponse FromStatus(const absl::Status& st, int fallback = 400) {
  switch (st.code()) {
    case absl::StatusCode::kNotFound:
      return Error(404, "not_found", std::string(st.message()));
    case absl::StatusCode::kAlreadyExists:
      return Error(409, "conflict", std::string(st.message()));
    case absl::StatusCode::kFailedPrecondition:
      return Error(422, "failed_precondition", std::string(st.message()));
    case absl::StatusCode::kInvalidArgument:
      return Error(fallback, fallback == 422 ? "unprocessable" : "bad_request",
                   std::string(st.message()));
    default:
      return Error(500, "internal", std::string(st.message()));
  }
}

absl::StatusOr<nlohmann::json> ParseBody(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("body must be a JSON object");
  }
  return j;
}

absl::StatusOr<EpsilonGrid> GridFrom(const nlohmann::json& j, const EpsilonGrid& fallback) {
  if (j.is_null()) return fallback;
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "default37") return EpsilonGrid::Default37();
    std::vector<double> v;
    for (absl::string_view part : absl::StrSplit(s, ',')) {
      double x = 0;
      auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), x);
      if (ec != std::errc() || p != part.data() + part.size()) {
        return absl::InvalidArgumentError(absl::StrCat("bad grid value '", std::string(part), "'"));
      }
      v.push_back(x);
    }
    return EpsilonGrid::Create(std::move(v));
  }
  return EpsilonGrid::FromJson(j);
}

struct MechanismChoice {
  MechanismSpec spec;
  std::optional<double> sensitivity_override;
  std::string key() const {
    return absl::StrCat(std::string(FamilyName(spec.family)), "|", nlohmann::json(spec.delta).dump(), "|",
                        sensitivity_override ? nlohmann::json(*sensitivity_override).dump()
                                             : "auto");
  }
  std::string context_key() const {
    return absl::StrCat(std::string(FamilyName(spec.family)), "|",
                        sensitivity_override ? nlohmann::json(*sensitivity_override).dump()
                                             : "auto");
  }
};

absl::StatusOr<MechanismChoice> MechanismFrom(const nlohmann::json& o) {
  MechanismChoice c;
  const std::string name = o.value("mechanism", "laplace");
  auto fam = ParseFamily(name);
  if (!fam.ok()) return fam.status();
  c.spec.family = *fam;
  c.spec.epsilon = 1;
  const bool gaussian = *fam == MechanismFamily::kGaussian;
  c.spec.delta = o.contains("delta") && !o["delta"].is_null()
                     ? o["delta"].get<double>()
                     : (gaussian ? 1e-5 : 0.0);
  if (auto st = c.spec.Validate(); !st.ok()) return st;
  if (o.contains("sensitivity_override") && !o["sensitivity_override"].is_null()) {
    c.sensitivity_override = o["sensitivity_override"].get<double>();
  }
  return c;
}

// Query-string values arrive as strings; numbers are parsed back into JSON.
nlohmann::json ParamsToJson(const std::map<std::string, std::string>& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : params) {
    if (k == "delta" || k == "sensitivity_override") {
      auto num = nlohmann::json::parse(v, nullptr, false);
      j[k] = num.is_number() ? num : nlohmann::json(v);
    } else {
      j[k] = v;
    }
  }
  return j;
}

absl::StatusOr<std::string> ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot read ", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

absl::Status WriteFile(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
  out.flush();
  if (!out) return absl::InternalError(absl::StrCat("cannot write ", p.string()));
  return absl::OkStatus();
}

uint64_t NumericSuffix(std::string_view id, char prefix) {
  if (id.size() < 2 || id[0] != prefix) return 0;
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), v);
  return ec == std::errc() && p == id.data() + id.size() ? v : 0;
}

}  // namespace

std::string_view TicketStateName(TicketState s) {
  switch (s) {
    case TicketState::kSubmitted:
      return "Submitted";
    case TicketState::kAnalyzed:
      return "Analyzed";
    case TicketState::kAnswered:
      return "Answered";
    case TicketState::kRejected:
      return "Rejected";
  }
  return "?";
}

absl::StatusOr<ServiceConfig> ServiceConfig::FromJson(const nlohmann::json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("config must be an object");
  ServiceConfig c;
  try {
    if (j.contains("listen")) {
      const std::string listen = j["listen"].get<std::string>();
      const auto colon = listen.rfind(':');
      if (colon == std::string::npos) {
        return absl::InvalidArgumentError("listen must be host:port");
      }
      c.host = listen.substr(0, colon);
      c.port = std::stoi(listen.substr(colon + 1));
    }
    if (j.contains("tokens")) {
      for (const auto& [token, role] : j["tokens"].items()) {
        const std::string r = role.get<std::string>();
        if (r == "analyst") {
          c.tokens[token] = Role::kAnalyst;
        } else if (r == "controller") {
          c.tokens[token] = Role::kController;
        } else {
          return absl::InvalidArgumentError(absl::StrCat("unknown role '", r, "'"));
        }
      }
    }
    c.data_dir = j.value("data_dir", "");
    c.console_dir = j.value("console_dir", "");
    c.workers = j.value("workers", 1u);
    if (c.workers == 0) c.workers = DefaultWorkers();
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad config: ", e.what()));
  } catch (const std::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad config: ", e.what()));
  }
  if (j.contains("default_grid")) {
    auto g = GridFrom(j["default_grid"], EpsilonGrid::Default37());
    if (!g.ok()) return g.status();
    c.default_grid = *g;
  }
  return c;
}

absl::StatusOr<ServiceConfig> LoadServiceConfig(const std::string& path) {
  auto text = ReadFile(path);
  if (!text.ok()) return text.status();
  auto j = nlohmann::json::parse(*text, nullptr, false);
  if (j.is_discarded()) return absl::InvalidArgumentError("config is not valid JSON");
  return ServiceConfig::FromJson(j);
}

nlohmann::json AnalystTicketJson(const std::string& id, const std::string& dataset_id,
                                 const Query& query, TicketState state,
                                 const std::optional<AnalystRelease>& release) {
  nlohmann::json j = {{"ticket_id", id},
                      {"dataset_id", dataset_id},
                      {"query", query.ToJson()},
                      {"state", std::string(TicketStateName(state))}};
  if (state == TicketState::kAnswered && release) {
    j["output"] = release->output.values;
    if (release->epsilon) j["epsilon"] = *release->epsilon;
  }
  return j;
}

Service::Service(ServiceConfig config) : config_(std::move(config)) {}
Service::~Service() = default;

absl::StatusOr<std::unique_ptr<Service>> Service::Create(ServiceConfig config) {
  std::unique_ptr<Service> s(new Service(std::move(config)));
  if (!s->config_.data_dir.empty()) {
    if (auto st = s->LoadPersisted(); !st.ok()) return st;
  }
  return s;
}

absl::Status Service::LoadPersisted() {
  const fs::path root = fs::path(config_.data_dir) / "datasets";
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) return absl::InternalError(absl::StrCat("cannot create ", root.string()));
  for (const auto& dir : fs::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    const std::string id = dir.path().filename().string();
    auto schema_text = ReadFile(dir.path() / "schema.json");
    auto csv = ReadFile(dir.path() / "data.csv");
    auto meta_text = ReadFile(dir.path() / "meta.json");
    if (!schema_text.ok() || !csv.ok() || !meta_text.ok()) {
      return absl::DataLossError(absl::StrCat("incomplete dataset directory ", id));
    }
    auto schema = Schema::FromJson(nlohmann::json::parse(*schema_text, nullptr, false));
    if (!schema.ok()) return schema.status();
    auto d = LoadDataset(*csv, *schema);
    if (!d.ok()) return d.status();
    const auto meta = nlohmann::json::parse(*meta_text, nullptr, false);
    auto entry = std::make_shared<DatasetEntry>();
    entry->id = id;
    entry->delta_g = meta.value("delta_g", 0.0);
    entry->dataset = std::make_unique<Dataset>(*std::move(d));
    auto odo = Odometer::Open((dir.path() / "journal.jsonl").string(), id, entry->delta_g);
    if (!odo.ok()) return odo.status();
    entry->odometer = *std::move(odo);
    for (const auto& e : entry->odometer->Snapshot().entries) {
      next_ticket_ = std::max(next_ticket_, NumericSuffix(e.query_id, 't') + 1);
    }
    next_dataset_ = std::max(next_dataset_, NumericSuffix(id, 'd') + 1);
    datasets_[id] = std::move(entry);
  }
  return absl::OkStatus();
}

HttpResponse Service::Handle(const HttpRequest& req) {
  std::vector<std::string> parts;
  for (absl::string_view p : absl::StrSplit(req.path, '/', absl::SkipEmpty())) {
    parts.emplace_back(p);
  }
  const bool get = req.method == "GET";
  const bool post = req.method == "POST";
  if (parts.size() == 1 && parts[0] == "health") {
    return {200, {{"status", "ok"}}};
  }

  // Every other route needs a known bearer token.
  std::optional<Role> role;
  constexpr std::string_view kBearer = "Bearer ";
  if (req.authorization.rfind(kBearer, 0) == 0) {
    auto it = config_.tokens.find(req.authorization.substr(kBearer.size()));
    if (it != config_.tokens.end()) role = it->second;
  }

  enum class Need { kAny, kAnalyst, kController };
  struct Route {
    bool matched = false;
    bool method_ok = false;
    Need need = Need::kAny;
  };
  Route r;
  auto match = [&](bool path_ok, bool method_ok, Need need) {
    if (!path_ok || r.matched) return false;
    r = {true, method_ok, need};
    return true;
  };
  const size_t n = parts.size();
  const std::string p0 = n > 0 ? parts[0] : "";
  enum { kNone, kDatasets, kQueries, kQuery, kAnalysis, kAnswer, kOdometer } which = kNone;
  if (match(n == 1 && p0 == "datasets", get || post, post ? Need::kController : Need::kAny)) {
    which = kDatasets;
  } else if (match(n == 1 && p0 == "queries", get || post, post ? Need::kAnalyst : Need::kAny)) {
    which = kQueries;
  } else if (match(n == 2 && p0 == "queries", get, Need::kAny)) {
    which = kQuery;
  } else if (match(n == 3 && p0 == "queries" && parts[2] == "analysis", get, Need::kController)) {
    which = kAnalysis;
  } else if (match(n == 3 && p0 == "queries" && parts[2] == "answer", post, Need::kController)) {
    which = kAnswer;
  } else if (match(n == 2 && p0 == "odometer", get, Need::kController)) {
    which = kOdometer;
  }
  if (!r.matched) return Error(404, "not_found", absl::StrCat("no route ", req.path));
  if (!r.method_ok) return Error(405, "method_not_allowed", req.method);
  if (!role) return Error(401, "unauthorized", "missing or unknown bearer token");
  if ((r.need == Need::kController && *role != Role::kController) ||
      (r.need == Need::kAnalyst && *role != Role::kAnalyst)) {
    return Error(403, "forbidden", "role may not use this endpoint");
  }
  try {
    switch (which) {
      case kDatasets:
        return post ? PostDataset(req) : ListDatasets(*role);
      case kQueries:
        return post ? PostQuery(req) : ListQueries(*role);
      case kQuery:
        return GetQuery(parts[1], *role);
      case kAnalysis:
        return GetAnalysis(parts[1], req);
      case kAnswer:
        return PostAnswer(parts[1], req);
      case kOdometer:
        return GetOdometer(parts[1]);
      case kNone:
        break;
    }
  } catch (const nlohmann::json::exception& e) {
    return Error(400, "bad_request", e.what());
  }
  return Error(404, "not_found", req.path);
}

std::shared_ptr<Service::DatasetEntry> Service::FindDataset(const std::string& id) {
  std::lock_guard<std::mutex> l(mu_);
  auto it = datasets_.find(id);
  return it == datasets_.end() ? nullptr : it->second;
}

std::shared_ptr<Service::Ticket> Service::FindTicket(const std::string& id) {
  std::lock_guard<std::mutex> l(mu_);
  auto it = tickets_.find(id);
  return it == tickets_.end() ? nullptr : it->second;
}

HttpResponse Service::PostDataset(const HttpRequest& req) {
  auto body = ParseBody(req.body);
  if (!body.ok()) return FromStatus(body.status());
  if (!(*body).contains("csv") || !(*body)["csv"].is_string()) {
    return Error(400, "bad_request", "field 'csv' (string) is required");
  }
  auto schema = Schema::FromJson((*body).value("schema", nlohmann::json()));
  if (!schema.ok()) return FromStatus(schema.status());
  const double delta_g = (*body).value("delta_g", 0.0);
  if (!(delta_g >= 0 && delta_g < 1)) {
    return Error(400, "bad_request", "delta_g must be in [0, 1)");
  }
  const std::string csv = (*body)["csv"].get<std::string>();
  auto d = LoadDataset(csv, *schema);
  if (!d.ok()) return FromStatus(d.status());

  auto entry = std::make_shared<DatasetEntry>();
  entry->delta_g = delta_g;
  entry->dataset = std::make_unique<Dataset>(*std::move(d));
  std::lock_guard<std::mutex> l(mu_);
  entry->id = absl::StrCat("d", next_dataset_++);
  if (config_.data_dir.empty()) {
    entry->odometer = std::make_unique<Odometer>(entry->id, delta_g);
  } else {
    const fs::path dir = fs::path(config_.data_dir) / "datasets" / entry->id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) return Error(500, "internal", "cannot create dataset directory");
    for (auto st : {WriteFile(dir / "data.csv", csv),
                    WriteFile(dir / "schema.json", schema->ToJson().dump(2)),
                    WriteFile(dir / "meta.json", nlohmann::json({{"delta_g", delta_g}}).dump())}) {
      if (!st.ok()) return FromStatus(st);
    }
    auto odo = Odometer::Open((dir / "journal.jsonl").string(), entry->id, delta_g);
    if (!odo.ok()) return FromStatus(odo.status());
    entry->odometer = *std::move(odo);
  }
  datasets_[entry->id] = entry;
  return {201,
          {{"dataset_id", entry->id},
           {"n", entry->dataset->num_rows()},
           {"delta_g", delta_g}}};
}

HttpResponse Service::ListDatasets(Role role) {
  std::lock_guard<std::mutex> l(mu_);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [id, e] : datasets_) {
    nlohmann::json j = {{"dataset_id", id}, {"schema", e->dataset->schema().ToJson()}};
    if (role == Role::kController) {
      j["n"] = e->dataset->num_rows();
      j["delta_g"] = e->delta_g;
    }
    out.push_back(j);
  }
  return {200, {{"datasets", out}}};
}

HttpResponse Service::PostQuery(const HttpRequest& req) {
  auto body = ParseBody(req.body);
  if (!body.ok()) return FromStatus(body.status());
  const std::string dataset_id = (*body).value("dataset_id", "");
  auto d = FindDataset(dataset_id);
  if (!d) return Error(404, "not_found", absl::StrCat("unknown dataset '", dataset_id, "'"));
  auto q = Query::FromJson((*body).value("query", nlohmann::json()));
  if (!q.ok()) return FromStatus(q.status());
  if (auto st = q->Validate(d->dataset->schema()); !st.ok()) {
    return Error(422, "unprocessable", std::string(st.message()));
  }
  auto t = std::make_shared<Ticket>();
  t->dataset_id = dataset_id;
  t->query = *std::move(q);
  std::lock_guard<std::mutex> l(mu_);
  t->id = absl::StrCat("t", next_ticket_++);
  tickets_[t->id] = t;
  return {201, {{"ticket_id", t->id}, {"state", std::string(TicketStateName(t->state))}}};
}

HttpResponse Service::ListQueries(Role role) {
  std::vector<std::shared_ptr<Ticket>> all;
  {
    std::lock_guard<std::mutex> l(mu_);
    for (const auto& [id, t] : tickets_) all.push_back(t);
  }
  nlohmann::json out = nlohmann::json::array();
  for (const auto& t : all) {
    std::lock_guard<std::mutex> l(t->mu);
    nlohmann::json j = AnalystTicketJson(t->id, t->dataset_id, t->query, t->state, t->release);
    if (role == Role::kController && t->decision) j["decision"] = *t->decision;
    out.push_back(j);
  }
  return {200, {{"tickets", out}}};
}

HttpResponse Service::GetQuery(const std::string& id, Role role) {
  auto t = FindTicket(id);
  if (!t) return Error(404, "not_found", absl::StrCat("unknown ticket '", id, "'"));
  std::lock_guard<std::mutex> l(t->mu);
  nlohmann::json j = AnalystTicketJson(t->id, t->dataset_id, t->query, t->state, t->release);
  if (role == Role::kController && t->decision) j["decision"] = *t->decision;
  return {200, j};
}

absl::StatusOr<nlohmann::json> Service::Analyze(Ticket& t, DatasetEntry& d,
                                                const nlohmann::json& options) {
  auto grid = GridFrom(options.value("grid", nlohmann::json()), config_.default_grid);
  if (!grid.ok()) return grid.status();
  auto mech = MechanismFrom(options);
  if (!mech.ok()) return mech.status();

  std::shared_ptr<const QueryContext> ctx;
  auto cit = t.contexts.find(mech->context_key());
  if (cit != t.contexts.end()) {
    ctx = cit->second;
  } else {
    PrepareOptions po;
    po.family = mech->spec.family;
    po.workers = config_.workers;
    po.sensitivity_override = mech->sensitivity_override;
    auto prepared = PrepareQuery(*d.dataset, t.query, po);
    if (!prepared.ok()) return prepared.status();
    ctx = std::make_shared<const QueryContext>(*std::move(prepared));
    t.contexts[mech->context_key()] = ctx;
  }

  // The truncation depends on eps_c, so it is part of the cache key.
  const OdometerState state = d.odometer->Snapshot();
  const std::string key = absl::StrCat(nlohmann::json(grid->values()).dump(), "|", mech->key(),
                                       "|", state.eps_c.ToString());
  auto it = t.analyses.find(key);
  if (it != t.analyses.end()) return it->second;
  AnalysisOptions ao;
  ao.odometer = state;
  auto report = BuildAnalysisReport(*ctx, mech->spec, *grid, ao);
  if (!report.ok()) return report.status();
  (*report)["ticket_id"] = t.id;
  (*report)["dataset_id"] = t.dataset_id;
  t.analyses[key] = *report;
  if (t.state == TicketState::kSubmitted) t.state = TicketState::kAnalyzed;
  return *report;
}

HttpResponse Service::GetAnalysis(const std::string& id, const HttpRequest& req) {
  auto t = FindTicket(id);
  if (!t) return Error(404, "not_found", absl::StrCat("unknown ticket '", id, "'"));
  auto d = FindDataset(t->dataset_id);
  if (!d) return Error(404, "not_found", "dataset vanished");
  std::lock_guard<std::mutex> l(t->mu);
  auto report = Analyze(*t, *d, ParamsToJson(req.params));
  if (!report.ok()) return FromStatus(report.status(), 422);
  return {200, *report};
}

HttpResponse Service::PostAnswer(const std::string& id, const HttpRequest& req) {
  auto t = FindTicket(id);
  if (!t) return Error(404, "not_found", absl::StrCat("unknown ticket '", id, "'"));
  auto d = FindDataset(t->dataset_id);
  if (!d) return Error(404, "not_found", "dataset vanished");
  auto body = ParseBody(req.body.empty() ? "{}" : req.body);
  if (!body.ok()) return FromStatus(body.status());

  std::lock_guard<std::mutex> l(t->mu);
  if (t->state == TicketState::kAnswered || t->state == TicketState::kRejected) {
    return Error(409, "conflict",
                 absl::StrCat("ticket already ", std::string(TicketStateName(t->state))));
  }

  // Validate the request before touching any state.
  AnswerRequest ar;
  ar.query_id = t->id;
  auto alg = ParseAlgorithm((*body).value("algorithm", "rdr"));
  if (!alg.ok()) return FromStatus(alg.status());
  ar.algorithm = *alg;
  auto mech = MechanismFrom(*body);
  if (!mech.ok()) return FromStatus(mech.status());
  ar.family = mech->spec;
  ar.seed = (*body).value("seed", uint64_t{0});
  auto grid = GridFrom((*body).value("grid", nlohmann::json()), config_.default_grid);
  if (!grid.ok()) return FromStatus(grid.status());
  if (ar.algorithm == Algorithm::kRdr) {
    if (!(*body).contains("preference")) {
      return Error(400, "bad_request", "field 'preference' is required");
    }
    auto pref = PreferenceFromJson((*body)["preference"], *d->dataset);
    if (!pref.ok()) return FromStatus(pref.status());
    ar.preference = *std::move(pref);
  } else {
    ar.eps_svt = (*body).value("eps_svt", 1.0);
    ar.tau_var = (*body).value("tau_var", 1e-5);
    if ((*body).contains("preference")) {
      const auto& p = (*body)["preference"];
      if (p.value("type", "") == "normalized_variance") {
        ar.tau_var = p.value("tau_var", ar.tau_var);
      }
    }
  }

  Decision decision;
  // A Submitted ticket is analyzed first so the controller view always has
  // the report the decision was based on.
  auto report = Analyze(*t, *d, *body);
  if (!report.ok()) {
    decision.query_id = t->id;
    decision.algorithm = ar.algorithm;
    decision.seed = ar.seed;
    decision.reason = std::string(report.status().message());
    const auto s = d->odometer->Snapshot();
    decision.eps_c_before = decision.eps_c_after = s.eps_c;
    decision.comp_after = ComputeCompBound(s);
  } else {
    const auto& ctx = t->contexts.at(mech->context_key());
    auto made = AnswerQuery(*d->odometer, *ctx, *grid, ar);
    if (!made.ok()) return FromStatus(made.status());
    decision = *std::move(made);
  }
  // AnswerQuery has already journaled the charge; only now does the
  // release become readable.
  nlohmann::json cj = decision.ControllerJson();
  cj["mechanism"] = std::string(FamilyName(ar.family.family));
  cj["delta"] = ar.family.delta;
  if (ar.algorithm == Algorithm::kSvt) {
    cj["eps_svt"] = ar.eps_svt;
    cj["tau_var"] = ar.tau_var;
  }
  t->decision = cj;
  if (decision.answered) {
    t->release = ToAnalystRelease(decision.result);
    t->state = TicketState::kAnswered;
  } else {
    t->state = TicketState::kRejected;
  }
  nlohmann::json out = cj;
  out["ticket_id"] = t->id;
  out["state"] = std::string(TicketStateName(t->state));
  out["analyst_view"] =
      AnalystTicketJson(t->id, t->dataset_id, t->query, t->state, t->release);
  return {200, out};
}

HttpResponse Service::GetOdometer(const std::string& dataset_id) {
  auto d = FindDataset(dataset_id);
  if (!d) return Error(404, "not_found", absl::StrCat("unknown dataset '", dataset_id, "'"));
  return {200, OdometerJson(d->odometer->Snapshot())};
}

void Service::Mount(httplib::Server& server) {
  if (!config_.console_dir.empty()) {
    server.set_mount_point("/console", config_.console_dir);
  }
  auto handler = [this](const httplib::Request& hreq, httplib::Response& hres) {
    HttpRequest req;
    req.method = hreq.method;
    req.path = hreq.path;
    for (const auto& [k, v] : hreq.params) req.params[k] = v;
    req.authorization = hreq.get_header_value("Authorization");
    req.body = hreq.body;
    const HttpResponse res = Handle(req);
    hres.status = res.status;
    hres.set_content(res.body.dump(), "application/json");
  };
  server.Get(".*", handler);
  server.Post(".*", handler);
  server.Put(".*", handler);
  server.Delete(".*", handler);
}

}  // namespace riskscope
