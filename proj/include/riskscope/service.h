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

#ifndef RISKSCOPE_SERVICE_H_
#define RISKSCOPE_SERVICE_H_

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "riskscope/epsilon_search.h"
#include "riskscope/odometer.h"
#include "riskscope/tabular.h"

namespace httplib {
class Server;
}

namespace riskscope {

enum class Role { kAnalyst, kController };

// {"listen":"127.0.0.1:8080","tokens":{"<token>":"analyst"|"controller"},
//  "data_dir":"/var/lib/riskscope","default_grid":"default37"|[...],
//  "workers":4,"console_dir":"console/dist"}
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::map<std::string, Role> tokens;
  std::string data_dir;  // empty: in-memory only
  EpsilonGrid default_grid = EpsilonGrid::Default37();
  unsigned workers = 1;
  std::string console_dir;  // static assets served under /console when set

  static absl::StatusOr<ServiceConfig> FromJson(const nlohmann::json& j);
};

absl::StatusOr<ServiceConfig> LoadServiceConfig(const std::string& path);

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> params;  // query string
  std::string authorization;                  // raw header value
  std::string body;
};

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

enum class TicketState { kSubmitted, kAnalyzed, kAnswered, kRejected };
std::string_view TicketStateName(TicketState s);

// Routes and handlers. Handle() is transport independent so tests can drive
// it directly; Mount() wires it into an httplib server.
class Service {
 public:
  static absl::StatusOr<std::unique_ptr<Service>> Create(ServiceConfig config);
  ~Service();

  HttpResponse Handle(const HttpRequest& req);
  void Mount(httplib::Server& server);
  const ServiceConfig& config() const { return config_; }

 private:
  struct DatasetEntry;
  struct Ticket;

  explicit Service(ServiceConfig config);
  absl::Status LoadPersisted();

  HttpResponse PostDataset(const HttpRequest& req);
  HttpResponse ListDatasets(Role role);
  HttpResponse PostQuery(const HttpRequest& req);
  HttpResponse ListQueries(Role role);
  HttpResponse GetQuery(const std::string& id, Role role);
  HttpResponse GetAnalysis(const std::string& id, const HttpRequest& req);
  HttpResponse PostAnswer(const std::string& id, const HttpRequest& req);
  HttpResponse GetDecision(const std::string& id);
  HttpResponse GetOdometer(const std::string& dataset_id);

  std::shared_ptr<DatasetEntry> FindDataset(const std::string& id);
  std::shared_ptr<Ticket> FindTicket(const std::string& id);
  absl::StatusOr<nlohmann::json> Analyze(Ticket& t, DatasetEntry& d,
                                         const nlohmann::json& options);

  ServiceConfig config_;
  std::mutex mu_;  // guards the two maps and the id counters
  std::map<std::string, std::shared_ptr<DatasetEntry>> datasets_;
  std::map<std::string, std::shared_ptr<Ticket>> tickets_;
  uint64_t next_dataset_ = 1;
  uint64_t next_ticket_ = 1;
};

// What an analyst may see of a ticket: id, dataset, query, state and, once
// answered, the noisy output (plus epsilon for the SVT variant).
nlohmann::json AnalystTicketJson(const std::string& id, const std::string& dataset_id,
                                 const Query& query, TicketState state,
                                 const std::optional<AnalystRelease>& release);

}  // namespace riskscope

#endif  // RISKSCOPE_SERVICE_H_
