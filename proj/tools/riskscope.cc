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

// riskscope: batch front end for analyses, epsilon search, odometer sessions,
// fixture generation, benchmarks and the HTTP service.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "httplib.h"
#include "json.hpp"
#include "riskscope/epsilon_search.h"
#include "riskscope/fixtures.h"
#include "riskscope/odometer.h"
#include "riskscope/report.h"
#include "riskscope/service.h"

namespace rs = riskscope;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

// Thrown by helpers; main maps it to an exit code.
struct Failure {
  int code;
  std::string message;
};

[[noreturn]] void Fail(const absl::Status& st) {
  switch (st.code()) {
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kNotFound:
    case absl::StatusCode::kFailedPrecondition:
    case absl::StatusCode::kAlreadyExists:
    case absl::StatusCode::kDataLoss:
    case absl::StatusCode::kOutOfRange:
      throw Failure{kExitData, std::string(st.message())};
    default:
      throw Failure{kExitInternal, std::string(st.message())};
  }
}

template <typename T>
T Must(absl::StatusOr<T> v) {
  if (!v.ok()) Fail(v.status());
  return *std::move(v);
}

json ReadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Failure{kExitData, "cannot open " + path};
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Failure{kExitData, path + ": invalid JSON"};
  return j;
}

void WriteOut(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << "\n";
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  out << text << "\n";
  if (!out) throw Failure{kExitData, "cannot write " + path};
}

rs::EpsilonGrid LoadGrid(const std::string& spec) {
  if (spec.empty() || spec == "default37") return rs::EpsilonGrid::Default37();
  if (fs::exists(spec)) return Must(rs::EpsilonGrid::FromJson(ReadJson(spec)));
  std::vector<double> v;
  for (absl::string_view part : absl::StrSplit(spec, ',')) {
    try {
      v.push_back(std::stod(std::string(part)));
    } catch (...) {
      throw Failure{kExitUsage, "bad --grid value '" + std::string(part) + "'"};
    }
  }
  return Must(rs::EpsilonGrid::Create(std::move(v)));
}

// Options shared by the commands that run one query.
struct QueryArgs {
  std::string data;
  std::string schema;
  std::string query;
  std::string grid = "default37";
  std::string mechanism = "laplace";
  double delta = -1;  // unset: 0 for Laplace, 1e-5 for Gaussian
  unsigned workers = rs::DefaultWorkers();
  std::optional<double> sensitivity_override;
  std::string report;

  void Add(CLI::App* app) {
    app->add_option("--data", data, "dataset CSV")->required();
    app->add_option("--schema", schema, "schema JSON sidecar")->required();
    app->add_option("--query", query, "query JSON file")->required();
    app->add_option("--grid", grid, "default37, a JSON file, or a comma list");
    app->add_option("--mechanism", mechanism, "laplace|gaussian")
        ->check(CLI::IsMember({"laplace", "gaussian"}));
    app->add_option("--delta", delta, "delta for the Gaussian mechanism");
    app->add_option("--workers", workers, "parallel workers for sensitivities")
        ->check(CLI::PositiveNumber);
    app->add_option("--sensitivity-override", sensitivity_override,
                    "replace the computed global sensitivity");
    app->add_option("--report", report, "write the JSON here instead of stdout");
  }

  rs::MechanismSpec Spec() const {
    const auto family = Must(rs::ParseFamily(mechanism));
    double d = delta;
    if (d < 0) d = family == rs::MechanismFamily::kGaussian ? 1e-5 : 0.0;
    rs::MechanismSpec s{family, 1.0, d};
    if (auto st = s.Validate(); !st.ok()) throw Failure{kExitUsage, std::string(st.message())};
    return s;
  }

  rs::PrepareOptions Prepare() const {
    rs::PrepareOptions o;
    o.family = Spec().family;
    o.workers = workers;
    o.sensitivity_override = sensitivity_override;
    return o;
  }
};

json SearchJson(const rs::SearchResult& r, const std::string& algorithm,
                const rs::MechanismSpec& spec, uint64_t seed, const std::string& query_id) {
  json j;
  j["report_version"] = rs::kReportVersion;
  j["query_id"] = query_id;
  j["algorithm"] = algorithm;
  j["mechanism"] = std::string(rs::FamilyName(spec.family));
  j["delta"] = spec.delta;
  j["seed"] = seed;
  j["status"] = r.found() ? "Found" : "NoSuitableEpsilon";
  j["chosen_epsilon"] = r.chosen_epsilon ? json(*r.chosen_epsilon) : json(nullptr);
  j["epsilon_released"] = r.epsilon_released;
  j["output"] = r.output ? json(r.output->values) : json(nullptr);
  j["eps_charge"] = r.eps_charge;
  j["delta_charge"] = r.delta_charge;
  json trace = json::array();
  for (const auto& t : r.trace) {
    trace.push_back({{"epsilon", t.epsilon}, {"statistic", t.statistic}, {"passed", t.passed}});
  }
  j["trace"] = trace;
  return j;
}

rs::PrivacyPreference PreferenceArg(const std::string& file, double tau_p, const rs::Dataset& d) {
  if (!file.empty()) return Must(rs::PreferenceFromJson(ReadJson(file), d));
  if (!(tau_p >= 0 && tau_p <= 1)) throw Failure{kExitUsage, "--tau-p must be in [0, 1]"};
  return rs::MinMaxRatio{tau_p};
}

size_t ParseSize(const std::string& s) {
  std::string t = s;
  size_t mult = 1;
  if (!t.empty() && (t.back() == 'k' || t.back() == 'K')) {
    mult = 1000;
    t.pop_back();
  } else if (!t.empty() && (t.back() == 'm' || t.back() == 'M')) {
    mult = 1000000;
    t.pop_back();
  }
  try {
    return std::stoul(t) * mult;
  } catch (...) {
    throw Failure{kExitUsage, "bad size '" + s + "'"};
  }
}

std::string SizeLabel(size_t n) {
  if (n % 1000000 == 0) return std::to_string(n / 1000000) + "m";
  if (n % 1000 == 0) return std::to_string(n / 1000) + "k";
  return std::to_string(n);
}

httplib::Server* g_server = nullptr;

void StopServer(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"riskscope: per-record disclosure risk analysis for DP query answering"};
  app.require_subcommand(1);

  // analyze
  QueryArgs analyze;
  auto* a = app.add_subcommand("analyze", "RDR statistics per candidate epsilon");
  analyze.Add(a);
  std::string analyze_journal;
  a->add_option("--journal", analyze_journal, "truncate the grid by this odometer journal");

  // find-eps
  QueryArgs find;
  auto* f = app.add_subcommand("find-eps", "choose epsilon and release a DP output");
  find.Add(f);
  std::string algorithm = "rdr", pref_file, query_id = "q";
  double tau_p = 0.9, tau_var = 1e-5, eps_svt = 1;
  uint64_t seed = 0;
  f->add_option("--algorithm", algorithm, "rdr|svt")->check(CLI::IsMember({"rdr", "svt"}));
  f->add_option("--tau-p", tau_p, "min/max RDR ratio threshold");
  f->add_option("--preference", pref_file, "preference JSON (overrides --tau-p)");
  f->add_option("--tau-var", tau_var, "normalized variance threshold (svt)");
  f->add_option("--eps-svt", eps_svt, "SVT budget (svt)");
  f->add_option("--seed", seed, "noise seed");
  f->add_option("--query-id", query_id, "query id used in stream derivation");

  // session replay
  auto* session = app.add_subcommand("session", "odometer sessions");
  session->require_subcommand(1);
  auto* replay = session->add_subcommand("replay", "answer a scripted list of queries");
  std::string s_data, s_schema, s_script, s_journal, s_out;
  unsigned s_workers = rs::DefaultWorkers();
  replay->add_option("--data", s_data)->required();
  replay->add_option("--schema", s_schema)->required();
  replay->add_option("--script", s_script, "session JSON")->required();
  replay->add_option("--journal", s_journal, "append charges to this journal");
  replay->add_option("--workers", s_workers)->check(CLI::PositiveNumber);
  replay->add_option("--report", s_out);

  // fixtures gen
  auto* fixtures = app.add_subcommand("fixtures", "generated datasets");
  fixtures->require_subcommand(1);
  auto* gen = fixtures->add_subcommand("gen", "write Adult-style CSVs of the given sizes");
  std::string g_out = "fixtures", g_sizes = "1k,10k";
  uint64_t g_seed = 7;
  gen->add_option("--out", g_out, "output directory");
  gen->add_option("--sizes", g_sizes, "comma list, e.g. 1k,10k,100k,1m");
  gen->add_option("--seed", g_seed);

  // bench
  auto* bench = app.add_subcommand("bench", "time sensitivities and searches, CSV out");
  std::string b_sizes = "1k,10k,100k", b_workers = "1,2,8", b_queries = "Q1,Q2,Q3,Q4,Q5",
              b_out;
  int b_runs = 3;
  bool b_search = false;
  uint64_t b_seed = 7;
  bench->add_option("--sizes", b_sizes);
  bench->add_option("--workers", b_workers);
  bench->add_option("--queries", b_queries);
  bench->add_option("--runs", b_runs)->check(CLI::PositiveNumber);
  bench->add_flag("--search", b_search, "also time a full grid search");
  bench->add_option("--seed", b_seed);
  bench->add_option("--out", b_out, "CSV path (default stdout)");

  // odometer show
  auto* odo = app.add_subcommand("odometer", "privacy odometer state");
  odo->require_subcommand(1);
  auto* show = odo->add_subcommand("show", "print eps_c, deltas, COMP and entries");
  std::string o_dataset, o_data_dir, o_journal;
  double o_delta_g = 0;
  show->add_option("--dataset", o_dataset, "dataset id in the service data directory");
  show->add_option("--data-dir", o_data_dir, "service data directory");
  show->add_option("--journal", o_journal, "journal file (instead of --data-dir)");
  show->add_option("--delta-g", o_delta_g, "delta budget when reading a bare journal");

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP JSON service");
  std::string config_path;
  serve->add_option("--config", config_path, "service config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*a) {
      const auto d = Must(rs::LoadDatasetFile(analyze.data, analyze.schema));
      const auto q = Must(rs::Query::FromJson(ReadJson(analyze.query)));
      const auto ctx = Must(rs::PrepareQuery(d, q, analyze.Prepare()));
      rs::AnalysisOptions opts;
      if (!analyze_journal.empty()) {
        opts.odometer = Must(rs::ReplayJournal("cli", 0, Must(rs::ReadJournal(analyze_journal))));
      }
      const auto report =
          Must(rs::BuildAnalysisReport(ctx, analyze.Spec(), LoadGrid(analyze.grid), opts));
      WriteOut(analyze.report, report.dump(2));
    } else if (*f) {
      const auto d = Must(rs::LoadDatasetFile(find.data, find.schema));
      const auto q = Must(rs::Query::FromJson(ReadJson(find.query)));
      const auto ctx = Must(rs::PrepareQuery(d, q, find.Prepare()));
      const auto grid = LoadGrid(find.grid);
      const auto spec = find.Spec();
      const rs::SeedContext seeds{seed, query_id};
      rs::SearchResult r;
      if (algorithm == "rdr") {
        r = Must(rs::FindEpsilonFromRdr(ctx, spec, grid, PreferenceArg(pref_file, tau_p, d),
                                        seeds));
      } else {
        const auto cfg = Must(rs::SvtConfig::Create(eps_svt, d.num_rows(), tau_var));
        r = Must(rs::FindAndReleaseEpsilon(ctx, spec, grid, cfg, seeds));
      }
      json out = SearchJson(r, algorithm, spec, seed, query_id);
      if (algorithm == "svt") {
        out["eps_svt"] = eps_svt;
        out["tau_var"] = tau_var;
      }
      WriteOut(find.report, out.dump(2));
    } else if (*replay) {
      const auto d = Must(rs::LoadDatasetFile(s_data, s_schema));
      const json script = ReadJson(s_script);
      const double delta_g = script.value("delta_g", 0.0);
      const auto grid = script.contains("grid")
                            ? (script["grid"].is_string()
                                   ? LoadGrid(script["grid"].get<std::string>())
                                   : Must(rs::EpsilonGrid::FromJson(script["grid"])))
                            : rs::EpsilonGrid::Default37();
      std::unique_ptr<rs::Odometer> odometer =
          s_journal.empty() ? std::make_unique<rs::Odometer>("session", delta_g)
                            : Must(rs::Odometer::Open(s_journal, "session", delta_g));
      json decisions = json::array();
      size_t index = 0;
      for (const auto& step : script.value("queries", json::array())) {
        ++index;
        rs::AnswerRequest req;
        req.query_id = step.value("query_id", "q" + std::to_string(index));
        req.algorithm = Must(rs::ParseAlgorithm(step.value("algorithm", "rdr")));
        const auto family = Must(rs::ParseFamily(step.value("mechanism", "laplace")));
        const double delta = step.value(
            "delta", family == rs::MechanismFamily::kGaussian ? 1e-5 : 0.0);
        req.family = rs::MechanismSpec{family, 1.0, delta};
        req.seed = step.value("seed", uint64_t{0});
        req.eps_svt = step.value("eps_svt", 1.0);
        req.tau_var = step.value("tau_var", 1e-5);
        if (step.contains("preference") && req.algorithm == rs::Algorithm::kRdr) {
          req.preference = Must(rs::PreferenceFromJson(step["preference"], d));
        }
        const auto q = Must(rs::Query::FromJson(step.at("query")));
        rs::PrepareOptions po;
        po.family = family;
        po.workers = s_workers;
        auto ctx = rs::PrepareQuery(d, q, po);
        if (!ctx.ok()) {
          // Unanswerable queries are rejected like any other; nothing is charged.
          const auto s = odometer->Snapshot();
          decisions.push_back({{"query_id", req.query_id},
                               {"status", "rejected"},
                               {"reason", std::string(ctx.status().message())},
                               {"eps_c_before", s.eps_c.ToString()},
                               {"eps_c_after", s.eps_c.ToString()}});
          continue;
        }
        decisions.push_back(Must(rs::AnswerQuery(*odometer, *ctx, grid, req)).ControllerJson());
      }
      json out = {{"report_version", rs::kReportVersion},
                  {"decisions", decisions},
                  {"odometer", rs::OdometerJson(odometer->Snapshot())}};
      WriteOut(s_out, out.dump(2));
    } else if (*gen) {
      fs::create_directories(g_out);
      WriteOut((fs::path(g_out) / "adult.schema.json").string(), rs::AdultSchema().ToJson().dump(2));
      for (absl::string_view part : absl::StrSplit(g_sizes, ',')) {
        const size_t n = ParseSize(std::string(part));
        const auto d = rs::GenerateAdult(n, g_seed);
        const auto path = fs::path(g_out) / ("adult_" + SizeLabel(n) + ".csv");
        std::ofstream out(path, std::ios::trunc);
        out << rs::SerializeCsv(d);
        if (!out) throw Failure{kExitData, "cannot write " + path.string()};
        std::cerr << "wrote " << path.string() << " (" << n << " rows)\n";
      }
    } else if (*bench) {
      std::ostringstream csv;
      csv << "query,rows,unique,workers,run,pis_seconds,search_seconds\n";
      std::vector<unsigned> workers;
      for (absl::string_view w : absl::StrSplit(b_workers, ',')) {
        workers.push_back(static_cast<unsigned>(ParseSize(std::string(w))));
      }
      std::vector<std::string> wanted;
      for (absl::string_view w : absl::StrSplit(b_queries, ',')) wanted.emplace_back(w);
      for (absl::string_view part : absl::StrSplit(b_sizes, ',')) {
        const size_t n = ParseSize(std::string(part));
        const auto d = rs::GenerateAdult(n, b_seed);
        for (const auto& [name, q] : rs::AdultQueries()) {
          if (std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
          const auto proj = Must(rs::ProjectQueryAttributes(d, q));
          for (unsigned w : workers) {
            for (int run = 0; run < b_runs; ++run) {
              const auto t0 = std::chrono::steady_clock::now();
              const auto pis = Must(rs::PerInstanceSensitivity(proj, q, {rs::Norm::kL1, w}));
              const auto t1 = std::chrono::steady_clock::now();
              double search = 0;
              if (b_search) {
                rs::PrepareOptions po;
                po.workers = w;
                const auto s0 = std::chrono::steady_clock::now();
                const auto ctx = Must(rs::PrepareQuery(d, q, po));
                Must(rs::FindEpsilonFromRdr(ctx, rs::MechanismSpec::Laplace(1),
                                            rs::EpsilonGrid::Default37(), rs::MinMaxRatio{0.95},
                                            {b_seed, name}));
                search = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0)
                             .count();
              }
              csv << name << "," << n << "," << pis.per_unique.size() << "," << w << "," << run
                  << "," << std::chrono::duration<double>(t1 - t0).count() << "," << search
                  << "\n";
            }
          }
        }
      }
      std::string text = csv.str();
      text.pop_back();
      WriteOut(b_out, text);
    } else if (*show) {
      std::string journal = o_journal;
      double delta_g = o_delta_g;
      std::string id = o_dataset.empty() ? "journal" : o_dataset;
      if (journal.empty()) {
        if (o_data_dir.empty() || o_dataset.empty()) {
          throw Failure{kExitUsage, "need --journal or --data-dir with --dataset"};
        }
        const fs::path dir = fs::path(o_data_dir) / "datasets" / o_dataset;
        if (!fs::exists(dir)) throw Failure{kExitData, "unknown dataset " + o_dataset};
        journal = (dir / "journal.jsonl").string();
        if (fs::exists(dir / "meta.json")) {
          delta_g = ReadJson((dir / "meta.json").string()).value("delta_g", 0.0);
        }
      }
      const auto entries = fs::exists(journal) ? Must(rs::ReadJournal(journal))
                                               : std::vector<rs::JournalEntry>{};
      WriteOut("", rs::OdometerJson(Must(rs::ReplayJournal(id, delta_g, entries))).dump(2));
    } else if (*serve) {
      auto config = Must(rs::LoadServiceConfig(config_path));
      auto service = Must(rs::Service::Create(config));
      httplib::Server server;
      service->Mount(server);
      g_server = &server;
      std::signal(SIGINT, StopServer);
      std::signal(SIGTERM, StopServer);
      std::cerr << "listening on " << config.host << ":" << config.port << "\n";
      if (!server.listen(config.host, config.port)) {
        throw Failure{kExitData, "cannot listen on " + config.host + ":" +
                                     std::to_string(config.port)};
      }
    }
  } catch (const Failure& e) {
    std::cerr << "riskscope: " << e.message << "\n";
    return e.code;
  } catch (const json::exception& e) {
    std::cerr << "riskscope: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "riskscope: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}
