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

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <unordered_set>

#include <fcntl.h>
#include <unistd.h>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace riskscope {
namespace {

std::string DeltaToString(double d) {
  if (d == 0) return "0";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, res.ptr);
}

absl::StatusOr<double> ParseDelta(std::string_view s) {
  double d = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec != std::errc() || ptr != s.data() + s.size() || !(d >= 0) ||
      !std::isfinite(d)) {
    return absl::DataLossError(absl::StrCat("bad delta '", std::string(s), "'"));
  }
  return d;
}

}  // namespace

absl::StatusOr<EpsilonAmount> EpsilonAmount::FromDouble(double eps) {
  if (!(eps >= 0) || !std::isfinite(eps) || eps > 9e9) {
    return absl::InvalidArgumentError("epsilon must be finite and >= 0");
  }
  const double scaled = eps * static_cast<double>(kUnitsPerEpsilon);
  const double rounded = std::nearbyint(scaled);
  // Doubles parsed from decimal literals land within a few ulps of the
  // scaled integer.
  if (std::abs(scaled - rounded) <= 1e-9 * std::max(1.0, scaled)) {
    return EpsilonAmount(static_cast<int64_t>(rounded));
  }
  return EpsilonAmount(static_cast<int64_t>(std::ceil(scaled)));
}

absl::StatusOr<EpsilonAmount> EpsilonAmount::Parse(std::string_view text) {
  const size_t dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  const std::string_view frac =
      dot == std::string_view::npos ? std::string_view() : text.substr(dot + 1);
  auto digits = [](std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
      if (c < '0' || c > '9') return false;
    }
    return true;
  };
  if (!digits(whole) || (dot != std::string_view::npos && !digits(frac)) ||
      frac.size() > 9 || whole.size() > 10) {
    return absl::InvalidArgumentError(absl::StrCat("bad epsilon amount '", std::string(text), "'"));
  }
  int64_t units = 0;
  for (char c : whole) units = units * 10 + (c - '0');
  units *= kUnitsPerEpsilon;
  int64_t f = 0;
  for (size_t i = 0; i < 9; ++i) {
    f = f * 10 + (i < frac.size() ? frac[i] - '0' : 0);
  }
  return EpsilonAmount(units + f);
}

std::string EpsilonAmount::ToString() const {
  std::string frac = std::to_string(units_ % kUnitsPerEpsilon);
  frac.insert(0, 9 - frac.size(), '0');
  while (frac.size() > 3 && frac.back() == '0') frac.pop_back();
  return absl::StrCat(units_ / kUnitsPerEpsilon, ".", frac);
}

nlohmann::json JournalEntry::ToJson() const {
  return {{"query_id", query_id},        {"eps", eps.ToString()},
          {"delta", DeltaToString(delta)}, {"alg", algorithm},
          {"ts", timestamp},             {"eps_c", eps_c_after.ToString()}};
}

absl::StatusOr<JournalEntry> JournalEntry::FromJson(const nlohmann::json& j) {
  for (const char* key : {"query_id", "eps", "delta", "alg"}) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
      return absl::DataLossError(absl::StrCat("journal entry lacks '", key, "'"));
    }
  }
  JournalEntry e;
  e.query_id = j["query_id"].get<std::string>();
  auto eps = EpsilonAmount::Parse(j["eps"].get<std::string>());
  if (!eps.ok()) return absl::DataLossError(eps.status().message());
  e.eps = *eps;
  auto delta = ParseDelta(j["delta"].get<std::string>());
  if (!delta.ok()) return delta.status();
  e.delta = *delta;
  e.algorithm = j["alg"].get<std::string>();
  if (j.contains("ts") && j["ts"].is_string()) e.timestamp = j["ts"].get<std::string>();
  if (j.contains("eps_c")) {
    if (!j["eps_c"].is_string()) return absl::DataLossError("bad eps_c");
    auto c = EpsilonAmount::Parse(j["eps_c"].get<std::string>());
    if (!c.ok()) return absl::DataLossError(c.status().message());
    e.eps_c_after = *c;
  } else {
    e.eps_c_after = EpsilonAmount::FromUnits(-1);
  }
  return e;
}

EpsilonGrid TruncateGrid(const EpsilonGrid& grid, const OdometerState& state) {
  return grid.Filter([&state](double e) {
    auto a = EpsilonAmount::FromDouble(e);
    return a.ok() && *a > state.eps_c;
  });
}

absl::StatusOr<OdometerState> Charge(const OdometerState& state,
                                     const std::string& query_id, double eps,
                                     double delta, const std::string& algorithm,
                                     const std::string& timestamp) {
  if (!(eps > 0)) return absl::InvalidArgumentError("charged epsilon must be > 0");
  if (!(delta >= 0) || !std::isfinite(delta)) {
    return absl::InvalidArgumentError("charged delta must be >= 0");
  }
  for (const auto& e : state.entries) {
    if (e.query_id == query_id) {
      return absl::AlreadyExistsError(
          absl::StrCat("query '", query_id, "' already charged"));
    }
  }
  auto amount = EpsilonAmount::FromDouble(eps);
  if (!amount.ok()) return amount.status();
  OdometerState next = state;
  next.eps_c = state.eps_c + *amount;
  next.delta_sum = state.delta_sum + delta;
  next.entries.push_back(
      {query_id, *amount, delta, algorithm, timestamp, next.eps_c});
  return next;
}

CompBound ComputeCompBound(const OdometerState& state) {
  CompBound b;
  // Relative slack absorbs rounding in the floating-point delta sum.
  b.infinite = !(state.delta_g >= state.delta_sum * (1 - 1e-12));
  if (!b.infinite) b.value = state.eps_c;
  return b;
}

absl::StatusOr<OdometerState> ReplayJournal(
    const std::string& dataset_id, double delta_g,
    const std::vector<JournalEntry>& entries) {
  OdometerState state;
  state.dataset_id = dataset_id;
  state.delta_g = delta_g;
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    auto next = Charge(state, e.query_id, e.eps.ToDouble(), e.delta, e.algorithm,
                       e.timestamp);
    if (!next.ok()) {
      return absl::DataLossError(
          absl::StrCat("journal entry ", i + 1, ": ", next.status().message()));
    }
    // Re-charging from the double can only differ if the stored string was
    // finer than the unit; keep the stored amount.
    next->entries.back().eps = e.eps;
    next->eps_c = state.eps_c + e.eps;
    next->entries.back().eps_c_after = next->eps_c;
    if (e.eps_c_after.units() >= 0 && e.eps_c_after != next->eps_c) {
      return absl::DataLossError(absl::StrCat(
          "journal entry ", i + 1, ": recorded eps_c ", e.eps_c_after.ToString(),
          " does not match the replayed sum ", next->eps_c.ToString()));
    }
    state = *std::move(next);
  }
  return state;
}

nlohmann::json OdometerJson(const OdometerState& state) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : state.entries) entries.push_back(e.ToJson());
  return {{"dataset_id", state.dataset_id},
          {"eps_c", state.eps_c.ToString()},
          {"delta_sum", state.delta_sum},
          {"delta_g", state.delta_g},
          {"comp_bound", ComputeCompBound(state).ToJson()},
          {"entries", entries}};
}

std::string UtcTimestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

absl::StatusOr<std::vector<JournalEntry>> ReadJournal(const std::string& path) {
  std::vector<JournalEntry> entries;
  std::ifstream in(path);
  if (!in) return entries;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      return absl::DataLossError(
          absl::StrCat(path, ":", lineno, ": unparseable journal line"));
    }
    auto e = JournalEntry::FromJson(j);
    if (!e.ok()) {
      return absl::DataLossError(
          absl::StrCat(path, ":", lineno, ": ", e.status().message()));
    }
    entries.push_back(*std::move(e));
  }
  return entries;
}

Odometer::Odometer(std::string dataset_id, double delta_g, Clock clock)
    : clock_(std::move(clock)) {
  state_.dataset_id = std::move(dataset_id);
  state_.delta_g = delta_g;
}

absl::StatusOr<std::unique_ptr<Odometer>> Odometer::Open(
    const std::string& path, std::string dataset_id, double delta_g,
    Clock clock) {
  auto entries = ReadJournal(path);
  if (!entries.ok()) return entries.status();
  auto state = ReplayJournal(dataset_id, delta_g, *entries);
  if (!state.ok()) return state.status();
  auto odo = std::make_unique<Odometer>(std::move(dataset_id), delta_g,
                                        std::move(clock));
  odo->state_ = *std::move(state);
  odo->path_ = path;
  return odo;
}

OdometerState Odometer::Snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return state_;
}

absl::Status Odometer::Append(const JournalEntry& e) {
  if (path_.empty()) return absl::OkStatus();
  const std::string line = e.ToJson().dump() + "\n";
  const int fd = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd < 0) return absl::UnavailableError(absl::StrCat("cannot open ", path_));
  const ssize_t w = ::write(fd, line.data(), line.size());
  const int synced = ::fsync(fd);
  ::close(fd);
  if (w != static_cast<ssize_t>(line.size()) || synced != 0) {
    return absl::UnavailableError(absl::StrCat("write to ", path_, " failed"));
  }
  return absl::OkStatus();
}

absl::StatusOr<OdometerState> Odometer::Transact(
    const std::function<absl::StatusOr<std::optional<PendingCharge>>(
        const OdometerState&)>& decide) {
  std::lock_guard<std::mutex> lock(mu_);
  auto pending = decide(state_);
  if (!pending.ok()) return pending.status();
  if (!pending->has_value()) return state_;
  const auto& c = **pending;
  auto next = riskscope::Charge(state_, c.query_id, c.eps, c.delta, c.algorithm,
                                clock_ ? clock_() : "");
  if (!next.ok()) return next.status();
  if (auto st = Append(next->entries.back()); !st.ok()) return st;
  state_ = *std::move(next);
  return state_;
}

absl::StatusOr<OdometerState> Odometer::Charge(const std::string& query_id,
                                               double eps, double delta,
                                               const std::string& algorithm) {
  return Transact([&](const OdometerState&)
                      -> absl::StatusOr<std::optional<PendingCharge>> {
    return PendingCharge{query_id, eps, delta, algorithm};
  });
}

std::string_view AlgorithmName(Algorithm a) {
  return a == Algorithm::kRdr ? "rdr" : "svt";
}

absl::StatusOr<Algorithm> ParseAlgorithm(std::string_view name) {
  if (name == "rdr") return Algorithm::kRdr;
  if (name == "svt") return Algorithm::kSvt;
  return absl::InvalidArgumentError(absl::StrCat("unknown algorithm '", std::string(name), "'"));
}

nlohmann::json Decision::ControllerJson() const {
  nlohmann::json j;
  j["query_id"] = query_id;
  j["status"] = answered ? "answered" : "rejected";
  if (!answered) j["reason"] = reason;
  j["algorithm"] = std::string(AlgorithmName(algorithm));
  j["seed"] = seed;
  j["candidates"] = candidates;
  j["chosen_epsilon"] =
      result.chosen_epsilon ? nlohmann::json(*result.chosen_epsilon) : nullptr;
  j["epsilon_released"] = result.epsilon_released;
  j["eps_charged"] = answered ? nlohmann::json(result.eps_charge) : nlohmann::json(0);
  j["delta_charged"] = answered ? result.delta_charge : 0.0;
  j["output"] = result.output ? nlohmann::json(result.output->values) : nullptr;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : result.trace) {
    trace.push_back(
        {{"epsilon", t.epsilon}, {"statistic", t.statistic}, {"passed", t.passed}});
  }
  j["trace"] = trace;
  j["eps_c_before"] = eps_c_before.ToString();
  j["eps_c_after"] = eps_c_after.ToString();
  j["comp_bound"] = comp_after.ToJson();
  return j;
}

absl::StatusOr<Decision> AnswerQuery(Odometer& odometer, const QueryContext& ctx,
                                     const EpsilonGrid& grid,
                                     const AnswerRequest& request) {
  Decision d;
  d.query_id = request.query_id;
  d.algorithm = request.algorithm;
  d.seed = request.seed;
  auto after = odometer.Transact(
      [&](const OdometerState& state)
          -> absl::StatusOr<std::optional<Odometer::PendingCharge>> {
        d.eps_c_before = state.eps_c;
        for (const auto& e : state.entries) {
          if (e.query_id == request.query_id) {
            return absl::AlreadyExistsError(
                absl::StrCat("query '", request.query_id, "' already answered"));
          }
        }
        const EpsilonGrid truncated = TruncateGrid(grid, state);
        d.candidates = truncated.values();
        if (truncated.empty()) {
          d.reason = "no candidate epsilon above eps_c";
          return std::nullopt;
        }
        if (request.family.family == MechanismFamily::kGaussian &&
            !(state.delta_g > 0)) {
          d.reason = "delta_g must be set before a Gaussian answer";
          return std::nullopt;
        }
        const SeedContext seeds{request.seed, request.query_id};
        absl::StatusOr<SearchResult> result;
        if (request.algorithm == Algorithm::kRdr) {
          result = FindEpsilonFromRdr(ctx, request.family, truncated,
                                      request.preference, seeds);
        } else {
          auto cfg = SvtConfig::Create(request.eps_svt, ctx.n(), request.tau_var);
          if (!cfg.ok()) {
            result = cfg.status();
          } else {
            result = FindAndReleaseEpsilon(ctx, request.family, truncated, *cfg,
                                           seeds);
          }
        }
        if (!result.ok()) {
          d.reason = std::string(result.status().message());
          return std::nullopt;
        }
        d.result = *std::move(result);
        if (!d.result.found()) {
          d.reason = "no candidate satisfies the preference";
          return std::nullopt;
        }
        return Odometer::PendingCharge{request.query_id, d.result.eps_charge,
                                       d.result.delta_charge,
                                       std::string(AlgorithmName(request.algorithm))};
      });
  if (!after.ok()) return after.status();
  d.answered = d.result.found() && d.reason.empty();
  if (!d.answered) {
    // Nothing leaves the controller for a rejected query.
    d.result.output.reset();
  }
  d.eps_c_after = after->eps_c;
  d.comp_after = ComputeCompBound(*after);
  return d;
}

}  // namespace riskscope
