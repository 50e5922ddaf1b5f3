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

#ifndef RISKSCOPE_ODOMETER_H_
#define RISKSCOPE_ODOMETER_H_

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "riskscope/epsilon_search.h"

namespace riskscope {

// Non-negative epsilon held as an integer count of 1e-9 units, so sums and
// comparisons with grid values are exact and independent of charge order.
class EpsilonAmount {
 public:
  static constexpr int64_t kUnitsPerEpsilon = 1'000'000'000;

  EpsilonAmount() = default;
  static EpsilonAmount FromUnits(int64_t units) { return EpsilonAmount(units); }
  // Exact for values with at most nine decimals; anything finer is rounded up
  // so accounting never under-reports.
  static absl::StatusOr<EpsilonAmount> FromDouble(double eps);
  // Parses "d+" or "d+.d{1,9}".
  static absl::StatusOr<EpsilonAmount> Parse(std::string_view text);

  int64_t units() const { return units_; }
  double ToDouble() const {
    return static_cast<double>(units_) / static_cast<double>(kUnitsPerEpsilon);
  }
  // At least three decimals: 3 -> "3.000", 0.1 -> "0.100", 1e-4 -> "0.0001".
  std::string ToString() const;

  friend EpsilonAmount operator+(EpsilonAmount a, EpsilonAmount b) {
    return EpsilonAmount(a.units_ + b.units_);
  }
  friend auto operator<=>(EpsilonAmount, EpsilonAmount) = default;

 private:
  explicit EpsilonAmount(int64_t units) : units_(units) {}
  int64_t units_ = 0;
};

struct JournalEntry {
  std::string query_id;
  EpsilonAmount eps;
  double delta = 0;
  std::string algorithm;  // "rdr" or "svt"
  std::string timestamp;
  EpsilonAmount eps_c_after;

  // {"query_id":"q-7","eps":"3.000","delta":"0","alg":"svt","ts":"...",
  //  "eps_c":"3.000"}
  nlohmann::json ToJson() const;
  static absl::StatusOr<JournalEntry> FromJson(const nlohmann::json& j);
};

struct OdometerState {
  std::string dataset_id;
  std::vector<JournalEntry> entries;
  EpsilonAmount eps_c;
  double delta_sum = 0;
  double delta_g = 0;
};

// COMP_{delta_g}: the sum of charged epsilons when delta_g >= sum of deltas,
// otherwise infinite.
struct CompBound {
  bool infinite = false;
  EpsilonAmount value;

  nlohmann::json ToJson() const {
    return infinite ? nlohmann::json("infinity") : nlohmann::json(value.ToString());
  }
};

// Keeps the candidates strictly greater than eps_c. May return an empty grid.
EpsilonGrid TruncateGrid(const EpsilonGrid& grid, const OdometerState& state);

absl::StatusOr<OdometerState> Charge(const OdometerState& state,
                                     const std::string& query_id, double eps,
                                     double delta, const std::string& algorithm,
                                     const std::string& timestamp = "");

CompBound ComputeCompBound(const OdometerState& state);

// Rebuilds a state from journal entries, checking the recorded running totals.
absl::StatusOr<OdometerState> ReplayJournal(const std::string& dataset_id,
                                            double delta_g,
                                            const std::vector<JournalEntry>& entries);

nlohmann::json OdometerJson(const OdometerState& state);

std::string UtcTimestamp();

// Owns one dataset's odometer. Mutations are serialized on an internal mutex
// and written to the append-only JSON-lines journal (when a path is set)
// before the in-memory state changes.
class Odometer {
 public:
  using Clock = std::function<std::string()>;

  // In-memory only.
  Odometer(std::string dataset_id, double delta_g, Clock clock = UtcTimestamp);
  // Loads and replays the journal at `path`; a missing file is an empty log.
  static absl::StatusOr<std::unique_ptr<Odometer>> Open(
      const std::string& path, std::string dataset_id, double delta_g,
      Clock clock = UtcTimestamp);

  OdometerState Snapshot() const;

  struct PendingCharge {
    std::string query_id;
    double eps = 0;
    double delta = 0;
    std::string algorithm;
  };
  // Runs `decide` on the current state while holding the writer lock; a
  // returned charge is journaled and applied before the lock is released.
  absl::StatusOr<OdometerState> Transact(
      const std::function<absl::StatusOr<std::optional<PendingCharge>>(
          const OdometerState&)>& decide);

  absl::StatusOr<OdometerState> Charge(const std::string& query_id, double eps,
                                       double delta, const std::string& algorithm);

 private:
  absl::Status Append(const JournalEntry& e);

  mutable std::mutex mu_;
  OdometerState state_;
  std::string path_;
  Clock clock_;
};

absl::StatusOr<std::vector<JournalEntry>> ReadJournal(const std::string& path);

enum class Algorithm { kRdr, kSvt };

std::string_view AlgorithmName(Algorithm a);
absl::StatusOr<Algorithm> ParseAlgorithm(std::string_view name);

struct AnswerRequest {
  std::string query_id;
  Algorithm algorithm = Algorithm::kRdr;
  MechanismSpec family = MechanismSpec::Laplace(1);
  PrivacyPreference preference = MinMaxRatio{0.9};  // used by kRdr
  double eps_svt = 1;                              // used by kSvt
  double tau_var = 1e-5;                           // used by kSvt
  uint64_t seed = 0;
};

// Controller-side decision record for one query.
struct Decision {
  std::string query_id;
  bool answered = false;
  std::string reason;  // set when rejected
  Algorithm algorithm = Algorithm::kRdr;
  uint64_t seed = 0;
  std::vector<double> candidates;  // truncated grid
  SearchResult result;
  EpsilonAmount eps_c_before;
  EpsilonAmount eps_c_after;
  CompBound comp_after;

  nlohmann::json ControllerJson() const;
};

// Truncates the grid by eps_c, runs the requested search and charges the
// odometer when an output is released. Rejections never charge.
absl::StatusOr<Decision> AnswerQuery(Odometer& odometer, const QueryContext& ctx,
                                     const EpsilonGrid& grid,
                                     const AnswerRequest& request);

}  // namespace riskscope

#endif  // RISKSCOPE_ODOMETER_H_
