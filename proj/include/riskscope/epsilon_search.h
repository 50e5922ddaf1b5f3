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

#ifndef RISKSCOPE_EPSILON_SEARCH_H_
#define RISKSCOPE_EPSILON_SEARCH_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "riskscope/mechanisms.h"
#include "riskscope/query.h"
#include "riskscope/rdr.h"
#include "riskscope/tabular.h"

namespace riskscope {

// Strictly descending candidate epsilons, all finite and > 0.
class EpsilonGrid {
 public:
  static absl::StatusOr<EpsilonGrid> Create(std::vector<double> values);
  // 10, 9, ..., 1, 0.9, ..., 0.1, 0.09, ..., 0.01, 0.009, ..., 0.001.
  static EpsilonGrid Default37();
  static absl::StatusOr<EpsilonGrid> FromJson(const nlohmann::json& j);

  const std::vector<double>& values() const { return values_; }
  size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  // Subsequence filter; the result may be empty.
  EpsilonGrid Filter(const std::function<bool(double)>& keep) const;

 private:
  std::vector<double> values_;
};

struct MinMaxRatio {
  double tau_p = 0.9;
};

struct RowGroup {
  std::string name;
  std::vector<size_t> rows;
};

// Satisfied when the smallest ratio between any two group medians is at
// least tau_p.
struct GroupMedianRatio {
  std::vector<RowGroup> groups;
  double tau_p = 0.9;
};

struct NormalizedVariance {
  double tau_var = 1e-5;
};

using PrivacyPreference =
    std::variant<MinMaxRatio, GroupMedianRatio, NormalizedVariance>;

// {"type":"min_max_ratio","tau_p":0.9}
// {"type":"group_median_ratio","tau_p":0.9,
//  "groups":[{"name":"over60","predicate":{...}}, ...]}
// {"type":"normalized_variance","tau_var":1e-5}
// Group predicates are resolved against `d` into a row partition.
absl::StatusOr<PrivacyPreference> PreferenceFromJson(const nlohmann::json& j,
                                                     const Dataset& d);
absl::Status ValidatePreference(const PrivacyPreference& pref, size_t n);

struct PreferenceCheck {
  bool satisfied = false;
  double statistic = 0;
};

absl::StatusOr<PreferenceCheck> EvaluatePreference(
    const RdrProfile& profile, const PrivacyPreference& pref);

// Privacy budget of the sparse vector step. eps1 : eps2 = 1 : 2^(2/3).
struct SvtConfig {
  double eps_svt = 1;
  double eps1 = 0;
  double eps2 = 0;
  double delta_svt = 0;  // sensitivity of the variance query, 1 / n
  double tau_var = 1e-5;

  static absl::StatusOr<SvtConfig> Create(double eps_svt, size_t n,
                                          double tau_var);
};

// Seed material for every noise draw of one query.
struct SeedContext {
  uint64_t seed = 0;
  std::string query_id = "q";

  NoiseStream Stream(StreamPurpose purpose, uint64_t index) const {
    return NoiseStream::Derive(seed, query_id, purpose, index);
  }
};

struct SvtOutcome {
  std::optional<size_t> index;  // first element answered "above"
  size_t tested = 0;
};

// Above-threshold with c = 1: rho ~ Lap(delta_svt / eps1) is drawn once,
// then element i passes when value_i + Lap(2 delta_svt / eps2) >= threshold +
// rho. `next(i)` yields element i or nullopt at the end of the stream.
SvtOutcome SvtAboveThreshold(
    const std::function<std::optional<double>(size_t)>& next, double threshold,
    const SvtConfig& cfg, const SeedContext& seeds);

// Everything about a query that does not depend on the candidate epsilon.
struct QueryContext {
  const Dataset* dataset = nullptr;
  Query query;
  ProjectedDataset projection;
  std::shared_ptr<const PisTable> pis;
  QueryOutput exact;
  double sensitivity = 1;
  MechanismFamily family = MechanismFamily::kLaplace;

  size_t n() const { return dataset->num_rows(); }
};

struct PrepareOptions {
  MechanismFamily family = MechanismFamily::kLaplace;
  unsigned workers = 1;
  std::optional<double> sensitivity_override;
};

absl::StatusOr<QueryContext> PrepareQuery(const Dataset& d, const Query& q,
                                          const PrepareOptions& options);

enum class SearchStatus { kFound, kNoSuitableEpsilon };

struct CandidateTrace {
  double epsilon = 0;
  double statistic = 0;
  bool passed = false;
};

// Controller-side result. Holds the chosen epsilon even when it must not be
// shown to the analyst; see AnalystRelease.
struct SearchResult {
  SearchStatus status = SearchStatus::kNoSuitableEpsilon;
  std::optional<double> chosen_epsilon;
  std::optional<size_t> chosen_index;
  std::optional<QueryOutput> output;
  bool epsilon_released = false;
  double eps_charge = 0;
  double delta_charge = 0;
  std::vector<CandidateTrace> trace;  // candidates examined, in order

  bool found() const { return status == SearchStatus::kFound; }
};

// The only view of a result that may leave the controller.
struct AnalystRelease {
  QueryOutput output;
  std::optional<double> epsilon;  // set only by the SVT variant
};

std::optional<AnalystRelease> ToAnalystRelease(const SearchResult& r);

// Scans the grid in order and releases at the first (largest) epsilon whose
// profile satisfies a ratio preference. The chosen epsilon stays private.
absl::StatusOr<SearchResult> FindEpsilonFromRdr(const QueryContext& ctx,
                                                const MechanismSpec& family,
                                                const EpsilonGrid& grid,
                                                const PrivacyPreference& pref,
                                                const SeedContext& seeds);

// SVT variant: tests -Var(normalized RDRs) against -tau_var privately and
// releases both the chosen epsilon and the output. Charges eps + eps_svt.
absl::StatusOr<SearchResult> FindAndReleaseEpsilon(const QueryContext& ctx,
                                                   const MechanismSpec& family,
                                                   const EpsilonGrid& grid,
                                                   const SvtConfig& cfg,
                                                   const SeedContext& seeds);

}  // namespace riskscope

#endif  // RISKSCOPE_EPSILON_SEARCH_H_
