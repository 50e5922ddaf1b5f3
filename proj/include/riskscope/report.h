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

#ifndef RISKSCOPE_REPORT_H_
#define RISKSCOPE_REPORT_H_

#include <optional>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "riskscope/epsilon_search.h"
#include "riskscope/odometer.h"

namespace riskscope {

inline constexpr int kReportVersion = 1;

struct AnalysisOptions {
  // Adds an epsilon = infinity row (RDR reduces to the PIS).
  bool include_no_dp = true;
  // When set, the grid is truncated by this odometer state first.
  std::optional<OdometerState> odometer;
};

// Controller-only analysis: PIS summary plus one row of RDR statistics per
// candidate epsilon. Byte-stable for identical inputs.
absl::StatusOr<nlohmann::json> BuildAnalysisReport(
    const QueryContext& ctx, const MechanismSpec& family,
    const EpsilonGrid& grid, const AnalysisOptions& options);

}  // namespace riskscope

#endif  // RISKSCOPE_REPORT_H_
