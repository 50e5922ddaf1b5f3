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

#include "riskscope/report.h"

#include <algorithm>
#include <array>

namespace riskscope {

absl::StatusOr<nlohmann::json> BuildAnalysisReport(
    const QueryContext& ctx, const MechanismSpec& family,
    const EpsilonGrid& grid, const AnalysisOptions& options) {
  if (ctx.pis == nullptr) return absl::InvalidArgumentError("query not prepared");
  EpsilonGrid candidates = grid;
  if (options.odometer) candidates = TruncateGrid(grid, *options.odometer);

  const PisTable& pis = *ctx.pis;
  double mean = 0;
  for (size_t u = 0; u < pis.per_unique.size(); ++u) {
    mean += static_cast<double>(pis.unique_count[u]) * pis.per_unique[u];
  }
  mean /= static_cast<double>(pis.num_rows());
  std::array<size_t, kHistogramBuckets> hist{};
  const double lo = pis.min(), hi = pis.max();
  const double width = (hi - lo) / kHistogramBuckets;
  for (size_t u = 0; u < pis.per_unique.size(); ++u) {
    size_t b = width > 0 ? static_cast<size_t>((pis.per_unique[u] - lo) / width) : 0;
    hist[std::min(b, kHistogramBuckets - 1)] += pis.unique_count[u];
  }

  nlohmann::json report;
  report["report_version"] = kReportVersion;
  report["query"] = ctx.query.ToJson();
  report["mechanism"] = std::string(FamilyName(family.family));
  report["delta"] = family.delta;
  report["sensitivity"] = ctx.sensitivity;
  report["k"] = ctx.query.k();
  report["n"] = ctx.n();
  report["unique_records"] = ctx.projection.num_unique();
  report["pis"] = {{"norm", std::string(NormName(pis.norm))},
                   {"min", lo},
                   {"max", hi},
                   {"mean", mean},
                   {"histogram", std::vector<size_t>(hist.begin(), hist.end())}};
  if (options.odometer) {
    report["eps_c"] = options.odometer->eps_c.ToString();
  }
  report["truncated"] = candidates.size() != grid.size();
  report["no_candidates"] = candidates.empty();

  nlohmann::json rows = nlohmann::json::array();
  auto add_row = [&](double eps) -> absl::Status {
    auto profile = ComputeRdrProfile(ctx.pis, family.WithEpsilon(eps),
                                     ctx.query.k(), ctx.sensitivity);
    if (!profile.ok()) return profile.status();
    rows.push_back(ProfileSummaryJson(*profile));
    return absl::OkStatus();
  };
  if (options.include_no_dp) {
    if (auto st = add_row(kNoPrivacy); !st.ok()) return st;
  }
  for (double e : candidates.values()) {
    if (auto st = add_row(e); !st.ok()) return st;
  }
  report["rows"] = rows;
  return report;
}

}  // namespace riskscope
