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

#include <algorithm>
#include <cmath>

#include "absl/status/status.h"

namespace riskscope {

absl::StatusOr<double> OutputDependentRdr(const QueryOutput& o,
                                          const QueryOutput& neighbor_out,
                                          Norm norm) {
  return Distance(o, neighbor_out, norm);
}

absl::StatusOr<double> SignedPrivacyLoss(const QueryOutput& o,
                                         const QueryOutput& full_out,
                                         const QueryOutput& neighbor_out,
                                         const MechanismSpec& spec,
                                         double sensitivity) {
  auto params = ComputeNoiseParams(spec, sensitivity);
  if (!params.ok()) return params.status();
  auto to_neighbor = Distance(o, neighbor_out, spec.norm());
  if (!to_neighbor.ok()) return to_neighbor.status();
  auto to_full = Distance(o, full_out, spec.norm());
  if (!to_full.ok()) return to_full.status();
  if (spec.family == MechanismFamily::kLaplace) {
    return spec.epsilon * (*to_neighbor - *to_full) / sensitivity;
  }
  return (*to_neighbor * *to_neighbor - *to_full * *to_full) /
         (2.0 * params->variance_sigma2);
}

absl::StatusOr<double> ExPostLoss(const QueryOutput& o,
                                  const QueryOutput& full_out,
                                  const QueryOutput& neighbor_out,
                                  const MechanismSpec& spec,
                                  double sensitivity) {
  auto signed_loss = SignedPrivacyLoss(o, full_out, neighbor_out, spec, sensitivity);
  if (!signed_loss.ok()) return signed_loss.status();
  return std::abs(*signed_loss);
}

absl::StatusOr<RdrProfile> ComputeRdrProfile(
    std::shared_ptr<const PisTable> pis, const MechanismSpec& spec, size_t k,
    double sensitivity) {
  if (pis == nullptr) return absl::InvalidArgumentError("null PIS table");
  if (pis->norm != spec.norm()) {
    return absl::InvalidArgumentError(
        "PIS norm does not match the mechanism family");
  }
  if (k == 0) return absl::InvalidArgumentError("k must be >= 1");
  auto params = ComputeNoiseParams(spec, sensitivity);
  if (!params.ok()) return params.status();

  RdrProfile p;
  p.mechanism_ = spec;
  p.k_ = k;
  p.sensitivity_ = sensitivity;
  p.per_unique_.reserve(pis->per_unique.size());
  const double kd = static_cast<double>(k);
  for (double s : pis->per_unique) {
    p.per_unique_.push_back(spec.family == MechanismFamily::kLaplace
                                ? s + kd * params->scale_b
                                : std::sqrt(s * s + kd * params->variance_sigma2));
  }
  if (!p.per_unique_.empty()) {
    auto [lo, hi] = std::minmax_element(p.per_unique_.begin(), p.per_unique_.end());
    p.rdr_min_ = *lo;
    p.rdr_max_ = *hi;
  }
  p.pis_ = std::move(pis);
  return p;
}

double RdrProfile::ratio() const {
  if (rdr_max_ == 0) return 1.0;
  return rdr_min_ / rdr_max_;
}

double RdrProfile::normalized_variance() const {
  if (rdr_max_ == 0) return 0.0;
  const auto& counts = pis_->unique_count;
  const double n = static_cast<double>(num_rows());
  double mean = 0;
  for (size_t u = 0; u < per_unique_.size(); ++u) {
    mean += static_cast<double>(counts[u]) * (per_unique_[u] / rdr_max_);
  }
  mean /= n;
  double var = 0;
  for (size_t u = 0; u < per_unique_.size(); ++u) {
    const double d = per_unique_[u] / rdr_max_ - mean;
    var += static_cast<double>(counts[u]) * d * d;
  }
  return var / n;
}

std::array<size_t, kHistogramBuckets> RdrProfile::histogram() const {
  std::array<size_t, kHistogramBuckets> h{};
  const double width = (rdr_max_ - rdr_min_) / kHistogramBuckets;
  for (size_t u = 0; u < per_unique_.size(); ++u) {
    size_t b = 0;
    if (width > 0) {
      b = static_cast<size_t>((per_unique_[u] - rdr_min_) / width);
      b = std::min(b, kHistogramBuckets - 1);
    }
    h[b] += pis_->unique_count[u];
  }
  return h;
}

absl::StatusOr<double> RdrProfile::median_of(
    const std::vector<size_t>& rows) const {
  if (rows.empty()) return absl::InvalidArgumentError("empty group");
  std::vector<double> v;
  v.reserve(rows.size());
  for (size_t r : rows) {
    if (r >= num_rows()) return absl::OutOfRangeError("row index out of range");
    v.push_back(per_row(r));
  }
  const size_t mid = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

nlohmann::json ProfileSummaryJson(const RdrProfile& profile) {
  nlohmann::json j;
  if (std::isinf(profile.epsilon())) {
    j["epsilon"] = "infinity";
  } else {
    j["epsilon"] = profile.epsilon();
  }
  j["rdr_min"] = profile.rdr_min();
  j["rdr_max"] = profile.rdr_max();
  j["ratio"] = profile.ratio();
  j["norm_variance"] = profile.normalized_variance();
  const auto h = profile.histogram();
  j["histogram"] = std::vector<size_t>(h.begin(), h.end());
  return j;
}

}  // namespace riskscope
