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

#ifndef RISKSCOPE_RDR_H_
#define RISKSCOPE_RDR_H_

#include <array>
#include <memory>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "riskscope/mechanisms.h"
#include "riskscope/query.h"

namespace riskscope {

// ||o - q(x_{-i})|| for one realized output.
absl::StatusOr<double> OutputDependentRdr(const QueryOutput& o,
                                          const QueryOutput& neighbor_out,
                                          Norm norm);

// Realized loss |ln Pr[M(x) = o] / Pr[M(x_{-i}) = o]|:
//   Laplace:  |eps (||o - q(x_{-i})||_1 - ||o - q(x)||_1) / sensitivity|
//   Gaussian: |(||o - q(x_{-i})||_2^2 - ||o - q(x)||_2^2) / (2 sigma^2)|
absl::StatusOr<double> ExPostLoss(const QueryOutput& o,
                                  const QueryOutput& full_out,
                                  const QueryOutput& neighbor_out,
                                  const MechanismSpec& spec,
                                  double sensitivity);

// The same log-likelihood ratio without the absolute value.
absl::StatusOr<double> SignedPrivacyLoss(const QueryOutput& o,
                                         const QueryOutput& full_out,
                                         const QueryOutput& neighbor_out,
                                         const MechanismSpec& spec,
                                         double sensitivity);

inline constexpr size_t kHistogramBuckets = 16;

// RDR upper bound for every record at one candidate epsilon:
//   Laplace:  PIS_i + k * sensitivity / eps
//   Gaussian: sqrt(PIS_i^2 + k * sigma^2)
// Values are held per unique projected record and fanned out through the
// PIS table's row map.
class RdrProfile {
 public:
  const MechanismSpec& mechanism() const { return mechanism_; }
  double epsilon() const { return mechanism_.epsilon; }
  size_t k() const { return k_; }
  double sensitivity() const { return sensitivity_; }
  const PisTable& pis() const { return *pis_; }
  const std::vector<double>& per_unique() const { return per_unique_; }
  size_t num_rows() const { return pis_->num_rows(); }
  double per_row(size_t row) const { return per_unique_[pis_->row_key[row]]; }
  double rdr_min() const { return rdr_min_; }
  double rdr_max() const { return rdr_max_; }

  // rdr_min / rdr_max; 1 when every RDR is 0.
  double ratio() const;
  // Population variance over rows of RDR / rdr_max.
  double normalized_variance() const;
  // Row counts in 16 equal-width buckets over [rdr_min, rdr_max].
  std::array<size_t, kHistogramBuckets> histogram() const;
  // Lower median of the RDRs of the given rows.
  absl::StatusOr<double> median_of(const std::vector<size_t>& rows) const;

 private:
  friend absl::StatusOr<RdrProfile> ComputeRdrProfile(
      std::shared_ptr<const PisTable>, const MechanismSpec&, size_t, double);
  MechanismSpec mechanism_;
  size_t k_ = 1;
  double sensitivity_ = 1;
  std::shared_ptr<const PisTable> pis_;
  std::vector<double> per_unique_;
  double rdr_min_ = 0;
  double rdr_max_ = 0;
};

absl::StatusOr<RdrProfile> ComputeRdrProfile(
    std::shared_ptr<const PisTable> pis, const MechanismSpec& spec, size_t k,
    double sensitivity);

// One row of an analysis report.
nlohmann::json ProfileSummaryJson(const RdrProfile& profile);

}  // namespace riskscope

#endif  // RISKSCOPE_RDR_H_
