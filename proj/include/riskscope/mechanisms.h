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

#ifndef RISKSCOPE_MECHANISMS_H_
#define RISKSCOPE_MECHANISMS_H_

#include <limits>
#include <string_view>

#include "absl/status/statusor.h"
#include "riskscope/noise_stream.h"
#include "riskscope/query.h"

namespace riskscope {

enum class MechanismFamily { kLaplace, kGaussian };

std::string_view FamilyName(MechanismFamily family);
absl::StatusOr<MechanismFamily> ParseFamily(std::string_view name);

inline constexpr double kNoPrivacy = std::numeric_limits<double>::infinity();

// (epsilon, delta) for one mechanism application. epsilon may be kNoPrivacy
// for RDR analysis of the raw output; it is never released with that value.
struct MechanismSpec {
  MechanismFamily family = MechanismFamily::kLaplace;
  double epsilon = 1.0;
  double delta = 0.0;

  static MechanismSpec Laplace(double epsilon) {
    return {MechanismFamily::kLaplace, epsilon, 0.0};
  }
  static MechanismSpec Gaussian(double epsilon, double delta) {
    return {MechanismFamily::kGaussian, epsilon, delta};
  }

  Norm norm() const {
    return family == MechanismFamily::kLaplace ? Norm::kL1 : Norm::kL2;
  }
  MechanismSpec WithEpsilon(double e) const { return {family, e, delta}; }
  absl::Status Validate() const;
};

// b = sensitivity / epsilon for Laplace; sigma^2 = 2 sensitivity^2
// ln(1.25 / delta) / epsilon^2 for Gaussian. Only the active family's field
// is set.
struct NoiseParams {
  double scale_b = 0;
  double variance_sigma2 = 0;
};

absl::StatusOr<NoiseParams> ComputeNoiseParams(const MechanismSpec& spec,
                                               double sensitivity);

// Inverse-CDF Laplace sample; one 64-bit draw.
double SampleLaplace(NoiseStream& stream, double scale_b);
// Box-Muller (cosine branch) standard normal scaled by sigma; two draws.
double SampleGaussian(NoiseStream& stream, double sigma);

// out + (Z_1, ..., Z_k) with i.i.d. noise drawn in coordinate order. An
// epsilon of kNoPrivacy returns `out` unchanged without consuming draws.
absl::StatusOr<QueryOutput> ApplyMechanism(const QueryOutput& out,
                                           const MechanismSpec& spec,
                                           double sensitivity,
                                           NoiseStream& stream);

}  // namespace riskscope

#endif  // RISKSCOPE_MECHANISMS_H_
