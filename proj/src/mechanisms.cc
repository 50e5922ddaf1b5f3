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

#include "riskscope/mechanisms.h"

#include <cmath>
#include <numbers>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace riskscope {

std::string_view FamilyName(MechanismFamily family) {
  return family == MechanismFamily::kLaplace ? "laplace" : "gaussian";
}

absl::StatusOr<MechanismFamily> ParseFamily(std::string_view name) {
  if (name == "laplace") return MechanismFamily::kLaplace;
  if (name == "gaussian") return MechanismFamily::kGaussian;
  return absl::InvalidArgumentError(absl::StrCat("unknown mechanism '", std::string(name), "'"));
}

absl::Status MechanismSpec::Validate() const {
  if (!(epsilon > 0)) {
    return absl::InvalidArgumentError("epsilon must be > 0");
  }
  if (family == MechanismFamily::kLaplace && delta != 0) {
    return absl::InvalidArgumentError("Laplace mechanism requires delta == 0");
  }
  if (family == MechanismFamily::kGaussian && !(delta > 0 && delta < 1)) {
    return absl::InvalidArgumentError("Gaussian mechanism requires 0 < delta < 1");
  }
  return absl::OkStatus();
}

absl::StatusOr<NoiseParams> ComputeNoiseParams(const MechanismSpec& spec,
                                               double sensitivity) {
  if (auto st = spec.Validate(); !st.ok()) return st;
  if (!(sensitivity > 0) || !std::isfinite(sensitivity)) {
    return absl::InvalidArgumentError("sensitivity must be > 0");
  }
  NoiseParams p;
  if (spec.family == MechanismFamily::kLaplace) {
    p.scale_b = sensitivity / spec.epsilon;
  } else {
    p.variance_sigma2 = 2.0 * sensitivity * sensitivity *
                        std::log(1.25 / spec.delta) /
                        (spec.epsilon * spec.epsilon);
  }
  return p;
}

double SampleLaplace(NoiseStream& stream, double scale_b) {
  const double u = stream.NextOpenUnit() - 0.5;
  const double sign = u < 0 ? -1.0 : 1.0;
  return -scale_b * sign * std::log(1.0 - 2.0 * std::abs(u));
}

double SampleGaussian(NoiseStream& stream, double sigma) {
  const double u1 = stream.NextOpenUnit();
  const double u2 = stream.NextOpenUnit();
  return sigma * std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

absl::StatusOr<QueryOutput> ApplyMechanism(const QueryOutput& out,
                                           const MechanismSpec& spec,
                                           double sensitivity,
                                           NoiseStream& stream) {
  auto params = ComputeNoiseParams(spec, sensitivity);
  if (!params.ok()) return params.status();
  if (std::isinf(spec.epsilon)) return out;
  QueryOutput noisy = out;
  const double sigma = std::sqrt(params->variance_sigma2);
  for (double& v : noisy.values) {
    v += spec.family == MechanismFamily::kLaplace
             ? SampleLaplace(stream, params->scale_b)
             : SampleGaussian(stream, sigma);
  }
  return noisy;
}

}  // namespace riskscope
