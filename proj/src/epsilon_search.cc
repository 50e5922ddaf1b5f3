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

#include "riskscope/epsilon_search.h"

#include <algorithm>
#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace riskscope {

absl::StatusOr<EpsilonGrid> EpsilonGrid::Create(std::vector<double> values) {
  if (values.empty()) return absl::InvalidArgumentError("empty epsilon grid");
  for (size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0) || !std::isfinite(values[i])) {
      return absl::InvalidArgumentError("grid values must be finite and > 0");
    }
    if (i > 0 && !(values[i] < values[i - 1])) {
      return absl::InvalidArgumentError("grid must be strictly descending");
    }
  }
  EpsilonGrid g;
  g.values_ = std::move(values);
  return g;
}

EpsilonGrid EpsilonGrid::Default37() {
  std::vector<double> v;
  for (int i = 10; i >= 1; --i) v.push_back(i);
  for (double scale : {10.0, 100.0, 1000.0}) {
    for (int i = 9; i >= 1; --i) v.push_back(i / scale);
  }
  return *Create(std::move(v));
}

absl::StatusOr<EpsilonGrid> EpsilonGrid::FromJson(const nlohmann::json& j) {
  const nlohmann::json* arr = &j;
  if (j.is_object() && j.contains("grid")) arr = &j["grid"];
  if (!arr->is_array()) {
    return absl::InvalidArgumentError("grid must be a list of numbers");
  }
  std::vector<double> v;
  for (const auto& x : *arr) {
    if (!x.is_number()) {
      return absl::InvalidArgumentError("grid must be a list of numbers");
    }
    v.push_back(x.get<double>());
  }
  return Create(std::move(v));
}

EpsilonGrid EpsilonGrid::Filter(const std::function<bool(double)>& keep) const {
  EpsilonGrid g;
  for (double e : values_) {
    if (keep(e)) g.values_.push_back(e);
  }
  return g;
}

absl::StatusOr<PrivacyPreference> PreferenceFromJson(const nlohmann::json& j,
                                                     const Dataset& d) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    return absl::InvalidArgumentError("preference needs a string 'type'");
  }
  const std::string type = j["type"].get<std::string>();
  auto number = [&j](const char* key) -> absl::StatusOr<double> {
    if (!j.contains(key) || !j[key].is_number()) {
      return absl::InvalidArgumentError(absl::StrCat("preference needs numeric '", key, "'"));
    }
    return j[key].get<double>();
  };
  PrivacyPreference pref;
  if (type == "min_max_ratio") {
    auto tau = number("tau_p");
    if (!tau.ok()) return tau.status();
    pref = MinMaxRatio{*tau};
  } else if (type == "normalized_variance") {
    auto tau = number("tau_var");
    if (!tau.ok()) return tau.status();
    pref = NormalizedVariance{*tau};
  } else if (type == "group_median_ratio") {
    auto tau = number("tau_p");
    if (!tau.ok()) return tau.status();
    if (!j.contains("groups") || !j["groups"].is_array()) {
      return absl::InvalidArgumentError("group_median_ratio needs 'groups'");
    }
    GroupMedianRatio g;
    g.tau_p = *tau;
    for (const auto& gj : j["groups"]) {
      if (!gj.is_object() || !gj.contains("name") || !gj["name"].is_string() ||
          !gj.contains("predicate")) {
        return absl::InvalidArgumentError("group needs 'name' and 'predicate'");
      }
      auto pred = Predicate::FromJson(gj["predicate"]);
      if (!pred.ok()) return pred.status();
      if (auto st = pred->Validate(d.schema()); !st.ok()) return st;
      RowGroup group;
      group.name = gj["name"].get<std::string>();
      for (size_t r = 0; r < d.num_rows(); ++r) {
        std::vector<Value> row = d.Row(r);
        auto lookup = [&row](size_t c) -> const Value& { return row[c]; };
        if (pred->Matches(d.schema(), lookup)) group.rows.push_back(r);
      }
      g.groups.push_back(std::move(group));
    }
    pref = std::move(g);
  } else {
    return absl::InvalidArgumentError(absl::StrCat("unknown preference '", type, "'"));
  }
  if (auto st = ValidatePreference(pref, d.num_rows()); !st.ok()) return st;
  return pref;
}

absl::Status ValidatePreference(const PrivacyPreference& pref, size_t n) {
  if (const auto* m = std::get_if<MinMaxRatio>(&pref)) {
    if (!(m->tau_p >= 0 && m->tau_p <= 1)) {
      return absl::InvalidArgumentError("tau_p must lie in [0, 1]");
    }
    return absl::OkStatus();
  }
  if (const auto* v = std::get_if<NormalizedVariance>(&pref)) {
    if (!(v->tau_var >= 0) || !std::isfinite(v->tau_var)) {
      return absl::InvalidArgumentError("tau_var must be >= 0");
    }
    return absl::OkStatus();
  }
  const auto& g = std::get<GroupMedianRatio>(pref);
  if (!(g.tau_p >= 0 && g.tau_p <= 1)) {
    return absl::InvalidArgumentError("tau_p must lie in [0, 1]");
  }
  if (g.groups.size() < 2) {
    return absl::InvalidArgumentError("group_median_ratio needs >= 2 groups");
  }
  std::vector<int> owner(n, -1);
  for (size_t gi = 0; gi < g.groups.size(); ++gi) {
    if (g.groups[gi].rows.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("empty group '", g.groups[gi].name, "'"));
    }
    for (size_t r : g.groups[gi].rows) {
      if (r >= n) return absl::OutOfRangeError("group row out of range");
      if (owner[r] >= 0) {
        return absl::InvalidArgumentError(absl::StrCat(
            "row ", r, " is in both '", g.groups[owner[r]].name, "' and '",
            g.groups[gi].name, "'"));
      }
      owner[r] = static_cast<int>(gi);
    }
  }
  for (size_t r = 0; r < n; ++r) {
    if (owner[r] < 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("row ", r, " is not covered by any group"));
    }
  }
  return absl::OkStatus();
}

namespace {

// Ratios that are exactly tau_p in real arithmetic can land a few ulps below
// it in floating point (e.g. (1/9) / (1 + 1/9) vs 0.1).
constexpr double kRatioSlack = 1e-12;

bool MeetsRatio(double r, double tau_p) { return r >= tau_p * (1 - kRatioSlack); }

}  // namespace

absl::StatusOr<PreferenceCheck> EvaluatePreference(
    const RdrProfile& profile, const PrivacyPreference& pref) {
  if (auto st = ValidatePreference(pref, profile.num_rows()); !st.ok()) return st;
  if (const auto* m = std::get_if<MinMaxRatio>(&pref)) {
    const double r = profile.ratio();
    return PreferenceCheck{MeetsRatio(r, m->tau_p), r};
  }
  if (const auto* v = std::get_if<NormalizedVariance>(&pref)) {
    const double var = profile.normalized_variance();
    return PreferenceCheck{var <= v->tau_var, var};
  }
  const auto& g = std::get<GroupMedianRatio>(pref);
  // The minimum over ordered pairs of median_a / median_b is the smallest
  // median over the largest.
  double lo = 0, hi = 0;
  for (size_t i = 0; i < g.groups.size(); ++i) {
    auto med = profile.median_of(g.groups[i].rows);
    if (!med.ok()) return med.status();
    if (i == 0 || *med < lo) lo = *med;
    if (i == 0 || *med > hi) hi = *med;
  }
  const double r = hi == 0 ? 1.0 : lo / hi;
  return PreferenceCheck{MeetsRatio(r, g.tau_p), r};
}

absl::StatusOr<SvtConfig> SvtConfig::Create(double eps_svt, size_t n,
                                            double tau_var) {
  if (!(eps_svt > 0) || !std::isfinite(eps_svt)) {
    return absl::InvalidArgumentError("eps_svt must be finite and > 0");
  }
  if (n == 0) return absl::InvalidArgumentError("n must be >= 1");
  if (!(tau_var >= 0) || !std::isfinite(tau_var)) {
    return absl::InvalidArgumentError("tau_var must be >= 0");
  }
  SvtConfig c;
  c.eps_svt = eps_svt;
  c.eps1 = eps_svt / (1.0 + std::cbrt(4.0));
  c.eps2 = eps_svt - c.eps1;
  c.delta_svt = 1.0 / static_cast<double>(n);
  c.tau_var = tau_var;
  return c;
}

SvtOutcome SvtAboveThreshold(
    const std::function<std::optional<double>(size_t)>& next, double threshold,
    const SvtConfig& cfg, const SeedContext& seeds) {
  NoiseStream rho_stream = seeds.Stream(StreamPurpose::kSvtThreshold, 0);
  const double rho = SampleLaplace(rho_stream, cfg.delta_svt / cfg.eps1);
  const double scale = 2.0 * cfg.delta_svt / cfg.eps2;
  SvtOutcome out;
  for (size_t i = 0;; ++i) {
    const auto value = next(i);
    if (!value) break;
    ++out.tested;
    NoiseStream s = seeds.Stream(StreamPurpose::kSvtCandidate, i);
    if (*value + SampleLaplace(s, scale) >= threshold + rho) {
      out.index = i;
      break;
    }
  }
  return out;
}

absl::StatusOr<QueryContext> PrepareQuery(const Dataset& d, const Query& q,
                                          const PrepareOptions& options) {
  QueryContext ctx;
  ctx.dataset = &d;
  ctx.query = q;
  ctx.family = options.family;
  auto projection = ProjectQueryAttributes(d, q);
  if (!projection.ok()) return projection.status();
  ctx.projection = *std::move(projection);
  const Norm norm = MechanismSpec{options.family, 1, 0}.norm();
  auto sens = GlobalSensitivity(q, d.schema(), d.num_rows(), norm,
                                options.sensitivity_override);
  if (!sens.ok()) return sens.status();
  ctx.sensitivity = *sens;
  auto exact = EvaluateQuery(ctx.projection, q);
  if (!exact.ok()) return exact.status();
  ctx.exact = *std::move(exact);
  auto pis = PerInstanceSensitivity(ctx.projection, q,
                                    PisOptions{norm, std::max(1u, options.workers)});
  if (!pis.ok()) return pis.status();
  ctx.pis = std::make_shared<const PisTable>(*std::move(pis));
  return ctx;
}

std::optional<AnalystRelease> ToAnalystRelease(const SearchResult& r) {
  if (!r.found() || !r.output) return std::nullopt;
  AnalystRelease a;
  a.output = *r.output;
  if (r.epsilon_released) a.epsilon = r.chosen_epsilon;
  return a;
}

namespace {

absl::Status CheckFamily(const QueryContext& ctx, const MechanismSpec& family) {
  if (ctx.pis == nullptr) return absl::InvalidArgumentError("query not prepared");
  if (family.family != ctx.family) {
    return absl::InvalidArgumentError(
        "mechanism family differs from the prepared sensitivities");
  }
  return family.WithEpsilon(1.0).Validate();
}

absl::Status Release(const QueryContext& ctx, const MechanismSpec& spec,
                     size_t index, const SeedContext& seeds,
                     SearchResult& result) {
  NoiseStream stream = seeds.Stream(StreamPurpose::kRelease, index);
  auto noisy = ApplyMechanism(ctx.exact, spec, ctx.sensitivity, stream);
  if (!noisy.ok()) return noisy.status();
  result.status = SearchStatus::kFound;
  result.chosen_epsilon = spec.epsilon;
  result.chosen_index = index;
  result.output = *std::move(noisy);
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<SearchResult> FindEpsilonFromRdr(const QueryContext& ctx,
                                                const MechanismSpec& family,
                                                const EpsilonGrid& grid,
                                                const PrivacyPreference& pref,
                                                const SeedContext& seeds) {
  if (auto st = CheckFamily(ctx, family); !st.ok()) return st;
  if (std::holds_alternative<NormalizedVariance>(pref)) {
    return absl::InvalidArgumentError(
        "the non-SVT search takes a ratio preference");
  }
  if (auto st = ValidatePreference(pref, ctx.n()); !st.ok()) return st;
  SearchResult result;
  for (size_t i = 0; i < grid.size(); ++i) {
    const MechanismSpec spec = family.WithEpsilon(grid.values()[i]);
    auto profile = ComputeRdrProfile(ctx.pis, spec, ctx.query.k(), ctx.sensitivity);
    if (!profile.ok()) return profile.status();
    auto check = EvaluatePreference(*profile, pref);
    if (!check.ok()) return check.status();
    result.trace.push_back({spec.epsilon, check->statistic, check->satisfied});
    if (check->satisfied) {
      if (auto st = Release(ctx, spec, i, seeds, result); !st.ok()) return st;
      result.epsilon_released = false;
      result.eps_charge = spec.epsilon;
      result.delta_charge = spec.delta;
      return result;
    }
  }
  return result;
}

absl::StatusOr<SearchResult> FindAndReleaseEpsilon(const QueryContext& ctx,
                                                   const MechanismSpec& family,
                                                   const EpsilonGrid& grid,
                                                   const SvtConfig& cfg,
                                                   const SeedContext& seeds) {
  if (auto st = CheckFamily(ctx, family); !st.ok()) return st;
  if (std::abs(cfg.delta_svt - 1.0 / static_cast<double>(ctx.n())) > 0) {
    return absl::InvalidArgumentError("SVT sensitivity must be 1 / n");
  }
  SearchResult result;
  absl::Status error;
  auto next = [&](size_t i) -> std::optional<double> {
    if (i >= grid.size() || !error.ok()) return std::nullopt;
    const MechanismSpec spec = family.WithEpsilon(grid.values()[i]);
    auto profile =
        ComputeRdrProfile(ctx.pis, spec, ctx.query.k(), ctx.sensitivity);
    if (!profile.ok()) {
      error = profile.status();
      return std::nullopt;
    }
    const double var = profile->normalized_variance();
    result.trace.push_back({spec.epsilon, var, false});
    return -var;
  };
  const SvtOutcome outcome = SvtAboveThreshold(next, -cfg.tau_var, cfg, seeds);
  if (!error.ok()) return error;
  if (!outcome.index) return result;
  const size_t i = *outcome.index;
  result.trace.back().passed = true;
  const MechanismSpec spec = family.WithEpsilon(grid.values()[i]);
  if (auto st = Release(ctx, spec, i, seeds, result); !st.ok()) return st;
  result.epsilon_released = true;
  result.eps_charge = spec.epsilon + cfg.eps_svt;
  result.delta_charge = spec.delta;
  return result;
}

}  // namespace riskscope
