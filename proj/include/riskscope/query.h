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

#ifndef RISKSCOPE_QUERY_H_
#define RISKSCOPE_QUERY_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "riskscope/tabular.h"

namespace riskscope {

enum class Norm { kL1, kL2 };

std::string_view NormName(Norm norm);

// Boolean expression tree. Leaves compare one attribute against literals;
// internal nodes are AND/OR over children.
struct Predicate {
  enum class Op { kEq, kNe, kLt, kLe, kGt, kGe, kIn, kBetween, kAnd, kOr };

  Op op = Op::kEq;
  std::string attr;
  std::vector<Value> literals;  // 1 for comparisons, 2 for between, n for in
  std::vector<Predicate> children;

  bool is_leaf() const { return op != Op::kAnd && op != Op::kOr; }
  absl::Status Validate(const Schema& schema) const;
  // Evaluates against a row given as a column-index -> value accessor.
  template <typename Lookup>
  bool Matches(const Schema& schema, const Lookup& lookup) const;
  void CollectAttributes(std::vector<std::string>& out) const;

  static absl::StatusOr<Predicate> FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
};

enum class QueryKind { kCount, kGroupByCount, kSum, kAvg };

// Numeric query q: X^n -> R^k.
class Query {
 public:
  QueryKind kind = QueryKind::kCount;
  std::optional<Predicate> predicate;
  std::string group_by;                    // GROUP_BY_COUNT only
  std::string target;                      // SUM / AVG only
  std::vector<Value> group_domain;         // GROUP_BY_COUNT only

  // Output dimension; data independent.
  size_t k() const {
    return kind == QueryKind::kGroupByCount ? group_domain.size() : 1;
  }
  // Every attribute the query touches, deduplicated, in first-use order.
  std::vector<std::string> ReferencedAttributes() const;
  absl::Status Validate(const Schema& schema) const;

  // {"kind":"count|group_by_count|sum|avg","predicate":{...},
  //  "group_by":"...","group_domain":[...],"target":"..."}
  static absl::StatusOr<Query> FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;
};

struct QueryOutput {
  std::vector<double> values;
  size_t k() const { return values.size(); }
};

absl::StatusOr<QueryOutput> EvaluateQuery(const Dataset& d, const Query& q);
absl::StatusOr<QueryOutput> EvaluateQuery(const ProjectedDataset& p,
                                          const Query& q);

// Norm of a - b. Dimensions must match.
absl::StatusOr<double> Distance(const QueryOutput& a, const QueryOutput& b,
                                Norm norm);

// Global sensitivity under the removal neighbor relation. AVG uses the
// approximation (hi - lo) / n; `override_value` replaces any computed value.
absl::StatusOr<double> GlobalSensitivity(
    const Query& q, const Schema& schema, size_t n, Norm norm,
    std::optional<double> override_value = std::nullopt);

// Per-instance sensitivities ||q(x) - q(x_{-i})||, one value per unique
// projected record and fanned out to rows through `row_key`.
struct PisTable {
  Norm norm = Norm::kL1;
  std::vector<double> per_unique;
  std::vector<uint32_t> row_key;
  std::vector<size_t> unique_count;  // rows per unique record

  size_t num_rows() const { return row_key.size(); }
  double per_row(size_t row) const { return per_unique[row_key[row]]; }
  double min() const;
  double max() const;
};

struct PisOptions {
  Norm norm = Norm::kL1;
  unsigned workers = 1;
};

// Computes q(x_{-i}) once per unique projected record. Unique records are
// split into contiguous chunks, one per worker; the result does not depend on
// the worker count.
absl::StatusOr<PisTable> PerInstanceSensitivity(const ProjectedDataset& p,
                                                const Query& q,
                                                PisOptions options);

unsigned DefaultWorkers();

// ---------------------------------------------------------------------------

template <typename Lookup>
bool Predicate::Matches(const Schema& schema, const Lookup& lookup) const {
  switch (op) {
    case Op::kAnd:
      for (const auto& c : children) {
        if (!c.Matches(schema, lookup)) return false;
      }
      return true;
    case Op::kOr:
      for (const auto& c : children) {
        if (c.Matches(schema, lookup)) return true;
      }
      return false;
    default:
      break;
  }
  const size_t col = *schema.IndexOf(attr);
  const Value& v = lookup(col);
  if (schema.column(col).kind == ColumnKind::kCategorical) {
    const auto& s = std::get<std::string>(v);
    switch (op) {
      case Op::kEq:
        return s == std::get<std::string>(literals[0]);
      case Op::kNe:
        return s != std::get<std::string>(literals[0]);
      case Op::kIn:
        for (const auto& l : literals) {
          if (s == std::get<std::string>(l)) return true;
        }
        return false;
      default:
        return false;  // rejected by Validate
    }
  }
  const double x = NumericValue(v);
  switch (op) {
    case Op::kEq:
      return x == NumericValue(literals[0]);
    case Op::kNe:
      return x != NumericValue(literals[0]);
    case Op::kLt:
      return x < NumericValue(literals[0]);
    case Op::kLe:
      return x <= NumericValue(literals[0]);
    case Op::kGt:
      return x > NumericValue(literals[0]);
    case Op::kGe:
      return x >= NumericValue(literals[0]);
    case Op::kBetween:
      return x >= NumericValue(literals[0]) && x <= NumericValue(literals[1]);
    case Op::kIn:
      for (const auto& l : literals) {
        if (x == NumericValue(l)) return true;
      }
      return false;
    default:
      return false;
  }
}

}  // namespace riskscope

#endif  // RISKSCOPE_QUERY_H_
