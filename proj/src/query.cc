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

#include "riskscope/query.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace riskscope {
namespace {

using Op = Predicate::Op;

constexpr size_t kNoSkip = std::numeric_limits<size_t>::max();

struct OpName {
  Op op;
  const char* name;
};

constexpr OpName kOpNames[] = {
    {Op::kEq, "=="}, {Op::kNe, "!="}, {Op::kLt, "<"},  {Op::kLe, "<="},
    {Op::kGt, ">"},  {Op::kGe, ">="}, {Op::kIn, "in"}, {Op::kBetween, "between"},
};

absl::StatusOr<Value> LiteralFromJson(const nlohmann::json& j) {
  if (j.is_number_integer()) return Value(j.get<int64_t>());
  if (j.is_number()) return Value(j.get<double>());
  if (j.is_string()) return Value(j.get<std::string>());
  return absl::InvalidArgumentError(
      absl::StrCat("unsupported literal ", j.dump()));
}

nlohmann::json LiteralToJson(const Value& v) {
  if (const auto* i = std::get_if<int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::get<std::string>(v);
}

absl::StatusOr<QueryKind> ParseKind(std::string_view s) {
  if (s == "count") return QueryKind::kCount;
  if (s == "group_by_count") return QueryKind::kGroupByCount;
  if (s == "sum") return QueryKind::kSum;
  if (s == "avg") return QueryKind::kAvg;
  return absl::InvalidArgumentError(absl::StrCat("unknown query kind '", std::string(s), "'"));
}

std::string_view KindName(QueryKind k) {
  switch (k) {
    case QueryKind::kCount:
      return "count";
    case QueryKind::kGroupByCount:
      return "group_by_count";
    case QueryKind::kSum:
      return "sum";
    case QueryKind::kAvg:
      return "avg";
  }
  return "count";
}

bool SameValue(const Value& a, const Value& b) {
  if (std::holds_alternative<std::string>(a) ||
      std::holds_alternative<std::string>(b)) {
    return a == b;
  }
  return NumericValue(a) == NumericValue(b);
}

// One record's effect on the aggregate.
struct Contribution {
  bool match = false;
  int32_t group = -1;
  int64_t ivalue = 0;
  double value = 0;
};

struct Accumulator {
  const Query* q;
  bool integer_target;
  int64_t count = 0;
  int64_t isum = 0;
  double sum = 0;
  std::vector<double> groups;

  Accumulator(const Query& query, bool int_target)
      : q(&query), integer_target(int_target), groups(query.k(), 0.0) {}

  void Add(const Contribution& c) {
    if (!c.match) return;
    ++count;
    switch (q->kind) {
      case QueryKind::kGroupByCount:
        groups[c.group] += 1;
        break;
      case QueryKind::kSum:
      case QueryKind::kAvg:
        if (integer_target) {
          isum += c.ivalue;
        } else {
          sum += c.value;
        }
        break;
      case QueryKind::kCount:
        break;
    }
  }

  absl::StatusOr<QueryOutput> Finish() const {
    QueryOutput out;
    const double total = integer_target ? static_cast<double>(isum) : sum;
    switch (q->kind) {
      case QueryKind::kCount:
        out.values = {static_cast<double>(count)};
        break;
      case QueryKind::kGroupByCount:
        out.values = groups;
        break;
      case QueryKind::kSum:
        out.values = {total};
        break;
      case QueryKind::kAvg:
        if (count == 0) {
          return absl::FailedPreconditionError("empty AVG: no matching rows");
        }
        out.values = {total / static_cast<double>(count)};
        break;
    }
    return out;
  }
};

// Builds the contribution of a record given a lookup from schema column index
// to value.
template <typename Lookup>
absl::StatusOr<Contribution> Contribute(const Query& q, const Schema& schema,
                                        const Lookup& lookup) {
  Contribution c;
  c.match = !q.predicate || q.predicate->Matches(schema, lookup);
  if (!c.match) return c;
  if (q.kind == QueryKind::kGroupByCount) {
    const Value& g = lookup(*schema.IndexOf(q.group_by));
    for (size_t i = 0; i < q.group_domain.size(); ++i) {
      if (SameValue(g, q.group_domain[i])) {
        c.group = static_cast<int32_t>(i);
        break;
      }
    }
    if (c.group < 0) {
      return absl::InvalidArgumentError(absl::StrCat(
          "group value '", ValueToString(g), "' not in group_domain"));
    }
  } else if (q.kind == QueryKind::kSum || q.kind == QueryKind::kAvg) {
    const Value& v = lookup(*schema.IndexOf(q.target));
    if (const auto* i = std::get_if<int64_t>(&v)) c.ivalue = *i;
    c.value = NumericValue(v);
  }
  return c;
}

bool IntegerTarget(const Query& q, const Schema& schema) {
  if (q.kind != QueryKind::kSum && q.kind != QueryKind::kAvg) return false;
  return schema.column(*schema.IndexOf(q.target)).kind == ColumnKind::kInteger;
}

// Evaluates q over the projected rows, leaving out row `skip` (kNoSkip keeps
// every row). Each call is a full pass over the n rows in row order.
absl::StatusOr<QueryOutput> FoldRows(const Query& q, bool integer_target,
                                     const std::vector<Contribution>& contrib,
                                     const std::vector<uint32_t>& row_key,
                                     size_t skip) {
  Accumulator acc(q, integer_target);
  const size_t n = row_key.size();
  for (size_t r = 0; r < n; ++r) {
    if (r == skip) continue;
    acc.Add(contrib[row_key[r]]);
  }
  return acc.Finish();
}

absl::StatusOr<std::vector<Contribution>> ProjectedContributions(
    const ProjectedDataset& p, const Query& q) {
  const Schema& schema = p.source->schema();
  std::vector<int> slot(schema.size(), -1);
  for (size_t a = 0; a < p.attr_columns.size(); ++a) {
    slot[p.attr_columns[a]] = static_cast<int>(a);
  }
  std::vector<Contribution> out;
  out.reserve(p.num_unique());
  for (const auto& vals : p.unique_values) {
    auto lookup = [&](size_t col) -> const Value& { return vals[slot[col]]; };
    auto c = Contribute(q, schema, lookup);
    if (!c.ok()) return c.status();
    out.push_back(*c);
  }
  return out;
}

}  // namespace

std::string_view NormName(Norm norm) {
  return norm == Norm::kL1 ? "l1" : "l2";
}

absl::Status Predicate::Validate(const Schema& schema) const {
  if (!is_leaf()) {
    if (children.empty()) {
      return absl::InvalidArgumentError("and/or node without children");
    }
    for (const auto& c : children) {
      if (auto st = c.Validate(schema); !st.ok()) return st;
    }
    return absl::OkStatus();
  }
  const auto col = schema.IndexOf(attr);
  if (!col) {
    return absl::NotFoundError(absl::StrCat("unknown attribute '", attr, "'"));
  }
  const auto& spec = schema.column(*col);
  const size_t want = op == Op::kBetween ? 2 : (op == Op::kIn ? 0 : 1);
  if ((want > 0 && literals.size() != want) ||
      (op == Op::kIn && literals.empty())) {
    return absl::InvalidArgumentError(
        absl::StrCat("wrong number of literals for '", attr, "'"));
  }
  for (const auto& l : literals) {
    const bool is_string = std::holds_alternative<std::string>(l);
    if (is_string == spec.is_numeric()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "literal kind does not match ", std::string(ColumnKindName(spec.kind)),
          " column '", attr, "'"));
    }
  }
  if (!spec.is_numeric() && op != Op::kEq && op != Op::kNe && op != Op::kIn) {
    return absl::InvalidArgumentError(absl::StrCat(
        "ordering comparison on categorical column '", attr, "'"));
  }
  return absl::OkStatus();
}

void Predicate::CollectAttributes(std::vector<std::string>& out) const {
  if (is_leaf()) {
    if (std::find(out.begin(), out.end(), attr) == out.end()) out.push_back(attr);
    return;
  }
  for (const auto& c : children) c.CollectAttributes(out);
}

absl::StatusOr<Predicate> Predicate::FromJson(const nlohmann::json& j) {
  if (!j.is_object()) {
    return absl::InvalidArgumentError("predicate must be an object");
  }
  for (const char* key : {"and", "or"}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_array()) {
      return absl::InvalidArgumentError(absl::StrCat("'", key, "' needs a list"));
    }
    Predicate p;
    p.op = std::string_view(key) == "and" ? Op::kAnd : Op::kOr;
    for (const auto& c : j[key]) {
      auto child = FromJson(c);
      if (!child.ok()) return child.status();
      p.children.push_back(*std::move(child));
    }
    if (p.children.empty()) {
      return absl::InvalidArgumentError(absl::StrCat("empty '", key, "'"));
    }
    return p;
  }
  if (!j.contains("attr") || !j["attr"].is_string() || !j.contains("op") ||
      !j["op"].is_string() || !j.contains("value")) {
    return absl::InvalidArgumentError(
        "predicate leaf needs 'attr', 'op' and 'value'");
  }
  Predicate p;
  p.attr = j["attr"].get<std::string>();
  const std::string op = j["op"].get<std::string>();
  bool found = false;
  for (const auto& [o, name] : kOpNames) {
    if (op == name) {
      p.op = o;
      found = true;
    }
  }
  if (!found) {
    return absl::InvalidArgumentError(absl::StrCat("unknown operator '", op, "'"));
  }
  const auto& value = j["value"];
  if (p.op == Op::kIn || p.op == Op::kBetween) {
    if (!value.is_array()) {
      return absl::InvalidArgumentError(
          absl::StrCat("operator '", op, "' needs a list value"));
    }
    for (const auto& v : value) {
      auto lit = LiteralFromJson(v);
      if (!lit.ok()) return lit.status();
      p.literals.push_back(*std::move(lit));
    }
    if (p.op == Op::kBetween && p.literals.size() != 2) {
      return absl::InvalidArgumentError("'between' needs [lo, hi]");
    }
  } else {
    auto lit = LiteralFromJson(value);
    if (!lit.ok()) return lit.status();
    p.literals.push_back(*std::move(lit));
  }
  return p;
}

nlohmann::json Predicate::ToJson() const {
  if (!is_leaf()) {
    nlohmann::json kids = nlohmann::json::array();
    for (const auto& c : children) kids.push_back(c.ToJson());
    return {{op == Op::kAnd ? "and" : "or", kids}};
  }
  const char* name = "==";
  for (const auto& [o, n] : kOpNames) {
    if (o == op) name = n;
  }
  nlohmann::json value;
  if (op == Op::kIn || op == Op::kBetween) {
    value = nlohmann::json::array();
    for (const auto& l : literals) value.push_back(LiteralToJson(l));
  } else {
    value = LiteralToJson(literals[0]);
  }
  return {{"attr", attr}, {"op", name}, {"value", value}};
}

std::vector<std::string> Query::ReferencedAttributes() const {
  std::vector<std::string> out;
  if (predicate) predicate->CollectAttributes(out);
  auto add = [&out](const std::string& a) {
    if (!a.empty() && std::find(out.begin(), out.end(), a) == out.end()) {
      out.push_back(a);
    }
  };
  add(group_by);
  add(target);
  return out;
}

absl::Status Query::Validate(const Schema& schema) const {
  if (predicate) {
    if (auto st = predicate->Validate(schema); !st.ok()) return st;
  }
  switch (kind) {
    case QueryKind::kCount:
      if (!group_by.empty() || !target.empty()) {
        return absl::InvalidArgumentError("count takes no group_by or target");
      }
      break;
    case QueryKind::kGroupByCount: {
      if (group_by.empty()) {
        return absl::InvalidArgumentError("group_by_count needs 'group_by'");
      }
      const auto col = schema.IndexOf(group_by);
      if (!col) {
        return absl::NotFoundError(
            absl::StrCat("unknown attribute '", group_by, "'"));
      }
      if (group_domain.empty()) {
        return absl::InvalidArgumentError(
            "group_by_count needs a non-empty 'group_domain'");
      }
      const bool numeric = schema.column(*col).is_numeric();
      for (size_t i = 0; i < group_domain.size(); ++i) {
        if (std::holds_alternative<std::string>(group_domain[i]) == numeric) {
          return absl::InvalidArgumentError(
              "group_domain value kind does not match the group_by column");
        }
        for (size_t j = 0; j < i; ++j) {
          if (SameValue(group_domain[i], group_domain[j])) {
            return absl::InvalidArgumentError(absl::StrCat(
                "duplicate group '", ValueToString(group_domain[i]), "'"));
          }
        }
      }
      break;
    }
    case QueryKind::kSum:
    case QueryKind::kAvg: {
      if (target.empty()) {
        return absl::InvalidArgumentError("sum/avg needs a 'target'");
      }
      const auto col = schema.IndexOf(target);
      if (!col) {
        return absl::NotFoundError(absl::StrCat("unknown attribute '", target, "'"));
      }
      const auto& spec = schema.column(*col);
      if (!spec.is_numeric()) {
        return absl::InvalidArgumentError(
            absl::StrCat("target '", target, "' is not numeric"));
      }
      if (!spec.bounds) {
        return absl::FailedPreconditionError(
            absl::StrCat("target '", target, "' declares no bounds"));
      }
      break;
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<Query> Query::FromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    return absl::InvalidArgumentError("query needs a string 'kind'");
  }
  Query q;
  auto kind = ParseKind(j["kind"].get<std::string>());
  if (!kind.ok()) return kind.status();
  q.kind = *kind;
  if (j.contains("predicate") && !j["predicate"].is_null()) {
    auto p = Predicate::FromJson(j["predicate"]);
    if (!p.ok()) return p.status();
    q.predicate = *std::move(p);
  }
  auto str_field = [&j](const char* key, std::string& out) -> absl::Status {
    if (!j.contains(key) || j[key].is_null()) return absl::OkStatus();
    if (!j[key].is_string()) {
      return absl::InvalidArgumentError(absl::StrCat("'", key, "' must be a string"));
    }
    out = j[key].get<std::string>();
    return absl::OkStatus();
  };
  if (auto st = str_field("group_by", q.group_by); !st.ok()) return st;
  if (auto st = str_field("target", q.target); !st.ok()) return st;
  if (j.contains("group_domain") && !j["group_domain"].is_null()) {
    if (!j["group_domain"].is_array()) {
      return absl::InvalidArgumentError("'group_domain' must be a list");
    }
    for (const auto& v : j["group_domain"]) {
      auto lit = LiteralFromJson(v);
      if (!lit.ok()) return lit.status();
      q.group_domain.push_back(*std::move(lit));
    }
  }
  return q;
}

nlohmann::json Query::ToJson() const {
  nlohmann::json j = {{"kind", std::string(KindName(kind))}};
  if (predicate) j["predicate"] = predicate->ToJson();
  if (!group_by.empty()) j["group_by"] = group_by;
  if (!group_domain.empty()) {
    j["group_domain"] = nlohmann::json::array();
    for (const auto& v : group_domain) j["group_domain"].push_back(LiteralToJson(v));
  }
  if (!target.empty()) j["target"] = target;
  return j;
}

absl::StatusOr<QueryOutput> EvaluateQuery(const Dataset& d, const Query& q) {
  if (auto st = q.Validate(d.schema()); !st.ok()) return st;
  Accumulator acc(q, IntegerTarget(q, d.schema()));
  for (size_t r = 0; r < d.num_rows(); ++r) {
    // Materializing values per row keeps this path simple; the projected
    // overload is the fast path.
    std::vector<Value> row = d.Row(r);
    auto lookup = [&row](size_t col) -> const Value& { return row[col]; };
    auto c = Contribute(q, d.schema(), lookup);
    if (!c.ok()) return c.status();
    acc.Add(*c);
  }
  return acc.Finish();
}

absl::StatusOr<QueryOutput> EvaluateQuery(const ProjectedDataset& p,
                                          const Query& q) {
  if (p.source == nullptr) {
    return absl::InvalidArgumentError("projection without source dataset");
  }
  if (auto st = q.Validate(p.source->schema()); !st.ok()) return st;
  auto contrib = ProjectedContributions(p, q);
  if (!contrib.ok()) return contrib.status();
  return FoldRows(q, IntegerTarget(q, p.source->schema()), *contrib, p.row_key,
                  kNoSkip);
}

absl::StatusOr<double> Distance(const QueryOutput& a, const QueryOutput& b,
                                Norm norm) {
  if (a.k() != b.k()) {
    return absl::InvalidArgumentError(
        absl::StrCat("dimension mismatch: ", a.k(), " vs ", b.k()));
  }
  double acc = 0;
  for (size_t i = 0; i < a.k(); ++i) {
    const double d = a.values[i] - b.values[i];
    acc += norm == Norm::kL1 ? std::abs(d) : d * d;
  }
  return norm == Norm::kL1 ? acc : std::sqrt(acc);
}

absl::StatusOr<double> GlobalSensitivity(const Query& q, const Schema& schema,
                                         size_t n, Norm norm,
                                         std::optional<double> override_value) {
  (void)norm;  // every supported query has the same value in both norms
  if (override_value) {
    if (!(*override_value > 0) || !std::isfinite(*override_value)) {
      return absl::InvalidArgumentError("sensitivity override must be > 0");
    }
    return *override_value;
  }
  switch (q.kind) {
    case QueryKind::kCount:
    case QueryKind::kGroupByCount:
      return 1.0;
    case QueryKind::kSum:
    case QueryKind::kAvg: {
      const auto col = schema.IndexOf(q.target);
      if (!col) {
        return absl::NotFoundError(absl::StrCat("unknown attribute '", q.target, "'"));
      }
      const auto& b = schema.column(*col).bounds;
      if (!b) {
        return absl::FailedPreconditionError(
            absl::StrCat("target '", q.target, "' declares no bounds"));
      }
      if (q.kind == QueryKind::kSum) {
        return std::max(std::abs(b->lo), std::abs(b->hi));
      }
      if (n == 0) return absl::InvalidArgumentError("n must be >= 1");
      return (b->hi - b->lo) / static_cast<double>(n);
    }
  }
  return absl::InternalError("unreachable");
}

double PisTable::min() const {
  return per_unique.empty()
             ? 0
             : *std::min_element(per_unique.begin(), per_unique.end());
}

double PisTable::max() const {
  return per_unique.empty()
             ? 0
             : *std::max_element(per_unique.begin(), per_unique.end());
}

unsigned DefaultWorkers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

absl::StatusOr<PisTable> PerInstanceSensitivity(const ProjectedDataset& p,
                                                const Query& q,
                                                PisOptions options) {
  if (p.source == nullptr) {
    return absl::InvalidArgumentError("projection without source dataset");
  }
  const Schema& schema = p.source->schema();
  if (auto st = q.Validate(schema); !st.ok()) return st;
  const auto referenced = q.ReferencedAttributes();
  for (const auto& a : referenced) {
    if (std::find(p.attrs.begin(), p.attrs.end(), a) == p.attrs.end()) {
      return absl::InvalidArgumentError(
          absl::StrCat("projection lacks attribute '", a, "'"));
    }
  }
  auto contrib = ProjectedContributions(p, q);
  if (!contrib.ok()) return contrib.status();
  const bool int_target = IntegerTarget(q, schema);
  auto full = FoldRows(q, int_target, *contrib, p.row_key, kNoSkip);
  if (!full.ok()) return full.status();

  const size_t unique = p.num_unique();
  PisTable table;
  table.norm = options.norm;
  table.row_key = p.row_key;
  table.unique_count.reserve(unique);
  for (const auto& rows : p.multiplicity) table.unique_count.push_back(rows.size());
  table.per_unique.assign(unique, 0.0);

  // Each worker owns a contiguous slice of the output and its own status
  // slot; nothing is shared mutably.
  const size_t workers =
      std::max<size_t>(1, std::min<size_t>(options.workers, unique));
  const size_t chunk = (unique + workers - 1) / workers;
  std::vector<absl::Status> status(workers);
  auto run = [&](size_t w) {
    const size_t begin = w * chunk;
    const size_t end = std::min(unique, begin + chunk);
    for (size_t u = begin; u < end; ++u) {
      auto neighbor =
          FoldRows(q, int_target, *contrib, p.row_key, p.multiplicity[u][0]);
      if (!neighbor.ok()) {
        status[w] = neighbor.status();
        return;
      }
      table.per_unique[u] = *Distance(*full, *neighbor, options.norm);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (size_t w = 0; w < workers; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  for (const auto& st : status) {
    if (!st.ok()) return st;
  }
  return table;
}

}  // namespace riskscope
