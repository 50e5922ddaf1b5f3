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

#include "riskscope/tabular.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "riskscope/query.h"

namespace riskscope {
namespace {

std::string_view Trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const size_t b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const size_t e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

absl::StatusOr<ColumnKind> ParseKind(std::string_view s) {
  if (s == "integer") return ColumnKind::kInteger;
  if (s == "real") return ColumnKind::kReal;
  if (s == "categorical") return ColumnKind::kCategorical;
  return absl::InvalidArgumentError(absl::StrCat("unknown column kind '", std::string(s), "'"));
}

std::string FormatReal(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool NeedsQuoting(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos ||
         (!s.empty() && (s.front() == ' ' || s.back() == ' '));
}

}  // namespace

std::string_view ColumnKindName(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kInteger:
      return "integer";
    case ColumnKind::kReal:
      return "real";
    case ColumnKind::kCategorical:
      return "categorical";
  }
  return "unknown";
}

absl::StatusOr<Schema> Schema::Create(std::vector<ColumnSpec> columns) {
  if (columns.empty()) {
    return absl::InvalidArgumentError("schema has no columns");
  }
  std::unordered_set<std::string> seen;
  for (const auto& c : columns) {
    if (c.name.empty()) {
      return absl::InvalidArgumentError("empty column name");
    }
    if (!seen.insert(c.name).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("duplicate column '", c.name, "'"));
    }
    if (c.bounds.has_value()) {
      if (!c.is_numeric()) {
        return absl::InvalidArgumentError(
            absl::StrCat("bounds on categorical column '", c.name, "'"));
      }
      if (!(c.bounds->lo <= c.bounds->hi)) {
        return absl::InvalidArgumentError(
            absl::StrCat("column '", c.name, "' has lo > hi"));
      }
    }
  }
  Schema s;
  s.columns_ = std::move(columns);
  return s;
}

absl::StatusOr<Schema> Schema::FromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("columns") || !j["columns"].is_array()) {
    return absl::InvalidArgumentError("schema must be {\"columns\":[...]}");
  }
  std::vector<ColumnSpec> cols;
  for (const auto& c : j["columns"]) {
    if (!c.is_object() || !c.contains("name") || !c["name"].is_string() ||
        !c.contains("kind") || !c["kind"].is_string()) {
      return absl::InvalidArgumentError("column needs string name and kind");
    }
    ColumnSpec spec;
    spec.name = c["name"].get<std::string>();
    auto kind = ParseKind(c["kind"].get<std::string>());
    if (!kind.ok()) return kind.status();
    spec.kind = *kind;
    if (c.contains("bounds") && !c["bounds"].is_null()) {
      const auto& b = c["bounds"];
      if (!b.is_array() || b.size() != 2 || !b[0].is_number() ||
          !b[1].is_number()) {
        return absl::InvalidArgumentError(
            absl::StrCat("bounds of '", spec.name, "' must be [lo, hi]"));
      }
      spec.bounds = Bounds{b[0].get<double>(), b[1].get<double>()};
    }
    cols.push_back(std::move(spec));
  }
  return Create(std::move(cols));
}

nlohmann::json Schema::ToJson() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns_) {
    nlohmann::json col = {{"name", c.name},
                          {"kind", std::string(ColumnKindName(c.kind))}};
    if (c.bounds) col["bounds"] = {c.bounds->lo, c.bounds->hi};
    cols.push_back(std::move(col));
  }
  return {{"columns", cols}};
}

std::optional<size_t> Schema::IndexOf(std::string_view name) const {
  for (size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

double NumericValue(const Value& v) {
  if (const auto* i = std::get_if<int64_t>(&v)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::nan("");
}

std::string ValueToString(const Value& v) {
  if (const auto* i = std::get_if<int64_t>(&v)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&v)) return FormatReal(*d);
  return std::get<std::string>(v);
}

Value Column::Get(size_t row) const {
  switch (kind) {
    case ColumnKind::kInteger:
      return ints[row];
    case ColumnKind::kReal:
      return reals[row];
    case ColumnKind::kCategorical:
      return dictionary[codes[row]];
  }
  return int64_t{0};
}

std::optional<int32_t> Column::CodeOf(std::string_view value) const {
  for (size_t i = 0; i < dictionary.size(); ++i) {
    if (dictionary[i] == value) return static_cast<int32_t>(i);
  }
  return std::nullopt;
}

std::vector<Value> Dataset::Row(size_t row) const {
  std::vector<Value> out;
  out.reserve(columns_.size());
  for (const auto& c : columns_) out.push_back(c.Get(row));
  return out;
}

absl::StatusOr<Dataset> Dataset::FromRows(
    Schema schema, const std::vector<std::vector<Value>>& rows) {
  DatasetBuilder b(std::move(schema));
  b.Reserve(rows.size());
  for (const auto& r : rows) {
    if (auto st = b.Append(r); !st.ok()) return st;
  }
  return std::move(b).Finish();
}

absl::StatusOr<Dataset> Dataset::WithoutRows(
    const std::vector<size_t>& rows) const {
  std::vector<bool> drop(num_rows_, false);
  for (size_t r : rows) {
    if (r >= num_rows_) return absl::OutOfRangeError("row index out of range");
    drop[r] = true;
  }
  DatasetBuilder b(schema_);
  for (size_t r = 0; r < num_rows_; ++r) {
    if (drop[r]) continue;
    if (auto st = b.Append(Row(r)); !st.ok()) return st;
  }
  // x_{-i} may be empty; bypass the n >= 1 check of Finish().
  return std::move(b.dataset_);
}

DatasetBuilder::DatasetBuilder(Schema schema) {
  dataset_.schema_ = std::move(schema);
  dataset_.columns_.resize(dataset_.schema_.size());
  code_index_.resize(dataset_.schema_.size());
  for (size_t i = 0; i < dataset_.schema_.size(); ++i) {
    dataset_.columns_[i].kind = dataset_.schema_.column(i).kind;
  }
}

void DatasetBuilder::Reserve(size_t rows) {
  for (auto& c : dataset_.columns_) {
    switch (c.kind) {
      case ColumnKind::kInteger:
        c.ints.reserve(rows);
        break;
      case ColumnKind::kReal:
        c.reals.reserve(rows);
        break;
      case ColumnKind::kCategorical:
        c.codes.reserve(rows);
        break;
    }
  }
}

absl::Status DatasetBuilder::CheckBounds(size_t col, double v,
                                         size_t line) const {
  const auto& spec = dataset_.schema_.column(col);
  if (!std::isfinite(v)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "row ", line, ", column '", spec.name, "': non-finite value"));
  }
  if (spec.bounds && (v < spec.bounds->lo || v > spec.bounds->hi)) {
    return absl::OutOfRangeError(absl::StrCat(
        "row ", line, ", column '", spec.name, "': value ", FormatReal(v),
        " outside bounds [", FormatReal(spec.bounds->lo), ", ",
        FormatReal(spec.bounds->hi), "]"));
  }
  return absl::OkStatus();
}

absl::Status DatasetBuilder::Append(const std::vector<Value>& row) {
  return AppendAt(row, dataset_.num_rows_ + 1);
}

absl::Status DatasetBuilder::AppendAt(const std::vector<Value>& row,
                                      size_t line) {
  if (row.size() != dataset_.columns_.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("row ", line, ": expected ", dataset_.columns_.size(),
                     " values, got ", row.size()));
  }
  // Validate the whole row before mutating any column.
  for (size_t c = 0; c < row.size(); ++c) {
    const auto& spec = dataset_.schema_.column(c);
    const Value& v = row[c];
    switch (spec.kind) {
      case ColumnKind::kInteger:
        if (!std::holds_alternative<int64_t>(v)) {
          return absl::InvalidArgumentError(absl::StrCat(
              "row ", line, ", column '", spec.name, "': expected integer"));
        }
        break;
      case ColumnKind::kReal:
        if (std::holds_alternative<std::string>(v)) {
          return absl::InvalidArgumentError(absl::StrCat(
              "row ", line, ", column '", spec.name, "': expected real"));
        }
        break;
      case ColumnKind::kCategorical:
        if (!std::holds_alternative<std::string>(v)) {
          return absl::InvalidArgumentError(absl::StrCat(
              "row ", line, ", column '", spec.name, "': expected string"));
        }
        break;
    }
    if (spec.is_numeric()) {
      if (auto st = CheckBounds(c, NumericValue(v), line); !st.ok()) return st;
    }
  }
  for (size_t c = 0; c < row.size(); ++c) {
    auto& col = dataset_.columns_[c];
    switch (col.kind) {
      case ColumnKind::kInteger:
        col.ints.push_back(std::get<int64_t>(row[c]));
        break;
      case ColumnKind::kReal:
        col.reals.push_back(NumericValue(row[c]));
        break;
      case ColumnKind::kCategorical: {
        const auto& s = std::get<std::string>(row[c]);
        auto [it, inserted] = code_index_[c].try_emplace(
            s, static_cast<int32_t>(col.dictionary.size()));
        if (inserted) col.dictionary.push_back(s);
        col.codes.push_back(it->second);
        break;
      }
    }
  }
  ++dataset_.num_rows_;
  return absl::OkStatus();
}

absl::Status DatasetBuilder::AppendText(const std::vector<std::string>& fields,
                                        size_t line) {
  const auto& schema = dataset_.schema_;
  if (fields.size() != schema.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("row ", line, ": expected ", schema.size(),
                     " fields, got ", fields.size()));
  }
  std::vector<Value> row;
  row.reserve(fields.size());
  for (size_t c = 0; c < fields.size(); ++c) {
    const auto& spec = schema.column(c);
    const std::string_view text = Trim(fields[c]);
    if (text.empty()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "row ", line, ", column '", spec.name, "': missing value"));
    }
    switch (spec.kind) {
      case ColumnKind::kInteger: {
        int64_t v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size()) {
          return absl::InvalidArgumentError(
              absl::StrCat("row ", line, ", column '", spec.name,
                           "': cannot parse '", std::string(text), "' as integer"));
        }
        row.emplace_back(v);
        break;
      }
      case ColumnKind::kReal: {
        double v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size()) {
          return absl::InvalidArgumentError(
              absl::StrCat("row ", line, ", column '", spec.name,
                           "': cannot parse '", std::string(text), "' as real"));
        }
        row.emplace_back(v);
        break;
      }
      case ColumnKind::kCategorical:
        row.emplace_back(std::string(text));
        break;
    }
  }
  return AppendAt(row, line);
}

absl::StatusOr<Dataset> DatasetBuilder::Finish() && {
  if (dataset_.num_rows_ == 0) {
    return absl::InvalidArgumentError("empty dataset");
  }
  return std::move(dataset_);
}

absl::StatusOr<std::vector<std::vector<std::string>>> ParseCsv(
    std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;  // distinguishes "" from a missing field
  size_t i = 0;
  // Skip a UTF-8 byte order mark.
  if (text.size() >= 3 && std::memcmp(text.data(), "\xEF\xBB\xBF", 3) == 0) {
    i = 3;
  }
  auto end_record = [&]() {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
    // A lone empty field is a blank line; skip it.
    if (!(record.size() == 1 && record[0].empty())) {
      records.push_back(std::move(record));
    }
    record.clear();
  };
  for (; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (field_started && !field.empty()) {
          return absl::InvalidArgumentError(
              absl::StrCat("stray quote in CSV record ", records.size() + 1));
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) {
    return absl::InvalidArgumentError("unterminated quoted CSV field");
  }
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

absl::StatusOr<Dataset> LoadDataset(std::string_view csv, const Schema& schema) {
  auto records = ParseCsv(csv);
  if (!records.ok()) return records.status();
  if (records->empty()) {
    return absl::InvalidArgumentError("missing header row");
  }
  const auto& header = (*records)[0];
  std::unordered_set<std::string> seen;
  for (const auto& h : header) {
    const std::string name(Trim(h));
    if (!seen.insert(name).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("duplicate column '", name, "' in header"));
    }
    if (!schema.IndexOf(name)) {
      return absl::InvalidArgumentError(
          absl::StrCat("column '", name, "' not in schema"));
    }
  }
  for (size_t c = 0; c < schema.size(); ++c) {
    if (!seen.count(schema.column(c).name)) {
      return absl::InvalidArgumentError(
          absl::StrCat("missing column '", schema.column(c).name, "'"));
    }
    if (std::string(Trim(header[c])) != schema.column(c).name) {
      return absl::InvalidArgumentError(absl::StrCat(
          "header column ", c + 1, " is '", std::string(Trim(header[c])), "', expected '",
          schema.column(c).name, "'"));
    }
  }
  DatasetBuilder b(schema);
  b.Reserve(records->size() - 1);
  for (size_t r = 1; r < records->size(); ++r) {
    if (auto st = b.AppendText((*records)[r], r); !st.ok()) return st;
  }
  return std::move(b).Finish();
}

absl::StatusOr<Schema> LoadSchemaFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  nlohmann::json j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": invalid JSON"));
  }
  return Schema::FromJson(j);
}

absl::StatusOr<Dataset> LoadDatasetFile(const std::string& csv_path,
                                        const std::string& schema_path) {
  auto schema = LoadSchemaFile(schema_path);
  if (!schema.ok()) return schema.status();
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", csv_path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return LoadDataset(buf.str(), *schema);
}

std::string SerializeCsv(const Dataset& d) {
  std::string out;
  auto put = [&out](std::string_view s) {
    if (NeedsQuoting(s)) {
      out.push_back('"');
      for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
      }
      out.push_back('"');
    } else {
      out.append(s);
    }
  };
  const auto& schema = d.schema();
  for (size_t c = 0; c < schema.size(); ++c) {
    if (c) out.push_back(',');
    put(schema.column(c).name);
  }
  out.push_back('\n');
  for (size_t r = 0; r < d.num_rows(); ++r) {
    for (size_t c = 0; c < schema.size(); ++c) {
      if (c) out.push_back(',');
      put(ValueToString(d.Get(r, c)));
    }
    out.push_back('\n');
  }
  return out;
}

std::string ProjectionKey(const Dataset& d, const std::vector<size_t>& cols,
                          size_t row) {
  std::string key;
  for (size_t c : cols) {
    const Column& col = d.column(c);
    switch (col.kind) {
      case ColumnKind::kInteger: {
        char buf[8];
        std::memcpy(buf, &col.ints[row], 8);
        key.append(buf, 8);
        break;
      }
      case ColumnKind::kReal: {
        // +0.0 and -0.0 project to the same record.
        double v = col.reals[row] == 0 ? 0.0 : col.reals[row];
        char buf[8];
        std::memcpy(buf, &v, 8);
        key.append(buf, 8);
        break;
      }
      case ColumnKind::kCategorical: {
        const std::string& s = col.dictionary[col.codes[row]];
        const uint32_t len = static_cast<uint32_t>(s.size());
        char buf[4];
        std::memcpy(buf, &len, 4);
        key.append(buf, 4);
        key.append(s);
        break;
      }
    }
  }
  return key;
}

absl::StatusOr<ProjectedDataset> ProjectQueryAttributes(const Dataset& d,
                                                        const Query& q) {
  if (auto st = q.Validate(d.schema()); !st.ok()) return st;
  const auto referenced = q.ReferencedAttributes();
  ProjectedDataset p;
  p.source = &d;
  for (size_t c = 0; c < d.schema().size(); ++c) {
    const auto& name = d.schema().column(c).name;
    if (std::find(referenced.begin(), referenced.end(), name) !=
        referenced.end()) {
      p.attrs.push_back(name);
      p.attr_columns.push_back(c);
    }
  }
  const size_t n = d.num_rows();
  p.row_key.resize(n);
  std::unordered_map<std::string, uint32_t> index;
  for (size_t r = 0; r < n; ++r) {
    std::string key = ProjectionKey(d, p.attr_columns, r);
    auto [it, inserted] =
        index.try_emplace(std::move(key), static_cast<uint32_t>(p.unique_keys.size()));
    if (inserted) {
      p.unique_keys.push_back(it->first);
      std::vector<Value> vals;
      vals.reserve(p.attr_columns.size());
      for (size_t c : p.attr_columns) vals.push_back(d.Get(r, c));
      p.unique_values.push_back(std::move(vals));
      p.multiplicity.emplace_back();
    }
    p.row_key[r] = it->second;
    p.multiplicity[it->second].push_back(r);
  }
  return p;
}

}  // namespace riskscope
