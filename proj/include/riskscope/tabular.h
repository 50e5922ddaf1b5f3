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

#ifndef RISKSCOPE_TABULAR_H_
#define RISKSCOPE_TABULAR_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"

namespace riskscope {

enum class ColumnKind { kInteger, kReal, kCategorical };

std::string_view ColumnKindName(ColumnKind kind);

struct Bounds {
  double lo = 0;
  double hi = 0;
};

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kCategorical;
  std::optional<Bounds> bounds;

  bool is_numeric() const { return kind != ColumnKind::kCategorical; }
};

// Ordered column list. Construct through Schema::Create so the invariants
// (unique non-empty names, lo <= hi, bounds only on numeric columns) hold.
class Schema {
 public:
  static absl::StatusOr<Schema> Create(std::vector<ColumnSpec> columns);
  // Parses the sidecar format:
  //   {"columns":[{"name":"age","kind":"integer","bounds":[17,90]}, ...]}
  static absl::StatusOr<Schema> FromJson(const nlohmann::json& j);
  nlohmann::json ToJson() const;

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  size_t size() const { return columns_.size(); }
  const ColumnSpec& column(size_t i) const { return columns_[i]; }
  std::optional<size_t> IndexOf(std::string_view name) const;

 private:
  std::vector<ColumnSpec> columns_;
};

// A single cell value. Integers and reals keep their native type so that
// comparisons and sums stay exact for integer columns.
using Value = std::variant<int64_t, double, std::string>;

double NumericValue(const Value& v);
std::string ValueToString(const Value& v);

// Column-major storage. Categorical columns are dictionary encoded; codes are
// assigned in order of first appearance.
struct Column {
  ColumnKind kind = ColumnKind::kCategorical;
  std::vector<int64_t> ints;
  std::vector<double> reals;
  std::vector<int32_t> codes;
  std::vector<std::string> dictionary;

  Value Get(size_t row) const;
  double Numeric(size_t row) const {
    return kind == ColumnKind::kInteger ? static_cast<double>(ints[row])
                                        : reals[row];
  }
  std::optional<int32_t> CodeOf(std::string_view value) const;
};

// The fixed dataset x = (x_1, ..., x_n). Immutable after construction.
class Dataset {
 public:
  // Builds from already-typed rows; checks kinds and bounds.
  static absl::StatusOr<Dataset> FromRows(
      Schema schema, const std::vector<std::vector<Value>>& rows);

  const Schema& schema() const { return schema_; }
  size_t num_rows() const { return num_rows_; }
  const Column& column(size_t i) const { return columns_[i]; }
  Value Get(size_t row, size_t col) const { return columns_[col].Get(row); }
  std::vector<Value> Row(size_t row) const;

  // Dataset with the given rows removed (x_{-i} for a single index).
  absl::StatusOr<Dataset> WithoutRows(const std::vector<size_t>& rows) const;

 private:
  friend class DatasetBuilder;
  Schema schema_;
  std::vector<Column> columns_;
  size_t num_rows_ = 0;
};

// Incremental typed construction used by the CSV loader and the fixture
// generator.
class DatasetBuilder {
 public:
  explicit DatasetBuilder(Schema schema);
  void Reserve(size_t rows);
  // Appends one row. Values must already match the column kinds.
  absl::Status Append(const std::vector<Value>& row);
  // Parses and appends one row of CSV text fields. `line` is the 1-based data
  // row number used in error messages.
  absl::Status AppendText(const std::vector<std::string>& fields, size_t line);
  absl::StatusOr<Dataset> Finish() &&;

 private:
  friend class Dataset;
  absl::Status AppendAt(const std::vector<Value>& row, size_t line);
  absl::Status CheckBounds(size_t col, double v, size_t line) const;
  Dataset dataset_;
  std::vector<std::unordered_map<std::string, int32_t>> code_index_;
};

// RFC-4180 CSV with a header row that must list exactly the schema columns in
// schema order. Surrounding whitespace on categorical values is trimmed.
absl::StatusOr<Dataset> LoadDataset(std::string_view csv, const Schema& schema);
absl::StatusOr<Dataset> LoadDatasetFile(const std::string& csv_path,
                                        const std::string& schema_path);
absl::StatusOr<Schema> LoadSchemaFile(const std::string& path);
std::string SerializeCsv(const Dataset& d);

// Splits one CSV document into records of fields (RFC-4180 quoting).
absl::StatusOr<std::vector<std::vector<std::string>>> ParseCsv(
    std::string_view text);

class Query;

// Projection of a dataset onto the attributes a query references. Each
// distinct projected tuple appears once in `unique_keys`; `row_key[i]` maps
// original row i to its tuple and `multiplicity[u]` lists the rows sharing
// tuple u.
struct ProjectedDataset {
  const Dataset* source = nullptr;
  std::vector<std::string> attrs;      // in schema order
  std::vector<size_t> attr_columns;    // schema column index per attr
  std::vector<std::string> unique_keys;  // byte-serialized tuples
  std::vector<std::vector<Value>> unique_values;
  std::vector<uint32_t> row_key;
  std::vector<std::vector<size_t>> multiplicity;

  size_t num_rows() const { return row_key.size(); }
  size_t num_unique() const { return unique_keys.size(); }
};

// Serialized tuple of the given columns for one row; stable across runs.
std::string ProjectionKey(const Dataset& d, const std::vector<size_t>& cols,
                          size_t row);

absl::StatusOr<ProjectedDataset> ProjectQueryAttributes(const Dataset& d,
                                                        const Query& q);

}  // namespace riskscope

#endif  // RISKSCOPE_TABULAR_H_
