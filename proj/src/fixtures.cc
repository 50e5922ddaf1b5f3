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

#include "riskscope/fixtures.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "riskscope/noise_stream.h"

namespace riskscope {
namespace {

constexpr size_t kBaseRows = 10000;

const std::vector<std::string> kWorkclass = {
    "Private",     "Self-emp-not-inc", "Self-emp-inc", "Federal-gov",
    "Local-gov",   "State-gov",        "Without-pay",  "Never-worked"};
const std::vector<double> kWorkclassW = {73.9, 8.3, 3.6, 3.1, 6.8, 4.2, 0.05, 0.03};

// education label, education_num, weight
struct Education {
  const char* name;
  int num;
  double weight;
};
const std::vector<Education> kEducation = {
    {"Preschool", 1, 0.2},   {"1st-4th", 2, 0.5},      {"5th-6th", 3, 1.0},
    {"7th-8th", 4, 2.0},     {"9th", 5, 1.6},          {"10th", 6, 2.9},
    {"11th", 7, 3.7},        {"12th", 8, 1.3},         {"HS-grad", 9, 32.3},
    {"Some-college", 10, 22.3}, {"Assoc-voc", 11, 4.2}, {"Assoc-acdm", 12, 3.3},
    {"Bachelors", 13, 16.4}, {"Masters", 14, 5.4},     {"Prof-school", 15, 1.7},
    {"Doctorate", 16, 1.2}};

const std::vector<std::string> kMarital = {
    "Married-civ-spouse", "Never-married",        "Divorced", "Separated",
    "Widowed",            "Married-spouse-absent", "Married-AF-spouse"};
const std::vector<double> kMaritalW = {45.8, 33.0, 13.6, 3.1, 3.1, 1.3, 0.1};

const std::vector<std::string> kOccupation = {
    "Prof-specialty",    "Craft-repair",     "Exec-managerial", "Adm-clerical",
    "Sales",             "Other-service",    "Machine-op-inspct", "Transport-moving",
    "Handlers-cleaners", "Farming-fishing",  "Tech-support",    "Protective-serv",
    "Priv-house-serv",   "Armed-Forces"};
const std::vector<double> kOccupationW = {13.4, 13.3, 13.2, 12.2, 11.9, 10.7, 6.5,
                                          5.2,  4.5,  3.2,  3.1,  2.1,  0.5,  0.03};

const std::vector<std::string> kRelationship = {
    "Husband", "Not-in-family", "Own-child", "Unmarried", "Wife", "Other-relative"};
const std::vector<double> kRelationshipW = {40.4, 25.8, 15.2, 10.5, 4.8, 3.1};

const std::vector<std::string> kRace = {"White", "Black", "Asian-Pac-Islander",
                                        "Amer-Indian-Eskimo", "Other"};
const std::vector<double> kRaceW = {85.5, 9.6, 3.1, 1.0, 0.8};

const std::vector<std::string> kCountry = {
    "United-States", "Mexico",      "Philippines", "Germany",   "Puerto-Rico",
    "Canada",        "El-Salvador", "India",       "Cuba",      "England",
    "China",         "South",       "Jamaica",     "Italy",     "Dominican-Republic",
    "Japan",         "Guatemala",   "Poland",      "Vietnam",   "Columbia",
    "Haiti",         "Portugal",    "Taiwan",      "Iran",      "Greece",
    "Nicaragua",     "Peru",        "Ecuador",     "France",    "Ireland",
    "Hong",          "Thailand",    "Cambodia",    "Trinadad&Tobago", "Laos",
    "Yugoslavia",    "Outlying-US(Guam-USVI-etc)", "Scotland", "Honduras",
    "Hungary",       "Holand-Netherlands"};

const std::vector<int64_t> kCapitalGains = {
    594,  914,  1055, 1409, 1471, 2105, 2174, 2176, 2202, 2407, 2597,
    2829, 2885, 3103, 3137, 3325, 3411, 3464, 3674, 3818, 3908, 4064,
    4101, 4386, 4650, 4787, 4865, 5013, 5178, 5455, 6418, 6497, 6849,
    7298, 7688, 8614, 10520, 13550, 14084, 14344, 15024, 20051, 25236,
    27828, 99999};

const std::vector<int64_t> kCapitalLosses = {
    625,  880,  1092, 1340, 1485, 1590, 1602, 1672, 1721, 1740, 1876, 1887,
    1902, 1977, 2001, 2042, 2051, 2179, 2258, 2339, 2377, 2415, 2444, 2559,
    3004, 3770, 4356};

class Sampler {
 public:
  explicit Sampler(NoiseStream s) : s_(s) {}
  double Unit() { return s_.NextOpenUnit(); }
  size_t Weighted(const std::vector<double>& w) {
    double total = 0;
    for (double x : w) total += x;
    double u = Unit() * total;
    for (size_t i = 0; i < w.size(); ++i) {
      if (u < w[i]) return i;
      u -= w[i];
    }
    return w.size() - 1;
  }
  int64_t Uniform(int64_t lo, int64_t hi) {
    return lo + static_cast<int64_t>(Unit() * static_cast<double>(hi - lo + 1));
  }

 private:
  NoiseStream s_;
};

std::vector<double> AgeWeights() {
  std::vector<double> w;
  for (int age = 17; age <= 90; ++age) {
    const double z = (age - 37.0) / 13.0;
    w.push_back(std::max(0.12, 3.0 * std::exp(-0.5 * z * z)));
  }
  return w;
}

std::vector<double> CountryWeights() {
  std::vector<double> w(kCountry.size(), 0.1);
  w[0] = 89.6;
  w[1] = 2.0;
  for (size_t i = 2; i < 8; ++i) w[i] = 0.4;
  return w;
}

std::vector<Value> BaseRow(Sampler& s, const std::vector<double>& age_w,
                           const std::vector<double>& country_w) {
  const int64_t age = 17 + static_cast<int64_t>(s.Weighted(age_w));
  std::vector<double> edu_w;
  for (const auto& e : kEducation) edu_w.push_back(e.weight);
  const auto& edu = kEducation[s.Weighted(edu_w)];
  const bool female = s.Unit() < 0.33;
  // Income odds grow with schooling and with age up to the fifties.
  double logit = -5.0 + 0.32 * edu.num + 0.05 * std::min<int64_t>(age, 55) -
                 (female ? 1.0 : 0.0);
  const bool rich = s.Unit() < 1.0 / (1.0 + std::exp(-logit));
  int64_t gain = 0;
  if (s.Unit() < (rich ? 0.2 : 0.04)) {
    gain = kCapitalGains[s.Uniform(0, kCapitalGains.size() - 1)];
  }
  int64_t loss = 0;
  if (gain == 0 && s.Unit() < 0.045) {
    loss = kCapitalLosses[s.Uniform(0, kCapitalLosses.size() - 1)];
  }
  int64_t hours = 40;
  const double h = s.Unit();
  if (h < 0.3) {
    hours = s.Uniform(1, 39);
  } else if (h < 0.45) {
    hours = s.Uniform(41, 99);
  }
  return {
      age,
      kWorkclass[s.Weighted(kWorkclassW)],
      s.Uniform(12285, 1490400),
      std::string(edu.name),
      static_cast<int64_t>(edu.num),
      kMarital[s.Weighted(kMaritalW)],
      kOccupation[s.Weighted(kOccupationW)],
      kRelationship[s.Weighted(kRelationshipW)],
      kRace[s.Weighted(kRaceW)],
      std::string(female ? "Female" : "Male"),
      gain,
      loss,
      hours,
      kCountry[s.Weighted(country_w)],
      std::string(rich ? ">50K" : "<=50K"),
  };
}

Predicate Leaf(std::string attr, Predicate::Op op, std::vector<Value> lits) {
  Predicate p;
  p.op = op;
  p.attr = std::move(attr);
  p.literals = std::move(lits);
  return p;
}

Predicate And(std::vector<Predicate> kids) {
  Predicate p;
  p.op = Predicate::Op::kAnd;
  p.children = std::move(kids);
  return p;
}

}  // namespace

Schema PatientSchema() {
  return *Schema::Create({{"P", ColumnKind::kCategorical, std::nullopt},
                          {"D", ColumnKind::kInteger, Bounds{0, 1}}});
}

Dataset PatientDataset() {
  return *Dataset::FromRows(PatientSchema(), {{std::string("A"), int64_t{0}},
                                              {std::string("B"), int64_t{0}},
                                              {std::string("C"), int64_t{1}}});
}

Query PatientCountQuery() {
  Query q;
  q.kind = QueryKind::kCount;
  q.predicate = Leaf("D", Predicate::Op::kEq, {int64_t{1}});
  return q;
}

Schema AdultSchema() {
  using K = ColumnKind;
  return *Schema::Create({
      {"age", K::kInteger, Bounds{17, 90}},
      {"workclass", K::kCategorical, std::nullopt},
      {"fnlwgt", K::kInteger, Bounds{12285, 1490400}},
      {"education", K::kCategorical, std::nullopt},
      {"education_num", K::kInteger, Bounds{1, 16}},
      {"marital_status", K::kCategorical, std::nullopt},
      {"occupation", K::kCategorical, std::nullopt},
      {"relationship", K::kCategorical, std::nullopt},
      {"race", K::kCategorical, std::nullopt},
      {"sex", K::kCategorical, std::nullopt},
      {"capital_gain", K::kInteger, Bounds{0, 99999}},
      {"capital_loss", K::kInteger, Bounds{0, 4356}},
      {"hours_per_week", K::kInteger, Bounds{1, 99}},
      {"native_country", K::kCategorical, std::nullopt},
      {"income", K::kCategorical, std::nullopt},
  });
}

Dataset GenerateAdult(size_t rows, uint64_t seed) {
  const Schema schema = AdultSchema();
  Sampler base_sampler(NoiseStream::Derive(seed, "adult-base", StreamPurpose::kFixture, 0));
  const auto age_w = AgeWeights();
  const auto country_w = CountryWeights();
  const size_t base_rows = std::min(rows, kBaseRows);
  std::vector<std::vector<Value>> base;
  base.reserve(base_rows);
  for (size_t i = 0; i < base_rows; ++i) {
    base.push_back(BaseRow(base_sampler, age_w, country_w));
  }
  DatasetBuilder b(schema);
  b.Reserve(rows);
  for (const auto& r : base) (void)b.Append(r);
  if (rows > kBaseRows) {
    Sampler jitter(NoiseStream::Derive(seed, "adult-jitter", StreamPurpose::kFixture, 0));
    std::vector<Value> row;
    for (size_t i = kBaseRows; i < rows; ++i) {
      row = base[i % kBaseRows];
      for (size_t c = 0; c < schema.size(); ++c) {
        const auto& spec = schema.column(c);
        if (spec.kind != ColumnKind::kInteger) continue;
        const int64_t v = std::get<int64_t>(row[c]) + jitter.Uniform(-2, 2);
        row[c] = std::clamp<int64_t>(v, static_cast<int64_t>(spec.bounds->lo),
                                     static_cast<int64_t>(spec.bounds->hi));
      }
      (void)b.Append(row);
    }
  }
  return *std::move(b).Finish();
}

std::vector<std::pair<std::string, Query>> AdultQueries() {
  using Op = Predicate::Op;
  std::vector<std::pair<std::string, Query>> out;

  Query q1;
  q1.kind = QueryKind::kCount;
  q1.predicate = And({Leaf("income", Op::kEq, {std::string(">50K")}),
                      Leaf("education_num", Op::kEq, {int64_t{13}}),
                      Leaf("age", Op::kEq, {int64_t{25}})});
  out.emplace_back("Q1", q1);

  Query q2;
  q2.kind = QueryKind::kGroupByCount;
  q2.predicate = And({Leaf("race", Op::kEq, {std::string("Asian-Pac-Islander")}),
                      Leaf("age", Op::kBetween, {int64_t{30}, int64_t{40}})});
  q2.group_by = "marital_status";
  for (const auto& m : kMarital) q2.group_domain.emplace_back(m);
  out.emplace_back("Q2", q2);

  Query q3;
  q3.kind = QueryKind::kCount;
  q3.predicate = And({Leaf("native_country", Op::kNe, {std::string("United-States")}),
                      Leaf("sex", Op::kEq, {std::string("Female")})});
  out.emplace_back("Q3", q3);

  Query q4;
  q4.kind = QueryKind::kAvg;
  q4.predicate = Leaf("workclass", Op::kIn,
                      {std::string("Federal-gov"), std::string("Local-gov"),
                       std::string("State-gov")});
  q4.target = "hours_per_week";
  out.emplace_back("Q4", q4);

  Query q5;
  q5.kind = QueryKind::kSum;
  q5.target = "capital_gain";
  out.emplace_back("Q5", q5);
  return out;
}

}  // namespace riskscope
