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

#ifndef RISKSCOPE_FIXTURES_H_
#define RISKSCOPE_FIXTURES_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "riskscope/query.h"
#include "riskscope/tabular.h"

namespace riskscope {

// Three patients (P) with a disease flag (D); only C has the disease.
Schema PatientSchema();
Dataset PatientDataset();
// COUNT WHERE D == 1.
Query PatientCountQuery();

// Fifteen Adult-census style attributes with declared bounds on every
// numeric column.
Schema AdultSchema();

// Synthetic Adult-style records. Up to 10 000 rows are a prefix of a seeded
// 10 000-row base sample; larger sizes replicate the base and add uniform
// integer jitter in [-2, 2] to every numeric column (clamped to bounds).
Dataset GenerateAdult(size_t rows, uint64_t seed = 7);

// Q1..Q5 over AdultSchema(), by name.
std::vector<std::pair<std::string, Query>> AdultQueries();

}  // namespace riskscope

#endif  // RISKSCOPE_FIXTURES_H_
