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

#include "riskscope/noise_stream.h"

namespace riskscope {

uint64_t NoiseStream::Mix(uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

uint64_t NoiseStream::Fnv1a64(std::string_view bytes) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

NoiseStream NoiseStream::Derive(uint64_t seed, std::string_view query_id,
                                StreamPurpose purpose, uint64_t index) {
  const uint64_t tag =
      (static_cast<uint64_t>(purpose) << 48) | (index & 0xFFFFFFFFFFFFULL);
  return NoiseStream(Mix(Mix(Mix(seed) ^ Fnv1a64(query_id)) ^ tag));
}

uint64_t NoiseStream::NextU64() {
  ++counter_;
  return Mix(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double NoiseStream::NextOpenUnit() {
  return (static_cast<double>(NextU64() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace riskscope
