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

#ifndef RISKSCOPE_NOISE_STREAM_H_
#define RISKSCOPE_NOISE_STREAM_H_

#include <cstdint>
#include <string_view>

namespace riskscope {

// What a derived stream is used for. Part of the stream key, so the SVT
// threshold noise, per-candidate SVT noise and release noise of one query
// never share draws.
enum class StreamPurpose : uint8_t {
  kSvtThreshold = 1,
  kSvtCandidate = 2,
  kRelease = 3,
  kFixture = 4,
  kTest = 15,
};

// Counter-based generator: the j-th draw of a stream with key K is
// SplitMix64's finalizer applied to K + (j + 1) * 0x9E3779B97F4A7C15. Streams
// are plain values; copying one forks it at the current position.
class NoiseStream {
 public:
  explicit NoiseStream(uint64_t key) : key_(key) {}

  // key = Mix(Mix(Mix(seed) ^ Fnv1a64(query_id)) ^ (purpose << 48 | index))
  static NoiseStream Derive(uint64_t seed, std::string_view query_id,
                            StreamPurpose purpose, uint64_t index);

  uint64_t NextU64();
  // Uniform on the open interval (0, 1) with 53 bits of resolution.
  double NextOpenUnit();

  uint64_t key() const { return key_; }
  // Number of 64-bit draws consumed so far.
  uint64_t draws() const { return counter_; }

  static uint64_t Mix(uint64_t x);
  static uint64_t Fnv1a64(std::string_view bytes);

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

}  // namespace riskscope

#endif  // RISKSCOPE_NOISE_STREAM_H_
