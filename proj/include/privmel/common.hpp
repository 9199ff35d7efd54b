// Copyright 2026 The privmel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace privmel {

// Error hierarchy. The CLI maps each class to a distinct exit code.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CompatibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCompatibility = 4;
constexpr int kExitNumeric = 5;

using Rng = std::mt19937_64;

// Standard normal draw via the polar Box-Muller transform. Unlike
// std::normal_distribution this carries no hidden cache, so RNG state
// alone determines the stream and checkpointed resumes replay exactly.
inline double randn(Rng& rng) {
  std::uniform_real_distribution<double> unif(std::nextafter(0.0, 1.0), 1.0);
  double u = unif(rng);
  double v = unif(rng);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

inline double rand_uniform(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return unif(rng);
}

// FNV-1a, used for parameter fingerprints and cache keys.
inline uint64_t fnv1a(const void* bytes, size_t n, uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  uint64_t h = seed;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t fnv1a_str(const std::string& s, uint64_t seed = 1469598103934665603ull) {
  return fnv1a(s.data(), s.size(), seed);
}

}  // namespace privmel
