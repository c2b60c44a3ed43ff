// Copyright 2026 The grantscreen Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GRANTSCREEN_HASH_HPP_
#define GRANTSCREEN_HASH_HPP_

#include <cstdint>
#include <string>
#include <string_view>

namespace grantscreen {

// FNV-1a, used for provenance hashes (config hash, artifact hash) and for
// deriving per-entity RNG streams. Not collision resistant; not used for
// anything security relevant.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the xor; spreads low-entropy inputs.
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

std::string hex64(std::uint64_t h);

// Hash of a whole file's bytes; throws Error("io") when unreadable.
std::uint64_t hash_file(const std::string& path);

}  // namespace grantscreen

#endif  // GRANTSCREEN_HASH_HPP_
