// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pfpl {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named purpose from a root seed.
///
/// Streams are keyed by label, so adding a new consumer of randomness never
/// shifts the values seen by existing consumers.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
  // FNV-1a over the label, then a splitmix64 finalizer over (root ^ hash).
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = root ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_stream(std::uint64_t root, std::string_view label) {
  return Rng(derive_seed(root, label));
}

}  // namespace pfpl
