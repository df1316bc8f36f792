#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace repur {

// 64-bit FNV-1a. Stable across platforms and runs, unlike std::hash.
inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a(std::span<const unsigned char> bytes,
                           std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = kFnvOffset) {
  return fnv1a(std::span<const unsigned char>(
                   reinterpret_cast<const unsigned char*>(s.data()), s.size()),
               seed);
}

}  // namespace repur
