#pragma once

#include <cstdint>
#include <initializer_list>

namespace gla {

// splitmix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a tuple of indices,
// so per-epoch and per-step randomness is a pure function of its coordinates.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(base);
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

// Stream tags keep derived seeds for different consumers apart.
namespace stream {
inline constexpr std::uint64_t kDataOrder = 1;
inline constexpr std::uint64_t kPairing = 2;
inline constexpr std::uint64_t kStyleNoise = 3;
inline constexpr std::uint64_t kQueries = 4;
inline constexpr std::uint64_t kSynthetic = 5;
inline constexpr std::uint64_t kInit = 6;
}  // namespace stream

}  // namespace gla
