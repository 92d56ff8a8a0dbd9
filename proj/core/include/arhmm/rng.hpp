#pragma once

#include <cstdint>
#include <random>

namespace arhmm {

// splitmix64 finalizer; decorrelates structured seed tuples.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent substream addressed by (seed, a, b, c).  Work units (path,
// bootstrap replicate, EM restart, ...) each derive their own generator from
// their indices, so results do not depend on scheduling order and a parallel
// run reproduces a serial one.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = mix64(seed);
  s = mix64(s ^ mix64(a + 0x0123456789abcdefULL));
  s = mix64(s ^ mix64(b + 0xfedcba9876543210ULL));
  s = mix64(s ^ mix64(c + 0x5555aaaa5555aaaaULL));
  return std::mt19937_64(s);
}

// Substream tags: keep distinct uses of the same user seed apart.
namespace stream_tag {
constexpr std::uint64_t kSimulate = 1;
constexpr std::uint64_t kEmInit = 2;
constexpr std::uint64_t kBootstrap = 3;
constexpr std::uint64_t kGrid = 4;
constexpr std::uint64_t kHedgePath = 5;
constexpr std::uint64_t kMcTables = 6;
}  // namespace stream_tag

}  // namespace arhmm
