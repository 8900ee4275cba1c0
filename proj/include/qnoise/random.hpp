#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <boost/random/normal_distribution.hpp>

namespace qnoise {

using Engine = std::mt19937_64;

// Ziggurat standard normal; several times cheaper than the polar method.
using Normal = boost::random::normal_distribution<double>;

// Derives an independent 64-bit seed for a sub-stream identified by `path`.
// Same (base, path) always gives the same seed, so every stream in a campaign
// is fixed by the base seed alone.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (path.size() + 1));
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(base);
  for (auto p : path) push(p);
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline Engine make_engine(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  return Engine(derive_seed(base, path));
}

// Stream identifiers used with derive_seed.
namespace stream {
inline constexpr std::uint64_t spin = 1;
inline constexpr std::uint64_t s2 = 2;
inline constexpr std::uint64_t s3 = 3;
inline constexpr std::uint64_t initial = 4;
inline constexpr std::uint64_t bootstrap = 5;
inline constexpr std::uint64_t cell = 6;
}  // namespace stream

}  // namespace qnoise
