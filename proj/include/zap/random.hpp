#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace zap {

using Rng = std::mt19937_64;

// Derives an engine from a base seed plus any number of stream tags, so that
// (seed, fold, purpose) combinations get independent, reproducible streams.
inline Rng make_rng(std::initializer_list<std::uint64_t> parts) {
  // seed_seq consumes 32-bit words; split so the high halves are not dropped.
  std::vector<std::uint32_t> words;
  words.reserve(2 * parts.size());
  for (const auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  auto rng = make_rng(parts);
  return rng();
}

}  // namespace zap
