// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Core>

namespace msdda {

using Rng = std::mt19937_64;

/// Independent generator for the tuple (seed, keys...). Every random draw in
/// the project goes through a stream so results do not depend on how work is
/// split across threads.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::seed_seq::result_type words[16];
  std::size_t n = 0;
  words[n++] = static_cast<std::uint32_t>(seed);
  words[n++] = static_cast<std::uint32_t>(seed >> 32);
  for (std::uint64_t k : keys) {
    if (n + 2 > 16) break;
    words[n++] = static_cast<std::uint32_t>(k);
    words[n++] = static_cast<std::uint32_t>(k >> 32);
  }
  std::seed_seq seq(words, words + n);
  return Rng(seq);
}

/// Stream domains, so different consumers of one seed never overlap.
enum class StreamTag : std::uint64_t {
  kSample = 0x5a11,
  kPretrain = 0x9e7a,
  kPairs = 0x9a12,
  kDpo = 0xd90,
  kOracle = 0x0ac1,
  kDataset = 0xda7a,
};

inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t index) {
  return make_stream(seed, {static_cast<std::uint64_t>(tag), index});
}

inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a, std::uint64_t b) {
  return make_stream(seed, {static_cast<std::uint64_t>(tag), a, b});
}

inline Eigen::VectorXd standard_normal(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace msdda
