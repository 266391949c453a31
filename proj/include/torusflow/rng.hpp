/*
 * Copyright 2026 The torusflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TORUSFLOW_RNG_HPP
#define TORUSFLOW_RNG_HPP

#include <cmath>
#include <cstdint>

namespace torusflow {

/**
 * Counter-based random number generation: every variate is a pure function of
 * (seed, counter), so streams can be evaluated in any order, from any thread,
 * with bit-identical results. The mixer is the standard splitmix64 finalizer.
 */

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/** \brief Stateless hash of (seed, counter) to a uniform 64-bit word. */
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t counter) {
  return splitmix64(seed ^ splitmix64(counter ^ 0xD1B54A32D192ED03ULL));
}

/** \brief Uniform double in (0, 1] from a 64-bit word (never 0, so log is safe). */
inline double u64_to_unit_open0(std::uint64_t x) {
  return static_cast<double>((x >> 11) + 1) * 0x1p-53;
}

/** \brief Uniform double in [0, 1) from a 64-bit word. */
inline double u64_to_unit_open1(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1p-53;
}

/**
 * \brief Standard normal variate as a pure function of (seed, counter).
 *
 * Box-Muller cosine branch on two sub-counters; counter space per variate is
 * two words, so callers index variates, not words.
 */
inline double normal_from_counter(std::uint64_t seed, std::uint64_t counter) {
  const double u1 = u64_to_unit_open0(counter_hash(seed, 2 * counter));
  const double u2 = u64_to_unit_open1(counter_hash(seed, 2 * counter + 1));
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/** \brief Decorrelated per-path seed from a master seed and path index. */
inline std::uint64_t derive_path_seed(std::uint64_t master_seed,
                                      std::uint64_t path_index) {
  return counter_hash(master_seed ^ 0x9E3779B97F4A7C15ULL, path_index);
}

}  // namespace torusflow

#endif  // TORUSFLOW_RNG_HPP
