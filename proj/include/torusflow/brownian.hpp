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

#ifndef TORUSFLOW_BROWNIAN_HPP
#define TORUSFLOW_BROWNIAN_HPP

#include <cstdint>
#include <vector>

namespace torusflow {

/**
 * \brief Increments of N independent Brownian motions over K uniform steps.
 *
 * increments[k*N + n] ~ Normal(0, dt), a pure function of (seed, k, n).
 */
struct BrownianPath {
  int num_modes = 0;   // N
  int num_steps = 0;   // K
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> increments;  // K*N entries, step-major

  double increment(int k, int n) const {
    return increments[static_cast<std::size_t>(k) * num_modes + n];
  }
  /** Pointer to the N increments of step k. */
  const double* level(int k) const {
    return increments.data() + static_cast<std::size_t>(k) * num_modes;
  }
};

/** \brief Sample a BrownianPath; deterministic in (seed, K, N, dt). */
BrownianPath sample_brownian_increments(std::uint64_t seed, int num_steps,
                                        int num_modes, double dt);

/**
 * \brief Pairwise-sum coarsening: groups of `factor` consecutive increments
 * are summed, so the coarse path follows the same Brownian sample (coupled
 * refinement). Requires factor >= 1 and factor | num_steps.
 */
BrownianPath coarsen_increments(const BrownianPath& fine, int factor);

}  // namespace torusflow

#endif  // TORUSFLOW_BROWNIAN_HPP
