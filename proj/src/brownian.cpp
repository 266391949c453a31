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

#include "torusflow/brownian.hpp"

#include <cmath>
#include <string>

#include "torusflow/errors.hpp"
#include "torusflow/rng.hpp"

namespace torusflow {

BrownianPath sample_brownian_increments(std::uint64_t seed, int num_steps,
                                        int num_modes, double dt) {
  if (num_steps < 1 || num_modes < 0 || !(dt > 0.0))
    throw ConfigError("sample_brownian_increments: need K >= 1, N >= 0, dt > 0");
  BrownianPath p;
  p.num_modes = num_modes;
  p.num_steps = num_steps;
  p.dt = dt;
  p.seed = seed;
  p.increments.resize(static_cast<std::size_t>(num_steps) * num_modes);
  const double s = std::sqrt(dt);
  for (std::size_t c = 0; c < p.increments.size(); ++c)
    p.increments[c] = s * normal_from_counter(seed, c);
  return p;
}

BrownianPath coarsen_increments(const BrownianPath& fine, int factor) {
  if (factor < 1) throw ConfigError("coarsen_increments: factor must be >= 1");
  if (fine.num_steps % factor != 0)
    throw ConfigError("coarsen_increments: factor " + std::to_string(factor) +
                      " does not divide step count " +
                      std::to_string(fine.num_steps));
  BrownianPath c;
  c.num_modes = fine.num_modes;
  c.num_steps = fine.num_steps / factor;
  c.dt = fine.dt * factor;
  c.seed = fine.seed;
  c.increments.assign(static_cast<std::size_t>(c.num_steps) * c.num_modes, 0.0);
  for (int k = 0; k < fine.num_steps; ++k) {
    const int kc = k / factor;
    for (int n = 0; n < fine.num_modes; ++n)
      c.increments[static_cast<std::size_t>(kc) * c.num_modes + n] +=
          fine.increments[static_cast<std::size_t>(k) * fine.num_modes + n];
  }
  return c;
}

}  // namespace torusflow
