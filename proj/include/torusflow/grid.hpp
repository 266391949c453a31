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

#ifndef TORUSFLOW_GRID_HPP
#define TORUSFLOW_GRID_HPP

#include <cstddef>
#include <string>

#include "torusflow/errors.hpp"
#include "torusflow/smallmat.hpp"

namespace torusflow {

/** \brief i mod n with nonnegative result (n >= 1). */
inline int wrap_index(int i, int n) {
  int r = i % n;
  if (r < 0) r += n;
  return r;
}

/**
 * \brief Uniform periodic grid on the unit torus, d in {1,2}, n nodes per
 * axis, spacing h = 1/n. Flat node index is x-fastest: idx = i + n*j.
 */
struct PeriodicGrid {
  int dim = 1;
  int n = 8;
  double h = 0.125;

  PeriodicGrid() = default;
  PeriodicGrid(int dim_, int n_) : dim(dim_), n(n_), h(1.0 / n_) {
    if (dim != 1 && dim != 2)
      throw ConfigError("grid dim must be 1 or 2, got " + std::to_string(dim));
    if (n < 8)
      throw ConfigError("grid n must be >= 8, got " + std::to_string(n));
  }

  std::size_t size() const {
    return dim == 1 ? static_cast<std::size_t>(n)
                    : static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  }

  /** Flat index from (possibly out-of-range) axis indices; wraps mod n. */
  std::size_t index(int i, int j = 0) const {
    const int iw = wrap_index(i, n);
    if (dim == 1) return static_cast<std::size_t>(iw);
    const int jw = wrap_index(j, n);
    return static_cast<std::size_t>(iw) +
           static_cast<std::size_t>(n) * static_cast<std::size_t>(jw);
  }

  int ix(std::size_t idx) const { return static_cast<int>(idx % static_cast<std::size_t>(n)); }
  int iy(std::size_t idx) const {
    return dim == 1 ? 0 : static_cast<int>(idx / static_cast<std::size_t>(n));
  }

  /** Node coordinate in [0,1)^d; second lane 0 for d=1. */
  Vec2 coord(std::size_t idx) const {
    Vec2 p;
    p.v[0] = ix(idx) * h;
    p.v[1] = dim == 1 ? 0.0 : iy(idx) * h;
    return p;
  }

  /** Flat index of the node `step` cells away from idx along axis (0 or 1). */
  std::size_t neighbor(std::size_t idx, int axis, int step) const {
    if (axis == 0) return index(ix(idx) + step, iy(idx));
    return index(ix(idx), iy(idx) + step);
  }

  bool same_layout(const PeriodicGrid& o) const {
    return dim == o.dim && n == o.n;
  }
};

}  // namespace torusflow

#endif  // TORUSFLOW_GRID_HPP
