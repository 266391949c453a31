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

#ifndef TORUSFLOW_INTERPOLATE_HPP
#define TORUSFLOW_INTERPOLATE_HPP

#include <cfloat>
#include <cmath>

#include "torusflow/field.hpp"

namespace torusflow {

namespace detail {

struct AxisWeights {
  int i0;
  int i1;
  double w;  // weight of i1; node-exact queries snap to w = 0
};

/**
 * \brief Base node and weight along one axis for query coordinate x.
 *
 * The weight is snapped to a node whenever it is within a few ulps of it, so
 * that querying at (a representation of) a node coordinate returns the stored
 * nodal value bit-exactly.
 */
inline AxisWeights axis_weights(double x, int n) {
  double xr = x - std::floor(x);
  if (xr >= 1.0) xr = 0.0;  // guard the floor boundary case
  const double s = xr * n;
  const double fs = std::floor(s);
  int i0 = static_cast<int>(fs);
  double w = s - fs;
  const double tol = 32.0 * DBL_EPSILON * (std::abs(s) > 1.0 ? std::abs(s) : 1.0);
  if (w <= tol) {
    w = 0.0;
  } else if (1.0 - w <= tol) {
    w = 0.0;
    i0 += 1;
  }
  if (i0 >= n) i0 -= n;
  int i1 = i0 + 1;
  if (i1 >= n) i1 = 0;
  return {i0, i1, w};
}

}  // namespace detail

/** \brief Periodic multilinear interpolation (linear d=1, bilinear d=2). */
inline double interpolate(const ScalarField& f, const Vec2& x) {
  const PeriodicGrid& g = f.grid;
  const detail::AxisWeights ax = detail::axis_weights(x.v[0], g.n);
  if (g.dim == 1) {
    if (ax.w == 0.0) return f.a[static_cast<std::size_t>(ax.i0)];
    return (1.0 - ax.w) * f.a[static_cast<std::size_t>(ax.i0)] +
           ax.w * f.a[static_cast<std::size_t>(ax.i1)];
  }
  const detail::AxisWeights ay = detail::axis_weights(x.v[1], g.n);
  const std::size_t n = static_cast<std::size_t>(g.n);
  const std::size_t r0 = n * static_cast<std::size_t>(ay.i0);
  const std::size_t r1 = n * static_cast<std::size_t>(ay.i1);
  const double v00 = f.a[r0 + ax.i0];
  if (ax.w == 0.0 && ay.w == 0.0) return v00;
  const double v10 = f.a[r0 + ax.i1];
  const double v01 = f.a[r1 + ax.i0];
  const double v11 = f.a[r1 + ax.i1];
  const double wx = ax.w, wy = ay.w;
  return (1.0 - wx) * (1.0 - wy) * v00 + wx * (1.0 - wy) * v10 +
         (1.0 - wx) * wy * v01 + wx * wy * v11;
}

namespace detail {

template <typename Field, int NCOMP>
inline void interpolate_components(const Field& f, const Vec2& x, double* out) {
  const PeriodicGrid& g = f.grid;
  const AxisWeights ax = axis_weights(x.v[0], g.n);
  if (g.dim == 1) {
    const double* p0 = &f.a[static_cast<std::size_t>(ax.i0) * NCOMP];
    if (ax.w == 0.0) {
      for (int c = 0; c < NCOMP; ++c) out[c] = p0[c];
      return;
    }
    const double* p1 = &f.a[static_cast<std::size_t>(ax.i1) * NCOMP];
    for (int c = 0; c < NCOMP; ++c)
      out[c] = (1.0 - ax.w) * p0[c] + ax.w * p1[c];
    return;
  }
  const AxisWeights ay = axis_weights(x.v[1], g.n);
  const std::size_t n = static_cast<std::size_t>(g.n);
  const std::size_t i00 = (n * ay.i0 + ax.i0) * NCOMP;
  if (ax.w == 0.0 && ay.w == 0.0) {
    for (int c = 0; c < NCOMP; ++c) out[c] = f.a[i00 + c];
    return;
  }
  const std::size_t i10 = (n * ay.i0 + ax.i1) * NCOMP;
  const std::size_t i01 = (n * ay.i1 + ax.i0) * NCOMP;
  const std::size_t i11 = (n * ay.i1 + ax.i1) * NCOMP;
  const double wx = ax.w, wy = ay.w;
  const double c00 = (1.0 - wx) * (1.0 - wy), c10 = wx * (1.0 - wy);
  const double c01 = (1.0 - wx) * wy, c11 = wx * wy;
  for (int c = 0; c < NCOMP; ++c)
    out[c] = c00 * f.a[i00 + c] + c10 * f.a[i10 + c] + c01 * f.a[i01 + c] +
             c11 * f.a[i11 + c];
}

}  // namespace detail

inline Vec2 interpolate(const VectorField& f, const Vec2& x) {
  Vec2 r;
  detail::interpolate_components<VectorField, 2>(f, x, r.v);
  return r;
}

inline Vec2 interpolate(const DisplacementField& f, const Vec2& x) {
  Vec2 r;
  detail::interpolate_components<DisplacementField, 2>(f, x, r.v);
  return r;
}

inline Mat2 interpolate(const MatrixField& f, const Vec2& x) {
  double buf[4];
  detail::interpolate_components<MatrixField, 4>(f, x, buf);
  Mat2 r;
  r.m[0][0] = buf[0];
  r.m[0][1] = buf[1];
  r.m[1][0] = buf[2];
  r.m[1][1] = buf[3];
  return r;
}

}  // namespace torusflow

#endif  // TORUSFLOW_INTERPOLATE_HPP
