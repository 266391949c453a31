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

#ifndef TORUSFLOW_FIELD_HPP
#define TORUSFLOW_FIELD_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "torusflow/grid.hpp"
#include "torusflow/smallmat.hpp"

namespace torusflow {

/** \brief One real value per grid node. */
struct ScalarField {
  PeriodicGrid grid;
  std::vector<double> a;

  ScalarField() = default;
  explicit ScalarField(const PeriodicGrid& g, double fill = 0.0)
      : grid(g), a(g.size(), fill) {}

  double& operator[](std::size_t idx) { return a[idx]; }
  double operator[](std::size_t idx) const { return a[idx]; }
  std::size_t size() const { return a.size(); }

  bool finite() const {
    for (double x : a)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

/** \brief One d-vector per grid node (two lanes stored; lane 1 is 0 at d=1). */
struct VectorField {
  PeriodicGrid grid;
  std::vector<double> a;  // [idx*2 + c]

  VectorField() = default;
  explicit VectorField(const PeriodicGrid& g) : grid(g), a(g.size() * 2, 0.0) {}

  Vec2 at(std::size_t idx) const {
    Vec2 r;
    r.v[0] = a[idx * 2];
    r.v[1] = a[idx * 2 + 1];
    return r;
  }
  void set(std::size_t idx, const Vec2& x) {
    a[idx * 2] = x.v[0];
    a[idx * 2 + 1] = x.v[1];
  }
  std::size_t size() const { return grid.size(); }

  bool finite() const {
    for (double x : a)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

/** \brief One d x d matrix per grid node (full 2x2 lanes stored). */
struct MatrixField {
  PeriodicGrid grid;
  std::vector<double> a;  // [idx*4 + r*2 + c]

  MatrixField() = default;
  explicit MatrixField(const PeriodicGrid& g) : grid(g), a(g.size() * 4, 0.0) {}

  static MatrixField identity(const PeriodicGrid& g) {
    MatrixField f(g);
    for (std::size_t i = 0; i < g.size(); ++i) f.set(i, Mat2::identity());
    return f;
  }

  Mat2 at(std::size_t idx) const {
    Mat2 r;
    const double* p = &a[idx * 4];
    r.m[0][0] = p[0];
    r.m[0][1] = p[1];
    r.m[1][0] = p[2];
    r.m[1][1] = p[3];
    return r;
  }
  void set(std::size_t idx, const Mat2& x) {
    double* p = &a[idx * 4];
    p[0] = x.m[0][0];
    p[1] = x.m[0][1];
    p[2] = x.m[1][0];
    p[3] = x.m[1][1];
  }
  std::size_t size() const { return grid.size(); }

  bool finite() const {
    for (double x : a)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

/**
 * \brief Periodic displacement per node: the stored object is delta(x) with
 * map(x) = x + delta(x). Distinct from VectorField on purpose: positions are
 * never stored raw, so the periodicity identity map(x + e_j) = map(x) + e_j
 * holds structurally.
 */
struct DisplacementField {
  PeriodicGrid grid;
  std::vector<double> a;  // [idx*2 + c]

  DisplacementField() = default;
  explicit DisplacementField(const PeriodicGrid& g)
      : grid(g), a(g.size() * 2, 0.0) {}

  Vec2 at(std::size_t idx) const {
    Vec2 r;
    r.v[0] = a[idx * 2];
    r.v[1] = a[idx * 2 + 1];
    return r;
  }
  void set(std::size_t idx, const Vec2& x) {
    a[idx * 2] = x.v[0];
    a[idx * 2 + 1] = x.v[1];
  }
  std::size_t size() const { return grid.size(); }

  bool finite() const {
    for (double x : a)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

}  // namespace torusflow

#endif  // TORUSFLOW_FIELD_HPP
