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

#ifndef TORUSFLOW_SMALLMAT_HPP
#define TORUSFLOW_SMALLMAT_HPP

#include <algorithm>
#include <cmath>

namespace torusflow {

/**
 * \brief Point/vector in R^d, d in {1,2}, stored as two lanes.
 *
 * For d=1 the second lane is kept at 0 by every operation in the library, so
 * generic two-lane arithmetic is safe; dimension-aware quantities (norms)
 * take d explicitly.
 */
struct Vec2 {
  double v[2] = {0.0, 0.0};

  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
};

inline Vec2 operator+(Vec2 a, const Vec2& b) {
  a.v[0] += b.v[0];
  a.v[1] += b.v[1];
  return a;
}
inline Vec2 operator-(Vec2 a, const Vec2& b) {
  a.v[0] -= b.v[0];
  a.v[1] -= b.v[1];
  return a;
}
inline Vec2 operator*(double s, Vec2 a) {
  a.v[0] *= s;
  a.v[1] *= s;
  return a;
}
inline Vec2& operator+=(Vec2& a, const Vec2& b) {
  a.v[0] += b.v[0];
  a.v[1] += b.v[1];
  return a;
}

inline double dot(const Vec2& a, const Vec2& b) {
  return a.v[0] * b.v[0] + a.v[1] * b.v[1];
}
inline double norm2(const Vec2& a) { return std::sqrt(dot(a, a)); }
inline double norm_inf(const Vec2& a) {
  return std::max(std::abs(a.v[0]), std::abs(a.v[1]));
}

/** \brief d x d matrix, d in {1,2}; m[row][col]. Unused lanes hold identity. */
struct Mat2 {
  double m[2][2] = {{0.0, 0.0}, {0.0, 0.0}};

  static Mat2 identity() {
    Mat2 r;
    r.m[0][0] = 1.0;
    r.m[1][1] = 1.0;
    return r;
  }
  static Mat2 zero() { return Mat2{}; }
  static Mat2 diag(double a, double b) {
    Mat2 r;
    r.m[0][0] = a;
    r.m[1][1] = b;
    return r;
  }
};

inline Mat2 operator+(Mat2 a, const Mat2& b) {
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) a.m[i][j] += b.m[i][j];
  return a;
}
inline Mat2 operator-(Mat2 a, const Mat2& b) {
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) a.m[i][j] -= b.m[i][j];
  return a;
}
inline Mat2 operator*(double s, Mat2 a) {
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) a.m[i][j] *= s;
  return a;
}
inline Mat2& operator+=(Mat2& a, const Mat2& b) {
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) a.m[i][j] += b.m[i][j];
  return a;
}

inline Mat2 matmul(const Mat2& a, const Mat2& b) {
  Mat2 r = Mat2::zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      r.m[i][j] = a.m[i][0] * b.m[0][j] + a.m[i][1] * b.m[1][j];
  return r;
}

inline Vec2 matvec(const Mat2& a, const Vec2& x) {
  Vec2 r;
  r.v[0] = a.m[0][0] * x.v[0] + a.m[0][1] * x.v[1];
  r.v[1] = a.m[1][0] * x.v[0] + a.m[1][1] * x.v[1];
  return r;
}

inline Mat2 transpose(Mat2 a) {
  std::swap(a.m[0][1], a.m[1][0]);
  return a;
}

/** \brief Outer product x y^T. */
inline Mat2 outer(const Vec2& x, const Vec2& y) {
  Mat2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r.m[i][j] = x.v[i] * y.v[j];
  return r;
}

inline double det(const Mat2& a, int d) {
  if (d == 1) return a.m[0][0];
  return a.m[0][0] * a.m[1][1] - a.m[0][1] * a.m[1][0];
}

/** \brief Matrix inverse; caller guarantees non-singularity (checked upstream). */
inline Mat2 inverse(const Mat2& a, int d) {
  Mat2 r = Mat2::identity();
  if (d == 1) {
    r.m[0][0] = 1.0 / a.m[0][0];
    return r;
  }
  const double dd = det(a, 2);
  const double inv = 1.0 / dd;
  r.m[0][0] = a.m[1][1] * inv;
  r.m[0][1] = -a.m[0][1] * inv;
  r.m[1][0] = -a.m[1][0] * inv;
  r.m[1][1] = a.m[0][0] * inv;
  return r;
}

inline double max_abs_entry(const Mat2& a, int d) {
  if (d == 1) return std::abs(a.m[0][0]);
  double r = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r = std::max(r, std::abs(a.m[i][j]));
  return r;
}

/**
 * \brief Eigenvalues of the symmetric part of a, ascending; for d=1 both
 * entries are m00.
 */
inline void sym_eigenvalues(const Mat2& a, int d, double& lo, double& hi) {
  if (d == 1) {
    lo = hi = a.m[0][0];
    return;
  }
  const double s01 = 0.5 * (a.m[0][1] + a.m[1][0]);
  const double tr = a.m[0][0] + a.m[1][1];
  const double df = a.m[0][0] - a.m[1][1];
  const double disc = std::sqrt(df * df + 4.0 * s01 * s01);
  lo = 0.5 * (tr - disc);
  hi = 0.5 * (tr + disc);
}

/** \brief Spectral (operator) norm: largest singular value. */
inline double op_norm(const Mat2& a, int d) {
  if (d == 1) return std::abs(a.m[0][0]);
  // Largest eigenvalue of the symmetric PSD matrix a^T a.
  const Mat2 g = matmul(transpose(a), a);
  double lo = 0.0, hi = 0.0;
  sym_eigenvalues(g, 2, lo, hi);
  return std::sqrt(std::max(hi, 0.0));
}

inline bool all_finite(const Vec2& x) {
  return std::isfinite(x.v[0]) && std::isfinite(x.v[1]);
}
inline bool all_finite(const Mat2& a) {
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (!std::isfinite(a.m[i][j])) return false;
  return true;
}

/** \brief Shortest periodic representative: each component mapped to [-1/2, 1/2). */
inline Vec2 wrap_half(Vec2 x, int d) {
  for (int c = 0; c < d; ++c) {
    double& u = x.v[c];
    u -= std::floor(u + 0.5);
  }
  return x;
}

}  // namespace torusflow

#endif  // TORUSFLOW_SMALLMAT_HPP
