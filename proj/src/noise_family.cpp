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

#include "torusflow/noise_family.hpp"

#include <cmath>
#include <cstdlib>

#include "torusflow/errors.hpp"

namespace torusflow {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

NoiseFamily make_zero(int dim) {
  NoiseFamily f;
  f.dim = dim;
  f.num_modes = 0;
  f.name = "zero";
  f.sup_speed = 0.0;
  f.b = [](int, double, const Vec2&) { return Vec2{}; };
  f.b_jac = [](int, double, const Vec2&) { return Mat2::zero(); };
  f.b_div = [](int, double, const Vec2&) { return 0.0; };
  f.drift = [](double, const Vec2&) { return Vec2{}; };
  f.drift_jac = [](double, const Vec2&) { return Mat2::zero(); };
  return f;
}

NoiseFamily make_constant(int dim, const BuiltinNoiseParams& p) {
  if (p.constants.empty())
    throw ConfigError("constant noise family needs at least one mode vector");
  for (const Vec2& c : p.constants)
    if (dim == 1 && c.v[1] != 0.0)
      throw ConfigError("constant noise family: second component must be 0 at d=1");
  NoiseFamily f;
  f.dim = dim;
  f.num_modes = static_cast<int>(p.constants.size());
  f.name = "constant";
  double s2 = 0.0;
  for (const Vec2& c : p.constants) s2 += dot(c, c);
  f.sup_speed = std::sqrt(s2);
  const std::vector<Vec2> cs = p.constants;
  f.b = [cs](int n, double, const Vec2&) { return cs[static_cast<std::size_t>(n)]; };
  f.b_jac = [](int, double, const Vec2&) { return Mat2::zero(); };
  f.b_div = [](int, double, const Vec2&) { return 0.0; };
  f.drift = [](double, const Vec2&) { return Vec2{}; };
  f.drift_jac = [](double, const Vec2&) { return Mat2::zero(); };
  return f;
}

NoiseFamily make_sincos2d(int dim) {
  if (dim != 2) throw ConfigError("sincos2d noise family requires d=2");
  NoiseFamily f;
  f.dim = 2;
  f.num_modes = 4;
  f.name = "sincos2d";
  f.sup_speed = std::sqrt(2.0);  // sin^2+cos^2 per axis, two axes
  f.b = [](int n, double, const Vec2& x) {
    Vec2 r;
    const int axis = n / 2;
    const double a = kTwoPi * x.v[axis];
    r.v[axis] = (n % 2 == 0) ? -std::sin(a) : -std::cos(a);
    return r;
  };
  f.b_jac = [](int n, double, const Vec2& x) {
    Mat2 r = Mat2::zero();
    const int axis = n / 2;
    const double a = kTwoPi * x.v[axis];
    r.m[axis][axis] =
        (n % 2 == 0) ? -kTwoPi * std::cos(a) : kTwoPi * std::sin(a);
    return r;
  };
  f.b_div = [](int n, double, const Vec2& x) {
    const int axis = n / 2;
    const double a = kTwoPi * x.v[axis];
    return (n % 2 == 0) ? -kTwoPi * std::cos(a) : kTwoPi * std::sin(a);
  };
  // The drift (b.grad)b summed over the sin/cos pair of each axis cancels
  // identically, so both closures are exactly zero.
  f.drift = [](double, const Vec2&) { return Vec2{}; };
  f.drift_jac = [](double, const Vec2&) { return Mat2::zero(); };
  return f;
}

NoiseFamily make_axis_commuting(int dim, const BuiltinNoiseParams& p) {
  if (dim != 2) throw ConfigError("axis_commuting noise family requires d=2");
  for (int n = 0; n < 2; ++n)
    if (!(p.axis_mean[n] > std::abs(p.axis_amp[n])))
      throw ConfigError(
          "axis_commuting: need axis_mean > |axis_amp| (positive btilde)");
  NoiseFamily f;
  f.dim = 2;
  f.num_modes = 2;
  f.name = "axis_commuting";
  const double m0 = p.axis_mean[0], a0 = p.axis_amp[0];
  const double m1 = p.axis_mean[1], a1 = p.axis_amp[1];
  {
    const double s0 = m0 + std::abs(a0), s1 = m1 + std::abs(a1);
    f.sup_speed = std::sqrt(s0 * s0 + s1 * s1);
  }
  auto bt = [m0, a0, m1, a1](int n, double s) {
    return n == 0 ? m0 + a0 * std::sin(kTwoPi * s) : m1 + a1 * std::sin(kTwoPi * s);
  };
  auto btd = [a0, a1](int n, double s) {
    return n == 0 ? kTwoPi * a0 * std::cos(kTwoPi * s)
                  : kTwoPi * a1 * std::cos(kTwoPi * s);
  };
  auto btdd = [a0, a1](int n, double s) {
    return n == 0 ? -kTwoPi * kTwoPi * a0 * std::sin(kTwoPi * s)
                  : -kTwoPi * kTwoPi * a1 * std::sin(kTwoPi * s);
  };
  f.b = [bt](int n, double, const Vec2& x) {
    Vec2 r;
    r.v[n] = bt(n, x.v[n]);
    return r;
  };
  f.b_jac = [btd](int n, double, const Vec2& x) {
    Mat2 r = Mat2::zero();
    r.m[n][n] = btd(n, x.v[n]);
    return r;
  };
  f.b_div = [btd](int n, double, const Vec2& x) { return btd(n, x.v[n]); };
  // mu^i = 1/2 * btilde_i * btilde_i' (each mode only moves its own axis).
  f.drift = [bt, btd](double, const Vec2& x) {
    Vec2 r;
    r.v[0] = 0.5 * bt(0, x.v[0]) * btd(0, x.v[0]);
    r.v[1] = 0.5 * bt(1, x.v[1]) * btd(1, x.v[1]);
    return r;
  };
  f.drift_jac = [bt, btd, btdd](double, const Vec2& x) {
    Mat2 r = Mat2::zero();
    for (int i = 0; i < 2; ++i) {
      const double v = bt(i, x.v[i]), dv = btd(i, x.v[i]), ddv = btdd(i, x.v[i]);
      r.m[i][i] = 0.5 * (dv * dv + v * ddv);
    }
    return r;
  };
  return f;
}

}  // namespace

NoiseFamily builtin_noise_family(const std::string& name, int dim,
                                 const BuiltinNoiseParams& params) {
  if (dim != 1 && dim != 2)
    throw ConfigError("noise family dim must be 1 or 2");
  if (name == "zero") return make_zero(dim);
  if (name == "constant") return make_constant(dim, params);
  if (name == "sincos2d") return make_sincos2d(dim);
  if (name == "axis_commuting") return make_axis_commuting(dim, params);
  throw ConfigError("unknown noise family: " + name);
}

}  // namespace torusflow
