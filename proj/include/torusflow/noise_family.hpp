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

#ifndef TORUSFLOW_NOISE_FAMILY_HPP
#define TORUSFLOW_NOISE_FAMILY_HPP

#include <functional>
#include <string>
#include <vector>

#include "torusflow/smallmat.hpp"

namespace torusflow {

/**
 * \brief A finite family of transport-noise coefficient fields b_n(t,x).
 *
 * Every closure must be 1-periodic in each spatial coordinate. b_jac returns
 * the spatial Jacobian [i][j] = d_j b^i of mode n; b_div its spatial
 * divergence. Built-in families carry analytic derivative closures; custom
 * families may leave drift/drift_jac empty, in which case consumers derive
 * the flow drift from b/b_jac and differentiate it by central differences at
 * grid scale.
 */
struct NoiseFamily {
  int dim = 1;
  int num_modes = 0;
  std::string name = "zero";
  std::string regularity = "smooth";  // declared spatial-regularity tag
  bool time_dependent = false;
  /** sup over x of the l2-over-modes speed sqrt(Sum_n |b_n(t,x)|^2). */
  double sup_speed = 0.0;

  std::function<Vec2(int n, double t, const Vec2& x)> b;
  std::function<Mat2(int n, double t, const Vec2& x)> b_jac;
  std::function<double(int n, double t, const Vec2& x)> b_div;

  /** Optional analytic flow drift mu(t,x) and its Jacobian; see above. */
  std::function<Vec2(double t, const Vec2& x)> drift;
  std::function<Mat2(double t, const Vec2& x)> drift_jac;
};

/** \brief Parameters of the built-in families that take any. */
struct BuiltinNoiseParams {
  /** "constant": the mode vectors c_n (second lane 0 when dim == 1). */
  std::vector<Vec2> constants;
  /**
   * "axis_commuting": btilde_n(s) = axis_mean[n] + axis_amp[n]*sin(2*pi*s),
   * n = 0,1; requires axis_mean[n] > |axis_amp[n]| so btilde stays positive.
   */
  double axis_mean[2] = {1.0, 1.0};
  double axis_amp[2] = {0.0, 0.0};
};

/**
 * \brief Construct a built-in family by name.
 *
 * Names: "zero" (N=0), "constant" (b_n = c_n), "sincos2d" (d=2, N=4,
 * b_1 = (-sin 2*pi*x1, 0), b_2 = (-cos 2*pi*x1, 0), b_3 = (0, -sin 2*pi*x2),
 * b_4 = (0, -cos 2*pi*x2)), "axis_commuting" (d=2, N=2, b_n = btilde_n(x_n) e_n).
 * Unknown names raise ConfigError.
 */
NoiseFamily builtin_noise_family(const std::string& name, int dim,
                                 const BuiltinNoiseParams& params = {});

}  // namespace torusflow

#endif  // TORUSFLOW_NOISE_FAMILY_HPP
