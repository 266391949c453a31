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

#ifndef TORUSFLOW_TRANSFORM_HPP
#define TORUSFLOW_TRANSFORM_HPP

#include <functional>
#include <vector>

#include "torusflow/brownian.hpp"
#include "torusflow/field.hpp"
#include "torusflow/flow.hpp"
#include "torusflow/noise_family.hpp"

namespace torusflow {

using MatrixCoefficientFn = std::function<Mat2(double t, const Vec2& x)>;
using VectorCoefficientFn = std::function<Vec2(double t, const Vec2& x)>;
using ScalarCoefficientFn = std::function<double(double t, const Vec2& x)>;

/**
 * \brief Input data of the driven equation
 *   du = (div(a grad u) + a_lin.grad u + a0 u + f0 + div f_vec) dt
 *        + sum_n (b_n.grad u + b0_n u + g_n) dW^n,
 * with the first/zeroth-order noise data (b0) and a0 supported only by the
 * direct solver (the characteristics pipeline rejects them).
 */
struct CoefficientSet {
  int dim = 1;
  MatrixCoefficientFn a;               // required: diffusion matrix a(t,x)
  VectorCoefficientFn a_lin;           // optional first-order drift a^i
  ScalarCoefficientFn a0;              // optional zeroth-order coefficient
  std::vector<ScalarCoefficientFn> b0; // optional per-mode zeroth-order noise
  ScalarCoefficientFn f0;              // optional scalar forcing
  VectorCoefficientFn f_vec;           // optional divergence-form forcing
  std::vector<ScalarCoefficientFn> g;  // optional per-mode noise forcing
  double nu = 0.0;                     // declared lower parabolicity bound
  double M = 0.0;                      // declared upper boundedness constant

  bool has_g() const {
    for (const auto& gn : g)
      if (gn) return true;
    return false;
  }
};

/** \brief Principal transformed coefficients at one time level. */
struct TransformedPrincipal {
  MatrixField alpha;      // second-order coefficient
  VectorField alpha_lin;  // first-order coefficient
  /** Nodes where sym(alpha) lost strict positivity (ascending; empty = OK). */
  std::vector<std::size_t> degeneracy_mask;
};

/** \brief Transformed right-hand-side data at one time level. */
struct TransformedRhs {
  ScalarField F0;
  VectorField F_vec;
  std::vector<ScalarField> G;  // one field per noise mode
};

/** \brief Everything the deterministic stepper needs at one time level. */
struct TransformedCoefficients {
  double t = 0.0;
  MatrixField alpha;
  VectorField alpha_lin;
  ScalarField F0;
  VectorField F_vec;
  std::vector<ScalarField> G;
  ScalarField Fbar0;     // F0 plus the h-split correction (== F0 when h == 0)
  VectorField Fbar_vec;  // F_vec plus the h-split correction
  std::vector<std::size_t> degeneracy_mask;
};

/** \brief Central-difference divergence of a node vector field. */
ScalarField divergence_central(const VectorField& q, int workers = 1);

/** \brief Central-difference gradient of a node scalar field. */
VectorField gradient_central(const ScalarField& s, int workers = 1);

/**
 * \brief Second/first-order coefficients of the pulled-back equation.
 *
 * At every node x, with xi = x + displacement(x), psi the stored inverse
 * Jacobian and mu the integrated drift of the characteristics (all nodal):
 *   alpha      = psi (a(xi) - 1/2 sum_n b_n b_n^T (xi)) psi^T,
 *   alpha_lin  = psi mu(xi) + psi a_lin(xi) - 1/2 sum_n psi (b_n.grad b_n)(xi)
 *                + 1/2 sum_n (div b_n)(xi) psi b_n(xi)
 *                + 1/2 sum_n (s . b_n(xi)) psi b_n(xi),
 * where s_j = sum_k d_k psi[k][j] is assembled from central differences of
 * the stored Jacobian field via d_k psi = -psi (d_k Dxi) psi.
 * Nodes where sym(alpha) is not strictly positive are listed in the mask.
 */
TransformedPrincipal transformed_coefficients(const CoefficientSet& coeffs,
                                              const NoiseFamily& family,
                                              const FlowState& state, double t,
                                              int workers = 1);

/**
 * \brief Pulled-back forcing terms.
 *
 * F0   = f0(xi) - s_i f^i(xi) + sum_n div(q_n) g_n(xi),  q_n = psi b_n(xi),
 * F^i  = (psi f_vec(xi))^i - sum_n q_n^i g_n(xi),
 * G_n  = g_n(xi),
 * with div(q_n) by central differences of the assembled q_n grid field.
 */
TransformedRhs transformed_rhs(const CoefficientSet& coeffs,
                               const NoiseFamily& family,
                               const FlowState& state, double t,
                               int workers = 1);

/**
 * \brief Auxiliary stochastic heat sequence h^0..h^K, h^0 = 0, stepping
 * (Id - dt Lap_h) h^{k+1} = h^k + sum_n G_n^k dW_n^k with the 2d+1-point
 * periodic Laplacian. g_at_level(k) supplies the per-mode forcing fields of
 * level k (left endpoint). Increments are read from path levels
 * start_step..start_step+K-1 with K = round(T/dt).
 */
std::vector<ScalarField> solve_h(
    const std::function<const std::vector<ScalarField>&(int)>& g_at_level,
    const PeriodicGrid& grid, const BrownianPath& path, double T, double dt,
    int start_step = 0, double lin_tol = 1e-10, int max_lin_iter = 2000);

/** \brief One semi-implicit step of the auxiliary heat recursion. */
ScalarField solve_h_step(const ScalarField& h, const std::vector<ScalarField>& G,
                         const double* increments, int num_modes, double dt,
                         double lin_tol = 1e-10, int max_lin_iter = 2000);

/**
 * \brief h-corrected right-hand sides:
 * Fbar0 = F0 + alpha_lin . grad h;  Fbar^i = F^i + (alpha grad h)^i - d_i h.
 */
std::pair<ScalarField, VectorField> combined_rhs(const ScalarField& F0,
                                                 const VectorField& F_vec,
                                                 const MatrixField& alpha,
                                                 const VectorField& alpha_lin,
                                                 const ScalarField& h_level,
                                                 int workers = 1);

/**
 * \brief Assemble the full per-level bundle; h_level may be null (no split).
 */
TransformedCoefficients assemble_transformed(const CoefficientSet& coeffs,
                                             const NoiseFamily& family,
                                             const FlowState& state, double t,
                                             const ScalarField* h_level,
                                             int workers = 1);

}  // namespace torusflow

#endif  // TORUSFLOW_TRANSFORM_HPP
