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

#ifndef TORUSFLOW_PDE_HPP
#define TORUSFLOW_PDE_HPP

#include <functional>
#include <vector>

#include "torusflow/brownian.hpp"
#include "torusflow/field.hpp"
#include "torusflow/inverse.hpp"
#include "torusflow/linsolve.hpp"
#include "torusflow/noise_family.hpp"
#include "torusflow/transform.hpp"

namespace torusflow {

/** \brief Time-stepping parameters shared by all solvers. */
struct SolverConfig {
  double theta = 1.0;       // implicitness of the deterministic part, [0,1]
  double lin_tol = 1e-9;    // relative linear-solve tolerance (2d)
  int max_lin_iter = 2000;  // linear-solve iteration cap
  double dt = 0.0;          // time step (required, > 0)
  double cfl_ratio = 0.5;   // guard: dt <= cfl_ratio * h / sup|b|
  double blowup_sup = 1e6;  // sup-norm guard tripping a blow-up error
  int store_every = 1;      // keep every k-th level (level 0 and K always)
  int workers = 1;          // intra-step data parallelism (never affects results)
};

/** \brief Scalar field snapshots at a subset of time levels. */
struct FieldSequence {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<int> stored_levels;   // ascending level numbers
  std::vector<ScalarField> fields;  // one per stored level

  std::size_t count() const { return fields.size(); }
  double time_of(std::size_t i) const { return t0 + stored_levels[i] * dt; }
  bool has_level(int level) const;
  const ScalarField& at_level(int level) const;  // ConfigError if absent
  const ScalarField& final_field() const { return fields.back(); }
};

/**
 * \brief Precomputed periodic stencil of the spatial operator
 * L u = div(alpha grad u) + alpha_lin . grad u + zeroth * u:
 * conservative face fluxes with arithmetic-average face coefficients,
 * face-centered cross gradients (d=2), and central first-order terms.
 * (L u)[idx] = sum_s w[idx*span+s] * u[nbr[idx*span+s]].
 */
struct OperatorStencil {
  int span = 0;  // 3 (d=1) or 9 (d=2); entry 0 is the node itself
  std::vector<double> w;
  std::vector<std::size_t> nbr;
};

OperatorStencil build_operator_stencil(const PeriodicGrid& grid,
                                       const MatrixField& alpha,
                                       const VectorField* alpha_lin,
                                       const ScalarField* zeroth,
                                       int workers = 1);

/** \brief y = L x for a prebuilt stencil. */
void apply_stencil(const OperatorStencil& st, const std::vector<double>& x,
                   std::vector<double>& y, int workers = 1);

/**
 * \brief One theta-weighted step of du/dt = L u + forcing plus an optional
 * fully explicit additive increment (transport noise, already scaled by its
 * Brownian increments):
 *   (I - theta dt L) u' = u + (1-theta) dt L u + dt * forcing + increment.
 * d=1 systems are solved directly (cyclic Thomas), d=2 iteratively
 * (Jacobi-BiCGSTAB, warm-started from u).
 */
ScalarField theta_step(const SolverConfig& cfg, const ScalarField& u,
                       const OperatorStencil& st,
                       const ScalarField* forcing,
                       const std::vector<double>* explicit_increment,
                       LinearSolveStats* stats = nullptr);

using TransformedProvider = std::function<const TransformedCoefficients&(int)>;
using HProvider = std::function<const ScalarField&(int)>;

/**
 * \brief March the pulled-back deterministic equation
 *   dv = (div(alpha grad v) + alpha_lin . grad v + Fbar0 + div Fbar) dt
 * from v0 with per-level coefficient bundles (left endpoint). Refuses to
 * step any level whose degeneracy mask is nonempty. When h_at is given the
 * marched unknown is z = v - h and the stored snapshots are z + h.
 */
FieldSequence solve_random_pde(const TransformedProvider& tc_at,
                               const ScalarField& v0, const PeriodicGrid& grid,
                               double T, const SolverConfig& cfg,
                               const HProvider* h_at = nullptr);

/** \brief u(t, y) = v(t, y + inverse displacement(y)), one level. */
ScalarField compose_back_level(const ScalarField& v,
                               const InverseFlowField& inv, int workers = 1);

/** \brief Level-wise composition of a stored sequence with inverse fields. */
FieldSequence compose_back(const FieldSequence& v,
                           const std::vector<InverseFlowField>& inv,
                           int workers = 1);

/**
 * \brief Semi-implicit direct scheme for the driven equation: diffusion,
 * drift and zeroth-order terms theta-weighted; transport noise
 * sum_n (b_n . grad u + b0_n u + g_n) dW_n^k explicit with central
 * gradients; one linear solve per step. CFL guard dt <= cfl_ratio h / sup|b|.
 */
FieldSequence solve_spde_direct(const CoefficientSet& coeffs,
                                const NoiseFamily& family,
                                const ScalarField& u0,
                                const BrownianPath& path,
                                const PeriodicGrid& grid, double T,
                                const SolverConfig& cfg, int start_step = 0);

using QuasilinearFn =
    std::function<Mat2(double t, const Vec2& x, double value)>;

/**
 * \brief Coefficient freezing for the quasilinear equation: per step
 * a^k(x) = A_fn(t_k, x, U^k(x)) followed by one direct semi-implicit step on
 * the frozen coefficients. The realized parabolicity of the frozen
 * coefficients is rechecked each step against nu_declared.
 */
FieldSequence solve_quasilinear(const QuasilinearFn& A_fn,
                                const NoiseFamily& family,
                                const ScalarField& U0,
                                const BrownianPath& path,
                                const PeriodicGrid& grid, double T,
                                const SolverConfig& cfg, double nu_declared,
                                int start_step = 0);

/** \brief Throws ConfigError when the explicit-noise CFL guard fails. */
void check_cfl_guard(const PeriodicGrid& grid, const SolverConfig& cfg,
                     const NoiseFamily& family);

/** \brief round(T/dt) with an exactness check (T must be a multiple of dt). */
int level_count(double T, double dt, const char* who);

}  // namespace torusflow

#endif  // TORUSFLOW_PDE_HPP
