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

#ifndef TORUSFLOW_FLOW_HPP
#define TORUSFLOW_FLOW_HPP

#include <functional>
#include <vector>

#include "torusflow/brownian.hpp"
#include "torusflow/field.hpp"
#include "torusflow/interpolate.hpp"
#include "torusflow/noise_family.hpp"

namespace torusflow {

/**
 * \brief Flow map state at one time level: displacement xi(x) - x, Jacobian
 * D xi, and inverse Jacobian psi = (D xi)^{-1}, all at grid nodes.
 */
struct FlowState {
  double t = 0.0;
  DisplacementField displacement;
  MatrixField jacobian;
  MatrixField inv_jacobian;
};

/** \brief Identity flow at time t (displacement 0, J = psi = Id exactly). */
FlowState identity_flow_state(const PeriodicGrid& grid, double t = 0.0);

/** \brief xi(x) for arbitrary x via displacement interpolation. */
inline Vec2 flow_position(const FlowState& s, const Vec2& x) {
  return x + interpolate(s.displacement, x);
}

/** \brief Options of one flow step. */
struct StepOptions {
  /** Refine psi against D xi when ||psi D xi - I||_max exceeds this. */
  double ortho_trigger = 1e-8;
  /** Newton refinement sweeps allowed per node per step. */
  int max_ortho_sweeps = 12;
  /** Stencil width for the drift-Jacobian fallback; 0 means grid h. */
  double fd_step = 0.0;
  /** Intra-step node parallelism (never affects results). */
  int workers = 1;
};

/** \brief Ito drift mu(t,x) = 1/2 Sum_n (b_n . grad) b_n of the flow map. */
Vec2 stratonovich_drift(const NoiseFamily& family, double t, const Vec2& x);

/**
 * \brief Spatial Jacobian of the drift; analytic when the family provides it,
 * otherwise central differences of stratonovich_drift with the given step.
 */
Mat2 drift_jacobian(const NoiseFamily& family, double t, const Vec2& x,
                    double fd_step);

/**
 * \brief One Euler-Maruyama step of (xi, D xi, psi) at every node, in place.
 *
 * dW points to the family's N increments for this step. After the update,
 * psi is re-orthogonalized against D xi by Newton sweeps
 * psi <- psi (2 Id - D xi psi) while the consistency error exceeds
 * opts.ortho_trigger; if the sweeps cannot reach the 1e-6 state invariant
 * (a large increment can put psi outside the Newton basin), psi is rebuilt
 * by direct inversion of the fresh Jacobian. Throws FlowDegeneracyError on
 * non-finite values, det D xi <= 0, or consistency worse than 1e-6 after
 * refinement (possible only under catastrophic conditioning).
 */
void step_flow(FlowState& state, const NoiseFamily& family, const double* dW,
               double dt, const StepOptions& opts = {});

/** \brief Stored flow levels t_k = t0 + k*dt, k = 0..num_steps. */
struct FlowTrajectory {
  double t0 = 0.0;
  double dt = 0.0;
  int num_steps = 0;                // K; levels run 0..K
  std::vector<int> stored_levels;   // ascending, always contains 0 and K
  std::vector<FlowState> states;

  bool has_level(int level) const;
  const FlowState& state_at(int level) const;
  const FlowState& final_state() const { return states.back(); }
};

/** \brief Options of evolve_flow. */
struct EvolveOptions {
  /** Increment offset: step k consumes path level start_step + k. */
  int start_step = 0;
  /** Keep every store_every-th level (0 and K always kept). */
  int store_every = 1;
  StepOptions step;
  /** Streaming callback, invoked at every level including 0. */
  std::function<void(const FlowState&, int level)> on_level;
};

/**
 * \brief Integrate the flow over [t0, t0 + T] with T = K*dt, dt = path.dt,
 * t0 = start_step*dt, consuming path increments start_step..start_step+K-1.
 */
FlowTrajectory evolve_flow(const NoiseFamily& family, const BrownianPath& path,
                           const PeriodicGrid& grid, double T,
                           const EvolveOptions& opts = {});

/**
 * \brief Composition-consistency residual: sup over nodes x of
 * |xi_{r,t}(x) - xi_{s,t}(xi_{r,s}(x))| where traj_a starts at r, traj_b at
 * s, both driven by the same BrownianPath; the inner evaluation of traj_b at
 * the off-grid point xi_{r,s}(x) is interpolated.
 */
double flow_property_residual(const FlowTrajectory& traj_a,
                              const FlowTrajectory& traj_b, double t);

}  // namespace torusflow

#endif  // TORUSFLOW_FLOW_HPP
