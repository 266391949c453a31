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

#include "torusflow/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>

#include "torusflow/errors.hpp"
#include "torusflow/parallel.hpp"

namespace torusflow {

FlowState identity_flow_state(const PeriodicGrid& grid, double t) {
  FlowState s;
  s.t = t;
  s.displacement = DisplacementField(grid);
  s.jacobian = MatrixField::identity(grid);
  s.inv_jacobian = MatrixField::identity(grid);
  return s;
}

Vec2 stratonovich_drift(const NoiseFamily& family, double t, const Vec2& x) {
  if (family.drift) return family.drift(t, x);
  Vec2 mu;
  for (int n = 0; n < family.num_modes; ++n) {
    const Vec2 bv = family.b(n, t, x);
    const Mat2 jb = family.b_jac(n, t, x);
    mu += 0.5 * matvec(jb, bv);  // ((b.grad)b)^i = Sum_j d_j b^i b^j
  }
  return mu;
}

Mat2 drift_jacobian(const NoiseFamily& family, double t, const Vec2& x,
                    double fd_step) {
  if (family.drift_jac) return family.drift_jac(t, x);
  Mat2 r = Mat2::zero();
  const double inv2h = 1.0 / (2.0 * fd_step);
  for (int j = 0; j < family.dim; ++j) {
    Vec2 xp = x, xm = x;
    xp.v[j] += fd_step;
    xm.v[j] -= fd_step;
    const Vec2 fp = stratonovich_drift(family, t, xp);
    const Vec2 fm = stratonovich_drift(family, t, xm);
    for (int i = 0; i < family.dim; ++i) r.m[i][j] = (fp.v[i] - fm.v[i]) * inv2h;
  }
  if (family.dim == 1) r.m[1][1] = 0.0;
  return r;
}

namespace {

/// Per-node failure codes for deterministic error reporting.
enum class StepFail : int { none = 0, nonfinite = 1, orientation = 2, consistency = 3 };

struct NodeStepResult {
  StepFail fail;
  Vec2 disp;
  Mat2 jac;
  Mat2 psi;
};

NodeStepResult step_node(const PeriodicGrid& grid, const FlowState& state,
                         const NoiseFamily& family, const double* dW, double dt,
                         const StepOptions& opts, double fd_step,
                         std::size_t idx) {
  NodeStepResult out{StepFail::none, Vec2{}, Mat2::zero(), Mat2::zero()};
  const int d = grid.dim;
  const double t = state.t;
  const Vec2 x = grid.coord(idx) + state.displacement.at(idx);

  const Vec2 mu = stratonovich_drift(family, t, x);
  const Mat2 dmu = drift_jacobian(family, t, x, fd_step);

  Vec2 disp = state.displacement.at(idx) + dt * mu;
  const Mat2 j0 = state.jacobian.at(idx);
  const Mat2 p0 = state.inv_jacobian.at(idx);

  Mat2 jac = j0 + dt * matmul(dmu, j0);
  // R collects the right factor of the psi update: psi+ = psi * R.
  Mat2 r = Mat2::identity() + (-dt) * dmu;
  for (int n = 0; n < family.num_modes; ++n) {
    const double w = dW[n];
    const Vec2 bv = family.b(n, t, x);
    const Mat2 dsg = -1.0 * family.b_jac(n, t, x);  // sigma_n = -b_n
    disp += (-w) * bv;
    jac += w * matmul(dsg, j0);
    r += (-w) * dsg + (-0.5 * dt) * matmul(dsg, dsg);
  }
  Mat2 psi = matmul(p0, r);

  if (!all_finite(disp) || !all_finite(jac) || !all_finite(psi)) {
    out.fail = StepFail::nonfinite;
    return out;
  }
  if (!(det(jac, d) > 0.0)) {
    out.fail = StepFail::orientation;
    return out;
  }

  // Newton re-orthogonalization of psi against the fresh Jacobian.
  auto consistency = [&](const Mat2& p) {
    Mat2 e = matmul(p, jac);
    e.m[0][0] -= 1.0;
    e.m[1][1] -= 1.0;
    return max_abs_entry(e, d);
  };
  double err = consistency(psi);
  for (int s = 0; s < opts.max_ortho_sweeps && err > opts.ortho_trigger; ++s) {
    Mat2 two_minus = (-1.0) * matmul(jac, psi);
    two_minus.m[0][0] += 2.0;
    two_minus.m[1][1] += 2.0;
    psi = matmul(psi, two_minus);
    err = consistency(psi);
  }
  if (!all_finite(psi) || err > 1e-6) {
    // A rare large increment can land the predicted psi outside the Newton
    // basin; the state invariant defines psi as the Jacobian's inverse, so
    // rebuild it directly (orientation already verified above).
    psi = inverse(jac, d);
    err = consistency(psi);
  }
  if (!all_finite(psi) || err > 1e-6) {
    out.fail = StepFail::consistency;
    return out;
  }

  out.disp = disp;
  out.jac = jac;
  out.psi = psi;
  return out;
}

}  // namespace

void step_flow(FlowState& state, const NoiseFamily& family, const double* dW,
               double dt, const StepOptions& opts) {
  const PeriodicGrid& grid = state.displacement.grid;
  const std::size_t total = grid.size();
  const double fd_step = opts.fd_step > 0.0 ? opts.fd_step : grid.h;

  DisplacementField new_disp(grid);
  MatrixField new_jac(grid);
  MatrixField new_psi(grid);
  std::atomic<std::size_t> first_fail{static_cast<std::size_t>(-1)};

  parallel_for(total, opts.workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t idx = b; idx < e; ++idx) {
      const NodeStepResult r =
          step_node(grid, state, family, dW, dt, opts, fd_step, idx);
      if (r.fail != StepFail::none) {
        std::size_t cur = first_fail.load(std::memory_order_relaxed);
        while (idx < cur &&
               !first_fail.compare_exchange_weak(cur, idx,
                                                 std::memory_order_relaxed)) {
        }
        return;  // abandon this chunk; error node is deterministic (min index)
      }
      new_disp.set(idx, r.disp);
      new_jac.set(idx, r.jac);
      new_psi.set(idx, r.psi);
    }
  });

  const std::size_t fail_idx = first_fail.load();
  if (fail_idx != static_cast<std::size_t>(-1)) {
    // Rerun the failing node (state is untouched) to classify the failure.
    const NodeStepResult r =
        step_node(grid, state, family, dW, dt, opts, fd_step, fail_idx);
    const double t_next = state.t + dt;
    switch (r.fail) {
      case StepFail::orientation:
        throw FlowDegeneracyError(
            "flow step lost orientation (det D xi <= 0) at node " +
                std::to_string(fail_idx) + ", t = " + std::to_string(t_next),
            fail_idx, t_next);
      case StepFail::consistency:
        throw FlowDegeneracyError(
            "inverse-Jacobian consistency exceeded 1e-6 at node " +
                std::to_string(fail_idx) + ", t = " + std::to_string(t_next),
            fail_idx, t_next);
      default:
        throw FlowDegeneracyError(
            "flow step produced non-finite values at node " +
                std::to_string(fail_idx) + ", t = " + std::to_string(t_next),
            fail_idx, t_next);
    }
  }

  state.displacement = std::move(new_disp);
  state.jacobian = std::move(new_jac);
  state.inv_jacobian = std::move(new_psi);
  state.t += dt;
}

bool FlowTrajectory::has_level(int level) const {
  return std::binary_search(stored_levels.begin(), stored_levels.end(), level);
}

const FlowState& FlowTrajectory::state_at(int level) const {
  const auto it =
      std::lower_bound(stored_levels.begin(), stored_levels.end(), level);
  if (it == stored_levels.end() || *it != level)
    throw ConfigError("flow level " + std::to_string(level) +
                      " was not stored in this trajectory");
  return states[static_cast<std::size_t>(it - stored_levels.begin())];
}

FlowTrajectory evolve_flow(const NoiseFamily& family, const BrownianPath& path,
                           const PeriodicGrid& grid, double T,
                           const EvolveOptions& opts) {
  if (family.dim != grid.dim)
    throw ConfigError("noise family dimension does not match grid dimension");
  if (family.num_modes != path.num_modes)
    throw ConfigError("noise family mode count does not match BrownianPath");
  const double dt = path.dt;
  const double kd = T / dt;
  const int K = static_cast<int>(std::lround(kd));
  if (K < 1 || std::abs(kd - K) > 1e-9 * std::max(1.0, kd))
    throw ConfigError("evolve_flow: T must be an integer multiple of dt");
  if (opts.start_step < 0 || opts.start_step + K > path.num_steps)
    throw ConfigError("evolve_flow: path has too few steps for T and start_step");
  const int stride = opts.store_every > 0 ? opts.store_every : 1;

  FlowTrajectory traj;
  traj.t0 = opts.start_step * dt;
  traj.dt = dt;
  traj.num_steps = K;

  FlowState state = identity_flow_state(grid, traj.t0);
  if (opts.on_level) opts.on_level(state, 0);
  traj.stored_levels.push_back(0);
  traj.states.push_back(state);

  for (int k = 0; k < K; ++k) {
    step_flow(state, family, path.level(opts.start_step + k), dt, opts.step);
    state.t = traj.t0 + (k + 1) * dt;  // avoid accumulated time roundoff
    const int level = k + 1;
    if (opts.on_level) opts.on_level(state, level);
    if (level % stride == 0 || level == K) {
      traj.stored_levels.push_back(level);
      traj.states.push_back(state);
    }
  }
  return traj;
}

double flow_property_residual(const FlowTrajectory& traj_a,
                              const FlowTrajectory& traj_b, double t) {
  if (traj_a.dt != traj_b.dt)
    throw ConfigError("flow_property_residual: trajectories must share dt");
  const double dt = traj_a.dt;
  const int la = static_cast<int>(std::lround((t - traj_a.t0) / dt));
  const int ls = static_cast<int>(std::lround((traj_b.t0 - traj_a.t0) / dt));
  const int lb = static_cast<int>(std::lround((t - traj_b.t0) / dt));
  const FlowState& at = traj_a.state_at(la);
  const FlowState& as = traj_a.state_at(ls);
  const FlowState& bt = traj_b.state_at(lb);

  const PeriodicGrid& grid = at.displacement.grid;
  const int d = grid.dim;
  double sup = 0.0;
  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    const Vec2 x = grid.coord(idx);
    const Vec2 p = x + as.displacement.at(idx);      // xi_{r,s}(x), node-exact
    const Vec2 q = p + interpolate(bt.displacement, p);  // xi_{s,t} composed
    const Vec2 r = x + at.displacement.at(idx);      // xi_{r,t}(x)
    const Vec2 diff = wrap_half(q - r, d);
    sup = std::max(sup, norm2(diff));
  }
  return sup;
}

}  // namespace torusflow
