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

#include "torusflow/inverse.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>

#include "torusflow/errors.hpp"
#include "torusflow/interpolate.hpp"
#include "torusflow/parallel.hpp"

namespace torusflow {

namespace {

Vec2 forward_residual(const FlowState& state, const Vec2& x, const Vec2& y) {
  const Vec2 pos = flow_position(state, x);
  return Vec2{pos.v[0] - y.v[0], pos.v[1] - y.v[1]};
}

struct InvertOutcome {
  bool converged = false;
  Vec2 x{};
  double residual = 0.0;
};

/**
 * Newton direction from a finite-difference Jacobian of the interpolated
 * forward map. The stored inverse Jacobian is sampled at grid nodes of the
 * continuous flow; where the flow is strongly sheared its interpolant can
 * disagree with the local slope of the displacement interpolant badly enough
 * that the quasi-Newton step stalls above tolerance. Differencing the map
 * that is actually being solved restores local convergence inside a cell.
 */
bool fd_newton_direction(const FlowState& state, const Vec2& x, const Vec2& y,
                         const Vec2& r, int d, Vec2* dir) {
  const double eps = 1e-7;
  double jac[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
  for (int j = 0; j < d; ++j) {
    Vec2 xp = x;
    xp.v[j] += eps;
    Vec2 xm = x;
    xm.v[j] -= eps;
    const Vec2 rp = forward_residual(state, xp, y);
    const Vec2 rm = forward_residual(state, xm, y);
    for (int i = 0; i < d; ++i) {
      jac[i][j] = (rp.v[i] - rm.v[i]) / (2.0 * eps);
    }
  }
  if (d == 1) {
    if (!(std::fabs(jac[0][0]) > 1e-14)) return false;
    *dir = Vec2{r.v[0] / jac[0][0], 0.0};
    return true;
  }
  const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
  if (!(std::fabs(det) > 1e-14)) return false;
  dir->v[0] = (jac[1][1] * r.v[0] - jac[0][1] * r.v[1]) / det;
  dir->v[1] = (jac[0][0] * r.v[1] - jac[1][0] * r.v[0]) / det;
  return true;
}

InvertOutcome invert_core(const FlowState& state, const Vec2& y, Vec2 x,
                          double tol, int max_iter) {
  const int d = state.displacement.grid.dim;
  Vec2 r = forward_residual(state, x, y);
  double rn = norm2(r);
  if (!(rn > tol)) {
    return InvertOutcome{std::isfinite(rn), x, rn};
  }
  for (int it = 0; it < max_iter; ++it) {
    // Candidate directions in order: quasi-Newton from the stored inverse
    // Jacobian, exact Newton on the interpolant, damped fixed point. Each is
    // backtracked and accepted only if it strictly shrinks the residual, so
    // the iteration can never wander between basins; near interpolation folds
    // a full step often overshoots into a neighboring one.
    Vec2 xn = x;
    Vec2 rnew = r;
    double rn_new = rn;
    bool accepted = false;
    auto try_direction = [&](const Vec2& dir) {
      double lam = 1.0;
      for (int bt = 0; bt < 6; ++bt, lam *= 0.5) {
        const Vec2 xc{x.v[0] - lam * dir.v[0], x.v[1] - lam * dir.v[1]};
        const Vec2 rc = forward_residual(state, xc, y);
        const double rc_n = norm2(rc);
        if (std::isfinite(rc_n) && rc_n < rn) {
          xn = xc;
          rnew = rc;
          rn_new = rc_n;
          return true;
        }
      }
      return false;
    };

    const Mat2 psi = interpolate(state.inv_jacobian, x);
    accepted = try_direction(matvec(psi, r));
    if (!accepted) {
      Vec2 fd{};
      if (fd_newton_direction(state, x, y, r, d, &fd)) {
        accepted = try_direction(fd);
      }
    }
    if (!accepted) {
      accepted = try_direction(r);
    }
    if (!accepted) {
      return InvertOutcome{false, x, rn};  // stalled at a local minimum
    }
    x = xn;
    r = rnew;
    rn = rn_new;
    if (!(rn > tol)) {
      return InvertOutcome{true, x, rn};
    }
  }
  return InvertOutcome{false, x, rn};
}

/**
 * Seed recovery for nodes whose warm start sits in the wrong basin: the
 * forward images of all grid nodes are known, so the node whose image lands
 * nearest to the target is a reliable restart point.
 */
Vec2 nearest_preimage_node(const FlowState& state, const Vec2& y) {
  const PeriodicGrid& grid = state.displacement.grid;
  const int d = grid.dim;
  double best = 1e300;
  Vec2 seed = y;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const Vec2 xj = grid.coord(j);
    const Vec2 img = xj + state.displacement.at(j);
    const Vec2 diff{img.v[0] - y.v[0], img.v[1] - y.v[1]};
    const Vec2 wrapped = wrap_half(diff, d);
    const double dist = norm2(wrapped);
    if (dist < best) {
      best = dist;
      // Shift the node by whole periods so its forward image lands on the
      // same branch as the target; the iteration solves in unwrapped
      // coordinates, so a seed whose image sits one period away would pull
      // the iterate toward the wrong copy of the solution.
      seed = Vec2{xj.v[0] - (diff.v[0] - wrapped.v[0]),
                  d == 2 ? xj.v[1] - (diff.v[1] - wrapped.v[1]) : 0.0};
    }
  }
  return seed;
}

}  // namespace

Vec2 invert_flow_at(const FlowState& state, const Vec2& y, Vec2 x0,
                    double tol, int max_iter) {
  if (!(tol > 0.0) || max_iter < 1) {
    throw ConfigError("invert_flow_at: tol must be positive and max_iter >= 1");
  }
  const InvertOutcome out = invert_core(state, y, x0, tol, max_iter);
  if (!out.converged) {
    throw InversionError(
        "invert_flow_at: residual " + std::to_string(out.residual) +
            " above tolerance " + std::to_string(tol) + " after " +
            std::to_string(max_iter) + " iterations",
        static_cast<std::size_t>(-1), out.residual);
  }
  return out.x;
}

InverseFlowField invert_flow_field(const FlowState& state,
                                   const InverseFlowField* warm, double tol,
                                   int max_iter, int workers) {
  if (!(tol > 0.0) || max_iter < 1) {
    throw ConfigError(
        "invert_flow_field: tol must be positive and max_iter >= 1");
  }
  const PeriodicGrid& grid = state.displacement.grid;
  if (warm != nullptr && !warm->inv_displacement.grid.same_layout(grid)) {
    throw ConfigError("invert_flow_field: warm start uses a different grid");
  }
  const std::size_t total = grid.size();
  const int d = grid.dim;

  InverseFlowField out;
  out.t = state.t;
  out.inv_displacement = DisplacementField(grid);

  std::vector<double> residuals(total, 0.0);
  std::atomic<std::size_t> first_bad{total};

  parallel_for(total, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const Vec2 y = grid.coord(idx);
      Vec2 x0 = y;
      if (warm != nullptr) {
        const Vec2 w = warm->inv_displacement.at(idx);
        x0.v[0] += w.v[0];
        if (d == 2) x0.v[1] += w.v[1];
      }
      InvertOutcome res = invert_core(state, y, x0, tol, max_iter);
      if (!res.converged) {
        // The warm start was in the wrong basin; reseed from the grid node
        // whose forward image is closest to the target.
        res = invert_core(state, y, nearest_preimage_node(state, y), tol,
                          max_iter);
      }
      if (!res.converged) {
        std::size_t cur = first_bad.load(std::memory_order_relaxed);
        while (idx < cur && !first_bad.compare_exchange_weak(
                                cur, idx, std::memory_order_relaxed)) {
        }
        continue;
      }
      out.inv_displacement.set(
          idx, Vec2{res.x.v[0] - y.v[0], d == 2 ? res.x.v[1] - y.v[1] : 0.0});
      residuals[idx] = res.residual;
    }
  });

  const std::size_t bad = first_bad.load(std::memory_order_relaxed);
  if (bad != total) {
    const Vec2 y = grid.coord(bad);
    const InvertOutcome res =
        invert_core(state, y, nearest_preimage_node(state, y), tol, max_iter);
    throw InversionError(
        "invert_flow_field: node " + std::to_string(bad) +
            " failed to converge at t=" + std::to_string(state.t) +
            " (residual " + std::to_string(res.residual) + ")",
        bad, res.residual);
  }

  double worst = 0.0;
  for (std::size_t idx = 0; idx < total; ++idx) {
    if (residuals[idx] > worst) worst = residuals[idx];
  }
  out.max_residual = worst;
  return out;
}

}  // namespace torusflow
