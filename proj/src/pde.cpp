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

#include "torusflow/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "torusflow/errors.hpp"
#include "torusflow/interpolate.hpp"
#include "torusflow/parallel.hpp"

namespace torusflow {

namespace {

bool level_is_stored(int level, int K, int every) {
  return level == 0 || level == K || (every > 0 && level % every == 0);
}

void validate_cfg(const SolverConfig& cfg, const char* who) {
  if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) {
    throw ConfigError(std::string(who) + ": theta must lie in [0,1]");
  }
  if (!(cfg.dt > 0.0)) {
    throw ConfigError(std::string(who) + ": dt must be positive");
  }
  if (!(cfg.lin_tol > 0.0) || cfg.max_lin_iter < 1) {
    throw ConfigError(std::string(who) + ": bad linear-solve settings");
  }
  if (cfg.store_every < 1) {
    throw ConfigError(std::string(who) + ": store_every must be >= 1");
  }
}

void guard_blowup(const ScalarField& u, double t, double bound,
                  const char* who) {
  double sup = 0.0;
  bool finite = true;
  for (double x : u.a) {
    if (!std::isfinite(x)) {
      finite = false;
      break;
    }
    sup = std::max(sup, std::abs(x));
  }
  if (!finite || sup > bound) {
    throw BlowUpError(std::string(who) + ": sup-norm guard tripped at t=" +
                          std::to_string(t),
                      t, finite ? sup : std::numeric_limits<double>::infinity());
  }
}

// sum_n dW_n (b_n . grad u + b0_n u + g_n) at every node, central gradient.
std::vector<double> noise_increment(const PeriodicGrid& grid,
                                    const NoiseFamily& family,
                                    const CoefficientSet* coeffs, double t,
                                    const ScalarField& u, const double* dW,
                                    int workers) {
  std::vector<double> out(grid.size(), 0.0);
  const double inv2h = 1.0 / (2.0 * grid.h);
  const int N = family.num_modes;
  parallel_for(grid.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      Vec2 gu;
      for (int k = 0; k < grid.dim; ++k) {
        gu.v[k] = (u[grid.neighbor(idx, k, +1)] - u[grid.neighbor(idx, k, -1)]) *
                  inv2h;
      }
      const Vec2 x = grid.coord(idx);
      double acc = 0.0;
      for (int n = 0; n < N; ++n) {
        double term = dot(family.b(n, t, x), gu);
        if (coeffs != nullptr) {
          if (static_cast<std::size_t>(n) < coeffs->b0.size() && coeffs->b0[n])
            term += coeffs->b0[n](t, x) * u[idx];
          if (static_cast<std::size_t>(n) < coeffs->g.size() && coeffs->g[n])
            term += coeffs->g[n](t, x);
        }
        acc += dW[n] * term;
      }
      out[idx] = acc;
    }
  });
  return out;
}

struct DirectLevelFields {
  MatrixField a;
  VectorField a_lin;
  bool has_a_lin = false;
  ScalarField a0;
  bool has_a0 = false;
  ScalarField forcing;
  bool has_forcing = false;
};

DirectLevelFields assemble_direct_level(const CoefficientSet& coeffs,
                                        const PeriodicGrid& grid, double t,
                                        int workers) {
  DirectLevelFields lf;
  lf.a = MatrixField(grid);
  lf.has_a_lin = static_cast<bool>(coeffs.a_lin);
  lf.has_a0 = static_cast<bool>(coeffs.a0);
  lf.has_forcing = coeffs.f0 || coeffs.f_vec;
  if (lf.has_a_lin) lf.a_lin = VectorField(grid);
  if (lf.has_a0) lf.a0 = ScalarField(grid);

  VectorField fv;
  if (coeffs.f_vec) fv = VectorField(grid);

  parallel_for(grid.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const Vec2 x = grid.coord(idx);
      Mat2 a = coeffs.a(t, x);
      if (grid.dim == 1) {
        a.m[0][1] = 0.0;
        a.m[1][0] = 0.0;
        a.m[1][1] = 1.0;
      }
      lf.a.set(idx, a);
      if (lf.has_a_lin) lf.a_lin.set(idx, coeffs.a_lin(t, x));
      if (lf.has_a0) lf.a0[idx] = coeffs.a0(t, x);
      if (coeffs.f_vec) fv.set(idx, coeffs.f_vec(t, x));
    }
  });

  if (lf.has_forcing) {
    if (coeffs.f_vec) {
      lf.forcing = divergence_central(fv, workers);
    } else {
      lf.forcing = ScalarField(grid);
    }
    if (coeffs.f0) {
      for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        lf.forcing[idx] += coeffs.f0(t, grid.coord(idx));
      }
    }
  }
  return lf;
}

// One semi-implicit step shared by the direct and quasilinear drivers so the
// degenerate quasilinear case reproduces the direct solver bit for bit.
ScalarField direct_level_step(const SolverConfig& cfg, const ScalarField& u,
                              const DirectLevelFields& lf,
                              const NoiseFamily& family,
                              const CoefficientSet* coeffs, double t,
                              const double* dW) {
  const PeriodicGrid& grid = u.grid;
  const OperatorStencil st = build_operator_stencil(
      grid, lf.a, lf.has_a_lin ? &lf.a_lin : nullptr,
      lf.has_a0 ? &lf.a0 : nullptr, cfg.workers);
  std::vector<double> incr;
  const std::vector<double>* incr_ptr = nullptr;
  if (family.num_modes > 0) {
    incr = noise_increment(grid, family, coeffs, t, u, dW, cfg.workers);
    incr_ptr = &incr;
  }
  return theta_step(cfg, u, st, lf.has_forcing ? &lf.forcing : nullptr,
                    incr_ptr);
}

void validate_path_window(const BrownianPath& path, const NoiseFamily& family,
                          int start_step, int K, const char* who) {
  if (path.num_modes != family.num_modes) {
    throw ConfigError(std::string(who) +
                      ": path mode count does not match the noise family");
  }
  if (start_step < 0 || start_step + K > path.num_steps) {
    throw ConfigError(std::string(who) +
                      ": path does not cover the requested time window");
  }
}

}  // namespace

int level_count(double T, double dt, const char* who) {
  if (!(T > 0.0) || !(dt > 0.0)) {
    throw ConfigError(std::string(who) + ": T and dt must be positive");
  }
  const double kd = T / dt;
  const int K = static_cast<int>(std::lround(kd));
  if (K < 1 || std::abs(kd - K) > 1e-9 * std::max(1.0, kd)) {
    throw ConfigError(std::string(who) +
                      ": T must be an integer multiple of dt");
  }
  return K;
}

void check_cfl_guard(const PeriodicGrid& grid, const SolverConfig& cfg,
                     const NoiseFamily& family) {
  if (family.sup_speed > 0.0) {
    const double dt_max = cfg.cfl_ratio * grid.h / family.sup_speed;
    if (cfg.dt > dt_max * (1.0 + 1e-12)) {
      throw ConfigError(
          "explicit-noise CFL guard: dt=" + std::to_string(cfg.dt) +
          " exceeds " + std::to_string(dt_max) +
          " (= cfl_ratio * h / sup|b|); reduce dt or refine the guard ratio");
    }
  }
}

bool FieldSequence::has_level(int level) const {
  return std::binary_search(stored_levels.begin(), stored_levels.end(), level);
}

const ScalarField& FieldSequence::at_level(int level) const {
  const auto it =
      std::lower_bound(stored_levels.begin(), stored_levels.end(), level);
  if (it == stored_levels.end() || *it != level) {
    throw ConfigError("FieldSequence: level " + std::to_string(level) +
                      " is not stored");
  }
  return fields[static_cast<std::size_t>(it - stored_levels.begin())];
}

OperatorStencil build_operator_stencil(const PeriodicGrid& grid,
                                       const MatrixField& alpha,
                                       const VectorField* alpha_lin,
                                       const ScalarField* zeroth,
                                       int workers) {
  const std::size_t total = grid.size();
  const double h = grid.h;
  const double ih2 = 1.0 / (h * h);
  const double i2h = 1.0 / (2.0 * h);
  const double i4h2 = 0.25 * ih2;

  OperatorStencil st;
  st.span = grid.dim == 1 ? 3 : 9;
  st.w.assign(total * static_cast<std::size_t>(st.span), 0.0);
  st.nbr.assign(total * static_cast<std::size_t>(st.span), 0);

  if (grid.dim == 1) {
    parallel_for(total, workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t idx = begin; idx < end; ++idx) {
        const std::size_t e = grid.neighbor(idx, 0, +1);
        const std::size_t w = grid.neighbor(idx, 0, -1);
        const double ac = alpha.at(idx).m[0][0];
        const double aE = 0.5 * (ac + alpha.at(e).m[0][0]);
        const double aW = 0.5 * (ac + alpha.at(w).m[0][0]);
        const double al = alpha_lin ? alpha_lin->at(idx).v[0] : 0.0;
        const double z = zeroth ? (*zeroth)[idx] : 0.0;
        double* ww = &st.w[idx * 3];
        std::size_t* nn = &st.nbr[idx * 3];
        nn[0] = idx;
        nn[1] = e;
        nn[2] = w;
        ww[0] = -(aE + aW) * ih2 + z;
        ww[1] = aE * ih2 + al * i2h;
        ww[2] = aW * ih2 - al * i2h;
      }
    });
    return st;
  }

  parallel_for(total, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::size_t iE = grid.neighbor(idx, 0, +1);
      const std::size_t iW = grid.neighbor(idx, 0, -1);
      const std::size_t iN = grid.neighbor(idx, 1, +1);
      const std::size_t iS = grid.neighbor(idx, 1, -1);
      const std::size_t iNE = grid.neighbor(iN, 0, +1);
      const std::size_t iSE = grid.neighbor(iS, 0, +1);
      const std::size_t iNW = grid.neighbor(iN, 0, -1);
      const std::size_t iSW = grid.neighbor(iS, 0, -1);

      const Mat2 ac = alpha.at(idx);
      const Mat2 aE_m = alpha.at(iE);
      const Mat2 aW_m = alpha.at(iW);
      const Mat2 aN_m = alpha.at(iN);
      const Mat2 aS_m = alpha.at(iS);

      const double axxE = 0.5 * (ac.m[0][0] + aE_m.m[0][0]);
      const double axxW = 0.5 * (ac.m[0][0] + aW_m.m[0][0]);
      const double ayyN = 0.5 * (ac.m[1][1] + aN_m.m[1][1]);
      const double ayyS = 0.5 * (ac.m[1][1] + aS_m.m[1][1]);
      const double axyE = 0.5 * (ac.m[0][1] + aE_m.m[0][1]);
      const double axyW = 0.5 * (ac.m[0][1] + aW_m.m[0][1]);
      const double ayxN = 0.5 * (ac.m[1][0] + aN_m.m[1][0]);
      const double ayxS = 0.5 * (ac.m[1][0] + aS_m.m[1][0]);

      const Vec2 al = alpha_lin ? alpha_lin->at(idx) : Vec2{};
      const double z = zeroth ? (*zeroth)[idx] : 0.0;

      double* ww = &st.w[idx * 9];
      std::size_t* nn = &st.nbr[idx * 9];
      nn[0] = idx;
      nn[1] = iE;
      nn[2] = iW;
      nn[3] = iN;
      nn[4] = iS;
      nn[5] = iNE;
      nn[6] = iSE;
      nn[7] = iNW;
      nn[8] = iSW;

      ww[0] = -(axxE + axxW + ayyN + ayyS) * ih2 + z;
      ww[1] = axxE * ih2 + (ayxN - ayxS) * i4h2 + al.v[0] * i2h;
      ww[2] = axxW * ih2 - (ayxN - ayxS) * i4h2 - al.v[0] * i2h;
      ww[3] = ayyN * ih2 + (axyE - axyW) * i4h2 + al.v[1] * i2h;
      ww[4] = ayyS * ih2 - (axyE - axyW) * i4h2 - al.v[1] * i2h;
      ww[5] = (axyE + ayxN) * i4h2;
      ww[6] = -(axyE + ayxS) * i4h2;
      ww[7] = -(axyW + ayxN) * i4h2;
      ww[8] = (axyW + ayxS) * i4h2;
    }
  });
  return st;
}

void apply_stencil(const OperatorStencil& st, const std::vector<double>& x,
                   std::vector<double>& y, int workers) {
  const std::size_t total = x.size();
  y.resize(total);
  const int span = st.span;
  parallel_for(total, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const double* ww = &st.w[idx * static_cast<std::size_t>(span)];
      const std::size_t* nn = &st.nbr[idx * static_cast<std::size_t>(span)];
      double acc = 0.0;
      for (int s = 0; s < span; ++s) acc += ww[s] * x[nn[s]];
      y[idx] = acc;
    }
  });
}

ScalarField theta_step(const SolverConfig& cfg, const ScalarField& u,
                       const OperatorStencil& st, const ScalarField* forcing,
                       const std::vector<double>* explicit_increment,
                       LinearSolveStats* stats) {
  const PeriodicGrid& grid = u.grid;
  const std::size_t total = grid.size();
  const double theta = cfg.theta;
  const double dt = cfg.dt;

  std::vector<double> rhs(u.a);
  if (theta < 1.0) {
    std::vector<double> lu;
    apply_stencil(st, u.a, lu, cfg.workers);
    const double c = (1.0 - theta) * dt;
    for (std::size_t idx = 0; idx < total; ++idx) rhs[idx] += c * lu[idx];
  }
  if (forcing != nullptr) {
    for (std::size_t idx = 0; idx < total; ++idx)
      rhs[idx] += dt * (*forcing)[idx];
  }
  if (explicit_increment != nullptr) {
    for (std::size_t idx = 0; idx < total; ++idx)
      rhs[idx] += (*explicit_increment)[idx];
  }

  ScalarField out(grid);
  if (theta == 0.0) {
    out.a = std::move(rhs);
    if (stats != nullptr) *stats = LinearSolveStats{0, 0.0};
    return out;
  }

  if (grid.dim == 1) {
    std::vector<double> sub(total), diag(total), sup(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
      const double* ww = &st.w[idx * 3];
      diag[idx] = 1.0 - theta * dt * ww[0];
      sup[idx] = -theta * dt * ww[1];
      sub[idx] = -theta * dt * ww[2];
    }
    out.a = solve_periodic_tridiagonal(sub, diag, sup, rhs);
    if (stats != nullptr) *stats = LinearSolveStats{1, 0.0};
    return out;
  }

  const LinearOperator apply = [&](const std::vector<double>& xin,
                                   std::vector<double>& yout) {
    apply_stencil(st, xin, yout, cfg.workers);
    const double c = theta * dt;
    for (std::size_t idx = 0; idx < total; ++idx) {
      yout[idx] = xin[idx] - c * yout[idx];
    }
  };
  std::vector<double> inv_diag(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    inv_diag[idx] = 1.0 / (1.0 - theta * dt * st.w[idx * 9]);
  }
  out.a = u.a;  // warm start
  const LinearSolveStats s =
      bicgstab(apply, inv_diag, rhs, out.a, cfg.lin_tol, cfg.max_lin_iter);
  if (stats != nullptr) *stats = s;
  return out;
}

FieldSequence solve_random_pde(const TransformedProvider& tc_at,
                               const ScalarField& v0, const PeriodicGrid& grid,
                               double T, const SolverConfig& cfg,
                               const HProvider* h_at) {
  validate_cfg(cfg, "solve_random_pde");
  if (!v0.grid.same_layout(grid)) {
    throw ConfigError("solve_random_pde: v0 grid mismatch");
  }
  const int K = level_count(T, cfg.dt, "solve_random_pde");

  FieldSequence seq;
  seq.t0 = 0.0;
  seq.dt = cfg.dt;

  ScalarField z = v0;
  if (h_at != nullptr) {
    const ScalarField& h0 = (*h_at)(0);
    for (std::size_t idx = 0; idx < grid.size(); ++idx) z[idx] -= h0[idx];
  }

  auto snapshot = [&](int level) {
    ScalarField v = z;
    if (h_at != nullptr) {
      const ScalarField& h = (*h_at)(level);
      for (std::size_t idx = 0; idx < grid.size(); ++idx) v[idx] += h[idx];
    }
    seq.stored_levels.push_back(level);
    seq.fields.push_back(std::move(v));
  };

  snapshot(0);
  for (int k = 0; k < K; ++k) {
    const TransformedCoefficients& tc = tc_at(k);
    if (!tc.degeneracy_mask.empty()) {
      throw TransformError(
          "solve_random_pde: degenerate transformed coefficients at level " +
              std::to_string(k) + " (node " +
              std::to_string(tc.degeneracy_mask.front()) + ", " +
              std::to_string(tc.degeneracy_mask.size()) + " nodes)",
          tc.degeneracy_mask.front(), tc.degeneracy_mask.size());
    }
    ScalarField forcing = divergence_central(tc.Fbar_vec, cfg.workers);
    for (std::size_t idx = 0; idx < grid.size(); ++idx)
      forcing[idx] += tc.Fbar0[idx];
    const OperatorStencil st = build_operator_stencil(
        grid, tc.alpha, &tc.alpha_lin, nullptr, cfg.workers);
    z = theta_step(cfg, z, st, &forcing, nullptr);
    guard_blowup(z, (k + 1) * cfg.dt, cfg.blowup_sup, "solve_random_pde");
    if (level_is_stored(k + 1, K, cfg.store_every)) snapshot(k + 1);
  }
  return seq;
}

ScalarField compose_back_level(const ScalarField& v,
                               const InverseFlowField& inv, int workers) {
  const PeriodicGrid& grid = v.grid;
  if (!inv.inv_displacement.grid.same_layout(grid)) {
    throw ConfigError("compose_back_level: grid mismatch");
  }
  ScalarField u(grid);
  parallel_for(grid.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const Vec2 y = grid.coord(idx);
      const Vec2 pos = y + inv.inv_displacement.at(idx);
      u[idx] = interpolate(v, pos);
    }
  });
  return u;
}

FieldSequence compose_back(const FieldSequence& v,
                           const std::vector<InverseFlowField>& inv,
                           int workers) {
  if (inv.size() != v.count()) {
    throw ConfigError("compose_back: level count mismatch");
  }
  FieldSequence out;
  out.t0 = v.t0;
  out.dt = v.dt;
  out.stored_levels = v.stored_levels;
  out.fields.reserve(v.count());
  for (std::size_t i = 0; i < v.count(); ++i) {
    const double tv = v.time_of(i);
    if (std::abs(inv[i].t - tv) > 1e-9 * std::max(1.0, std::abs(tv))) {
      throw ConfigError("compose_back: inverse field time mismatch at index " +
                        std::to_string(i));
    }
    out.fields.push_back(compose_back_level(v.fields[i], inv[i], workers));
  }
  return out;
}

FieldSequence solve_spde_direct(const CoefficientSet& coeffs,
                                const NoiseFamily& family,
                                const ScalarField& u0,
                                const BrownianPath& path,
                                const PeriodicGrid& grid, double T,
                                const SolverConfig& cfg, int start_step) {
  validate_cfg(cfg, "solve_spde_direct");
  if (!coeffs.a) throw ConfigError("solve_spde_direct: coefficient 'a' missing");
  if (coeffs.dim != grid.dim || family.dim != grid.dim ||
      !u0.grid.same_layout(grid)) {
    throw ConfigError("solve_spde_direct: dimension/grid mismatch");
  }
  if (!coeffs.b0.empty() &&
      static_cast<int>(coeffs.b0.size()) != family.num_modes) {
    throw ConfigError(
        "solve_spde_direct: b0 entries must match the noise mode count");
  }
  if (!coeffs.g.empty() &&
      static_cast<int>(coeffs.g.size()) != family.num_modes) {
    throw ConfigError(
        "solve_spde_direct: g entries must match the noise mode count");
  }
  const int K = level_count(T, cfg.dt, "solve_spde_direct");
  validate_path_window(path, family, start_step, K, "solve_spde_direct");
  check_cfl_guard(grid, cfg, family);

  FieldSequence seq;
  seq.t0 = start_step * cfg.dt;
  seq.dt = cfg.dt;
  ScalarField u = u0;
  seq.stored_levels.push_back(0);
  seq.fields.push_back(u);

  for (int k = 0; k < K; ++k) {
    const double t = seq.t0 + k * cfg.dt;
    const DirectLevelFields lf =
        assemble_direct_level(coeffs, grid, t, cfg.workers);
    u = direct_level_step(cfg, u, lf, family, &coeffs, t,
                          path.level(start_step + k));
    guard_blowup(u, t + cfg.dt, cfg.blowup_sup, "solve_spde_direct");
    if (level_is_stored(k + 1, K, cfg.store_every)) {
      seq.stored_levels.push_back(k + 1);
      seq.fields.push_back(u);
    }
  }
  return seq;
}

FieldSequence solve_quasilinear(const QuasilinearFn& A_fn,
                                const NoiseFamily& family,
                                const ScalarField& U0,
                                const BrownianPath& path,
                                const PeriodicGrid& grid, double T,
                                const SolverConfig& cfg, double nu_declared,
                                int start_step) {
  validate_cfg(cfg, "solve_quasilinear");
  if (!A_fn) throw ConfigError("solve_quasilinear: A_fn missing");
  if (family.dim != grid.dim || !U0.grid.same_layout(grid)) {
    throw ConfigError("solve_quasilinear: dimension/grid mismatch");
  }
  const int K = level_count(T, cfg.dt, "solve_quasilinear");
  validate_path_window(path, family, start_step, K, "solve_quasilinear");
  check_cfl_guard(grid, cfg, family);

  FieldSequence seq;
  seq.t0 = start_step * cfg.dt;
  seq.dt = cfg.dt;
  ScalarField u = U0;
  seq.stored_levels.push_back(0);
  seq.fields.push_back(u);

  const int N = family.num_modes;
  DirectLevelFields lf;
  lf.a = MatrixField(grid);

  for (int k = 0; k < K; ++k) {
    const double t = seq.t0 + k * cfg.dt;
    // Freeze coefficients at the current iterate and recheck parabolicity.
    parallel_for(grid.size(), cfg.workers,
                 [&](std::size_t begin, std::size_t end) {
                   for (std::size_t idx = begin; idx < end; ++idx) {
                     const Vec2 x = grid.coord(idx);
                     Mat2 a = A_fn(t, x, u[idx]);
                     if (grid.dim == 1) {
                       a.m[0][1] = 0.0;
                       a.m[1][0] = 0.0;
                       a.m[1][1] = 1.0;
                     }
                     lf.a.set(idx, a);
                   }
                 });
    double realized = std::numeric_limits<double>::infinity();
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
      Mat2 quad = lf.a.at(idx);
      const Vec2 x = grid.coord(idx);
      for (int n = 0; n < N; ++n) {
        const Vec2 bn = family.b(n, t, x);
        quad += -0.5 * outer(bn, bn);
      }
      double lo = 0.0, hi = 0.0;
      sym_eigenvalues(quad, grid.dim, lo, hi);
      realized = std::min(realized, lo);
    }
    if (realized < nu_declared - 1e-9) {
      throw ParabolicityError(
          "solve_quasilinear: frozen coefficients violate the declared "
          "parabolicity at t=" +
              std::to_string(t),
          realized, nu_declared);
    }
    u = direct_level_step(cfg, u, lf, family, nullptr, t,
                          path.level(start_step + k));
    guard_blowup(u, t + cfg.dt, cfg.blowup_sup, "solve_quasilinear");
    if (level_is_stored(k + 1, K, cfg.store_every)) {
      seq.stored_levels.push_back(k + 1);
      seq.fields.push_back(u);
    }
  }
  return seq;
}

}  // namespace torusflow
