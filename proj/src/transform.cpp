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

#include "torusflow/transform.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "torusflow/errors.hpp"
#include "torusflow/linsolve.hpp"
#include "torusflow/parallel.hpp"

namespace torusflow {

namespace {

// d_k of the inverse Jacobian entries at a node, contracted to the column
// divergence s_j = sum_k d_k psi[k][j], from central differences of the
// stored Jacobian field and the identity d_k psi = -psi (d_k Dxi) psi.
Vec2 psi_column_divergence(const FlowState& state, const Mat2& psi,
                           std::size_t idx) {
  const PeriodicGrid& grid = state.jacobian.grid;
  const double inv2h = 1.0 / (2.0 * grid.h);
  Vec2 s;
  for (int k = 0; k < grid.dim; ++k) {
    const Mat2 jp = state.jacobian.at(grid.neighbor(idx, k, +1));
    const Mat2 jm = state.jacobian.at(grid.neighbor(idx, k, -1));
    const Mat2 dkD = inv2h * (jp - jm);
    const Mat2 dkPsi = -1.0 * matmul(psi, matmul(dkD, psi));
    s.v[0] += dkPsi.m[k][0];
    s.v[1] += dkPsi.m[k][1];
  }
  return s;
}

void validate_mode_counts(const CoefficientSet& coeffs,
                          const NoiseFamily& family, const char* who) {
  if (!coeffs.a) {
    throw ConfigError(std::string(who) + ": coefficient set lacks 'a'");
  }
  if (!coeffs.g.empty() &&
      static_cast<int>(coeffs.g.size()) != family.num_modes) {
    throw ConfigError(std::string(who) +
                      ": g entries must match the noise mode count");
  }
  if (!coeffs.b0.empty()) {
    throw ConfigError(std::string(who) +
                      ": zeroth-order noise coefficients are only supported "
                      "by the direct solver");
  }
  if (coeffs.a0) {
    throw ConfigError(std::string(who) +
                      ": zeroth-order coefficient a0 is only supported by "
                      "the direct solver");
  }
}

void throw_if_flagged(const std::vector<std::uint8_t>& bad, const char* what) {
  std::size_t first = bad.size();
  std::size_t count = 0;
  for (std::size_t i = 0; i < bad.size(); ++i) {
    if (bad[i]) {
      if (count == 0) first = i;
      ++count;
    }
  }
  if (count > 0) {
    throw TransformError(std::string(what) + " at node " +
                             std::to_string(first) + " (" +
                             std::to_string(count) + " nodes affected)",
                         first, count);
  }
}

}  // namespace

ScalarField divergence_central(const VectorField& q, int workers) {
  const PeriodicGrid& grid = q.grid;
  ScalarField out(grid);
  const double inv2h = 1.0 / (2.0 * grid.h);
  parallel_for(grid.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      double div = 0.0;
      for (int k = 0; k < grid.dim; ++k) {
        const Vec2 qp = q.at(grid.neighbor(idx, k, +1));
        const Vec2 qm = q.at(grid.neighbor(idx, k, -1));
        div += (qp.v[k] - qm.v[k]) * inv2h;
      }
      out[idx] = div;
    }
  });
  return out;
}

VectorField gradient_central(const ScalarField& s, int workers) {
  const PeriodicGrid& grid = s.grid;
  VectorField out(grid);
  const double inv2h = 1.0 / (2.0 * grid.h);
  parallel_for(grid.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      Vec2 g;
      for (int k = 0; k < grid.dim; ++k) {
        g.v[k] = (s[grid.neighbor(idx, k, +1)] - s[grid.neighbor(idx, k, -1)]) *
                 inv2h;
      }
      out.set(idx, g);
    }
  });
  return out;
}

TransformedPrincipal transformed_coefficients(const CoefficientSet& coeffs,
                                              const NoiseFamily& family,
                                              const FlowState& state, double t,
                                              int workers) {
  validate_mode_counts(coeffs, family, "transformed_coefficients");
  const PeriodicGrid& grid = state.displacement.grid;
  if (coeffs.dim != grid.dim || family.dim != grid.dim) {
    throw ConfigError("transformed_coefficients: dimension mismatch");
  }
  const std::size_t total = grid.size();
  const int d = grid.dim;
  const int N = family.num_modes;

  TransformedPrincipal out;
  out.alpha = MatrixField(grid);
  out.alpha_lin = VectorField(grid);
  std::vector<std::uint8_t> nonfinite(total, 0);
  std::vector<std::uint8_t> degenerate(total, 0);

  parallel_for(total, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const Vec2 x = grid.coord(idx);
      const Vec2 xi = x + state.displacement.at(idx);
      const Mat2 psi = state.inv_jacobian.at(idx);

      Mat2 a_pt = coeffs.a(t, xi);
      if (d == 1) {
        a_pt.m[0][1] = 0.0;
        a_pt.m[1][0] = 0.0;
        a_pt.m[1][1] = 1.0;
      }

      Vec2 al = matvec(psi, stratonovich_drift(family, t, xi));
      if (coeffs.a_lin) al += matvec(psi, coeffs.a_lin(t, xi));
      const Vec2 s = psi_column_divergence(state, psi, idx);

      Mat2 quad = a_pt;
      for (int n = 0; n < N; ++n) {
        const Vec2 bn = family.b(n, t, xi);
        quad += -0.5 * outer(bn, bn);
        const Mat2 bj = family.b_jac(n, t, xi);
        al += -0.5 * matvec(psi, matvec(bj, bn));
        const Vec2 pb = matvec(psi, bn);
        al += 0.5 * family.b_div(n, t, xi) * pb;
        al += 0.5 * dot(s, bn) * pb;
      }
      const Mat2 alpha = matmul(psi, matmul(quad, transpose(psi)));

      out.alpha.set(idx, alpha);
      out.alpha_lin.set(idx, al);
      if (!all_finite(alpha) || !all_finite(al)) {
        nonfinite[idx] = 1;
        continue;
      }
      // Sylvester test on the symmetrized matrix; unlike the explicit small
      // eigenvalue (tr - disc)/2, tr/det signs do not cancel at extreme
      // condition numbers, so well-posed but distorted nodes are kept.
      if (d == 1) {
        if (!(alpha.m[0][0] > 0.0)) degenerate[idx] = 1;
      } else {
        const double s01 = 0.5 * (alpha.m[0][1] + alpha.m[1][0]);
        const double det_sym = alpha.m[0][0] * alpha.m[1][1] - s01 * s01;
        if (!(alpha.m[0][0] + alpha.m[1][1] > 0.0) || !(det_sym > 0.0))
          degenerate[idx] = 1;
      }
    }
  });

  throw_if_flagged(nonfinite, "non-finite transformed coefficient");
  for (std::size_t idx = 0; idx < total; ++idx) {
    if (degenerate[idx]) out.degeneracy_mask.push_back(idx);
  }
  return out;
}

TransformedRhs transformed_rhs(const CoefficientSet& coeffs,
                               const NoiseFamily& family,
                               const FlowState& state, double t, int workers) {
  validate_mode_counts(coeffs, family, "transformed_rhs");
  const PeriodicGrid& grid = state.displacement.grid;
  if (coeffs.dim != grid.dim || family.dim != grid.dim) {
    throw ConfigError("transformed_rhs: dimension mismatch");
  }
  const std::size_t total = grid.size();
  const int N = family.num_modes;

  TransformedRhs out;
  out.F0 = ScalarField(grid);
  out.F_vec = VectorField(grid);
  out.G.assign(static_cast<std::size_t>(N), ScalarField(grid));

  const bool any_g = coeffs.has_g();
  std::vector<VectorField> q;
  if (any_g) q.assign(static_cast<std::size_t>(N), VectorField(grid));

  // Pass 1: pointwise pullbacks and the per-mode q_n = psi b_n(xi) fields.
  parallel_for(total, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const Vec2 x = grid.coord(idx);
      const Vec2 xi = x + state.displacement.at(idx);
      const Mat2 psi = state.inv_jacobian.at(idx);

      double f0v = coeffs.f0 ? coeffs.f0(t, xi) : 0.0;
      Vec2 fv = coeffs.f_vec ? coeffs.f_vec(t, xi) : Vec2{};
      if (coeffs.f_vec || coeffs.f0) {
        const Vec2 s = psi_column_divergence(state, psi, idx);
        f0v -= dot(s, fv);
      }
      Vec2 Fv = matvec(psi, fv);

      for (int n = 0; n < N; ++n) {
        const double gn =
            (!coeffs.g.empty() && coeffs.g[n]) ? coeffs.g[n](t, xi) : 0.0;
        out.G[n][idx] = gn;
        if (any_g) {
          const Vec2 qn = matvec(psi, family.b(n, t, xi));
          q[n].set(idx, qn);
          Fv += -gn * qn;
        }
      }
      out.F0[idx] = f0v;
      out.F_vec.set(idx, Fv);
    }
  });

  // Pass 2: add the divergence contribution sum_n div(q_n) g_n.
  if (any_g) {
    for (int n = 0; n < N; ++n) {
      const ScalarField divq = divergence_central(q[n], workers);
      parallel_for(total, workers,
                   [&](std::size_t begin, std::size_t end) {
                     for (std::size_t idx = begin; idx < end; ++idx) {
                       out.F0[idx] += divq[idx] * out.G[n][idx];
                     }
                   });
    }
  }

  std::vector<std::uint8_t> nonfinite(total, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    bool ok = std::isfinite(out.F0[idx]) && all_finite(out.F_vec.at(idx));
    for (int n = 0; ok && n < N; ++n) ok = std::isfinite(out.G[n][idx]);
    if (!ok) nonfinite[idx] = 1;
  }
  throw_if_flagged(nonfinite, "non-finite transformed forcing");
  return out;
}

ScalarField solve_h_step(const ScalarField& h, const std::vector<ScalarField>& G,
                         const double* increments, int num_modes, double dt,
                         double lin_tol, int max_lin_iter) {
  const PeriodicGrid& grid = h.grid;
  const std::size_t total = grid.size();

  std::vector<double> rhs(h.a);
  for (int n = 0; n < num_modes; ++n) {
    const double dw = increments[n];
    for (std::size_t idx = 0; idx < total; ++idx) {
      rhs[idx] += G[n][idx] * dw;
    }
  }

  const double r = dt / (grid.h * grid.h);
  ScalarField out(grid);
  if (grid.dim == 1) {
    const std::size_t n1 = total;
    std::vector<double> sub(n1, -r), diag(n1, 1.0 + 2.0 * r), sup(n1, -r);
    out.a = solve_periodic_tridiagonal(sub, diag, sup, rhs);
    return out;
  }

  const LinearOperator apply = [&](const std::vector<double>& in,
                                   std::vector<double>& res) {
    res.resize(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
      const double lap = in[grid.neighbor(idx, 0, +1)] +
                         in[grid.neighbor(idx, 0, -1)] +
                         in[grid.neighbor(idx, 1, +1)] +
                         in[grid.neighbor(idx, 1, -1)] - 4.0 * in[idx];
      res[idx] = in[idx] - r * lap;
    }
  };
  std::vector<double> inv_diag(total, 1.0 / (1.0 + 4.0 * r));
  out.a = h.a;  // warm start from the previous level
  bicgstab(apply, inv_diag, rhs, out.a, lin_tol, max_lin_iter);
  return out;
}

std::vector<ScalarField> solve_h(
    const std::function<const std::vector<ScalarField>&(int)>& g_at_level,
    const PeriodicGrid& grid, const BrownianPath& path, double T, double dt,
    int start_step, double lin_tol, int max_lin_iter) {
  if (!(dt > 0.0) || !(T > 0.0)) {
    throw ConfigError("solve_h: T and dt must be positive");
  }
  const double kd = T / dt;
  const int K = static_cast<int>(std::lround(kd));
  if (K < 1 || std::abs(kd - K) > 1e-9 * std::max(1.0, kd)) {
    throw ConfigError("solve_h: T must be an integer multiple of dt");
  }
  if (start_step < 0 || start_step + K > path.num_steps) {
    throw ConfigError("solve_h: path does not cover the requested window");
  }
  if (path.num_modes < 0) {
    throw ConfigError("solve_h: invalid path");
  }

  std::vector<ScalarField> h;
  h.reserve(static_cast<std::size_t>(K) + 1);
  h.emplace_back(grid, 0.0);
  for (int k = 0; k < K; ++k) {
    const std::vector<ScalarField>& G = g_at_level(k);
    if (static_cast<int>(G.size()) != path.num_modes) {
      throw ConfigError("solve_h: forcing mode count mismatch at level " +
                        std::to_string(k));
    }
    h.push_back(solve_h_step(h.back(), G, path.level(start_step + k),
                             path.num_modes, dt, lin_tol, max_lin_iter));
  }
  return h;
}

std::pair<ScalarField, VectorField> combined_rhs(const ScalarField& F0,
                                                 const VectorField& F_vec,
                                                 const MatrixField& alpha,
                                                 const VectorField& alpha_lin,
                                                 const ScalarField& h_level,
                                                 int workers) {
  const PeriodicGrid& grid = F0.grid;
  if (!h_level.grid.same_layout(grid)) {
    throw ConfigError("combined_rhs: h grid mismatch");
  }
  const VectorField grad_h = gradient_central(h_level, workers);

  ScalarField Fbar0(grid);
  VectorField Fbar_vec(grid);
  parallel_for(grid.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const Vec2 gh = grad_h.at(idx);
      Fbar0[idx] = F0[idx] + dot(alpha_lin.at(idx), gh);
      const Vec2 agh = matvec(alpha.at(idx), gh);
      Fbar_vec.set(idx, F_vec.at(idx) + agh - gh);
    }
  });
  return {std::move(Fbar0), std::move(Fbar_vec)};
}

TransformedCoefficients assemble_transformed(const CoefficientSet& coeffs,
                                             const NoiseFamily& family,
                                             const FlowState& state, double t,
                                             const ScalarField* h_level,
                                             int workers) {
  TransformedCoefficients tc;
  tc.t = t;
  TransformedPrincipal pr =
      transformed_coefficients(coeffs, family, state, t, workers);
  tc.alpha = std::move(pr.alpha);
  tc.alpha_lin = std::move(pr.alpha_lin);
  tc.degeneracy_mask = std::move(pr.degeneracy_mask);

  TransformedRhs rhs = transformed_rhs(coeffs, family, state, t, workers);
  tc.F0 = std::move(rhs.F0);
  tc.F_vec = std::move(rhs.F_vec);
  tc.G = std::move(rhs.G);

  if (h_level != nullptr) {
    auto fb = combined_rhs(tc.F0, tc.F_vec, tc.alpha, tc.alpha_lin, *h_level,
                           workers);
    tc.Fbar0 = std::move(fb.first);
    tc.Fbar_vec = std::move(fb.second);
  } else {
    tc.Fbar0 = tc.F0;
    tc.Fbar_vec = tc.F_vec;
  }
  return tc;
}

}  // namespace torusflow
