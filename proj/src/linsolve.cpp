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

#include "torusflow/linsolve.hpp"

#include <cmath>
#include <cstddef>
#include <string>

#include "torusflow/errors.hpp"

namespace torusflow {

namespace {

// Plain Thomas elimination for a strictly tridiagonal system (no wrap).
// diag is copied because the sweep modifies it.
std::vector<double> thomas(const std::vector<double>& sub,
                           std::vector<double> diag,
                           const std::vector<double>& sup,
                           std::vector<double> rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = sub[i] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
  }
  return x;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

std::vector<double> solve_periodic_tridiagonal(const std::vector<double>& sub,
                                               const std::vector<double>& diag,
                                               const std::vector<double>& sup,
                                               const std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  if (n < 3 || sub.size() != n || sup.size() != n || rhs.size() != n) {
    throw ConfigError("solve_periodic_tridiagonal: need matching sizes >= 3");
  }
  const double beta = sub[0];      // corner entry (0, n-1)
  const double alpha = sup[n - 1]; // corner entry (n-1, 0)
  const double gamma = -diag[0];

  std::vector<double> diag_mod = diag;
  diag_mod[0] -= gamma;
  diag_mod[n - 1] -= alpha * beta / gamma;

  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = alpha;

  const std::vector<double> y = thomas(sub, diag_mod, sup, rhs);
  const std::vector<double> z = thomas(sub, diag_mod, sup, u);

  const double vy = y[0] + (beta / gamma) * y[n - 1];
  const double vz = z[0] + (beta / gamma) * z[n - 1];
  const double factor = vy / (1.0 + vz);

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = y[i] - factor * z[i];
  return x;
}

LinearSolveStats bicgstab(const LinearOperator& apply,
                          const std::vector<double>& inv_diag,
                          const std::vector<double>& rhs,
                          std::vector<double>& x, double tol, int max_iter) {
  const std::size_t n = rhs.size();
  if (x.size() != n || inv_diag.size() != n) {
    throw ConfigError("bicgstab: size mismatch");
  }
  const double bnorm = norm2(rhs);
  if (bnorm == 0.0) {
    x.assign(n, 0.0);
    return LinearSolveStats{0, 0.0};
  }
  const double target = tol * bnorm;

  std::vector<double> r(n), rhat(n), p(n, 0.0), v(n, 0.0);
  std::vector<double> phat(n), s(n), shat(n), tvec(n);

  apply(x, r);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - r[i];
  rhat = r;

  double rho = 1.0, a = 1.0, omega = 1.0;
  double rnorm = norm2(r);
  if (rnorm <= target) {
    return LinearSolveStats{0, rnorm / bnorm};
  }

  for (int it = 1; it <= max_iter; ++it) {
    const double rho1 = dot(rhat, r);
    if (std::abs(rho1) < 1e-300) {
      throw LinearSolveError(
          "bicgstab breakdown (rho) at iteration " + std::to_string(it),
          rnorm / bnorm, it);
    }
    const double betac = (rho1 / rho) * (a / omega);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = r[i] + betac * (p[i] - omega * v[i]);
    }
    for (std::size_t i = 0; i < n; ++i) phat[i] = inv_diag[i] * p[i];
    apply(phat, v);
    const double rhat_v = dot(rhat, v);
    if (std::abs(rhat_v) < 1e-300) {
      throw LinearSolveError(
          "bicgstab breakdown (rhat.v) at iteration " + std::to_string(it),
          rnorm / bnorm, it);
    }
    a = rho1 / rhat_v;
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - a * v[i];
    const double snorm = norm2(s);
    if (snorm <= target) {
      for (std::size_t i = 0; i < n; ++i) x[i] += a * phat[i];
      return LinearSolveStats{it, snorm / bnorm};
    }
    for (std::size_t i = 0; i < n; ++i) shat[i] = inv_diag[i] * s[i];
    apply(shat, tvec);
    const double tt = dot(tvec, tvec);
    if (tt < 1e-300) {
      throw LinearSolveError(
          "bicgstab breakdown (t.t) at iteration " + std::to_string(it),
          snorm / bnorm, it);
    }
    omega = dot(tvec, s) / tt;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += a * phat[i] + omega * shat[i];
      r[i] = s[i] - omega * tvec[i];
    }
    rnorm = norm2(r);
    if (rnorm <= target) {
      return LinearSolveStats{it, rnorm / bnorm};
    }
    if (std::abs(omega) < 1e-300) {
      throw LinearSolveError(
          "bicgstab breakdown (omega) at iteration " + std::to_string(it),
          rnorm / bnorm, it);
    }
    rho = rho1;
  }
  throw LinearSolveError("bicgstab failed to converge in " +
                             std::to_string(max_iter) + " iterations",
                         rnorm / bnorm, max_iter);
}

}  // namespace torusflow
