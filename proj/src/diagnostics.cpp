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

#include "torusflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "torusflow/errors.hpp"
#include "torusflow/interpolate.hpp"
#include "torusflow/parallel.hpp"

namespace torusflow {

namespace {

Mat2 sanitize_lanes(Mat2 m, int d) {
  if (d == 1) {
    m.m[0][1] = 0.0;
    m.m[1][0] = 0.0;
    m.m[1][1] = 1.0;
  }
  return m;
}

/* Grid inner product <f, g> = h^d sum_x f(x) g(x); sequential on purpose so
 * the value never depends on the worker count. */
double inner(const ScalarField& f, const ScalarField& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.a.size(); ++i) s += f.a[i] * g.a[i];
  return std::pow(f.grid.h, f.grid.dim) * s;
}

struct ScalePoint {
  double r = 0.0;
  double omega = 0.0;
};

HoelderEstimate fit_scale_points(const std::vector<ScalePoint>& pts) {
  if (pts.size() < 4)
    throw ConfigError(
        "hoelder estimate: fewer than 4 resolvable dyadic scales");

  HoelderEstimate est;
  est.r_min = pts.front().r;
  est.r_max = pts.front().r;
  for (const auto& p : pts) {
    est.r_min = std::min(est.r_min, p.r);
    est.r_max = std::max(est.r_max, p.r);
  }

  std::vector<ScalePoint> usable;
  for (const auto& p : pts)
    if (p.omega > 0.0) usable.push_back(p);

  if (usable.empty()) {
    // Vanishing modulus at every scale: flat field convention.
    est.exponent_hat = 1.0;
    est.seminorm_hat = 0.0;
    est.r_squared = 1.0;
    est.scales_used = 0;
    return est;
  }

  est.scales_used = static_cast<int>(usable.size());
  double lip = 0.0;
  for (const auto& p : usable) lip = std::max(lip, p.omega / p.r);

  if (usable.size() < 2) {
    est.exponent_hat = 1.0;
    est.seminorm_hat = lip;
    est.r_squared = 1.0;
    return est;
  }

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(usable.size());
  for (const auto& p : usable) {
    const double lx = std::log(p.r);
    const double ly = std::log(p.omega);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-30) {
    // All scales coincide; treat as a single-scale Lipschitz read.
    est.exponent_hat = 1.0;
    est.seminorm_hat = lip;
    est.r_squared = 1.0;
    return est;
  }
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;

  double ss_res = 0.0, ss_tot = 0.0;
  const double ymean = sy / n;
  for (const auto& p : usable) {
    const double lx = std::log(p.r);
    const double ly = std::log(p.omega);
    const double fit = slope * lx + intercept;
    ss_res += (ly - fit) * (ly - fit);
    ss_tot += (ly - ymean) * (ly - ymean);
  }
  est.r_squared = (ss_tot < 1e-30) ? 1.0 : 1.0 - ss_res / ss_tot;

  if (slope > 1.0) {
    // Smoother than Lipschitz at the resolved scales: clamp and report the
    // Lipschitz-type seminorm instead of the extrapolated intercept.
    est.exponent_hat = 1.0;
    est.seminorm_hat = lip;
  } else {
    est.exponent_hat = std::max(slope, 1e-12);
    est.seminorm_hat = std::exp(intercept);
  }
  return est;
}

}  // namespace

ParabolicityReport parabolicity_report(const CoefficientSet& coeffs,
                                       const NoiseFamily& family,
                                       const PeriodicGrid& grid,
                                       const std::vector<double>& time_samples) {
  if (!coeffs.a) throw ConfigError("parabolicity report: missing a coefficient");
  if (family.dim != grid.dim)
    throw ConfigError("parabolicity report: noise/grid dimension mismatch");

  std::vector<double> ts = time_samples;
  if (ts.empty()) ts.push_back(0.0);

  const int d = grid.dim;
  const std::size_t size = grid.size();

  double nu_hat = std::numeric_limits<double>::infinity();
  double sup_abs_a[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  double sup_b_row[2] = {0.0, 0.0};
  double sup_zero = 0.0;

  for (double t : ts) {
    for (std::size_t idx = 0; idx < size; ++idx) {
      const Vec2 x = grid.coord(idx);
      const Mat2 a_pt = sanitize_lanes(coeffs.a(t, x), d);

      Mat2 quad = a_pt;
      double row_sq[2] = {0.0, 0.0};
      for (int n = 0; n < family.num_modes; ++n) {
        const Vec2 bn = family.b(n, t, x);
        quad += -0.5 * outer(bn, bn);
        for (int i = 0; i < d; ++i) row_sq[i] += bn[i] * bn[i];
      }

      double lo = 0.0, hi = 0.0;
      sym_eigenvalues(quad, d, lo, hi);
      nu_hat = std::min(nu_hat, lo);

      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j)
          sup_abs_a[i][j] = std::max(sup_abs_a[i][j], std::abs(a_pt.m[i][j]));
        sup_b_row[i] = std::max(sup_b_row[i], std::sqrt(row_sq[i]));
      }

      double zero_sum = coeffs.a0 ? std::abs(coeffs.a0(t, x)) : 0.0;
      if (coeffs.a_lin) {
        const Vec2 al = coeffs.a_lin(t, x);
        for (int i = 0; i < d; ++i) zero_sum += std::abs(al[i]);
      }
      if (!coeffs.b0.empty()) {
        double b0_sq = 0.0;
        for (const auto& fn : coeffs.b0) {
          if (!fn) continue;
          const double v = fn(t, x);
          b0_sq += v * v;
        }
        zero_sum += std::sqrt(b0_sq);
      }
      sup_zero = std::max(sup_zero, zero_sum);
    }
  }

  double principal = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) principal += sup_abs_a[i][j];
    principal += sup_b_row[i];
  }

  ParabolicityReport report;
  report.nu_hat = nu_hat;
  report.M_hat = std::max(principal, sup_zero);
  report.nu_declared = coeffs.nu;
  report.M_declared = coeffs.M;
  report.pass =
      (nu_hat >= coeffs.nu - 1e-9) && (report.M_hat <= coeffs.M + 1e-9);
  return report;
}

ScalarField ellipticity_ratio_field(const MatrixField& alpha) {
  ScalarField out(alpha.grid);
  const int d = alpha.grid.dim;
  const std::size_t size = alpha.grid.size();
  for (std::size_t idx = 0; idx < size; ++idx) {
    const Mat2& mat = alpha.at(idx);
    double lo = 0.0, hi = 0.0;
    sym_eigenvalues(mat, d, lo, hi);
    if (d == 2) {
      // When the symmetrized matrix is positive definite, (tr - disc)/2
      // cancels catastrophically once the condition number nears 1/eps;
      // det/large is exact there and agrees with the small eigenvalue.
      const double s01 = 0.5 * (mat.m[0][1] + mat.m[1][0]);
      const double det_sym = mat.m[0][0] * mat.m[1][1] - s01 * s01;
      if (mat.m[0][0] + mat.m[1][1] > 0.0 && det_sym > 0.0 &&
          std::isfinite(hi) && hi > 0.0)
        lo = det_sym / hi;
    }
    const double a1 = std::abs(lo);
    const double a2 = std::abs(hi);
    const double small = std::min(a1, a2);
    const double large = std::max(a1, a2);
    if (!(small > 0.0) || !std::isfinite(large))
      out.a[idx] = std::numeric_limits<double>::infinity();
    else
      out.a[idx] = large / small;
  }
  return out;
}

double lambda_tail_probability(double k, double t, double delta_case) {
  if (!(t > 0.0)) throw ConfigError("lambda tail: time must be positive");
  if (!(delta_case > 0.0))
    throw ConfigError("lambda tail: diagonal diffusion value must be positive");
  if (k <= 1.0) return 1.0;  // the ratio never drops below 1
  // The ratio distribution does not depend on the (equal-diagonal) value of a.
  constexpr double kPi = 3.14159265358979323846;
  const double q = std::log(k) / (4.0 * kPi * std::sqrt(2.0 * t));
  return std::erfc(q / std::sqrt(2.0));
}

HoelderEstimate hoelder_estimate(const FieldSequence& u, bool parabolic) {
  if (u.fields.empty()) throw ConfigError("hoelder estimate: empty sequence");
  const PeriodicGrid grid = u.fields.front().grid;
  for (const auto& f : u.fields)
    if (!f.grid.same_layout(grid))
      throw ConfigError("hoelder estimate: inconsistent grids in sequence");

  std::vector<ScalePoint> pts;

  // Spatial dyadic ladder: separations s*h with s = 1, 2, 4, ... <= n/4.
  for (int s = 1; 4 * s <= grid.n; s *= 2) {
    double omega = 0.0;
    for (const auto& f : u.fields) {
      for (std::size_t idx = 0; idx < f.a.size(); ++idx) {
        for (int axis = 0; axis < grid.dim; ++axis) {
          const double diff =
              std::abs(f.a[grid.neighbor(idx, axis, s)] - f.a[idx]);
          omega = std::max(omega, diff);
        }
      }
    }
    pts.push_back({s * grid.h, omega});
  }

  // Temporal dyadic ladder over uniformly spaced stored levels. If the final
  // stored level breaks uniform spacing (window not divisible by the store
  // stride), it is ignored here.
  std::size_t m = u.count();
  if (m >= 3) {
    const int base = u.stored_levels[1] - u.stored_levels[0];
    std::size_t uniform = 2;
    while (uniform < m &&
           u.stored_levels[uniform] - u.stored_levels[uniform - 1] == base)
      ++uniform;
    m = uniform;
    if (base > 0 && m >= 3) {
      const double tau_unit = base * u.dt;
      for (std::size_t g = 1; 2 * g <= m - 1; g *= 2) {
        double omega = 0.0;
        for (std::size_t i = 0; i + g < m; ++i) {
          const ScalarField& f0 = u.fields[i];
          const ScalarField& f1 = u.fields[i + g];
          for (std::size_t idx = 0; idx < f0.a.size(); ++idx)
            omega = std::max(omega, std::abs(f1.a[idx] - f0.a[idx]));
        }
        const double tau = static_cast<double>(g) * tau_unit;
        pts.push_back({parabolic ? std::sqrt(tau) : tau, omega});
      }
    }
  }

  return fit_scale_points(pts);
}

HoelderEstimate hoelder_estimate_series(const std::vector<double>& series,
                                        double dt, bool parabolic_metric) {
  if (!(dt > 0.0)) throw ConfigError("hoelder series: dt must be positive");
  const std::size_t len = series.size();
  if (len < 2) throw ConfigError("hoelder series: need at least 2 samples");

  std::vector<ScalePoint> pts;
  for (std::size_t g = 1; 4 * g <= len - 1; g *= 2) {
    double omega = 0.0;
    for (std::size_t i = 0; i + g < len; ++i)
      omega = std::max(omega, std::abs(series[i + g] - series[i]));
    const double tau = static_cast<double>(g) * dt;
    pts.push_back({parabolic_metric ? std::sqrt(tau) : tau, omega});
  }
  return fit_scale_points(pts);
}

StoppingReport stopping_time_first_exceed(const FlowTrajectory& traj,
                                          double m) {
  if (!(m > 0.0)) throw ConfigError("stopping time: threshold must be positive");
  if (traj.states.empty())
    throw ConfigError("stopping time: empty trajectory");

  StoppingReport report;
  report.m = m;
  const int d = traj.states.front().displacement.grid.dim;
  for (const FlowState& s : traj.states) {
    double sup = 0.0;
    const std::size_t size = s.jacobian.size();
    for (std::size_t idx = 0; idx < size; ++idx) {
      const double v =
          op_norm(s.inv_jacobian.at(idx), d) + op_norm(s.jacobian.at(idx), d);
      sup = std::max(sup, v);
    }
    if (sup >= m) {
      report.tau = s.t;
      report.exceeded = true;
      return report;
    }
  }
  report.tau = traj.states.back().t;
  report.exceeded = false;
  return report;
}

ItoWentzellAccumulator::ItoWentzellAccumulator(
    const NoiseFamily& family, const CoefficientSet& coeffs,
    const PeriodicGrid& grid, std::function<double(const Vec2&)> phi,
    double dt, int workers)
    : family_(family),
      coeffs_(coeffs),
      grid_(grid),
      phi_(std::move(phi)),
      dt_(dt),
      workers_(workers) {
  if (!phi_) throw ConfigError("identity residual: missing test function");
  if (!(dt_ > 0.0))
    throw ConfigError("identity residual: dt must be positive");
  if (!coeffs_.a) throw ConfigError("identity residual: missing a coefficient");
  if (family_.dim != grid_.dim)
    throw ConfigError("identity residual: noise/grid dimension mismatch");
  const std::size_t modes = static_cast<std::size_t>(family_.num_modes);
  if (!coeffs_.b0.empty() && coeffs_.b0.size() != modes)
    throw ConfigError("identity residual: b0 count != noise mode count");
  if (!coeffs_.g.empty() && coeffs_.g.size() != modes)
    throw ConfigError("identity residual: g count != noise mode count");
}

void ItoWentzellAccumulator::add_level(const FlowState& state,
                                       const InverseFlowField& inv,
                                       const ScalarField& u,
                                       const double* dW_or_null) {
  if (!u.grid.same_layout(grid_))
    throw ConfigError("identity residual: field grid mismatch");
  const int d = grid_.dim;
  const std::size_t size = grid_.size();
  const double t = state.t;

  // Moved test function phibar(y) = phi(Psi(y)) * det(psi at Psi(y)).
  ScalarField phibar(grid_);
  parallel_for(size, workers_, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const Vec2 y = grid_.coord(idx);
      const Vec2 p = y + inv.inv_displacement.at(idx);
      const Mat2 psi_at = interpolate(state.inv_jacobian, p);
      phibar.a[idx] = phi_(p) * det(psi_at, d);
    }
  });

  const double inner_now = inner(u, phibar);
  if (levels_ == 0) first_inner_ = inner_now;
  last_inner_ = inner_now;

  if (dW_or_null != nullptr) {
    const double* dW = dW_or_null;
    const VectorField gu = gradient_central(u, workers_);
    const VectorField gphi = gradient_central(phibar, workers_);
    const double cell = std::pow(grid_.h, d);

    // Deterministic-part pairing and the drift-transport correction.
    double t_det = 0.0;
    VectorField mu_phibar(grid_);
    for (std::size_t idx = 0; idx < size; ++idx) {
      const Vec2 x = grid_.coord(idx);
      const Mat2 a_pt = sanitize_lanes(coeffs_.a(t, x), d);
      Vec2 flux = matvec(a_pt, gu.at(idx));
      if (coeffs_.f_vec) flux += coeffs_.f_vec(t, x);
      double low = 0.0;
      if (coeffs_.a_lin) low += dot(coeffs_.a_lin(t, x), gu.at(idx));
      if (coeffs_.a0) low += coeffs_.a0(t, x) * u.a[idx];
      if (coeffs_.f0) low += coeffs_.f0(t, x);
      t_det += -dot(flux, gphi.at(idx)) + low * phibar.a[idx];

      Vec2 mu = stratonovich_drift(family_, t, x);
      mu_phibar.set(idx, phibar.a[idx] * mu);
    }
    t_det *= cell;

    const ScalarField div_mu_phibar = divergence_central(mu_phibar, workers_);
    const double t_drift = -inner(u, div_mu_phibar);

    double t_noise_dw = 0.0;   // It\^o terms, their own dW factors included
    double t_noise_dt = 0.0;   // remaining dt-weighted noise corrections
    ScalarField gtot(grid_);
    VectorField sig_phibar(grid_);
    VectorField wfield(grid_);
    std::vector<double> sig_cache(size * 2, 0.0);
    for (int n = 0; n < family_.num_modes; ++n) {
      const bool has_b0 = !coeffs_.b0.empty() && coeffs_.b0[n];
      const bool has_gn =
          static_cast<std::size_t>(n) < coeffs_.g.size() && coeffs_.g[n];
      for (std::size_t idx = 0; idx < size; ++idx) {
        const Vec2 x = grid_.coord(idx);
        const Vec2 bn = family_.b(n, t, x);
        double val = dot(bn, gu.at(idx));
        if (has_b0) val += coeffs_.b0[n](t, x) * u.a[idx];
        if (has_gn) val += coeffs_.g[n](t, x);
        gtot.a[idx] = val;
        const Vec2 sig = -1.0 * bn;
        sig_cache[idx * 2] = sig[0];
        sig_cache[idx * 2 + 1] = sig[1];
        sig_phibar.set(idx, phibar.a[idx] * sig);
      }
      const ScalarField div_sig_phibar =
          divergence_central(sig_phibar, workers_);

      t_noise_dw += dW[n] * (inner(gtot, phibar) - inner(u, div_sig_phibar));
      t_noise_dt += -inner(gtot, div_sig_phibar);

      for (int i = 0; i < d; ++i) {
        for (std::size_t idx = 0; idx < size; ++idx)
          wfield.set(idx, sig_cache[idx * 2 + i] * sig_phibar.at(idx));
        const ScalarField div_w = divergence_central(wfield, workers_);
        double pair = 0.0;
        for (std::size_t idx = 0; idx < size; ++idx)
          pair += gu.at(idx)[i] * div_w.a[idx];
        t_noise_dt += -0.5 * cell * pair;
      }
    }

    rhs_sum_ += dt_ * (t_det + t_drift + t_noise_dt) + t_noise_dw;
  }

  ++levels_;
}

double ItoWentzellAccumulator::residual() const {
  if (levels_ < 2)
    throw ConfigError("identity residual: need at least two levels");
  return std::abs(last_inner_ - first_inner_ - rhs_sum_);
}

double ito_wentzell_residual(const FieldSequence& u, const FlowTrajectory& traj,
                             const BrownianPath& path,
                             const NoiseFamily& family,
                             const CoefficientSet& coeffs,
                             const std::function<double(const Vec2&)>& phi,
                             double dt, int start_step) {
  const int K = traj.num_steps;
  if (K < 1) throw ConfigError("identity residual: trajectory has no steps");
  if (static_cast<int>(traj.states.size()) != K + 1 ||
      static_cast<int>(u.count()) != K + 1)
    throw ConfigError(
        "identity residual: every level 0..K must be stored in both the "
        "trajectory and the solution sequence");
  for (int k = 0; k <= K; ++k)
    if (traj.stored_levels[k] != k || u.stored_levels[k] != k)
      throw ConfigError("identity residual: levels must be 0..K contiguous");
  if (std::abs(traj.dt - dt) > 1e-12 * std::max(1.0, std::abs(dt)) ||
      std::abs(u.dt - dt) > 1e-12 * std::max(1.0, std::abs(dt)))
    throw ConfigError("identity residual: dt mismatch");
  if (start_step < 0 || start_step + K > path.num_steps)
    throw ConfigError("identity residual: path window out of range");

  const PeriodicGrid grid = u.fields.front().grid;
  ItoWentzellAccumulator acc(family, coeffs, grid, phi, dt, 1);

  InverseFlowField inv;
  for (int k = 0; k <= K; ++k) {
    const FlowState& st = traj.state_at(k);
    inv = invert_flow_field(st, k == 0 ? nullptr : &inv, 1e-10, 200, 1);
    acc.add_level(st, inv, u.at_level(k),
                  k < K ? path.level(start_step + k) : nullptr);
  }
  return acc.residual();
}

double empirical_kc_constant(const std::vector<std::vector<double>>& samples,
                             const std::vector<double>& dist,
                             std::size_t num_points, double p, double alpha) {
  if (samples.size() < 100)
    throw ConfigError("moment constant: need at least 100 samples");
  if (!(p > 0.0)) throw ConfigError("moment constant: p must be positive");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw ConfigError("moment constant: alpha must lie in (0, 1]");
  if (num_points == 0)
    throw ConfigError("moment constant: need at least one point");
  if (dist.size() != num_points * num_points)
    throw ConfigError("moment constant: distance matrix size mismatch");
  for (const auto& s : samples)
    if (s.size() != num_points)
      throw ConfigError("moment constant: sample size mismatch");

  const double inv_s = 1.0 / static_cast<double>(samples.size());

  double term_point = 0.0;
  for (std::size_t i = 0; i < num_points; ++i) {
    double acc = 0.0;
    for (const auto& s : samples) acc += std::pow(std::abs(s[i]), p);
    term_point = std::max(term_point, std::pow(acc * inv_s, 1.0 / p));
  }

  double term_pair = 0.0;
  for (std::size_t i = 0; i < num_points; ++i) {
    for (std::size_t j = i + 1; j < num_points; ++j) {
      const double dm = dist[i * num_points + j];
      if (!(dm > 0.0)) continue;
      double acc = 0.0;
      for (const auto& s : samples)
        acc += std::pow(std::abs(s[i] - s[j]), alpha * p);
      const double moment = std::pow(acc * inv_s, 1.0 / p);
      term_pair = std::max(term_pair, moment / std::pow(dm, alpha));
    }
  }

  return term_point + term_pair;
}

}  // namespace torusflow
