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

#ifndef TORUSFLOW_DIAGNOSTICS_HPP
#define TORUSFLOW_DIAGNOSTICS_HPP

#include <cstddef>
#include <functional>
#include <vector>

#include "torusflow/field.hpp"
#include "torusflow/flow.hpp"
#include "torusflow/inverse.hpp"
#include "torusflow/pde.hpp"
#include "torusflow/transform.hpp"

namespace torusflow {

/** \brief Realized parabolicity/boundedness constants vs the declared ones. */
struct ParabolicityReport {
  double nu_hat = 0.0;  // min eigenvalue of sym(a - 1/2 sum b b^T) over nodes/times
  double M_hat = 0.0;   // realized sup-norm boundedness functional
  double nu_declared = 0.0;
  double M_declared = 0.0;
  bool pass = false;  // nu_hat >= nu - 1e-9 and M_hat <= M + 1e-9
};

/**
 * \brief Evaluate the realized (nu, M) on the grid at the given time samples
 * (empty list means {0}). M_hat is the larger of
 *   sum_ij sup|a^ij| + sum_i sup ||(b^i_n)_n||_l2   and
 *   sup( |a0| + sum_i |a_lin^i| + ||(b0_n)_n||_l2 ).
 */
ParabolicityReport parabolicity_report(const CoefficientSet& coeffs,
                                       const NoiseFamily& family,
                                       const PeriodicGrid& grid,
                                       const std::vector<double>& time_samples);

/**
 * \brief Node-wise ratio of largest to smallest absolute eigenvalue of
 * sym(alpha); infinity marks singular nodes.
 */
ScalarField ellipticity_ratio_field(const MatrixField& alpha);

/**
 * \brief Closed-form tail of the ellipticity ratio for the equal-diagonal
 * constant-a case: P(ratio > k) = 2 (1 - Phi(ln k / (4 pi sqrt(2 t)))).
 * Thresholds k <= 1 give probability 1 (the ratio is never below 1).
 */
double lambda_tail_probability(double k, double t, double const_a_value);

/** \brief Fitted modulus-of-continuity data. */
struct HoelderEstimate {
  double exponent_hat = 1.0;  // in (0, 1]
  double seminorm_hat = 0.0;  // >= 0
  double r_squared = 1.0;     // fit quality
  int scales_used = 0;
  double r_min = 0.0;
  double r_max = 0.0;
};

/**
 * \brief Estimate (exponent, seminorm) of a space-time field from maximal
 * increments at dyadic separations: spatial separations s*h (s dyadic,
 * s <= n/4) and, when parabolic is set and at least two uniformly spaced
 * levels are stored, temporal separations measured as sqrt(tau). The
 * exponent/seminorm come from a least-squares fit of log omega vs log r;
 * an identically vanishing modulus returns (1, 0) by convention.
 */
HoelderEstimate hoelder_estimate(const FieldSequence& u, bool parabolic);

/**
 * \brief Same estimator for a plain time series (non-periodic pairing);
 * separations g*dt, measured as sqrt(g*dt) when parabolic_metric is set.
 */
HoelderEstimate hoelder_estimate_series(const std::vector<double>& series,
                                        double dt,
                                        bool parabolic_metric = false);

/** \brief First stored time at which the distortion functional exceeds m. */
struct StoppingReport {
  double tau = 0.0;
  double m = 0.0;
  bool exceeded = false;  // false means tau == final stored time
};

/**
 * \brief First stored level with sup over nodes of
 * (op-norm(psi) + op-norm(D xi)) >= m; tau is that level's time, or the
 * final stored time when the threshold is never reached.
 */
StoppingReport stopping_time_first_exceed(const FlowTrajectory& traj, double m);

/**
 * \brief Streaming accumulator for the tested composition identity.
 *
 * Feed consecutive levels k = 0..K of one path: the flow state, the inverse
 * field, the direct solution at that level, and the Brownian increments of
 * the step starting at that level (null for the final level). The moved test
 * function is phibar(y) = phi(Psi(y)) det(psi(Psi(y))); residual() returns
 * |<u^K, phibar_K> - <u^0, phibar_0> - RHS| where RHS collects the
 * left-endpoint time/It\^o sums of the weak-form identity.
 */
class ItoWentzellAccumulator {
 public:
  ItoWentzellAccumulator(const NoiseFamily& family,
                         const CoefficientSet& coeffs,
                         const PeriodicGrid& grid,
                         std::function<double(const Vec2&)> phi, double dt,
                         int workers = 1);

  void add_level(const FlowState& state, const InverseFlowField& inv,
                 const ScalarField& u, const double* dW_or_null);

  int levels_added() const { return levels_; }
  double residual() const;

 private:
  NoiseFamily family_;
  CoefficientSet coeffs_;
  PeriodicGrid grid_;
  std::function<double(const Vec2&)> phi_;
  double dt_;
  int workers_;
  int levels_ = 0;
  double first_inner_ = 0.0;
  double last_inner_ = 0.0;
  double rhs_sum_ = 0.0;
};

/**
 * \brief Batch form of the identity residual: u and traj must store every
 * level 0..K of the window; increments come from path levels
 * start_step..start_step+K-1.
 */
double ito_wentzell_residual(const FieldSequence& u, const FlowTrajectory& traj,
                             const BrownianPath& path,
                             const NoiseFamily& family,
                             const CoefficientSet& coeffs,
                             const std::function<double(const Vec2&)>& phi,
                             double dt, int start_step = 0);

/**
 * \brief Empirical moment constant over a sampled random field: samples[s]
 * holds the field values of sample s at num_points metric points, dist is
 * the row-major num_points x num_points distance matrix. Returns
 *   max_i (mean_s |Z_s(i)|^p)^{1/p}
 *   + max_{i != j} (mean_s |Z_s(i) - Z_s(j)|^{alpha p})^{1/p} / d(i,j)^alpha.
 */
double empirical_kc_constant(const std::vector<std::vector<double>>& samples,
                             const std::vector<double>& dist,
                             std::size_t num_points, double p, double alpha);

}  // namespace torusflow

#endif  // TORUSFLOW_DIAGNOSTICS_HPP
