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

#ifndef TORUSFLOW_LINSOLVE_HPP
#define TORUSFLOW_LINSOLVE_HPP

#include <functional>
#include <vector>

namespace torusflow {

struct LinearSolveStats {
  int iterations = 0;
  double rel_residual = 0.0;
};

/**
 * \brief Direct solve of a cyclic tridiagonal system (Thomas elimination
 * plus a rank-one Sherman-Morrison correction for the periodic corners).
 *
 * Row i reads sub[i]*x[i-1] + diag[i]*x[i] + sup[i]*x[i+1] = rhs[i] with
 * wrap-around neighbors: sub[0] multiplies x[n-1] and sup[n-1] multiplies
 * x[0]. Intended for strictly diagonally dominant systems (no pivoting).
 */
std::vector<double> solve_periodic_tridiagonal(const std::vector<double>& sub,
                                               const std::vector<double>& diag,
                                               const std::vector<double>& sup,
                                               const std::vector<double>& rhs);

using LinearOperator =
    std::function<void(const std::vector<double>&, std::vector<double>&)>;

/**
 * \brief Jacobi-preconditioned BiCGSTAB, matrix-free.
 *
 * Iterates until ||b - Ax||_2 <= tol * ||b||_2, starting from the x passed
 * in (warm start). inv_diag holds the reciprocal diagonal of A. Throws
 * LinearSolveError on breakdown or when max_iter is exhausted.
 */
LinearSolveStats bicgstab(const LinearOperator& apply,
                          const std::vector<double>& inv_diag,
                          const std::vector<double>& rhs,
                          std::vector<double>& x, double tol, int max_iter);

}  // namespace torusflow

#endif  // TORUSFLOW_LINSOLVE_HPP
