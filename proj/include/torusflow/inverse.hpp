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

#ifndef TORUSFLOW_INVERSE_HPP
#define TORUSFLOW_INVERSE_HPP

#include "torusflow/field.hpp"
#include "torusflow/flow.hpp"

namespace torusflow {

/** \brief Inverse flow map sampled at nodes: Psi_t(y) = y + inv_displacement(y). */
struct InverseFlowField {
  double t = 0.0;
  DisplacementField inv_displacement;
  /** max over nodes of the achieved |xi_t(Psi_t(y)) - y|. */
  double max_residual = 0.0;
};

/**
 * \brief Solve xi_t(x) = y for x, starting from x0.
 *
 * Newton steps x <- x - psi_t(x) (xi_t(x) - y) with interpolated xi and psi;
 * when a Newton step would increase the residual the plain fixed-point map
 * x <- x - (xi_t(x) - y) is used instead. Residuals are unwrapped (real-space)
 * so the returned preimage tracks the branch of the initial guess; any branch
 * is equivalent modulo full periods. Throws InversionError when max_iter
 * steps fail to bring |xi_t(x) - y| below tol.
 */
Vec2 invert_flow_at(const FlowState& state, const Vec2& y, Vec2 x0,
                    double tol = 1e-10, int max_iter = 200);

/**
 * \brief Invert the flow at every grid node with temporal warm starts.
 *
 * warm, when given, supplies the previous level's inverse displacement as the
 * per-node initial guess (the identity is used at/near t=0 when warm is
 * null). Per-node failures carry the offending node index.
 */
InverseFlowField invert_flow_field(const FlowState& state,
                                   const InverseFlowField* warm = nullptr,
                                   double tol = 1e-10, int max_iter = 200,
                                   int workers = 1);

}  // namespace torusflow

#endif  // TORUSFLOW_INVERSE_HPP
