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

#ifndef TORUSFLOW_ERRORS_HPP
#define TORUSFLOW_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace torusflow {

/** \brief Base class of all torusflow errors. */
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what_arg) : std::runtime_error(what_arg) {}
  /** Short machine-readable kind tag used in run manifests. */
  virtual const char* kind() const noexcept { return "error"; }
};

/** \brief Invalid configuration (schema, ranges, CFL guard, declarations). */
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
  const char* kind() const noexcept override { return "config"; }
};

/** \brief Flow map lost orientation or finiteness at a node. */
class FlowDegeneracyError : public Error {
 public:
  FlowDegeneracyError(const std::string& msg, std::size_t node, double time)
      : Error(msg), node_(node), time_(time) {}
  const char* kind() const noexcept override { return "flow_degeneracy"; }
  std::size_t node() const noexcept { return node_; }
  double time() const noexcept { return time_; }

 private:
  std::size_t node_;
  double time_;
};

/** \brief Flow inversion did not reach tolerance within max_iter. */
class InversionError : public Error {
 public:
  InversionError(const std::string& msg, std::size_t node, double residual)
      : Error(msg), node_(node), residual_(residual) {}
  const char* kind() const noexcept override { return "inversion"; }
  std::size_t node() const noexcept { return node_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t node_;
  double residual_;
};

/** \brief Coefficient transformation produced non-finite or degenerate data. */
class TransformError : public Error {
 public:
  TransformError(const std::string& msg, std::size_t node, std::size_t count = 1)
      : Error(msg), node_(node), count_(count) {}
  const char* kind() const noexcept override { return "transform"; }
  std::size_t node() const noexcept { return node_; }
  std::size_t count() const noexcept { return count_; }

 private:
  std::size_t node_;
  std::size_t count_;
};

/** \brief Linear system solve failed to converge (or broke down). */
class LinearSolveError : public Error {
 public:
  LinearSolveError(const std::string& msg, double residual, int iterations)
      : Error(msg), residual_(residual), iterations_(iterations) {}
  const char* kind() const noexcept override { return "linear_solve"; }
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/** \brief Solution sup-norm exceeded the configured blow-up guard. */
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& msg, double time, double sup)
      : Error(msg), time_(time), sup_(sup) {}
  const char* kind() const noexcept override { return "blow_up"; }
  double time() const noexcept { return time_; }
  double sup() const noexcept { return sup_; }

 private:
  double time_;
  double sup_;
};

/** \brief Parabolicity (ellipticity) violated by realized coefficients. */
class ParabolicityError : public Error {
 public:
  ParabolicityError(const std::string& msg, double realized, double declared)
      : Error(msg), realized_(realized), declared_(declared) {}
  const char* kind() const noexcept override { return "parabolicity"; }
  double realized() const noexcept { return realized_; }
  double declared() const noexcept { return declared_; }

 private:
  double realized_;
  double declared_;
};

/** \brief File I/O failure, carrying the offending path in the message. */
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace torusflow

#endif  // TORUSFLOW_ERRORS_HPP
