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

#ifndef TORUSFLOW_SCENARIO_HPP
#define TORUSFLOW_SCENARIO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "torusflow/field.hpp"
#include "torusflow/noise_family.hpp"
#include "torusflow/pde.hpp"
#include "torusflow/transform.hpp"

namespace torusflow {

/** \brief Diffusion-matrix specification. */
struct DiffusionSpec {
  std::string kind = "constant";  // constant | diagonal | checkerboard | closure
  double value = 1.0;             // constant: a = value * Id
  double diag0 = 1.0;             // diagonal entries
  double diag1 = 1.0;
  std::uint64_t cb_seed = 1;      // checkerboard: seeded piecewise-constant
  int cb_cells = 8;               //   cells per axis
  double cb_low = 0.5;            //   value range [low, high]
  double cb_high = 1.5;
  std::string closure_name = "identity";  // closure: registry name
};

/** \brief One cosine/sine mode of the initial data. */
struct FourierMode {
  int k0 = 1;
  int k1 = 0;
  double amplitude = 1.0;
  double phase = 0.0;
  std::string type = "cos";  // cos | sin
};

struct InitialDataSpec {
  std::string kind = "fourier";  // constant | fourier | random_hoelder
  double value = 0.0;            // constant value
  std::vector<FourierMode> modes;
  double gamma0 = 0.5;  // random_hoelder: target regularity
  std::uint64_t seed = 1;
  int max_mode = 32;
};

/** \brief Scalar lower-order/forcing term specification. */
struct ScalarTermSpec {
  std::string kind = "none";  // none | constant | sin
  double value = 0.0;         // constant value or sine amplitude
  int wave = 1;               // sine wave number
  int axis = 0;               // sine axis
};

/** \brief Vector term specification (drift a^i, divergence forcing f^i). */
struct VectorTermSpec {
  std::string kind = "none";  // none | constant
  double v0 = 0.0;
  double v1 = 0.0;
};

/** \brief Value-dependent diffusion for the quasilinear scenario. */
struct QuasilinearSpec {
  std::string name = "inverse_quadratic";  // A = (base + gain/(1+y^2)) Id
  double base = 0.6;
  double gain = 0.5;
};

struct LambdaTailSpec {
  bool enabled = false;
  double t = 0.5;                  // probe time; must land on a stored level
  std::vector<double> thresholds;  // tail thresholds k
};

struct HoelderSpec {
  bool enabled = false;
  bool parabolic = true;
};

struct StoppingSpec {
  bool enabled = false;
  double m = 5.0;
};

struct IdentityResidualSpec {
  bool enabled = false;  // requires method direct|both and store_every == 1
};

struct MaxPrincipleSpec {
  bool enabled = false;  // meaningful for unforced scenarios
};

/**
 * \brief A fully materialized simulation scenario. parse_config fills every
 * default (per-scenario presets first, then document overrides) and
 * validates the result, including the declared-parabolicity check on the
 * realized grid.
 */
struct ScenarioConfig {
  std::string scenario = "heat";  // heat | constant_noise | sincos2d |
                                  // axis_commuting | rough_a | quasilinear |
                                  // custom
  int dim = 1;
  int n = 128;
  double T = 0.1;
  double dt = 1e-4;
  double theta = 1.0;
  int store_every = 1;

  std::string noise_name = "zero";
  BuiltinNoiseParams noise_params;
  int noise_modes = 0;  // resolved mode count of the family

  DiffusionSpec a_spec;
  double nu = 0.0;  // declared; <= 0 in the document means "use realized"
  double M = 0.0;   // declared; <= 0 in the document means "use realized"
  VectorTermSpec a_lin_spec;
  ScalarTermSpec a0_spec;
  ScalarTermSpec b0_spec;
  ScalarTermSpec f0_spec;
  VectorTermSpec f_vec_spec;
  ScalarTermSpec g_spec;

  QuasilinearSpec quasilinear;

  InitialDataSpec initial;

  /** flow | direct | both | flow_only | quasilinear. */
  std::string method = "flow";

  int paths = 1;
  std::uint64_t master_seed = 1;
  /** Advisory concurrency hint; 0 = auto. Never affects output bytes. */
  int workers = 0;
  bool fail_fast = false;

  double lin_tol = 1e-9;
  int max_lin_iter = 2000;
  double cfl_ratio = 0.5;
  double blowup_sup = 1e6;
  double inv_tol = 1e-10;

  LambdaTailSpec lambda_tail;
  HoelderSpec hoelder;
  StoppingSpec stopping;
  IdentityResidualSpec identity_residual;
  MaxPrincipleSpec max_principle;
  int snapshot_paths = 1;
  std::vector<double> parabolicity_times;  // empty = {0}

  std::string out_dir = "out";

  // Filled during validation.
  double nu_hat = 0.0;
  double M_hat = 0.0;
  int num_steps = 0;  // K = T/dt
};

PeriodicGrid make_grid(const ScenarioConfig& cfg);
NoiseFamily make_noise(const ScenarioConfig& cfg);
/** Coefficient closures; for the quasilinear scenario `a` is frozen at u0. */
CoefficientSet make_coefficients(const ScenarioConfig& cfg);
QuasilinearFn make_quasilinear_fn(const ScenarioConfig& cfg);
ScalarField make_initial_data(const ScenarioConfig& cfg,
                              const PeriodicGrid& grid);

/** \brief Parse + validate a JSON scenario document. */
ScenarioConfig parse_config(const std::string& text);
/** \brief Parse + validate the JSON document in a file. */
ScenarioConfig parse_config_file(const std::string& path);

/**
 * \brief Canonical JSON echo of a validated config, defaults materialized.
 * The concurrency hint is omitted: it must never influence output bytes.
 */
std::string echo_config(const ScenarioConfig& cfg);
/** \brief FNV-1a 64-bit hash. */
std::uint64_t fnv1a64(const std::string& bytes);
/** \brief Hash of the canonical echo, as 0x-prefixed hex. */
std::string config_hash_hex(const ScenarioConfig& cfg);

/** \brief Per-path outcome; diagnostics are NaN when not applicable. */
struct PathRecord {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error_kind;
  std::string error_msg;

  double final_min = 0.0, final_max = 0.0, final_l2 = 0.0;
  double sup_distortion_final = 0.0;
  double inv_residual_max = 0.0;
  double lambda_value = 0.0;
  double tau = 0.0;
  bool tau_exceeded = false;
  double hoelder_exponent = 0.0;
  double hoelder_seminorm = 0.0;
  double max_principle_excess = 0.0;
  double cross_rel_gap = 0.0;
  double identity_residual = 0.0;
};

/** \brief One stored-level row of the probe path's time series. */
struct SeriesRow {
  int level = 0;
  double t = 0.0;
  double min_u = 0.0, max_u = 0.0, l2_u = 0.0;  // NaN without a PDE stage
  double sup_distortion = 0.0;                  // NaN for the direct method
  double h_sup = 0.0;                           // NaN without a g-split
};

struct SnapshotEntry {
  std::string quantity;  // e.g. "u_final"
  int path_index = 0;
  double t = 0.0;
  int dim = 1;
  int n = 0;
  std::vector<double> data;
};

struct LambdaAggregate {
  bool enabled = false;
  double t = 0.0;      // snapped probe time
  double delta = 1.0;  // constant diffusion value of the probe scenario
  std::vector<double> thresholds;
  std::vector<double> frequencies;
  std::vector<double> closed_form;
  std::vector<double> binomial_se;
  int samples = 0;
};

struct HoelderAggregate {
  bool enabled = false;
  std::vector<double> edges;  // histogram bin edges on [0, 1]
  std::vector<int> counts;
  double mean = 0.0, min = 0.0, max = 0.0;
  int samples = 0;
};

struct StoppingAggregate {
  bool enabled = false;
  double min = 0.0, mean = 0.0, max = 0.0;
  int exceed_count = 0;
  int samples = 0;
};

struct MaxPrincipleAggregate {
  bool enabled = false;
  int violations = 0;
  double max_excess = 0.0;
  int samples = 0;
};

struct CrossAggregate {
  bool enabled = false;
  double mean_gap = 0.0, max_gap = 0.0;
  int samples = 0;
};

struct RunSummary {
  ScenarioConfig config;
  std::string echo_json;
  std::string config_hash;
  std::vector<PathRecord> records;
  int failed = 0;
  std::vector<SeriesRow> series;  // stored-level series of path 0
  std::vector<SnapshotEntry> snapshots;
  LambdaAggregate lambda;
  HoelderAggregate hoelder;
  StoppingAggregate stopping;
  MaxPrincipleAggregate max_principle;
  CrossAggregate cross;
};

/**
 * \brief Execute the Monte Carlo scenario: per path, derive the seed, sample
 * increments, run the configured pipeline(s), and collect diagnostics; then
 * aggregate sequentially. Identical config + master seed give bit-identical
 * summaries regardless of worker count. Per-path errors are recorded and
 * skipped unless fail_fast is set, in which case the run throws.
 */
RunSummary run_scenario(const ScenarioConfig& cfg);

/**
 * \brief Serialize a run: config_echo.json, manifest.json, series.csv (+
 * schema sidecar), and per-path field snapshots (flat little-endian f64 +
 * JSON sidecar). Throws IoError with the offending path on failure.
 */
void write_outputs(const RunSummary& summary, const std::string& directory);

/** \brief Read back a flat little-endian f64 snapshot. */
std::vector<double> read_snapshot_f64(const std::string& file);

/**
 * \brief Recompute the aggregate block of an existing output directory from
 * its per-path records and rewrite the manifest; returns a human summary.
 */
std::string reaggregate_directory(const std::string& directory);

/** \brief Human-readable multi-line summary of a run. */
std::string summarize(const RunSummary& summary);

}  // namespace torusflow

#endif  // TORUSFLOW_SCENARIO_HPP
