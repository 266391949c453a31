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

#include "torusflow/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <thread>
#include <utility>

#include "json.hpp"
#include "torusflow/brownian.hpp"
#include "torusflow/diagnostics.hpp"
#include "torusflow/errors.hpp"
#include "torusflow/flow.hpp"
#include "torusflow/interpolate.hpp"
#include "torusflow/inverse.hpp"
#include "torusflow/parallel.hpp"
#include "torusflow/rng.hpp"

namespace torusflow {

namespace {

using ojson = nlohmann::ordered_json;

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/* ------------------------------------------------------------------ */
/* JSON access helpers with path-to-field error messages.             */

[[noreturn]] void fail_field(const std::string& path, const std::string& why) {
  throw ConfigError("config: " + path + ": " + why);
}

const ojson* child(const ojson& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void require_object(const ojson& j, const std::string& path) {
  if (!j.is_object()) fail_field(path, "expected an object");
}

void check_keys(const ojson& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) fail_field(path + "." + it.key(), "unknown field");
  }
}

double as_num(const ojson& j, const std::string& path) {
  if (!j.is_number()) fail_field(path, "expected a number");
  return j.get<double>();
}

int as_int(const ojson& j, const std::string& path) {
  if (!j.is_number_integer()) fail_field(path, "expected an integer");
  return j.get<int>();
}

bool as_bool(const ojson& j, const std::string& path) {
  if (!j.is_boolean()) fail_field(path, "expected a boolean");
  return j.get<bool>();
}

std::string as_str(const ojson& j, const std::string& path) {
  if (!j.is_string()) fail_field(path, "expected a string");
  return j.get<std::string>();
}

std::uint64_t as_u64(const ojson& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    const auto v = j.get<std::int64_t>();
    if (v < 0) fail_field(path, "expected a non-negative integer");
    return static_cast<std::uint64_t>(v);
  }
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    char* end = nullptr;
    const std::uint64_t v = std::strtoull(s.c_str(), &end, 0);
    if (end == s.c_str() || *end != '\0')
      fail_field(path, "expected an unsigned integer (decimal or 0x-hex)");
    return v;
  }
  fail_field(path, "expected an unsigned integer or a numeric string");
}

/* ------------------------------------------------------------------ */
/* Presets.                                                            */

FourierMode default_sine_mode() {
  FourierMode m;
  m.k0 = 1;
  m.k1 = 0;
  m.amplitude = 1.0;
  m.phase = 0.0;
  m.type = "sin";
  return m;
}

void apply_preset(ScenarioConfig& c) {
  c.initial.kind = "fourier";
  c.initial.modes = {default_sine_mode()};
  if (c.scenario == "heat") {
    c.dim = 1;
    c.n = 128;
    c.T = 0.1;
    c.dt = 1e-4;
    c.noise_name = "zero";
    c.method = "direct";
  } else if (c.scenario == "constant_noise") {
    c.dim = 1;
    c.n = 64;
    c.T = 0.05;
    c.dt = 1e-3;
    c.noise_name = "constant";
    c.noise_params.constants = {Vec2{0.5, 0.0}};
    c.method = "both";
  } else if (c.scenario == "sincos2d") {
    c.dim = 2;
    c.n = 8;
    c.T = 0.5;
    c.dt = 1e-3;
    c.noise_name = "sincos2d";
    c.nu = 0.5;
    c.M = 4.0;
    c.method = "flow_only";
    c.initial.modes.front().k0 = 1;
    c.lambda_tail.enabled = true;
    c.lambda_tail.t = 0.5;
    c.lambda_tail.thresholds = {10.0, 100.0};
  } else if (c.scenario == "axis_commuting") {
    c.dim = 2;
    c.n = 32;
    c.T = 0.25;
    c.dt = 1e-3;
    c.noise_name = "axis_commuting";
    c.a_spec.kind = "constant";
    c.a_spec.value = 1.5;
    c.method = "flow";
  } else if (c.scenario == "rough_a") {
    c.dim = 1;
    c.n = 256;
    c.T = 0.05;
    c.dt = 1e-4;
    c.noise_name = "constant";
    c.noise_params.constants = {Vec2{0.7, 0.0}};
    c.a_spec.kind = "checkerboard";
    c.a_spec.cb_seed = 1;
    c.a_spec.cb_cells = 16;
    c.a_spec.cb_low = 0.6;
    c.a_spec.cb_high = 1.5;
    c.method = "both";
  } else if (c.scenario == "quasilinear") {
    c.dim = 2;
    c.n = 128;
    c.T = 1.0;
    c.dt = 1e-4;
    c.noise_name = "sincos2d";
    c.method = "quasilinear";
    c.nu = 0.1;
    c.M = 4.5;
    c.store_every = 25;
    // u0 = 0.5 sin(2 pi x) sin(2 pi y) = 0.25 cos(2 pi (x-y)) - 0.25 cos(2 pi (x+y))
    FourierMode m1, m2;
    m1.k0 = 1;
    m1.k1 = -1;
    m1.amplitude = 0.25;
    m1.type = "cos";
    m2.k0 = 1;
    m2.k1 = 1;
    m2.amplitude = -0.25;
    m2.type = "cos";
    c.initial.modes = {m1, m2};
    c.hoelder.enabled = true;
    c.hoelder.parabolic = true;
    c.max_principle.enabled = true;
  } else if (c.scenario == "custom") {
    // plain struct defaults
  } else {
    fail_field("scenario", "unknown scenario '" + c.scenario + "'");
  }
}

/* ------------------------------------------------------------------ */
/* Document -> config overrides.                                       */

void parse_diffusion(const ojson& j, const std::string& path,
                     DiffusionSpec& out) {
  require_object(j, path);
  check_keys(j, path, {"kind", "value", "diag", "seed", "cells", "low", "high",
                       "name"});
  if (const ojson* v = child(j, "kind")) out.kind = as_str(*v, path + ".kind");
  if (out.kind == "constant") {
    if (const ojson* v = child(j, "value"))
      out.value = as_num(*v, path + ".value");
  } else if (out.kind == "diagonal") {
    const ojson* v = child(j, "diag");
    if (!v) fail_field(path + ".diag", "required for kind 'diagonal'");
    if (!v->is_array() || v->size() < 1 || v->size() > 2)
      fail_field(path + ".diag", "expected an array of 1 or 2 numbers");
    out.diag0 = as_num((*v)[0], path + ".diag[0]");
    out.diag1 = v->size() > 1 ? as_num((*v)[1], path + ".diag[1]") : out.diag0;
  } else if (out.kind == "checkerboard") {
    if (const ojson* v = child(j, "seed"))
      out.cb_seed = as_u64(*v, path + ".seed");
    if (const ojson* v = child(j, "cells"))
      out.cb_cells = as_int(*v, path + ".cells");
    if (const ojson* v = child(j, "low")) out.cb_low = as_num(*v, path + ".low");
    if (const ojson* v = child(j, "high"))
      out.cb_high = as_num(*v, path + ".high");
    if (out.cb_cells < 1) fail_field(path + ".cells", "must be >= 1");
    if (!(out.cb_high >= out.cb_low))
      fail_field(path + ".high", "must be >= low");
  } else if (out.kind == "closure") {
    if (const ojson* v = child(j, "name"))
      out.closure_name = as_str(*v, path + ".name");
  } else {
    fail_field(path + ".kind",
               "expected constant | diagonal | checkerboard | closure");
  }
}

void parse_scalar_term(const ojson& j, const std::string& path,
                       ScalarTermSpec& out) {
  require_object(j, path);
  check_keys(j, path, {"kind", "value", "amplitude", "wave", "axis"});
  if (const ojson* v = child(j, "kind")) out.kind = as_str(*v, path + ".kind");
  if (out.kind == "none") return;
  if (out.kind == "constant") {
    if (const ojson* v = child(j, "value"))
      out.value = as_num(*v, path + ".value");
    return;
  }
  if (out.kind == "sin") {
    if (const ojson* v = child(j, "amplitude"))
      out.value = as_num(*v, path + ".amplitude");
    if (const ojson* v = child(j, "wave")) out.wave = as_int(*v, path + ".wave");
    if (const ojson* v = child(j, "axis")) out.axis = as_int(*v, path + ".axis");
    if (out.wave < 1) fail_field(path + ".wave", "must be >= 1");
    if (out.axis < 0 || out.axis > 1)
      fail_field(path + ".axis", "must be 0 or 1");
    return;
  }
  fail_field(path + ".kind", "expected none | constant | sin");
}

void parse_vector_term(const ojson& j, const std::string& path,
                       VectorTermSpec& out) {
  require_object(j, path);
  check_keys(j, path, {"kind", "value"});
  if (const ojson* v = child(j, "kind")) out.kind = as_str(*v, path + ".kind");
  if (out.kind == "none") return;
  if (out.kind == "constant") {
    const ojson* v = child(j, "value");
    if (!v || !v->is_array() || v->empty() || v->size() > 2)
      fail_field(path + ".value", "expected an array of 1 or 2 numbers");
    out.v0 = as_num((*v)[0], path + ".value[0]");
    out.v1 = v->size() > 1 ? as_num((*v)[1], path + ".value[1]") : 0.0;
    return;
  }
  fail_field(path + ".kind", "expected none | constant");
}

void parse_initial(const ojson& j, const std::string& path,
                   InitialDataSpec& out) {
  require_object(j, path);
  check_keys(j, path, {"kind", "value", "modes", "gamma0", "seed", "max_mode"});
  if (const ojson* v = child(j, "kind")) out.kind = as_str(*v, path + ".kind");
  if (out.kind == "constant") {
    if (const ojson* v = child(j, "value"))
      out.value = as_num(*v, path + ".value");
  } else if (out.kind == "fourier") {
    if (const ojson* v = child(j, "modes")) {
      if (!v->is_array() || v->empty())
        fail_field(path + ".modes", "expected a non-empty array");
      out.modes.clear();
      int mi = 0;
      for (const ojson& mj : *v) {
        const std::string mp = path + ".modes[" + std::to_string(mi++) + "]";
        require_object(mj, mp);
        check_keys(mj, mp, {"k", "amplitude", "phase", "type"});
        FourierMode m;
        const ojson* kv = child(mj, "k");
        if (!kv || !kv->is_array() || kv->empty() || kv->size() > 2)
          fail_field(mp + ".k", "expected an array of 1 or 2 integers");
        m.k0 = as_int((*kv)[0], mp + ".k[0]");
        m.k1 = kv->size() > 1 ? as_int((*kv)[1], mp + ".k[1]") : 0;
        if (const ojson* av = child(mj, "amplitude"))
          m.amplitude = as_num(*av, mp + ".amplitude");
        if (const ojson* pv = child(mj, "phase"))
          m.phase = as_num(*pv, mp + ".phase");
        if (const ojson* tv = child(mj, "type")) {
          m.type = as_str(*tv, mp + ".type");
          if (m.type != "cos" && m.type != "sin")
            fail_field(mp + ".type", "expected cos | sin");
        }
        out.modes.push_back(m);
      }
    }
  } else if (out.kind == "random_hoelder") {
    if (const ojson* v = child(j, "gamma0"))
      out.gamma0 = as_num(*v, path + ".gamma0");
    if (const ojson* v = child(j, "seed")) out.seed = as_u64(*v, path + ".seed");
    if (const ojson* v = child(j, "max_mode"))
      out.max_mode = as_int(*v, path + ".max_mode");
    if (!(out.gamma0 > 0.0)) fail_field(path + ".gamma0", "must be > 0");
    if (out.max_mode < 1 || out.max_mode > 512)
      fail_field(path + ".max_mode", "must be in [1, 512]");
  } else {
    fail_field(path + ".kind", "expected constant | fourier | random_hoelder");
  }
}

void apply_document(const ojson& doc, ScenarioConfig& c) {
  check_keys(doc, "(top level)",
             {"scenario", "grid", "time", "noise", "coefficients",
              "quasilinear", "initial", "pipeline", "monte_carlo", "solver",
              "diagnostics", "output"});

  if (const ojson* j = child(doc, "grid")) {
    require_object(*j, "grid");
    check_keys(*j, "grid", {"d", "n"});
    if (const ojson* v = child(*j, "d")) c.dim = as_int(*v, "grid.d");
    if (const ojson* v = child(*j, "n")) c.n = as_int(*v, "grid.n");
  }
  if (const ojson* j = child(doc, "time")) {
    require_object(*j, "time");
    check_keys(*j, "time", {"T", "dt", "theta", "store_every"});
    if (const ojson* v = child(*j, "T")) c.T = as_num(*v, "time.T");
    if (const ojson* v = child(*j, "dt")) c.dt = as_num(*v, "time.dt");
    if (const ojson* v = child(*j, "theta")) c.theta = as_num(*v, "time.theta");
    if (const ojson* v = child(*j, "store_every"))
      c.store_every = as_int(*v, "time.store_every");
  }
  if (const ojson* j = child(doc, "noise")) {
    require_object(*j, "noise");
    check_keys(*j, "noise", {"family", "constants", "axis_mean", "axis_amp"});
    if (const ojson* v = child(*j, "family"))
      c.noise_name = as_str(*v, "noise.family");
    if (const ojson* v = child(*j, "constants")) {
      if (!v->is_array() || v->empty())
        fail_field("noise.constants", "expected a non-empty array of vectors");
      c.noise_params.constants.clear();
      int ci = 0;
      for (const ojson& cj : *v) {
        const std::string cp = "noise.constants[" + std::to_string(ci++) + "]";
        if (!cj.is_array() || cj.empty() || cj.size() > 2)
          fail_field(cp, "expected an array of 1 or 2 numbers");
        Vec2 vec{as_num(cj[0], cp + "[0]"),
                 cj.size() > 1 ? as_num(cj[1], cp + "[1]") : 0.0};
        c.noise_params.constants.push_back(vec);
      }
    }
    if (const ojson* v = child(*j, "axis_mean")) {
      if (!v->is_array() || v->size() != 2)
        fail_field("noise.axis_mean", "expected an array of 2 numbers");
      c.noise_params.axis_mean[0] = as_num((*v)[0], "noise.axis_mean[0]");
      c.noise_params.axis_mean[1] = as_num((*v)[1], "noise.axis_mean[1]");
    }
    if (const ojson* v = child(*j, "axis_amp")) {
      if (!v->is_array() || v->size() != 2)
        fail_field("noise.axis_amp", "expected an array of 2 numbers");
      c.noise_params.axis_amp[0] = as_num((*v)[0], "noise.axis_amp[0]");
      c.noise_params.axis_amp[1] = as_num((*v)[1], "noise.axis_amp[1]");
    }
  }
  if (const ojson* j = child(doc, "coefficients")) {
    require_object(*j, "coefficients");
    check_keys(*j, "coefficients",
               {"a", "nu", "M", "a_lin", "a0", "b0", "f0", "f_vec", "g"});
    if (const ojson* v = child(*j, "a"))
      parse_diffusion(*v, "coefficients.a", c.a_spec);
    if (const ojson* v = child(*j, "nu")) c.nu = as_num(*v, "coefficients.nu");
    if (const ojson* v = child(*j, "M")) c.M = as_num(*v, "coefficients.M");
    if (const ojson* v = child(*j, "a_lin"))
      parse_vector_term(*v, "coefficients.a_lin", c.a_lin_spec);
    if (const ojson* v = child(*j, "a0"))
      parse_scalar_term(*v, "coefficients.a0", c.a0_spec);
    if (const ojson* v = child(*j, "b0"))
      parse_scalar_term(*v, "coefficients.b0", c.b0_spec);
    if (const ojson* v = child(*j, "f0"))
      parse_scalar_term(*v, "coefficients.f0", c.f0_spec);
    if (const ojson* v = child(*j, "f_vec"))
      parse_vector_term(*v, "coefficients.f_vec", c.f_vec_spec);
    if (const ojson* v = child(*j, "g"))
      parse_scalar_term(*v, "coefficients.g", c.g_spec);
  }
  if (const ojson* j = child(doc, "quasilinear")) {
    require_object(*j, "quasilinear");
    check_keys(*j, "quasilinear", {"name", "base", "gain"});
    if (const ojson* v = child(*j, "name"))
      c.quasilinear.name = as_str(*v, "quasilinear.name");
    if (const ojson* v = child(*j, "base"))
      c.quasilinear.base = as_num(*v, "quasilinear.base");
    if (const ojson* v = child(*j, "gain"))
      c.quasilinear.gain = as_num(*v, "quasilinear.gain");
  }
  if (const ojson* j = child(doc, "initial"))
    parse_initial(*j, "initial", c.initial);
  if (const ojson* j = child(doc, "pipeline")) {
    require_object(*j, "pipeline");
    check_keys(*j, "pipeline", {"method"});
    if (const ojson* v = child(*j, "method"))
      c.method = as_str(*v, "pipeline.method");
  }
  if (const ojson* j = child(doc, "monte_carlo")) {
    require_object(*j, "monte_carlo");
    check_keys(*j, "monte_carlo",
               {"paths", "master_seed", "workers", "fail_fast"});
    if (const ojson* v = child(*j, "paths"))
      c.paths = as_int(*v, "monte_carlo.paths");
    if (const ojson* v = child(*j, "master_seed"))
      c.master_seed = as_u64(*v, "monte_carlo.master_seed");
    if (const ojson* v = child(*j, "workers"))
      c.workers = as_int(*v, "monte_carlo.workers");
    if (const ojson* v = child(*j, "fail_fast"))
      c.fail_fast = as_bool(*v, "monte_carlo.fail_fast");
  }
  if (const ojson* j = child(doc, "solver")) {
    require_object(*j, "solver");
    check_keys(*j, "solver",
               {"lin_tol", "max_lin_iter", "cfl_ratio", "blowup_sup",
                "inv_tol", "theta"});
    if (const ojson* v = child(*j, "lin_tol"))
      c.lin_tol = as_num(*v, "solver.lin_tol");
    if (const ojson* v = child(*j, "max_lin_iter"))
      c.max_lin_iter = as_int(*v, "solver.max_lin_iter");
    if (const ojson* v = child(*j, "cfl_ratio"))
      c.cfl_ratio = as_num(*v, "solver.cfl_ratio");
    if (const ojson* v = child(*j, "blowup_sup"))
      c.blowup_sup = as_num(*v, "solver.blowup_sup");
    if (const ojson* v = child(*j, "inv_tol"))
      c.inv_tol = as_num(*v, "solver.inv_tol");
    if (const ojson* v = child(*j, "theta"))
      c.theta = as_num(*v, "solver.theta");
  }
  if (const ojson* j = child(doc, "diagnostics")) {
    require_object(*j, "diagnostics");
    check_keys(*j, "diagnostics",
               {"lambda_tail", "hoelder", "stopping", "identity_residual",
                "max_principle", "snapshot_paths", "parabolicity_times"});
    if (const ojson* v = child(*j, "lambda_tail")) {
      require_object(*v, "diagnostics.lambda_tail");
      check_keys(*v, "diagnostics.lambda_tail", {"enabled", "t", "thresholds"});
      if (const ojson* w = child(*v, "enabled"))
        c.lambda_tail.enabled =
            as_bool(*w, "diagnostics.lambda_tail.enabled");
      if (const ojson* w = child(*v, "t"))
        c.lambda_tail.t = as_num(*w, "diagnostics.lambda_tail.t");
      if (const ojson* w = child(*v, "thresholds")) {
        if (!w->is_array() || w->empty())
          fail_field("diagnostics.lambda_tail.thresholds",
                     "expected a non-empty array of numbers");
        c.lambda_tail.thresholds.clear();
        int ti = 0;
        for (const ojson& tj : *w)
          c.lambda_tail.thresholds.push_back(
              as_num(tj, "diagnostics.lambda_tail.thresholds[" +
                             std::to_string(ti++) + "]"));
      }
    }
    if (const ojson* v = child(*j, "hoelder")) {
      require_object(*v, "diagnostics.hoelder");
      check_keys(*v, "diagnostics.hoelder", {"enabled", "parabolic"});
      if (const ojson* w = child(*v, "enabled"))
        c.hoelder.enabled = as_bool(*w, "diagnostics.hoelder.enabled");
      if (const ojson* w = child(*v, "parabolic"))
        c.hoelder.parabolic = as_bool(*w, "diagnostics.hoelder.parabolic");
    }
    if (const ojson* v = child(*j, "stopping")) {
      require_object(*v, "diagnostics.stopping");
      check_keys(*v, "diagnostics.stopping", {"enabled", "m"});
      if (const ojson* w = child(*v, "enabled"))
        c.stopping.enabled = as_bool(*w, "diagnostics.stopping.enabled");
      if (const ojson* w = child(*v, "m"))
        c.stopping.m = as_num(*w, "diagnostics.stopping.m");
    }
    if (const ojson* v = child(*j, "identity_residual")) {
      require_object(*v, "diagnostics.identity_residual");
      check_keys(*v, "diagnostics.identity_residual", {"enabled"});
      if (const ojson* w = child(*v, "enabled"))
        c.identity_residual.enabled =
            as_bool(*w, "diagnostics.identity_residual.enabled");
    }
    if (const ojson* v = child(*j, "max_principle")) {
      require_object(*v, "diagnostics.max_principle");
      check_keys(*v, "diagnostics.max_principle", {"enabled"});
      if (const ojson* w = child(*v, "enabled"))
        c.max_principle.enabled =
            as_bool(*w, "diagnostics.max_principle.enabled");
    }
    if (const ojson* v = child(*j, "snapshot_paths"))
      c.snapshot_paths = as_int(*v, "diagnostics.snapshot_paths");
    if (const ojson* v = child(*j, "parabolicity_times")) {
      if (!v->is_array())
        fail_field("diagnostics.parabolicity_times",
                   "expected an array of numbers");
      c.parabolicity_times.clear();
      int ti = 0;
      for (const ojson& tj : *v)
        c.parabolicity_times.push_back(as_num(
            tj, "diagnostics.parabolicity_times[" + std::to_string(ti++) +
                    "]"));
    }
  }
  if (const ojson* j = child(doc, "output")) {
    require_object(*j, "output");
    check_keys(*j, "output", {"dir"});
    if (const ojson* v = child(*j, "dir")) c.out_dir = as_str(*v, "output.dir");
  }
}

ScalarCoefficientFn make_scalar_term(const ScalarTermSpec& s) {
  if (s.kind == "none") return {};
  if (s.kind == "constant") {
    const double v = s.value;
    return [v](double, const Vec2&) { return v; };
  }
  const double amp = s.value;
  const double w = static_cast<double>(s.wave);
  const int axis = s.axis;
  return [amp, w, axis](double, const Vec2& x) {
    return amp * std::sin(kTwoPi * w * x[axis]);
  };
}

Vec2 wrap_unit(const Vec2& x, int d) {
  Vec2 r = x;
  for (int i = 0; i < d; ++i) r.v[i] = r.v[i] - std::floor(r.v[i]);
  return r;
}

double ratio_at(const MatrixField& alpha, std::size_t idx, int d) {
  const Mat2& mat = alpha.at(idx);
  double lo = 0.0, hi = 0.0;
  sym_eigenvalues(mat, d, lo, hi);
  if (d == 2) {
    // Positive-definite case: (tr - disc)/2 cancels once the condition
    // number nears 1/eps, while det/large stays exact.
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
    return std::numeric_limits<double>::infinity();
  return large / small;
}

double flow_distortion_sup(const FlowState& state, int d) {
  double sup = 0.0;
  const std::size_t size = state.jacobian.size();
  for (std::size_t idx = 0; idx < size; ++idx)
    sup = std::max(sup, op_norm(state.inv_jacobian.at(idx), d) +
                            op_norm(state.jacobian.at(idx), d));
  return sup;
}

struct FieldStats {
  double min = 0.0, max = 0.0, l2 = 0.0;
};

FieldStats field_stats(const ScalarField& f) {
  FieldStats s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -std::numeric_limits<double>::infinity();
  double sq = 0.0;
  for (double v : f.a) {
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    sq += v * v;
  }
  s.l2 = std::sqrt(std::pow(f.grid.h, f.grid.dim) * sq);
  return s;
}

double sup_abs(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.a) s = std::max(s, std::abs(v));
  return s;
}

double rel_l2_gap(const ScalarField& a, const ScalarField& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.a.size(); ++i) {
    const double d = a.a[i] - b.a[i];
    num += d * d;
    den += b.a[i] * b.a[i];
  }
  if (den < 1e-300) return std::sqrt(num);
  return std::sqrt(num / den);
}

}  // namespace

/* ------------------------------------------------------------------ */
/* Builders.                                                           */

PeriodicGrid make_grid(const ScenarioConfig& cfg) {
  return PeriodicGrid(cfg.dim, cfg.n);
}

NoiseFamily make_noise(const ScenarioConfig& cfg) {
  return builtin_noise_family(cfg.noise_name, cfg.dim, cfg.noise_params);
}

QuasilinearFn make_quasilinear_fn(const ScenarioConfig& cfg) {
  if (cfg.quasilinear.name != "inverse_quadratic")
    throw ConfigError("config: quasilinear.name: unknown closure '" +
                      cfg.quasilinear.name + "'");
  const double base = cfg.quasilinear.base;
  const double gain = cfg.quasilinear.gain;
  if (!(base > 0.0))
    throw ConfigError("config: quasilinear.base: must be > 0");
  if (gain < 0.0) throw ConfigError("config: quasilinear.gain: must be >= 0");
  return [base, gain](double, const Vec2&, double value) {
    const double v = base + gain / (1.0 + value * value);
    Mat2 m = Mat2::zero();
    m.m[0][0] = v;
    m.m[1][1] = v;
    return m;
  };
}

ScalarField make_initial_data(const ScenarioConfig& cfg,
                              const PeriodicGrid& grid) {
  ScalarField u0(grid);
  const InitialDataSpec& s = cfg.initial;
  if (s.kind == "constant") {
    std::fill(u0.a.begin(), u0.a.end(), s.value);
    return u0;
  }
  if (s.kind == "fourier") {
    if (s.modes.empty())
      throw ConfigError("config: initial.modes: must be non-empty");
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
      const Vec2 x = grid.coord(idx);
      double v = 0.0;
      for (const FourierMode& m : s.modes) {
        const double arg = kTwoPi * (m.k0 * x[0] + m.k1 * x[1]) + m.phase;
        v += m.amplitude * (m.type == "sin" ? std::sin(arg) : std::cos(arg));
      }
      u0.a[idx] = v;
    }
    return u0;
  }
  if (s.kind == "random_hoelder") {
    const double decay = s.gamma0 + 0.5;
    if (grid.dim == 1) {
      for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        const Vec2 x = grid.coord(idx);
        double v = 0.0;
        for (int k = 1; k <= s.max_mode; ++k) {
          const double amp = std::pow(static_cast<double>(k), -decay);
          const double A =
              normal_from_counter(s.seed, 2 * static_cast<std::uint64_t>(k));
          const double B = normal_from_counter(
              s.seed, 2 * static_cast<std::uint64_t>(k) + 1);
          const double arg = kTwoPi * k * x[0];
          v += amp * (A * std::cos(arg) + B * std::sin(arg));
        }
        u0.a[idx] = v;
      }
    } else {
      const int mm = s.max_mode;
      for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        const Vec2 x = grid.coord(idx);
        double v = 0.0;
        for (int k0 = 0; k0 <= mm; ++k0) {
          for (int k1 = 0; k1 <= mm; ++k1) {
            if (k0 == 0 && k1 == 0) continue;
            const double ksq = static_cast<double>(k0 * k0 + k1 * k1);
            const double amp = std::pow(ksq, -decay / 2.0);
            const std::uint64_t ctr =
                2 * (static_cast<std::uint64_t>(k0) * (mm + 1) + k1);
            const double A = normal_from_counter(s.seed, ctr);
            const double B = normal_from_counter(s.seed, ctr + 1);
            const double arg = kTwoPi * (k0 * x[0] + k1 * x[1]);
            v += amp * (A * std::cos(arg) + B * std::sin(arg));
          }
        }
        u0.a[idx] = v;
      }
    }
    return u0;
  }
  throw ConfigError("config: initial.kind: unknown kind '" + s.kind + "'");
}

CoefficientSet make_coefficients(const ScenarioConfig& cfg) {
  CoefficientSet c;
  c.dim = cfg.dim;
  c.nu = cfg.nu;
  c.M = cfg.M;

  const DiffusionSpec& a = cfg.a_spec;
  if (cfg.method == "quasilinear") {
    // Freeze the value-dependent diffusion at the initial data: exact at grid
    // nodes, where all coefficient evaluations happen.
    const PeriodicGrid grid = make_grid(cfg);
    auto u0 = std::make_shared<ScalarField>(make_initial_data(cfg, grid));
    QuasilinearFn A = make_quasilinear_fn(cfg);
    c.a = [grid, u0, A](double t, const Vec2& x) {
      const long i = std::lround(x[0] * grid.n);
      const long j = grid.dim == 2 ? std::lround(x[1] * grid.n) : 0;
      const std::size_t idx =
          grid.index(static_cast<int>(i), static_cast<int>(j));
      return A(t, x, u0->a[idx]);
    };
  } else if (a.kind == "constant") {
    const double v = a.value;
    c.a = [v](double, const Vec2&) {
      Mat2 m = Mat2::zero();
      m.m[0][0] = v;
      m.m[1][1] = v;
      return m;
    };
  } else if (a.kind == "diagonal") {
    const double d0 = a.diag0, d1 = a.diag1;
    c.a = [d0, d1](double, const Vec2&) {
      Mat2 m = Mat2::zero();
      m.m[0][0] = d0;
      m.m[1][1] = d1;
      return m;
    };
  } else if (a.kind == "checkerboard") {
    const std::uint64_t seed = a.cb_seed;
    const int cells = a.cb_cells;
    const double low = a.cb_low, span = a.cb_high - a.cb_low;
    const int dim = cfg.dim;
    c.a = [seed, cells, low, span, dim](double, const Vec2& x) {
      const Vec2 w = wrap_unit(x, dim);
      int ci = std::min(cells - 1, static_cast<int>(w[0] * cells));
      int cj = dim == 2 ? std::min(cells - 1, static_cast<int>(w[1] * cells))
                        : 0;
      const std::uint64_t cell =
          static_cast<std::uint64_t>(ci) +
          static_cast<std::uint64_t>(cells) * static_cast<std::uint64_t>(cj);
      const double u = u64_to_unit_open1(counter_hash(seed, cell));
      const double v = low + span * u;
      Mat2 m = Mat2::zero();
      m.m[0][0] = v;
      m.m[1][1] = v;
      return m;
    };
  } else if (a.kind == "closure") {
    if (a.closure_name == "identity") {
      c.a = [](double, const Vec2&) { return Mat2::identity(); };
    } else {
      throw ConfigError("config: coefficients.a.name: unknown closure '" +
                        a.closure_name + "'");
    }
  } else {
    throw ConfigError("config: coefficients.a.kind: unknown kind");
  }

  if (cfg.a_lin_spec.kind == "constant") {
    const double v0 = cfg.a_lin_spec.v0, v1 = cfg.a_lin_spec.v1;
    c.a_lin = [v0, v1](double, const Vec2&) { return Vec2{v0, v1}; };
  }
  c.a0 = make_scalar_term(cfg.a0_spec);
  c.f0 = make_scalar_term(cfg.f0_spec);
  if (cfg.f_vec_spec.kind == "constant") {
    const double v0 = cfg.f_vec_spec.v0, v1 = cfg.f_vec_spec.v1;
    c.f_vec = [v0, v1](double, const Vec2&) { return Vec2{v0, v1}; };
  }
  if (cfg.b0_spec.kind != "none") {
    c.b0.assign(static_cast<std::size_t>(cfg.noise_modes),
                make_scalar_term(cfg.b0_spec));
  }
  if (cfg.g_spec.kind != "none") {
    c.g.assign(static_cast<std::size_t>(cfg.noise_modes),
               make_scalar_term(cfg.g_spec));
  }
  return c;
}

/* ------------------------------------------------------------------ */
/* parse_config.                                                       */

ScenarioConfig parse_config(const std::string& text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");

  ScenarioConfig c;
  if (const ojson* v = child(doc, "scenario"))
    c.scenario = as_str(*v, "scenario");
  apply_preset(c);
  apply_document(doc, c);

  // ---- structural validation -------------------------------------
  if (c.dim != 1 && c.dim != 2) fail_field("grid.d", "must be 1 or 2");
  if (c.n < 8) fail_field("grid.n", "must be >= 8");
  if (!(c.T > 0.0)) fail_field("time.T", "must be > 0");
  if (!(c.dt > 0.0)) fail_field("time.dt", "must be > 0");
  if (c.theta < 0.0 || c.theta > 1.0)
    fail_field("time.theta", "must lie in [0, 1]");
  if (c.store_every < 1) fail_field("time.store_every", "must be >= 1");
  if (c.paths < 0) fail_field("monte_carlo.paths", "must be >= 0");
  if (c.workers < 0) fail_field("monte_carlo.workers", "must be >= 0");
  if (!(c.lin_tol > 0.0)) fail_field("solver.lin_tol", "must be > 0");
  if (c.max_lin_iter < 1) fail_field("solver.max_lin_iter", "must be >= 1");
  if (!(c.cfl_ratio > 0.0)) fail_field("solver.cfl_ratio", "must be > 0");
  if (!(c.blowup_sup > 0.0)) fail_field("solver.blowup_sup", "must be > 0");
  if (!(c.inv_tol > 0.0)) fail_field("solver.inv_tol", "must be > 0");
  if (c.snapshot_paths < 0)
    fail_field("diagnostics.snapshot_paths", "must be >= 0");

  const bool is_method_valid =
      c.method == "flow" || c.method == "direct" || c.method == "both" ||
      c.method == "flow_only" || c.method == "quasilinear";
  if (!is_method_valid)
    fail_field("pipeline.method",
               "expected flow | direct | both | flow_only | quasilinear");
  if ((c.scenario == "quasilinear") != (c.method == "quasilinear"))
    fail_field("pipeline.method",
               "method 'quasilinear' is tied to scenario 'quasilinear'");

  c.num_steps = level_count(c.T, c.dt, "config: time");

  const bool flow_pde = c.method == "flow" || c.method == "both";
  if (flow_pde && c.a0_spec.kind != "none")
    fail_field("coefficients.a0", "not supported by the flow pipeline");
  if (flow_pde && c.b0_spec.kind != "none")
    fail_field("coefficients.b0", "not supported by the flow pipeline");

  if (c.identity_residual.enabled) {
    if (c.method != "direct" && c.method != "both")
      fail_field("diagnostics.identity_residual.enabled",
                 "requires pipeline.method direct or both");
    if (c.store_every != 1)
      fail_field("diagnostics.identity_residual.enabled",
                 "requires time.store_every == 1");
  }
  if (c.hoelder.enabled && c.method == "flow_only")
    fail_field("diagnostics.hoelder.enabled",
               "requires a pipeline with a PDE stage");
  if (c.stopping.enabled) {
    if (!(c.stopping.m > 0.0)) fail_field("diagnostics.stopping.m", "must be > 0");
    if (c.method == "direct")
      fail_field("diagnostics.stopping.enabled",
                 "requires a flow-based pipeline");
  }

  // ---- materialized objects ---------------------------------------
  const PeriodicGrid grid = make_grid(c);
  NoiseFamily family;
  try {
    family = make_noise(c);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: noise: ") + e.what());
  }
  c.noise_modes = family.num_modes;

  if ((c.b0_spec.kind != "none" || c.g_spec.kind != "none") &&
      family.num_modes == 0)
    fail_field("coefficients.g", "requires a noise family with modes");

  // CFL guard feasibility.
  {
    SolverConfig scfg;
    scfg.dt = c.dt;
    scfg.cfl_ratio = c.cfl_ratio;
    check_cfl_guard(grid, scfg, family);
  }

  // Declared-parabolicity check on the realized grid.
  const CoefficientSet coeffs = make_coefficients(c);
  std::vector<double> times = c.parabolicity_times;
  if (times.empty()) {
    times.push_back(0.0);
    if (family.time_dependent) {
      times.push_back(0.5 * c.T);
      times.push_back(c.T);
    }
  }
  const ParabolicityReport rep =
      parabolicity_report(coeffs, family, grid, times);
  c.nu_hat = rep.nu_hat;
  c.M_hat = rep.M_hat;
  char buf[160];
  if (c.nu <= 0.0) {
    if (!(rep.nu_hat > 0.0)) {
      std::snprintf(buf, sizeof buf,
                    "realized parabolicity is not positive (nu_hat=%.6g)",
                    rep.nu_hat);
      fail_field("coefficients.nu", buf);
    }
    c.nu = rep.nu_hat;
  } else if (rep.nu_hat < c.nu - 1e-9) {
    std::snprintf(buf, sizeof buf,
                  "declared parabolicity violated (nu_hat=%.6g, declared=%.6g)",
                  rep.nu_hat, c.nu);
    fail_field("coefficients.nu", buf);
  }
  if (c.M <= 0.0) {
    c.M = rep.M_hat;
  } else if (rep.M_hat > c.M + 1e-9) {
    std::snprintf(buf, sizeof buf,
                  "declared bound violated (M_hat=%.6g, declared=%.6g)",
                  rep.M_hat, c.M);
    fail_field("coefficients.M", buf);
  }

  if (c.lambda_tail.enabled) {
    if (c.lambda_tail.thresholds.empty())
      fail_field("diagnostics.lambda_tail.thresholds", "must be non-empty");
    for (double k : c.lambda_tail.thresholds)
      if (!(k > 0.0))
        fail_field("diagnostics.lambda_tail.thresholds", "must be > 0");
    if (c.lambda_tail.t < 0.0 || c.lambda_tail.t > c.T)
      fail_field("diagnostics.lambda_tail.t", "must lie in [0, T]");
    const double lf = c.lambda_tail.t / c.dt;
    const int level = static_cast<int>(std::lround(lf));
    if (std::abs(level * c.dt - c.lambda_tail.t) >
        1e-9 * std::max(1.0, c.T))
      fail_field("diagnostics.lambda_tail.t", "must be a multiple of dt");
    const bool stored = level == 0 || level == c.num_steps ||
                        level % c.store_every == 0;
    if (!stored)
      fail_field("diagnostics.lambda_tail.t", "must land on a stored level");
    c.lambda_tail.t = level * c.dt;
    if (c.method == "direct")
      fail_field("diagnostics.lambda_tail.enabled",
                 "requires a flow-based pipeline");
    const bool equal_diag =
        c.a_spec.kind == "constant" ||
        (c.a_spec.kind == "diagonal" &&
         c.a_spec.diag0 == c.a_spec.diag1);
    if (!equal_diag)
      fail_field("diagnostics.lambda_tail.enabled",
                 "closed-form tail needs a constant equal-diagonal a");
  }

  return c;
}

ScenarioConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/* ------------------------------------------------------------------ */
/* Echo + hash.                                                        */

namespace {

std::string u64_hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

ojson diffusion_json(const DiffusionSpec& a) {
  ojson j;
  j["kind"] = a.kind;
  if (a.kind == "constant") {
    j["value"] = a.value;
  } else if (a.kind == "diagonal") {
    j["diag"] = {a.diag0, a.diag1};
  } else if (a.kind == "checkerboard") {
    j["seed"] = u64_hex(a.cb_seed);
    j["cells"] = a.cb_cells;
    j["low"] = a.cb_low;
    j["high"] = a.cb_high;
  } else {
    j["name"] = a.closure_name;
  }
  return j;
}

ojson scalar_term_json(const ScalarTermSpec& s) {
  ojson j;
  j["kind"] = s.kind;
  if (s.kind == "constant") j["value"] = s.value;
  if (s.kind == "sin") {
    j["amplitude"] = s.value;
    j["wave"] = s.wave;
    j["axis"] = s.axis;
  }
  return j;
}

ojson vector_term_json(const VectorTermSpec& s) {
  ojson j;
  j["kind"] = s.kind;
  if (s.kind == "constant") j["value"] = {s.v0, s.v1};
  return j;
}

ojson initial_json(const InitialDataSpec& s) {
  ojson j;
  j["kind"] = s.kind;
  if (s.kind == "constant") j["value"] = s.value;
  if (s.kind == "fourier") {
    ojson modes = ojson::array();
    for (const FourierMode& m : s.modes) {
      ojson mj;
      mj["k"] = {m.k0, m.k1};
      mj["amplitude"] = m.amplitude;
      mj["phase"] = m.phase;
      mj["type"] = m.type;
      modes.push_back(mj);
    }
    j["modes"] = modes;
  }
  if (s.kind == "random_hoelder") {
    j["gamma0"] = s.gamma0;
    j["seed"] = u64_hex(s.seed);
    j["max_mode"] = s.max_mode;
  }
  return j;
}

}  // namespace

std::string echo_config(const ScenarioConfig& c) {
  ojson j;
  j["scenario"] = c.scenario;
  j["grid"] = {{"d", c.dim}, {"n", c.n}};
  j["time"] = {{"T", c.T},
               {"dt", c.dt},
               {"theta", c.theta},
               {"store_every", c.store_every}};
  ojson noise;
  noise["family"] = c.noise_name;
  noise["modes"] = c.noise_modes;
  if (c.noise_name == "constant") {
    ojson cs = ojson::array();
    for (const Vec2& v : c.noise_params.constants)
      cs.push_back({v[0], v[1]});
    noise["constants"] = cs;
  }
  if (c.noise_name == "axis_commuting") {
    noise["axis_mean"] = {c.noise_params.axis_mean[0],
                          c.noise_params.axis_mean[1]};
    noise["axis_amp"] = {c.noise_params.axis_amp[0],
                         c.noise_params.axis_amp[1]};
  }
  j["noise"] = noise;
  ojson coeff;
  coeff["a"] = diffusion_json(c.a_spec);
  coeff["nu"] = c.nu;
  coeff["M"] = c.M;
  coeff["a_lin"] = vector_term_json(c.a_lin_spec);
  coeff["a0"] = scalar_term_json(c.a0_spec);
  coeff["b0"] = scalar_term_json(c.b0_spec);
  coeff["f0"] = scalar_term_json(c.f0_spec);
  coeff["f_vec"] = vector_term_json(c.f_vec_spec);
  coeff["g"] = scalar_term_json(c.g_spec);
  j["coefficients"] = coeff;
  if (c.method == "quasilinear") {
    j["quasilinear"] = {{"name", c.quasilinear.name},
                        {"base", c.quasilinear.base},
                        {"gain", c.quasilinear.gain}};
  }
  j["initial"] = initial_json(c.initial);
  j["pipeline"] = {{"method", c.method}};
  j["monte_carlo"] = {{"paths", c.paths},
                      {"master_seed", u64_hex(c.master_seed)},
                      {"fail_fast", c.fail_fast}};
  j["solver"] = {{"lin_tol", c.lin_tol},
                 {"max_lin_iter", c.max_lin_iter},
                 {"cfl_ratio", c.cfl_ratio},
                 {"blowup_sup", c.blowup_sup},
                 {"inv_tol", c.inv_tol}};
  ojson diag;
  ojson lt;
  lt["enabled"] = c.lambda_tail.enabled;
  if (c.lambda_tail.enabled) {
    lt["t"] = c.lambda_tail.t;
    lt["thresholds"] = c.lambda_tail.thresholds;
  }
  diag["lambda_tail"] = lt;
  diag["hoelder"] = {{"enabled", c.hoelder.enabled},
                     {"parabolic", c.hoelder.parabolic}};
  ojson st;
  st["enabled"] = c.stopping.enabled;
  if (c.stopping.enabled) st["m"] = c.stopping.m;
  diag["stopping"] = st;
  diag["identity_residual"] = {{"enabled", c.identity_residual.enabled}};
  diag["max_principle"] = {{"enabled", c.max_principle.enabled}};
  diag["snapshot_paths"] = c.snapshot_paths;
  diag["parabolicity_times"] = c.parabolicity_times;
  j["diagnostics"] = diag;
  j["output"] = {{"dir", c.out_dir}};
  j["realized"] = {{"nu_hat", c.nu_hat},
                   {"M_hat", c.M_hat},
                   {"levels", c.num_steps}};
  return j.dump(2);
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string config_hash_hex(const ScenarioConfig& cfg) {
  return u64_hex(fnv1a64(echo_config(cfg)));
}

/* ------------------------------------------------------------------ */
/* run_scenario.                                                       */

namespace {

struct Shared {
  ScenarioConfig cfg;
  PeriodicGrid grid;
  NoiseFamily family;
  CoefficientSet coeffs;
  QuasilinearFn quasi;
  ScalarField u0;
  double u0_min = 0.0, u0_max = 0.0;
  int K = 0;
  bool has_g = false;
  int lambda_level = -1;
  std::size_t probe_idx = 0;
  bool need_pde = false;
};

struct PathOutput {
  PathRecord rec;
  std::vector<SeriesRow> series;
  std::vector<SnapshotEntry> snaps;
  ScalarField final_field;  // only kept when a snapshot was requested
};

bool is_stored(int level, int K, int every) {
  return level == 0 || level == K || level % every == 0;
}

void nan_fill(PathRecord& r) {
  r.final_min = r.final_max = r.final_l2 = kNaN;
  r.sup_distortion_final = kNaN;
  r.inv_residual_max = kNaN;
  r.lambda_value = kNaN;
  r.tau = kNaN;
  r.hoelder_exponent = r.hoelder_seminorm = kNaN;
  r.max_principle_excess = kNaN;
  r.cross_rel_gap = kNaN;
  r.identity_residual = kNaN;
}

double default_phi(const Vec2& x) { return std::cos(kTwoPi * x[0]); }

void sequence_diagnostics(const Shared& sh, const FieldSequence& seq,
                          bool want_series, PathOutput& out) {
  const ScenarioConfig& cfg = sh.cfg;
  double lo = sh.u0_min, hi = sh.u0_max;
  for (std::size_t i = 0; i < seq.count(); ++i) {
    const FieldStats st = field_stats(seq.fields[i]);
    lo = std::min(lo, st.min);
    hi = std::max(hi, st.max);
    if (want_series) {
      SeriesRow row;
      row.level = seq.stored_levels[i];
      row.t = seq.time_of(i);
      row.min_u = st.min;
      row.max_u = st.max;
      row.l2_u = st.l2;
      row.sup_distortion = kNaN;
      row.h_sup = kNaN;
      out.series.push_back(row);
    }
  }
  const FieldStats fin = field_stats(seq.final_field());
  out.rec.final_min = fin.min;
  out.rec.final_max = fin.max;
  out.rec.final_l2 = fin.l2;
  if (cfg.max_principle.enabled)
    out.rec.max_principle_excess =
        std::max({0.0, hi - sh.u0_max, sh.u0_min - lo});
  if (cfg.hoelder.enabled) {
    const HoelderEstimate est = hoelder_estimate(seq, cfg.hoelder.parabolic);
    out.rec.hoelder_exponent = est.exponent_hat;
    out.rec.hoelder_seminorm = est.seminorm_hat;
  }
}

PathOutput run_single_path(const Shared& sh, int path_index, int intra) {
  const ScenarioConfig& cfg = sh.cfg;
  PathOutput out;
  PathRecord& rec = out.rec;
  rec.index = path_index;
  rec.seed = derive_path_seed(cfg.master_seed,
                              static_cast<std::uint64_t>(path_index));
  nan_fill(rec);

  const bool probe = path_index == 0;
  const bool want_snapshot = path_index < cfg.snapshot_paths;

  try {
    const BrownianPath path = sample_brownian_increments(
        rec.seed, sh.K, sh.family.num_modes, cfg.dt);

    SolverConfig scfg;
    scfg.theta = cfg.theta;
    scfg.lin_tol = cfg.lin_tol;
    scfg.max_lin_iter = cfg.max_lin_iter;
    scfg.dt = cfg.dt;
    scfg.cfl_ratio = cfg.cfl_ratio;
    scfg.blowup_sup = cfg.blowup_sup;
    scfg.store_every = cfg.store_every;
    scfg.workers = intra;

    if (cfg.method == "direct" || cfg.method == "quasilinear") {
      const bool need_levels = cfg.hoelder.enabled ||
                               cfg.max_principle.enabled || probe ||
                               cfg.identity_residual.enabled;
      scfg.store_every = need_levels ? cfg.store_every : sh.K;
      const FieldSequence seq =
          cfg.method == "quasilinear"
              ? solve_quasilinear(sh.quasi, sh.family, sh.u0, path, sh.grid,
                                  cfg.T, scfg, cfg.nu)
              : solve_spde_direct(sh.coeffs, sh.family, sh.u0, path, sh.grid,
                                  cfg.T, scfg);
      sequence_diagnostics(sh, seq, probe, out);
      if (want_snapshot) out.final_field = seq.final_field();
      if (cfg.identity_residual.enabled && cfg.method == "direct") {
        EvolveOptions eopts;
        eopts.store_every = 1;
        eopts.step.workers = intra;
        const FlowTrajectory traj =
            evolve_flow(sh.family, path, sh.grid, cfg.T, eopts);
        rec.identity_residual = ito_wentzell_residual(
            seq, traj, path, sh.family, sh.coeffs, default_phi, cfg.dt, 0);
      }
    } else {
      // Streaming characteristics pipeline: O(1) levels resident.
      StepOptions sopts;
      sopts.workers = intra;
      FlowState state = identity_flow_state(sh.grid, 0.0);
      InverseFlowField inv;
      ScalarField z(sh.grid), h(sh.grid);
      TransformedCoefficients tc;
      FieldSequence useq;
      useq.t0 = 0.0;
      useq.dt = cfg.dt;
      ScalarField u_final(sh.grid);

      double maxp_lo = sh.u0_min, maxp_hi = sh.u0_max;
      double inv_res_max = 0.0;
      bool tau_found = false;
      double tau = cfg.T;

      if (sh.need_pde) {
        inv = invert_flow_field(state, nullptr, cfg.inv_tol, 200, intra);
        z = sh.u0;
        tc = assemble_transformed(sh.coeffs, sh.family, state, 0.0,
                                  sh.has_g ? &h : nullptr, intra);
      }

      auto handle_stored = [&](int level) {
        const double t_lv = level * cfg.dt;
        const bool want_level = probe || cfg.stopping.enabled ||
                                cfg.hoelder.enabled ||
                                cfg.max_principle.enabled || level == sh.K ||
                                level == sh.lambda_level;
        if (!want_level) return;
        const double sup_dist = flow_distortion_sup(state, sh.grid.dim);
        if (cfg.stopping.enabled && !tau_found && sup_dist >= cfg.stopping.m) {
          tau = t_lv;
          tau_found = true;
        }
        if (level == sh.K) rec.sup_distortion_final = sup_dist;

        double h_sup = kNaN;
        FieldStats st;
        bool have_u = false;
        if (sh.need_pde) {
          ScalarField v = z;
          if (sh.has_g) {
            for (std::size_t i = 0; i < v.a.size(); ++i) v.a[i] += h.a[i];
            h_sup = sup_abs(h);
          }
          ScalarField u_lv =
              level == 0 ? sh.u0 : compose_back_level(v, inv, intra);
          st = field_stats(u_lv);
          have_u = true;
          maxp_lo = std::min(maxp_lo, st.min);
          maxp_hi = std::max(maxp_hi, st.max);
          if (cfg.hoelder.enabled) {
            useq.stored_levels.push_back(level);
            useq.fields.push_back(u_lv);
          }
          if (level == sh.K) {
            rec.final_min = st.min;
            rec.final_max = st.max;
            rec.final_l2 = st.l2;
            u_final = std::move(u_lv);
          }
        }
        if (probe) {
          SeriesRow row;
          row.level = level;
          row.t = t_lv;
          row.min_u = have_u ? st.min : kNaN;
          row.max_u = have_u ? st.max : kNaN;
          row.l2_u = have_u ? st.l2 : kNaN;
          row.sup_distortion = sup_dist;
          row.h_sup = h_sup;
          out.series.push_back(row);
        }
        if (level == sh.lambda_level) {
          if (sh.need_pde) {
            rec.lambda_value = ratio_at(tc.alpha, sh.probe_idx, sh.grid.dim);
          } else {
            const TransformedPrincipal tp = transformed_coefficients(
                sh.coeffs, sh.family, state, t_lv, intra);
            rec.lambda_value = ratio_at(tp.alpha, sh.probe_idx, sh.grid.dim);
          }
          // JSON stores non-finite as null; normalize to NaN so aggregation
          // before and after a manifest round trip sees the same sample set.
          if (!std::isfinite(rec.lambda_value))
            rec.lambda_value = std::numeric_limits<double>::quiet_NaN();
        }
      };

      handle_stored(0);

      for (int k = 0; k < sh.K; ++k) {
        const int level = k + 1;
        const double t_lv = level * cfg.dt;
        if (sh.need_pde) {
          if (!tc.degeneracy_mask.empty())
            throw TransformError(
                "transformed diffusion lost positivity while stepping",
                tc.degeneracy_mask.front(), tc.degeneracy_mask.size());
          const OperatorStencil st = build_operator_stencil(
              sh.grid, tc.alpha, &tc.alpha_lin, nullptr, intra);
          ScalarField forcing = divergence_central(tc.Fbar_vec, intra);
          for (std::size_t i = 0; i < forcing.a.size(); ++i)
            forcing.a[i] += tc.Fbar0.a[i];
          z = theta_step(scfg, z, st, &forcing, nullptr);
          const double zsup = sup_abs(z);
          if (!std::isfinite(zsup) || zsup > cfg.blowup_sup)
            throw BlowUpError("pulled-back solution exceeded the blow-up guard",
                              t_lv, zsup);
          if (sh.has_g)
            h = solve_h_step(h, tc.G, path.level(k), sh.family.num_modes,
                             cfg.dt, cfg.lin_tol, cfg.max_lin_iter);
        }
        step_flow(state, sh.family, path.level(k), cfg.dt, sopts);
        if (sh.need_pde) {
          inv = invert_flow_field(state, &inv, cfg.inv_tol, 200, intra);
          inv_res_max = std::max(inv_res_max, inv.max_residual);
          tc = assemble_transformed(sh.coeffs, sh.family, state, t_lv,
                                    sh.has_g ? &h : nullptr, intra);
        }
        if (is_stored(level, sh.K, cfg.store_every)) handle_stored(level);
      }

      if (sh.need_pde) rec.inv_residual_max = inv_res_max;
      if (cfg.stopping.enabled) {
        rec.tau = tau;
        rec.tau_exceeded = tau_found;
      }
      if (cfg.max_principle.enabled && sh.need_pde)
        rec.max_principle_excess =
            std::max({0.0, maxp_hi - sh.u0_max, sh.u0_min - maxp_lo});
      if (cfg.hoelder.enabled && sh.need_pde) {
        const HoelderEstimate est =
            hoelder_estimate(useq, cfg.hoelder.parabolic);
        rec.hoelder_exponent = est.exponent_hat;
        rec.hoelder_seminorm = est.seminorm_hat;
      }
      if (want_snapshot && sh.need_pde) out.final_field = u_final;

      if (cfg.method == "both") {
        SolverConfig dcfg = scfg;
        dcfg.store_every = cfg.identity_residual.enabled ? 1 : sh.K;
        const FieldSequence dseq = solve_spde_direct(
            sh.coeffs, sh.family, sh.u0, path, sh.grid, cfg.T, dcfg);
        rec.cross_rel_gap = rel_l2_gap(u_final, dseq.final_field());
        if (cfg.identity_residual.enabled) {
          EvolveOptions eopts;
          eopts.store_every = 1;
          eopts.step.workers = intra;
          const FlowTrajectory traj =
              evolve_flow(sh.family, path, sh.grid, cfg.T, eopts);
          rec.identity_residual = ito_wentzell_residual(
              dseq, traj, path, sh.family, sh.coeffs, default_phi, cfg.dt, 0);
        }
      }
    }
    rec.ok = true;
  } catch (const Error& e) {
    rec.ok = false;
    rec.error_kind = e.kind();
    rec.error_msg = e.what();
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error_kind = "unexpected";
    rec.error_msg = e.what();
  }

  if (rec.ok && want_snapshot && !out.final_field.a.empty()) {
    SnapshotEntry snap;
    snap.quantity = "u_final";
    snap.path_index = path_index;
    snap.t = cfg.T;
    snap.dim = cfg.dim;
    snap.n = cfg.n;
    snap.data = out.final_field.a;
    out.snaps.push_back(std::move(snap));
  }
  return out;
}

int resolve_worker_count(const ScenarioConfig& cfg) {
  if (const char* env = std::getenv("TORUSFLOW_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1)
      return static_cast<int>(std::min(v, 256L));
  }
  if (cfg.workers >= 1) return cfg.workers;
  return hardware_workers();
}

}  // namespace

RunSummary run_scenario(const ScenarioConfig& cfg) {
  Shared sh;
  sh.cfg = cfg;
  sh.grid = make_grid(cfg);
  sh.family = make_noise(cfg);
  sh.coeffs = make_coefficients(cfg);
  if (cfg.method == "quasilinear") sh.quasi = make_quasilinear_fn(cfg);
  sh.u0 = make_initial_data(cfg, sh.grid);
  const FieldStats u0_stats = field_stats(sh.u0);
  sh.u0_min = u0_stats.min;
  sh.u0_max = u0_stats.max;
  sh.K = cfg.num_steps > 0 ? cfg.num_steps
                           : level_count(cfg.T, cfg.dt, "run_scenario");
  sh.has_g = sh.coeffs.has_g() &&
             (cfg.method == "flow" || cfg.method == "both");
  sh.lambda_level =
      cfg.lambda_tail.enabled
          ? static_cast<int>(std::lround(cfg.lambda_tail.t / cfg.dt))
          : -1;
  sh.probe_idx = 0;
  sh.need_pde = cfg.method == "flow" || cfg.method == "both";

  RunSummary s;
  s.config = cfg;
  s.config.num_steps = sh.K;
  s.echo_json = echo_config(s.config);
  s.config_hash = u64_hex(fnv1a64(s.echo_json));

  const int total = cfg.paths;
  std::vector<PathOutput> outs(static_cast<std::size_t>(std::max(total, 0)));
  if (total > 0) {
    const int pool = std::max(1, resolve_worker_count(cfg));
    const int path_workers = std::min(pool, total);
    const int intra = std::max(1, pool / path_workers);
    std::atomic<int> next{0};
    std::atomic<bool> stop{false};
    auto worker = [&]() {
      while (!stop.load(std::memory_order_relaxed)) {
        const int i = next.fetch_add(1);
        if (i >= total) break;
        outs[static_cast<std::size_t>(i)] = run_single_path(sh, i, intra);
        if (!outs[static_cast<std::size_t>(i)].rec.ok && cfg.fail_fast)
          stop.store(true, std::memory_order_relaxed);
      }
    };
    if (path_workers == 1) {
      worker();
    } else {
      std::vector<std::thread> threads;
      threads.reserve(static_cast<std::size_t>(path_workers));
      for (int w = 0; w < path_workers; ++w) threads.emplace_back(worker);
      for (auto& th : threads) th.join();
    }
    if (cfg.fail_fast) {
      for (const PathOutput& o : outs) {
        if (!o.rec.error_kind.empty()) {
          throw Error("run aborted (fail-fast): path " +
                      std::to_string(o.rec.index) + " failed (" +
                      o.rec.error_kind + "): " + o.rec.error_msg);
        }
      }
    }
  }

  // Sequential aggregation in path order.
  s.records.reserve(outs.size());
  for (PathOutput& o : outs) {
    if (!o.rec.ok) ++s.failed;
    s.records.push_back(o.rec);
    for (SnapshotEntry& e : o.snaps) s.snapshots.push_back(std::move(e));
  }
  if (!outs.empty()) s.series = std::move(outs.front().series);

  if (cfg.lambda_tail.enabled) {
    s.lambda.enabled = true;
    s.lambda.t = cfg.lambda_tail.t;
    s.lambda.delta = cfg.a_spec.kind == "constant" ? cfg.a_spec.value
                                                   : cfg.a_spec.diag0;
    s.lambda.thresholds = cfg.lambda_tail.thresholds;
    int ok_count = 0;
    for (const PathRecord& r : s.records)
      if (r.ok && std::isfinite(r.lambda_value)) ++ok_count;
    s.lambda.samples = ok_count;
    for (double k : s.lambda.thresholds) {
      int hits = 0;
      for (const PathRecord& r : s.records)
        if (r.ok && std::isfinite(r.lambda_value) && r.lambda_value > k)
          ++hits;
      const double freq =
          ok_count > 0 ? static_cast<double>(hits) / ok_count : kNaN;
      const double cf = lambda_tail_probability(k, s.lambda.t, s.lambda.delta);
      s.lambda.frequencies.push_back(freq);
      s.lambda.closed_form.push_back(cf);
      s.lambda.binomial_se.push_back(
          ok_count > 0 ? std::sqrt(cf * (1.0 - cf) / ok_count) : kNaN);
    }
  }
  if (cfg.hoelder.enabled) {
    s.hoelder.enabled = true;
    for (int i = 0; i <= 20; ++i) s.hoelder.edges.push_back(i * 0.05);
    s.hoelder.counts.assign(20, 0);
    double sum = 0.0;
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    for (const PathRecord& r : s.records) {
      if (!r.ok || !std::isfinite(r.hoelder_exponent)) continue;
      const double e = std::clamp(r.hoelder_exponent, 0.0, 1.0);
      const int bin = std::min(19, static_cast<int>(e * 20.0));
      ++s.hoelder.counts[static_cast<std::size_t>(bin)];
      sum += r.hoelder_exponent;
      mn = std::min(mn, r.hoelder_exponent);
      mx = std::max(mx, r.hoelder_exponent);
      ++s.hoelder.samples;
    }
    s.hoelder.mean = s.hoelder.samples > 0 ? sum / s.hoelder.samples : kNaN;
    s.hoelder.min = s.hoelder.samples > 0 ? mn : kNaN;
    s.hoelder.max = s.hoelder.samples > 0 ? mx : kNaN;
  }
  if (cfg.stopping.enabled) {
    s.stopping.enabled = true;
    double sum = 0.0;
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    for (const PathRecord& r : s.records) {
      if (!r.ok || !std::isfinite(r.tau)) continue;
      sum += r.tau;
      mn = std::min(mn, r.tau);
      mx = std::max(mx, r.tau);
      if (r.tau_exceeded) ++s.stopping.exceed_count;
      ++s.stopping.samples;
    }
    s.stopping.mean = s.stopping.samples > 0 ? sum / s.stopping.samples : kNaN;
    s.stopping.min = s.stopping.samples > 0 ? mn : kNaN;
    s.stopping.max = s.stopping.samples > 0 ? mx : kNaN;
  }
  if (cfg.max_principle.enabled) {
    s.max_principle.enabled = true;
    for (const PathRecord& r : s.records) {
      if (!r.ok || !std::isfinite(r.max_principle_excess)) continue;
      ++s.max_principle.samples;
      if (r.max_principle_excess > 1e-10) ++s.max_principle.violations;
      s.max_principle.max_excess =
          std::max(s.max_principle.max_excess, r.max_principle_excess);
    }
  }
  if (cfg.method == "both") {
    s.cross.enabled = true;
    double sum = 0.0;
    for (const PathRecord& r : s.records) {
      if (!r.ok || !std::isfinite(r.cross_rel_gap)) continue;
      sum += r.cross_rel_gap;
      s.cross.max_gap = std::max(s.cross.max_gap, r.cross_rel_gap);
      ++s.cross.samples;
    }
    s.cross.mean_gap = s.cross.samples > 0 ? sum / s.cross.samples : kNaN;
  }
  return s;
}

/* ------------------------------------------------------------------ */
/* Serialization.                                                      */

namespace {

static_assert(std::endian::native == std::endian::little,
              "snapshot serialization assumes a little-endian host");

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text_file(const std::filesystem::path& p, const std::string& body) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + p.string());
  os.write(body.data(), static_cast<std::streamsize>(body.size()));
  os.flush();
  if (!os) throw IoError("write failed: " + p.string());
}

void write_f64_file(const std::filesystem::path& p,
                    const std::vector<double>& data) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + p.string());
  os.write(reinterpret_cast<const char*>(data.data()),
           static_cast<std::streamsize>(data.size() * sizeof(double)));
  os.flush();
  if (!os) throw IoError("write failed: " + p.string());
}

ojson record_json(const PathRecord& r) {
  ojson j;
  j["index"] = r.index;
  j["seed"] = u64_hex(r.seed);
  j["ok"] = r.ok;
  j["error_kind"] = r.error_kind;
  j["error_msg"] = r.error_msg;
  j["final_min"] = r.final_min;
  j["final_max"] = r.final_max;
  j["final_l2"] = r.final_l2;
  j["sup_distortion_final"] = r.sup_distortion_final;
  j["inv_residual_max"] = r.inv_residual_max;
  j["lambda_value"] = r.lambda_value;
  j["tau"] = r.tau;
  j["tau_exceeded"] = r.tau_exceeded;
  j["hoelder_exponent"] = r.hoelder_exponent;
  j["hoelder_seminorm"] = r.hoelder_seminorm;
  j["max_principle_excess"] = r.max_principle_excess;
  j["cross_rel_gap"] = r.cross_rel_gap;
  j["identity_residual"] = r.identity_residual;
  return j;
}

double json_num(const ojson& j, double fallback = kNaN) {
  if (j.is_number()) return j.get<double>();
  return fallback;  // null round-trips NaN
}

PathRecord record_from_json(const ojson& j) {
  PathRecord r;
  r.index = j.value("index", 0);
  if (j.contains("seed") && j["seed"].is_string())
    r.seed = std::strtoull(j["seed"].get<std::string>().c_str(), nullptr, 0);
  r.ok = j.value("ok", false);
  r.error_kind = j.value("error_kind", std::string());
  r.error_msg = j.value("error_msg", std::string());
  r.final_min = json_num(j.value("final_min", ojson()));
  r.final_max = json_num(j.value("final_max", ojson()));
  r.final_l2 = json_num(j.value("final_l2", ojson()));
  r.sup_distortion_final = json_num(j.value("sup_distortion_final", ojson()));
  r.inv_residual_max = json_num(j.value("inv_residual_max", ojson()));
  r.lambda_value = json_num(j.value("lambda_value", ojson()));
  r.tau = json_num(j.value("tau", ojson()));
  r.tau_exceeded = j.value("tau_exceeded", false);
  r.hoelder_exponent = json_num(j.value("hoelder_exponent", ojson()));
  r.hoelder_seminorm = json_num(j.value("hoelder_seminorm", ojson()));
  r.max_principle_excess = json_num(j.value("max_principle_excess", ojson()));
  r.cross_rel_gap = json_num(j.value("cross_rel_gap", ojson()));
  r.identity_residual = json_num(j.value("identity_residual", ojson()));
  return r;
}

ojson aggregates_json(const RunSummary& s) {
  ojson agg;
  if (s.lambda.enabled) {
    ojson l;
    l["t"] = s.lambda.t;
    l["delta"] = s.lambda.delta;
    l["thresholds"] = s.lambda.thresholds;
    l["frequencies"] = s.lambda.frequencies;
    l["closed_form"] = s.lambda.closed_form;
    l["binomial_se"] = s.lambda.binomial_se;
    l["samples"] = s.lambda.samples;
    agg["lambda_tail"] = l;
  } else {
    agg["lambda_tail"] = nullptr;
  }
  if (s.hoelder.enabled) {
    ojson hj;
    hj["edges"] = s.hoelder.edges;
    hj["counts"] = s.hoelder.counts;
    hj["mean"] = s.hoelder.mean;
    hj["min"] = s.hoelder.min;
    hj["max"] = s.hoelder.max;
    hj["samples"] = s.hoelder.samples;
    agg["hoelder"] = hj;
  } else {
    agg["hoelder"] = nullptr;
  }
  if (s.stopping.enabled) {
    ojson t;
    t["min"] = s.stopping.min;
    t["mean"] = s.stopping.mean;
    t["max"] = s.stopping.max;
    t["exceed_count"] = s.stopping.exceed_count;
    t["samples"] = s.stopping.samples;
    agg["stopping"] = t;
  } else {
    agg["stopping"] = nullptr;
  }
  if (s.max_principle.enabled) {
    ojson m;
    m["violations"] = s.max_principle.violations;
    m["max_excess"] = s.max_principle.max_excess;
    m["samples"] = s.max_principle.samples;
    agg["max_principle"] = m;
  } else {
    agg["max_principle"] = nullptr;
  }
  if (s.cross.enabled) {
    ojson cj;
    cj["mean_gap"] = s.cross.mean_gap;
    cj["max_gap"] = s.cross.max_gap;
    cj["samples"] = s.cross.samples;
    agg["cross_validation"] = cj;
  } else {
    agg["cross_validation"] = nullptr;
  }
  return agg;
}

/** Recompute every aggregate from the per-path records. Parameters that are
 * not derivable from records (probe time, delta, thresholds) come from the
 * existing aggregate block. */
void recompute_aggregates(RunSummary& s) {
  if (s.lambda.enabled) {
    LambdaAggregate l;
    l.enabled = true;
    l.t = s.lambda.t;
    l.delta = s.lambda.delta;
    l.thresholds = s.lambda.thresholds;
    int ok_count = 0;
    for (const PathRecord& r : s.records)
      if (r.ok && std::isfinite(r.lambda_value)) ++ok_count;
    l.samples = ok_count;
    for (double k : l.thresholds) {
      int hits = 0;
      for (const PathRecord& r : s.records)
        if (r.ok && std::isfinite(r.lambda_value) && r.lambda_value > k)
          ++hits;
      const double freq =
          ok_count > 0 ? static_cast<double>(hits) / ok_count : kNaN;
      const double cf = lambda_tail_probability(k, l.t, l.delta);
      l.frequencies.push_back(freq);
      l.closed_form.push_back(cf);
      l.binomial_se.push_back(ok_count > 0
                                  ? std::sqrt(cf * (1.0 - cf) / ok_count)
                                  : kNaN);
    }
    s.lambda = l;
  }
  if (s.hoelder.enabled) {
    HoelderAggregate hagg;
    hagg.enabled = true;
    for (int i = 0; i <= 20; ++i) hagg.edges.push_back(i * 0.05);
    hagg.counts.assign(20, 0);
    double sum = 0.0;
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    for (const PathRecord& r : s.records) {
      if (!r.ok || !std::isfinite(r.hoelder_exponent)) continue;
      const double e = std::clamp(r.hoelder_exponent, 0.0, 1.0);
      ++hagg.counts[static_cast<std::size_t>(
          std::min(19, static_cast<int>(e * 20.0)))];
      sum += r.hoelder_exponent;
      mn = std::min(mn, r.hoelder_exponent);
      mx = std::max(mx, r.hoelder_exponent);
      ++hagg.samples;
    }
    hagg.mean = hagg.samples > 0 ? sum / hagg.samples : kNaN;
    hagg.min = hagg.samples > 0 ? mn : kNaN;
    hagg.max = hagg.samples > 0 ? mx : kNaN;
    s.hoelder = hagg;
  }
  if (s.stopping.enabled) {
    StoppingAggregate t;
    t.enabled = true;
    double sum = 0.0;
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    for (const PathRecord& r : s.records) {
      if (!r.ok || !std::isfinite(r.tau)) continue;
      sum += r.tau;
      mn = std::min(mn, r.tau);
      mx = std::max(mx, r.tau);
      if (r.tau_exceeded) ++t.exceed_count;
      ++t.samples;
    }
    t.mean = t.samples > 0 ? sum / t.samples : kNaN;
    t.min = t.samples > 0 ? mn : kNaN;
    t.max = t.samples > 0 ? mx : kNaN;
    s.stopping = t;
  }
  if (s.max_principle.enabled) {
    MaxPrincipleAggregate m;
    m.enabled = true;
    for (const PathRecord& r : s.records) {
      if (!r.ok || !std::isfinite(r.max_principle_excess)) continue;
      ++m.samples;
      if (r.max_principle_excess > 1e-10) ++m.violations;
      m.max_excess = std::max(m.max_excess, r.max_principle_excess);
    }
    s.max_principle = m;
  }
  if (s.cross.enabled) {
    CrossAggregate cagg;
    cagg.enabled = true;
    double sum = 0.0;
    for (const PathRecord& r : s.records) {
      if (!r.ok || !std::isfinite(r.cross_rel_gap)) continue;
      sum += r.cross_rel_gap;
      cagg.max_gap = std::max(cagg.max_gap, r.cross_rel_gap);
      ++cagg.samples;
    }
    cagg.mean_gap = cagg.samples > 0 ? sum / cagg.samples : kNaN;
    s.cross = cagg;
  }
}

std::string render_series_csv(const std::vector<SeriesRow>& rows) {
  std::string out = "level,t,min_u,max_u,l2_u,sup_distortion,h_sup\n";
  char buf[32];
  for (const SeriesRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%d", r.level);
    out += buf;
    out += ',';
    out += fmt_double(r.t);
    out += ',';
    out += fmt_double(r.min_u);
    out += ',';
    out += fmt_double(r.max_u);
    out += ',';
    out += fmt_double(r.l2_u);
    out += ',';
    out += fmt_double(r.sup_distortion);
    out += ',';
    out += fmt_double(r.h_sup);
    out += '\n';
  }
  return out;
}

ojson manifest_json(const RunSummary& s) {
  ojson man;
  man["format_version"] = 1;
  man["scenario"] = s.config.scenario;
  man["method"] = s.config.method;
  man["config_hash"] = s.config_hash;
  man["grid"] = {{"d", s.config.dim}, {"n", s.config.n}};
  man["time"] = {{"T", s.config.T},
                 {"dt", s.config.dt},
                 {"levels", s.config.num_steps}};
  man["master_seed"] = u64_hex(s.config.master_seed);
  man["paths_total"] = static_cast<int>(s.records.size());
  man["paths_failed"] = s.failed;
  ojson recs = ojson::array();
  for (const PathRecord& r : s.records) recs.push_back(record_json(r));
  man["records"] = recs;
  man["aggregates"] = aggregates_json(s);
  return man;
}

}  // namespace

void write_outputs(const RunSummary& s, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec)
    throw IoError("cannot create output directory " + directory + ": " +
                  ec.message());
  const fs::path dir(directory);

  write_text_file(dir / "config_echo.json", s.echo_json + "\n");
  write_text_file(dir / "manifest.json", manifest_json(s).dump(2) + "\n");
  write_text_file(dir / "series.csv", render_series_csv(s.series));

  ojson schema;
  schema["file"] = "series.csv";
  schema["path_index"] = 0;
  schema["columns"] = ojson::array(
      {ojson{{"name", "level"}, {"desc", "time level index"}},
       ojson{{"name", "t"}, {"desc", "time of the level"}},
       ojson{{"name", "min_u"},
             {"desc", "minimum of the solution field (empty without a PDE "
                      "stage)"}},
       ojson{{"name", "max_u"}, {"desc", "maximum of the solution field"}},
       ojson{{"name", "l2_u"}, {"desc", "grid L2 norm of the solution field"}},
       ojson{{"name", "sup_distortion"},
             {"desc", "sup over nodes of op-norm(psi)+op-norm(D xi) (empty "
                      "for the direct method)"}},
       ojson{{"name", "h_sup"},
             {"desc",
              "sup norm of the auxiliary heat field (empty without a "
              "g-split)"}}});
  write_text_file(dir / "series_schema.json", schema.dump(2) + "\n");

  for (const SnapshotEntry& e : s.snapshots) {
    const std::string base =
        "snapshot_" + e.quantity + "_p" + std::to_string(e.path_index);
    write_f64_file(dir / (base + ".f64"), e.data);
    ojson side;
    side["d"] = e.dim;
    side["n"] = e.n;
    side["t"] = e.t;
    side["quantity"] = e.quantity;
    side["path_index"] = e.path_index;
    side["config_hash"] = s.config_hash;
    side["count"] = static_cast<int>(e.data.size());
    side["dtype"] = "float64";
    side["endianness"] = "little";
    side["layout"] = "x-fastest";
    write_text_file(dir / (base + ".json"), side.dump(2) + "\n");
  }
}

std::vector<double> read_snapshot_f64(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open snapshot " + file);
  in.seekg(0, std::ios::end);
  const std::streamoff bytes = in.tellg();
  in.seekg(0, std::ios::beg);
  if (bytes < 0 || bytes % 8 != 0)
    throw IoError("snapshot size is not a multiple of 8: " + file);
  std::vector<double> data(static_cast<std::size_t>(bytes / 8));
  in.read(reinterpret_cast<char*>(data.data()), bytes);
  if (!in) throw IoError("short read: " + file);
  return data;
}

std::string summarize(const RunSummary& s) {
  std::ostringstream os;
  os << "scenario=" << s.config.scenario << " method=" << s.config.method
     << " paths=" << s.records.size() << " failed=" << s.failed
     << " hash=" << s.config_hash << "\n";
  char buf[128];
  if (s.lambda.enabled) {
    os << "lambda_tail t=" << s.lambda.t << " samples=" << s.lambda.samples;
    for (std::size_t i = 0; i < s.lambda.thresholds.size(); ++i) {
      std::snprintf(buf, sizeof buf, " | k=%g freq=%.6g closed=%.6g se=%.3g",
                    s.lambda.thresholds[i], s.lambda.frequencies[i],
                    s.lambda.closed_form[i], s.lambda.binomial_se[i]);
      os << buf;
    }
    os << "\n";
  }
  if (s.hoelder.enabled) {
    std::snprintf(buf, sizeof buf, "hoelder mean=%.6g min=%.6g max=%.6g",
                  s.hoelder.mean, s.hoelder.min, s.hoelder.max);
    os << buf << " samples=" << s.hoelder.samples << "\n";
  }
  if (s.stopping.enabled) {
    std::snprintf(buf, sizeof buf, "stopping mean=%.6g min=%.6g max=%.6g",
                  s.stopping.mean, s.stopping.min, s.stopping.max);
    os << buf << " exceeded=" << s.stopping.exceed_count << "/"
       << s.stopping.samples << "\n";
  }
  if (s.max_principle.enabled) {
    std::snprintf(buf, sizeof buf, "max_principle violations=%d max_excess=%.3g",
                  s.max_principle.violations, s.max_principle.max_excess);
    os << buf << "\n";
  }
  if (s.cross.enabled) {
    std::snprintf(buf, sizeof buf, "cross_validation mean_gap=%.6g max_gap=%.6g",
                  s.cross.mean_gap, s.cross.max_gap);
    os << buf << "\n";
  }
  return os.str();
}

std::string reaggregate_directory(const std::string& directory) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = fs::path(directory) / "manifest.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  ojson man;
  try {
    man = ojson::parse(ss.str());
  } catch (const std::exception& e) {
    throw IoError("manifest " + manifest_path.string() +
                  " is not valid JSON: " + e.what());
  }

  RunSummary s;
  s.config.scenario = man.value("scenario", std::string("custom"));
  s.config.method = man.value("method", std::string("direct"));
  s.config_hash = man.value("config_hash", std::string("0x0"));
  if (man.contains("grid")) {
    s.config.dim = man["grid"].value("d", 1);
    s.config.n = man["grid"].value("n", 0);
  }
  if (man.contains("time")) {
    s.config.T = json_num(man["time"].value("T", ojson()), 0.0);
    s.config.dt = json_num(man["time"].value("dt", ojson()), 0.0);
    s.config.num_steps = man["time"].value("levels", 0);
  }
  if (man.contains("records") && man["records"].is_array()) {
    for (const ojson& rj : man["records"]) {
      PathRecord r = record_from_json(rj);
      if (!r.ok) ++s.failed;
      s.records.push_back(std::move(r));
    }
  }
  const ojson agg = man.value("aggregates", ojson());
  if (agg.is_object()) {
    const ojson lt = agg.value("lambda_tail", ojson());
    if (lt.is_object()) {
      s.lambda.enabled = true;
      s.lambda.t = json_num(lt.value("t", ojson()), 0.5);
      s.lambda.delta = json_num(lt.value("delta", ojson()), 1.0);
      if (lt.contains("thresholds"))
        for (const ojson& kv : lt["thresholds"])
          s.lambda.thresholds.push_back(kv.get<double>());
    }
    s.hoelder.enabled = agg.value("hoelder", ojson()).is_object();
    s.stopping.enabled = agg.value("stopping", ojson()).is_object();
    s.max_principle.enabled = agg.value("max_principle", ojson()).is_object();
    s.cross.enabled = agg.value("cross_validation", ojson()).is_object();
  }

  recompute_aggregates(s);
  man["paths_failed"] = s.failed;
  man["aggregates"] = aggregates_json(s);
  write_text_file(manifest_path, man.dump(2) + "\n");
  return summarize(s);
}

}  // namespace torusflow
