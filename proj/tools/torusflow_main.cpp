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

// torusflow: simulate parabolic SPDEs with transport noise on the periodic
// torus by the stochastic method of characteristics.
//
// Subcommands:
//   run <config>       parse, execute the Monte Carlo scenario, write outputs
//   validate <config>  parse + parabolicity check only; print the echo
//   report <dir>       re-aggregate an existing output directory's manifest
//
// Exit codes: 0 success, 1 configuration/usage error, 2 run aborted,
// 3 I/O error.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "torusflow/errors.hpp"
#include "torusflow/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitAborted = 2;
constexpr int kExitIo = 3;

struct CommonFlags {
  int paths = -1;               // -1 = keep config value
  std::string seed;             // empty = keep config value
  int workers = -1;             // -1 = keep config value
  bool fail_fast = false;
  std::string out;              // empty = keep config value
};

void add_common_flags(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--paths", flags->paths,
                  "Override the number of Monte Carlo paths");
  cmd->add_option("--seed", flags->seed,
                  "Override the master seed (decimal or 0x-hex)");
  cmd->add_option("--workers", flags->workers,
                  "Concurrency hint (advisory; never changes output bytes). "
                  "The TORUSFLOW_WORKERS environment variable wins over this "
                  "flag.");
  cmd->add_flag("--fail-fast", flags->fail_fast,
                "Abort the whole run on the first path failure");
  cmd->add_option("--out", flags->out, "Override the output directory");
}

std::uint64_t parse_seed(const std::string& text) {
  char* end = nullptr;
  const std::uint64_t v = std::strtoull(text.c_str(), &end, 0);
  if (end == text.c_str() || *end != '\0')
    throw torusflow::ConfigError(
        "config: --seed: expected an unsigned integer (decimal or 0x-hex)");
  return v;
}

torusflow::ScenarioConfig load_config(const std::string& path,
                                      const CommonFlags& flags) {
  torusflow::ScenarioConfig cfg = torusflow::parse_config_file(path);
  if (flags.paths >= 0) cfg.paths = flags.paths;
  if (!flags.seed.empty()) cfg.master_seed = parse_seed(flags.seed);
  if (flags.workers >= 0) cfg.workers = flags.workers;
  if (flags.fail_fast) cfg.fail_fast = true;
  if (!flags.out.empty()) cfg.out_dir = flags.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "torusflow: parabolic SPDEs with transport noise on the periodic "
      "torus, solved by the stochastic method of characteristics"};
  app.require_subcommand(1);

  std::string run_config, validate_config, report_dir;
  CommonFlags run_flags, validate_flags;

  CLI::App* run_cmd =
      app.add_subcommand("run", "Execute a scenario and write its outputs");
  run_cmd->add_option("config", run_config, "Path to the JSON scenario config")
      ->required();
  add_common_flags(run_cmd, &run_flags);

  CLI::App* validate_cmd = app.add_subcommand(
      "validate", "Parse a config and run the parabolicity check only");
  validate_cmd
      ->add_option("config", validate_config, "Path to the JSON scenario config")
      ->required();
  add_common_flags(validate_cmd, &validate_flags);

  CLI::App* report_cmd = app.add_subcommand(
      "report", "Re-aggregate the manifest of an existing output directory");
  report_cmd->add_option("dir", report_dir, "Output directory with a manifest")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run_cmd->parsed()) {
      const torusflow::ScenarioConfig cfg = load_config(run_config, run_flags);
      torusflow::RunSummary summary;
      try {
        summary = torusflow::run_scenario(cfg);
      } catch (const torusflow::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
      } catch (const torusflow::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAborted;
      }
      torusflow::write_outputs(summary, cfg.out_dir);
      std::cout << torusflow::summarize(summary);
      std::cout << "outputs written to " << cfg.out_dir << "\n";
      return summary.failed == 0 ? kExitOk : kExitAborted;
    }
    if (validate_cmd->parsed()) {
      const torusflow::ScenarioConfig cfg =
          load_config(validate_config, validate_flags);
      std::cout << torusflow::echo_config(cfg) << "\n";
      std::cout << "config_hash " << torusflow::config_hash_hex(cfg) << "\n";
      std::printf("parabolicity ok: nu_hat=%.12g M_hat=%.12g\n", cfg.nu_hat,
                  cfg.M_hat);
      return kExitOk;
    }
    if (report_cmd->parsed()) {
      std::cout << torusflow::reaggregate_directory(report_dir);
      return kExitOk;
    }
  } catch (const torusflow::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const torusflow::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const torusflow::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAborted;
  }
  return kExitConfig;
}
