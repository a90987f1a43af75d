// glmb: run delta-GLMB Monte Carlo batches, check configurations and run the
// brute-force oracles.
//
//   glmb run --config configs/reference_run.json [--trials N] [--seed S] [--out DIR]
//            [--jmax N] [--no-lookahead] [--threads N] [model overrides]
//   glmb validate --config PATH [model overrides]
//   glmb oracle {assign|ksp|update} --size 3x3 --seeds 100
//
// Log verbosity comes from GLMB_LOG_LEVEL (trace, debug, info, warn, error, off).

#include <spdlog/cfg/helpers.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "glmb/app.hpp"

namespace {

void add_model_overrides(CLI::App* cmd, glmb::app::Overrides& o) {
  cmd->add_option("--pd", o.p_D, "Detection probability");
  cmd->add_option("--ps", o.p_S, "Survival probability");
  cmd->add_option("--clutter-rate", o.clutter_rate, "Mean false alarms per scan");
  cmd->add_option("--sigma-process", o.sigma_process, "Process noise standard deviation (m/s^2)");
  cmd->add_option("--sigma-meas", o.sigma_meas, "Measurement noise standard deviation (m)");
  cmd->add_option("--birth-r", o.birth_r, "Existence probability of every birth term");
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* level = std::getenv("GLMB_LOG_LEVEL")) {
    spdlog::cfg::helpers::load_levels(level);
  }

  CLI::App app{"delta-GLMB multi-target tracker"};
  app.require_subcommand(1);

  std::string config;
  glmb::app::Overrides over;

  auto* run = app.add_subcommand("run", "Run Monte Carlo trials and write results");
  run->add_option("--config", config, "Run configuration file")->required();
  run->add_option("--trials", over.trials, "Number of trials");
  run->add_option("--seed", over.seed, "Base seed; trial t uses seed + t");
  run->add_option("--out", over.out, "Output directory");
  run->add_option("--jmax", over.j_max, "Hypothesis cap");
  run->add_option("--threads", over.threads, "Worker threads (0 = all cores)");
  run->add_flag("--no-lookahead", over.no_lookahead, "Disable PHD look-ahead allocation");
  add_model_overrides(run, over);

  auto* validate = app.add_subcommand("validate", "Check a configuration and print the resolved model");
  validate->add_option("--config", config, "Run configuration file")->required();
  add_model_overrides(validate, over);

  std::string kind, size = "3x3";
  std::size_t seeds = 100;
  auto* oracle = app.add_subcommand("oracle", "Compare against brute-force enumeration");
  oracle->add_option("kind", kind, "assign, ksp or update")->required()->check(CLI::IsMember({"assign", "ksp", "update"}));
  oracle->add_option("--size", size, "N or AxB");
  oracle->add_option("--seeds", seeds, "Number of random instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : glmb::app::kConfigError;
  }

  if (*validate) return glmb::app::cmd_validate(config, over, std::cout);
  if (*oracle) return glmb::app::cmd_oracle(kind, size, seeds, std::cout);

  glmb::app::RunConfig rc;
  try {
    rc = glmb::app::load_run_config(config, over);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return glmb::app::kConfigError;
  }
  spdlog::info("running {} trial(s) of {} steps, j_max {}, look-ahead {}, output {}", rc.trials,
               rc.scenario.duration, rc.filter.j_max, rc.filter.lookahead_enabled ? "on" : "off",
               rc.out_dir.string());
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream log;
  const int code = glmb::app::cmd_run(rc, log);
  std::istringstream lines(log.str());
  for (std::string line; std::getline(lines, line);) spdlog::error("{}", line);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  spdlog::info("finished in {:.1f} s with exit code {}", secs, code);
  return code;
}
