// Command-line front end: run experiment sweeps, verify learner guarantees
// against ground-truth workloads, and generate trace files.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "edgecache/edgecache.hpp"

int main(int argc, char** argv) {
  CLI::App app{"edge cache simulation harness"};
  app.require_subcommand(1);

  edgecache::RunOptions run_opt;
  int run_c = 0;
  int run_jobs = 0;
  std::string run_out;
  auto* run_cmd = app.add_subcommand("run", "execute an experiment sweep");
  auto* run_config = run_cmd->add_option("--config", run_opt.config_path, "experiment config json");
  auto* run_preset = run_cmd->add_option("--preset", run_opt.preset, "built-in experiment name");
  run_config->excludes(run_preset);
  auto* c_opt = run_cmd->add_option("--c", run_c, "override cache_size");
  auto* jobs_opt = run_cmd->add_option("--jobs", run_jobs, "override worker thread count");
  auto* out_opt = run_cmd->add_option("--out", run_out, "override output_dir");

  edgecache::VerifyOptions verify_opt;
  std::string verify_out;
  auto* verify_cmd = app.add_subcommand("verify", "check learner guarantees on ground truth");
  auto* verify_config =
      verify_cmd->add_option("--config", verify_opt.config_path, "experiment config json");
  auto* verify_preset =
      verify_cmd->add_option("--preset", verify_opt.preset, "built-in experiment name");
  verify_config->excludes(verify_preset);
  auto* verify_out_opt = verify_cmd->add_option("--out", verify_out, "override output_dir");

  edgecache::GenTraceOptions gen_opt;
  auto* gen_cmd = app.add_subcommand("gen-trace", "write a trace csv from a generator spec");
  gen_cmd->add_option("--spec", gen_opt.spec_path, "generator spec json")->required();
  gen_cmd->add_option("--out", gen_opt.out_path, "output csv path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems exit 2; --help exits 0
  }

  if (run_cmd->parsed()) {
    if (c_opt->count() > 0) run_opt.cache_size_override = run_c;
    if (jobs_opt->count() > 0) run_opt.jobs_override = run_jobs;
    if (out_opt->count() > 0) run_opt.output_dir_override = run_out;
    return edgecache::cmd_run(run_opt, std::cout, std::cerr);
  }
  if (verify_cmd->parsed()) {
    if (verify_out_opt->count() > 0) verify_opt.output_dir_override = verify_out;
    return edgecache::cmd_verify(verify_opt, std::cout, std::cerr);
  }
  return edgecache::cmd_gen_trace(gen_opt, std::cout, std::cerr);
}
