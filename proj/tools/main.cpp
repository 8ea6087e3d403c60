#include <CLI11.hpp>

#include <iostream>

#include "adbatch/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"adbatch: adaptive batching designs for GP level-set estimation"};
  app.require_subcommand(1);

  adbatch::cli::RunArgs run_args;
  std::uint64_t seed_val = 0;
  auto* run = app.add_subcommand("run", "Run a configured experiment");
  run->add_option("--config", run_args.config_path, "Config file path")->required();
  run->add_option("--set", run_args.overrides,
                  "Override a config key (key=value or section.key=value)");
  auto* seed_opt = run->add_option("--seed", seed_val, "Master seed override");
  run->add_option("--out", run_args.out_dir, "Output directory override");
  run->add_flag("--force", run_args.force, "Allow writing into an existing directory");
  run->add_option("--threads", run_args.threads, "Worker threads (0: hardware)");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Emit plot-data CSV series for a run");
  report->add_option("dir", report_dir, "Run output directory")->required();

  std::string calib_problem = "branin2d-gauss";
  auto* calib = app.add_subcommand("calibrate-overhead",
                                   "Fit the quadratic overhead model and time the simulator");
  calib->add_option("--problem", calib_problem, "Problem name");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (!seed_opt->empty()) run_args.seed = seed_val;
      return adbatch::cli::cmd_run(run_args);
    }
    if (report->parsed()) return adbatch::cli::cmd_report(report_dir);
    if (calib->parsed()) return adbatch::cli::cmd_calibrate_overhead(calib_problem);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
