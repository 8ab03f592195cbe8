// wsdl: train, resume, sweep and diagnose runs from the command line.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "wsdl/app/commands.hpp"

int main(int argc, char** argv) {
  using namespace wsdl::app;

  CLI::App app{"Learning-rate schedule training and loss-landscape diagnostics"};
  app.set_version_flag("--version", std::string(wsdl::kToolkitVersion));
  app.require_subcommand(1);

  TrainArgs train_args;
  std::string train_config;
  auto* train = app.add_subcommand("train", "Train a fresh run");
  train->add_option("--config", train_config, "Run config file (key=value lines)")->check(CLI::ExistingFile);
  train->add_option("--set", train_args.overrides, "Override a config key, key=value (repeatable)");
  train->add_option("--out", train_args.out, "Run directory")->required();

  ResumeArgs resume_args;
  auto* resume = app.add_subcommand("resume", "Continue a WSD run from a stable-phase checkpoint under a longer schedule");
  resume->add_option("--checkpoint", resume_args.checkpoint, "ckpt_*.bin inside a run directory")->required();
  resume->add_option("--set", resume_args.overrides, "Schedule override, e.g. total_steps=6000 (repeatable)");
  resume->add_option("--out", resume_args.out, "New run directory")->required();

  SweepArgs sweep_args;
  std::string sweep_config;
  auto* sweep = app.add_subcommand("sweep", "Cooldown-length sweep over a shared stable prefix, plus a cosine baseline");
  sweep->add_option("--config", sweep_config, "Base run config")->check(CLI::ExistingFile);
  sweep->add_option("--set", sweep_args.overrides, "Override a config key (repeatable)");
  sweep->add_option("--out", sweep_args.out, "Sweep directory")->required();
  sweep->add_option("--fractions", sweep_args.fractions, "Cooldown fractions")->delimiter(',')->capture_default_str();
  sweep->add_option("--seeds", sweep_args.seeds, "Seeds, comma separated (default: the config seed)")->delimiter(',');
  sweep->add_option("--parallel", sweep_args.parallel, "Runs to execute concurrently")->check(CLI::PositiveNumber);

  DiagArgs diag_args;
  std::string diag_out;
  auto* diag = app.add_subcommand("diag", "Run one diagnostic over a finished run");
  diag->add_option("which", diag_args.which, "interp | sharpness | pca | align | tau | cosine | norms")->required();
  diag->add_option("--run", diag_args.run, "Run directory")->required();
  diag->add_option("--out", diag_out, "Output directory (default: <run>/diag)");
  diag->add_option("--points", diag_args.points, "Interpolation points")->check(CLI::Range(2, 100000));

  ReportArgs report_args;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Run every diagnostic and write summary.csv");
  report->add_option("--run", report_args.run, "Run directory")->required();
  report->add_option("--out", report_out, "Output directory (default: <run>/diag)");
  report->add_option("--points", report_args.points, "Interpolation points")->check(CLI::Range(2, 100000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  auto& err = std::cerr;
  if (*train)
    return guarded([&] {
      if (!train_config.empty()) train_args.config = train_config;
      cmd_train(train_args);
    }, err);
  if (*resume) return guarded([&] { cmd_resume(resume_args); }, err);
  if (*sweep)
    return guarded([&] {
      if (!sweep_config.empty()) sweep_args.config = sweep_config;
      const auto r = cmd_sweep(sweep_args);
      for (const auto& row : r.rows)
        std::cout << row.label << ": final_train_loss=" << row.final_train_loss << " final_eval_loss=" << row.final_eval_loss << '\n';
    }, err);
  if (*diag)
    return guarded([&] {
      if (!diag_out.empty()) diag_args.out = diag_out;
      cmd_diag(diag_args);
    }, err);
  return guarded([&] {
    if (!report_out.empty()) report_args.out = report_out;
    cmd_report(report_args);
  }, err);
}
