// rpflow CLI: sample | run | report | validate.
// Exit codes: 0 success, 1 runtime/realization failure, 2 config error,
// 3 io error.
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rpflow/config.hpp"
#include "rpflow/experiments.hpp"

extern "C" void openblas_set_num_threads(int);

int main(int argc, char** argv) {
  // The realization pool owns the parallelism; keep BLAS single-threaded so
  // worker counts mean what they say.
  openblas_set_num_threads(1);

  CLI::App app{"rpflow: matrix Brownian motion, stopped characteristic flow and "
               "eigenvector localization statistics"};
  app.set_version_flag("--version", rpflow::kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int threads = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> run_dirs;
  int rc = 0;

  auto* c_sample = app.add_subcommand(
      "sample", "write one realization's potential and terminal spectrum");
  auto* c_run = app.add_subcommand("run", "run the configured experiment ensemble");
  auto* c_report = app.add_subcommand(
      "report", "aggregate finished run directories into tables and figures");
  auto* c_validate =
      app.add_subcommand("validate", "check a config and print its canonical view");

  for (CLI::App* cmd : {c_sample, c_run, c_validate})
    cmd->add_option("--config", config_path, "experiment config (key = value lines)")
        ->required();
  for (CLI::App* cmd : {c_sample, c_run})
    cmd->add_option("--out", out_dir, "output directory (default: config output_dir)");
  c_run->add_option("--threads", threads, "realization pool size")
      ->check(CLI::PositiveNumber);
  auto* seed_sample = c_sample->add_option("--seed", seed, "master seed override");
  auto* seed_run = c_run->add_option("--seed", seed, "master seed override");
  c_report->add_option("dirs", run_dirs, "finished run directories")->required();
  c_report->add_option("--out", out_dir, "report directory")->required();

  auto load = [&](const CLI::Option* seed_opt) {
    rpflow::ExperimentConfig c = rpflow::parse_config_file(config_path);
    if (seed_opt->count()) {
      c.master_seed = seed;
      c.raw["master_seed"] = std::to_string(seed);
    }
    return c;
  };

  c_validate->callback([&] {
    const rpflow::ExperimentConfig c = rpflow::parse_config_file(config_path);
    const auto errs = rpflow::validate(c);
    if (!errs.empty()) {
      std::cerr << "config errors:\n";
      for (const auto& e : errs) std::cerr << "  - " << e << "\n";
      rc = 2;
      return;
    }
    std::cout << "ok " << c.hash() << "\n";
    for (const auto& [k, v] : c.raw) std::cout << k << " = " << v << "\n";
  });

  c_sample->callback([&] {
    const rpflow::ExperimentConfig c = load(seed_sample);
    const auto o = rpflow::sample(c, out_dir.empty() ? c.output_dir : out_dir, std::cout);
    if (o.failed > 0) rc = 1;
  });

  c_run->callback([&] {
    const rpflow::ExperimentConfig c = load(seed_run);
    const auto o =
        rpflow::run(c, out_dir.empty() ? c.output_dir : out_dir, threads, std::cout);
    if (o.failed > 0) rc = 1;
  });

  c_report->callback([&] { rpflow::report(run_dirs, out_dir, std::cout); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const rpflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rpflow::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
