// pidcert <mode> --config <path> [--seed N] [--out DIR] [--workers K]

#include <CLI11.hpp>

#include <iostream>

#include "pidcert/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"PID/PD/PI gain sets, Lyapunov certificates and closed-loop audits"};
  pidcert::RunOptions opts;
  std::uint64_t seed = 0;
  std::string out_dir;

  app.add_option("mode", opts.mode, "gains | certify | simulate | sweep | planar | verify-class")
      ->required()
      ->check(CLI::IsMember({"gains", "certify", "simulate", "sweep", "planar", "verify-class"}));
  app.add_option("--config", opts.config_path, "JSON config file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides the config)");
  auto* out_opt = app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", opts.workers, "worker threads")->check(CLI::Range(1, 256));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(pidcert::ExitCode::usage);
  }
  if (seed_opt->count()) opts.seed = seed;
  if (out_opt->count()) opts.out_dir = out_dir;
  return static_cast<int>(pidcert::run(opts, std::cout, std::cerr));
}
