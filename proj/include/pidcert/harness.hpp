#pragma once

// Batch front end behind the pidcert command line. See README.md for the
// config schema.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "pidcert/json_io.hpp"
#include "pidcert/plant_models.hpp"

namespace pidcert {

enum class ExitCode : int { ok = 0, usage = 1, check_failed = 2 };

struct RunOptions {
  std::string mode;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int workers = 1;
};

/// Runs one mode: gains, certify, simulate, sweep, planar or verify-class.
/// The JSON report goes to `out`, diagnostics to `err`. Usage and config
/// errors give ExitCode::usage; failed checks give ExitCode::check_failed.
ExitCode run(const RunOptions& opts, std::ostream& out, std::ostream& err);

/// Same, with an already parsed config.
ExitCode run_config(const std::string& mode, const Json& config, const RunOptions& opts, std::ostream& out,
                    std::ostream& err);

/// {"family": id, "order": "second_order"|"first_order", "params": {...}};
/// params values are numbers or matrices.
PlantModel parse_plant(const ConfigNode& node);

/// Seed of sweep cell `index`; a splitmix64 step so neighbouring cells get
/// unrelated streams.
std::uint64_t cell_seed(std::uint64_t seed, std::uint64_t index);

struct SweepOutput {
  std::string csv;
  std::size_t cells = 0;
  std::size_t passed = 0;
  std::size_t non_members = 0;
  /// Member cells that failed a check or threw.
  std::size_t failures = 0;
  double pass_fraction = 0.0;
};

/// Evaluates every cell of plants × gains × setpoints × initial_states.
/// Cells run on up to `workers` threads; rows are assembled in cell order,
/// so the CSV depends only on the config and the seed.
SweepOutput run_sweep(const ConfigNode& config, std::uint64_t seed, int workers);

}  // namespace pidcert
