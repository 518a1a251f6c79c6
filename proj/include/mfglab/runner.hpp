#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "mfglab/config.hpp"

namespace mfglab {

enum ExitCode { kExitPass = 0, kExitInvariant = 2, kExitConfig = 3, kExitSolver = 4 };

struct RunOptions {
  int workers = 1;
  std::optional<std::string> out_dir;  // overrides output.dir
  std::optional<std::uint64_t> seed;   // overrides the config seed
};

// Runs one experiment. Writes summary.json, CSV details and run.log into the output directory
// and returns the exit code. summary.json holds a failure record whenever the code is nonzero.
int run(const std::string& config_path, const RunOptions& opts);

// Dispatch on an already parsed config; results and checks land in `summary`.
// Throws the library errors; `run` maps them to exit codes.
void run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, int workers, nlohmann::json& summary,
                    std::ostream& log);

}  // namespace mfglab
