#include <cstdint>
#include <string>

#include <CLI11.hpp>

#include "mfglab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Carleman-estimate and inverse-problem experiments for forward-backward parabolic systems"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "run one experiment from a config file");
  std::string config;
  int workers = 1;
  std::string out;
  std::uint64_t seed = 0;
  run->add_option("config", config, "experiment config (YAML)")->required()->check(CLI::ExistingFile);
  run->add_option("--workers", workers, "worker threads for sweeps and forward-map columns")
      ->check(CLI::PositiveNumber);
  CLI::Option* out_opt = run->add_option("--out", out, "output directory (overrides output.dir)");
  CLI::Option* seed_opt = run->add_option("--seed", seed, "random seed (overrides the config seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : mfglab::kExitConfig;
  }

  mfglab::RunOptions opts;
  opts.workers = workers;
  if (*out_opt) opts.out_dir = out;
  if (*seed_opt) opts.seed = seed;
  return mfglab::run(config, opts);
}
