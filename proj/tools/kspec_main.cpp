// SPDX-License-Identifier: Apache-2.0
// kspec <command> --config <path> [--seed N] [--out DIR]
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "kspec/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spectral toolkit for the linearized non-cutoff Boltzmann operator"};
  app.require_subcommand(1);
  std::string config;
  unsigned long long seed = 0;
  std::string out;

  const char* commands[] = {"assemble", "spectrum", "branches", "gapscan", "propagate",
                            "decay",    "norms",    "nonlinear", "verify-all"};
  for (const char* name : commands) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " command");
    sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "seed for randomized samples (overrides the config)");
    sub->add_option("--out", out, "output directory (overrides the config)");
  }
  app.add_subcommand("schema", "print the configuration JSON schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kspec::kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->get_name() == "schema") {
    std::cout << kspec::config_schema() << "\n";
    return 0;
  }
  kspec::RunOverrides ov;
  ov.command = sub->get_name();
  if (sub->count("--seed")) ov.seed = seed;
  if (sub->count("--out")) ov.out_dir = out;
  if (const char* cache = std::getenv("KSPEC_CACHE"); cache && *cache) ov.cache_dir = cache;
  return kspec::run_guarded(config, ov, std::cout, std::cerr);
}
