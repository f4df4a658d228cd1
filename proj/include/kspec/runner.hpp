// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "kspec/io.hpp"

namespace kspec {

// Exit codes of the command-line runner.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitAcceptance = 4 };

// JSON Schema (draft 2020-12 subset) every run configuration must satisfy.
const std::string& config_schema();

// Checks a document against config_schema(); throws ConfigError naming the offending path.
void validate_against_schema(const json& doc);

// Schema check, defaults and cross-field checks (hard potential, d, m > d/2, ...).
json resolve_config(const json& raw);

struct RunOverrides {
  std::optional<std::string> command;
  std::optional<unsigned long long> seed;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::filesystem::path> cache_dir;
};

struct RunResult {
  int exit_code = kExitOk;
  std::filesystem::path out_dir;
  json summary = json::object();
};

// Runs one command; module exceptions propagate to the caller.
RunResult run(const json& config, const RunOverrides& ov, std::ostream& log);

// Runs with error handling: ConfigError -> 2, NumericalError -> 3, writes error.json
// (when an output directory is known) and prints the error JSON to err.
int run_guarded(const std::filesystem::path& config_path, const RunOverrides& ov, std::ostream& log, std::ostream& err);

}  // namespace kspec
