// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace kspec {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
  nlohmann::json metrics = nlohmann::json::object();
};

struct AcceptanceOptions {
  int N = 6;               // basis degree for the operator-level criteria
  int norms_N = 4;         // basis degree for the norm-equivalence refinement study
  unsigned long long seed = 1;
  std::vector<int> only;   // empty runs all criteria
};

// Runs the acceptance criteria in order; each result is also printed to log
// as one PASS/FAIL line when log is non-null.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt, std::ostream* log = nullptr);

nlohmann::json to_json(const CriterionResult& r);

}  // namespace kspec
