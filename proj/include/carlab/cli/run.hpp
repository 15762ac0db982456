#pragma once

/// \file run.hpp
/// \brief Subcommand dispatch and run-directory layout.

#include <filesystem>
#include <string>
#include <vector>

#include "carlab/cli/checks.hpp"

namespace carlab::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kPass = 0, kValidationError = 1, kAcceptanceFailure = 2 };

/// The five experiment subcommands in order.
const std::vector<std::string>& subcommands();

/// Acceptance criteria run by a subcommand. Every criterion belongs to exactly one.
const std::vector<int>& subcommand_criteria(const std::string& name);

struct RunOutcome {
  std::vector<CheckResult> checks;
  bool pass = false;
};

/// Runs the criteria of `name` and writes config.json, one CSV (and SVG) per
/// table and summary.json into out_dir. Nothing written depends on wall time.
RunOutcome run_subcommand(const std::string& name, const Config& config, const std::filesystem::path& out_dir);

nlohmann::json summary_json(const std::string& name, const Config& config, const RunOutcome& outcome);

}  // namespace carlab::cli
