#pragma once

// Command-line front end: verify-bounds, gradcheck, train, eval, sweep.
//
// Exit codes: 0 success, 1 a verification assertion failed or training
// diverged, 2 usage, configuration or input-file errors.

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srcl/config.hpp"

namespace srcl {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kReportSchema = "srcl.report/1";
/// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutDirEnv = "SRCL_OUT_DIR";

/// Provenance block embedded in every report record.
nlohmann::json provenance(const ExperimentConfig& cfg, const std::string& command);

/// One-line CSV comment carrying the same provenance.
std::string provenance_comment(const ExperimentConfig& cfg, const std::string& command);

/// Runs the CLI with the given arguments (args[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace srcl
