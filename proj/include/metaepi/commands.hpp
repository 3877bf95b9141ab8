#pragma once

#include "metaepi/scenario.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace metaepi {

inline constexpr const char* kToolName = "metaepi";
inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int {
    ExitOk = 0,
    ExitConfigError = 2,
    ExitNumericError = 3,
    ExitVerificationFailure = 4,
};

/// Shortest decimal that parses back to the same double.
std::string format_number(double v);

/// Equilibrium catalog (closed forms + Newton search) with feasibility and stability.
nlohmann::json equilibria_json(const Model& model, const ScenarioConfig& cfg);

nlohmann::json scan_json(const HopfScanResult& scan);

/// Each command writes its files into `out_dir` (created if needed) and returns an ExitCode.
/// Diagnostics go to `log`.
int cmd_simulate(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_equilibria(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_scan(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_verify(std::ostream& out);

} // namespace metaepi
