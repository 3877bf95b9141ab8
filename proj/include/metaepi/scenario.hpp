#pragma once

#include "metaepi/model.hpp"
#include "metaepi/stability.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace metaepi {

/// Malformed, incomplete or contradictory scenario file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
    Variant variant = Variant::General;
    ParameterSet params;
    State initial{1, 1, 1, 1};

    double t_end = 500;
    double tol_rel = 1e-8;
    double tol_abs = 1e-10;
    double sample_dt = 0.5;
    double window = 50;
    double steady_tol = 1e-7;
    std::vector<double> seed_grid{0.5, 1.5, 5.0};

    std::optional<ScanPath> scan;

    bool operator==(const ScenarioConfig& o) const;
};

/// Flat object: "variant", the parameter names, "S1".."I2", solver keys and optional
/// "scan_parameter"/"scan_start"/"scan_end"/"scan_steps". Unknown keys are rejected. Parameters
/// pinned to zero by the variant (and B when infected do not migrate) may be omitted.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig parse_config_text(const std::string& text);
ScenarioConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ScenarioConfig& cfg);

/// Canonical text: sorted keys, shortest round-trip numbers.
std::string canonical_text(const ScenarioConfig& cfg);

/// FNV-1a 64 of canonical_text, as 16 hex digits.
std::string config_hash(const ScenarioConfig& cfg);

/// Throws ModelError when the parameters are invalid for the variant.
Model model_of(const ScenarioConfig& cfg);

} // namespace metaepi
