#include "metaepi/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace metaepi {

using nlohmann::json;

bool ScenarioConfig::operator==(const ScenarioConfig& o) const
{
    auto same_scan = [](const std::optional<ScanPath>& a, const std::optional<ScanPath>& b) {
        if (a.has_value() != b.has_value()) {
            return false;
        }
        return !a || (a->parameter == b->parameter && a->start == b->start && a->end == b->end &&
                      a->steps == b->steps);
    };
    return variant == o.variant && params == o.params && initial == o.initial && t_end == o.t_end &&
           tol_rel == o.tol_rel && tol_abs == o.tol_abs && sample_dt == o.sample_dt && window == o.window &&
           steady_tol == o.steady_tol && seed_grid == o.seed_grid && same_scan(scan, o.scan);
}

namespace {

const char* const kStateKeys[] = {"S1", "I1", "S2", "I2"};
const char* const kSolverKeys[] = {"t_end", "tol_rel", "tol_abs", "sample_dt", "window", "steady_tol"};
const char* const kScanKeys[] = {"scan_parameter", "scan_start", "scan_end", "scan_steps"};

double number_at(const json& j, const std::string& key)
{
    const auto& v = j.at(key);
    if (!v.is_number()) {
        throw ConfigError("key '" + key + "' must be a number");
    }
    return v.get<double>();
}

bool optional_key(Variant v, std::string_view name)
{
    switch (v) {
    case Variant::General:
        return false;
    case Variant::Unidirectional:
        return name == "m12" || name == "n12";
    case Variant::NoInfectedMigration:
        return name == "n12" || name == "n21" || name == "B";
    }
    return false;
}

double* solver_field(ScenarioConfig& c, std::string_view key)
{
    if (key == "t_end") return &c.t_end;
    if (key == "tol_rel") return &c.tol_rel;
    if (key == "tol_abs") return &c.tol_abs;
    if (key == "sample_dt") return &c.sample_dt;
    if (key == "window") return &c.window;
    if (key == "steady_tol") return &c.steady_tol;
    return nullptr;
}

} // namespace

ScenarioConfig parse_config(const json& j)
{
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    std::set<std::string> known{"variant", "seed_grid"};
    for (const auto& f : parameter_fields()) {
        known.emplace(f.name);
    }
    for (const char* k : kStateKeys) known.emplace(k);
    for (const char* k : kSolverKeys) known.emplace(k);
    for (const char* k : kScanKeys) known.emplace(k);
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown key '" + key + "'");
        }
    }

    ScenarioConfig c;
    if (!j.contains("variant") || !j["variant"].is_string()) {
        throw ConfigError("missing key 'variant' (string)");
    }
    try {
        c.variant = parse_variant(j["variant"].get<std::string>());
    }
    catch (const ModelError& e) {
        throw ConfigError(e.what());
    }

    for (const auto& f : parameter_fields()) {
        const std::string key(f.name);
        if (j.contains(key)) {
            c.params.*f.member = number_at(j, key);
        }
        else if (!optional_key(c.variant, f.name)) {
            throw ConfigError("missing key '" + key + "'");
        }
    }

    double* state[] = {&c.initial.s1, &c.initial.i1, &c.initial.s2, &c.initial.i2};
    for (int i = 0; i < 4; ++i) {
        if (j.contains(kStateKeys[i])) {
            *state[i] = number_at(j, kStateKeys[i]);
        }
    }
    for (const char* k : kSolverKeys) {
        if (j.contains(k)) {
            *solver_field(c, k) = number_at(j, k);
        }
    }
    if (j.contains("seed_grid")) {
        const auto& g = j["seed_grid"];
        if (!g.is_array() || g.empty()) {
            throw ConfigError("key 'seed_grid' must be a non-empty array of numbers");
        }
        c.seed_grid.clear();
        for (const auto& v : g) {
            if (!v.is_number() || !(v.get<double>() > 0)) {
                throw ConfigError("key 'seed_grid' must contain positive numbers");
            }
            c.seed_grid.push_back(v.get<double>());
        }
    }

    int scan_keys = 0;
    for (const char* k : kScanKeys) {
        scan_keys += j.contains(k) ? 1 : 0;
    }
    if (scan_keys != 0 && scan_keys != 4) {
        throw ConfigError("scan keys must be given together: scan_parameter, scan_start, scan_end, scan_steps");
    }
    if (scan_keys == 4) {
        ScanPath s;
        if (!j["scan_parameter"].is_string()) {
            throw ConfigError("key 'scan_parameter' must be a string");
        }
        s.parameter = j["scan_parameter"].get<std::string>();
        ParameterSet probe;
        try {
            parameter_ref(probe, s.parameter);
        }
        catch (const ModelError&) {
            throw ConfigError("scan_parameter '" + s.parameter + "' is not a parameter name");
        }
        s.start = number_at(j, "scan_start");
        s.end   = number_at(j, "scan_end");
        if (!j["scan_steps"].is_number_integer() || j["scan_steps"].get<long>() < 1) {
            throw ConfigError("key 'scan_steps' must be a positive integer");
        }
        s.steps = j["scan_steps"].get<int>();
        c.scan  = s;
    }

    if (!(c.t_end > 0) || !(c.tol_rel > 0) || !(c.tol_abs > 0) || !(c.sample_dt > 0) || !(c.window > 0) ||
        !(c.steady_tol > 0)) {
        throw ConfigError("solver settings must be positive");
    }
    if (!is_finite(c.initial) || c.initial.vec().minCoeff() < 0) {
        throw ConfigError("initial state must be finite and nonnegative");
    }
    return c;
}

ScenarioConfig parse_config_text(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    }
    catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

ScenarioConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path.string() + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

json to_json(const ScenarioConfig& c)
{
    json j;
    j["variant"] = std::string(to_string(c.variant));
    for (const auto& f : parameter_fields()) {
        j[std::string(f.name)] = c.params.*f.member;
    }
    j["S1"] = c.initial.s1;
    j["I1"] = c.initial.i1;
    j["S2"] = c.initial.s2;
    j["I2"] = c.initial.i2;
    j["t_end"]      = c.t_end;
    j["tol_rel"]    = c.tol_rel;
    j["tol_abs"]    = c.tol_abs;
    j["sample_dt"]  = c.sample_dt;
    j["window"]     = c.window;
    j["steady_tol"] = c.steady_tol;
    j["seed_grid"]  = c.seed_grid;
    if (c.scan) {
        j["scan_parameter"] = c.scan->parameter;
        j["scan_start"]     = c.scan->start;
        j["scan_end"]       = c.scan->end;
        j["scan_steps"]     = c.scan->steps;
    }
    return j;
}

std::string canonical_text(const ScenarioConfig& cfg)
{
    return to_json(cfg).dump();
}

std::string config_hash(const ScenarioConfig& cfg)
{
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : canonical_text(cfg)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Model model_of(const ScenarioConfig& cfg)
{
    return validate(cfg.params, cfg.variant);
}

} // namespace metaepi
