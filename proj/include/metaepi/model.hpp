#pragma once

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace metaepi {

using Vector4 = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;

enum class ErrorCode {
    NegativeParameter,
    ZeroRequiredPositive,
    NonFiniteParameter,
    VariantConflict,
    UnknownParameter,
    NonFiniteState,
    NegativeState,
    NonFiniteResult,
    ConvergenceFailure,
    PreconditionViolated,
    InfeasibleEquilibrium,
    ResidualTooLarge,
    StepSizeUnderflow,
    NegativityViolation,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code. Non-fatal conditions (per-seed Newton failures,
/// complex branches, scan gaps) are returned as data instead.
class ModelError : public std::runtime_error {
public:
    ModelError(ErrorCode code, const std::string& what)
        : std::runtime_error(what)
        , code_(code)
    {
    }
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

enum class Variant { General, Unidirectional, NoInfectedMigration };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

/// Rate and saturation constants. m_ij / n_ij are the maximal rates from patch j into patch i
/// for susceptibles / infected; A and B are the half-saturation constants.
struct ParameterSet {
    double r1 = 0, r2 = 0;
    double gamma1 = 0, gamma2 = 0;
    double delta1 = 0, delta2 = 0;
    double mu1 = 0, mu2 = 0;
    double m12 = 0, m21 = 0;
    double n12 = 0, n21 = 0;
    double A = 0, B = 0;

    bool operator==(const ParameterSet&) const = default;
};

struct ParameterField {
    std::string_view name;
    double ParameterSet::*member;
};

/// Name table in canonical order (used by config I/O and parameter scans).
std::span<const ParameterField> parameter_fields();
double& parameter_ref(ParameterSet& p, std::string_view name);
double parameter_value(const ParameterSet& p, std::string_view name);

struct State {
    double s1 = 0, i1 = 0, s2 = 0, i2 = 0;

    Vector4 vec() const { return {s1, i1, s2, i2}; }
    static State from(const Vector4& v) { return {v[0], v[1], v[2], v[3]}; }
    bool operator==(const State&) const = default;
};

/// Saturated corridor fluxes seen from patch 1. Patch 2 sees the same numbers with in/out swapped.
struct FluxBreakdown {
    double sus_out_1 = 0; ///< m21 S1 / (A + S1 + I1)
    double sus_in_1 = 0;  ///< m12 S2 / (A + S2 + I2)
    double inf_out_1 = 0; ///< n21 I1 / (B + S1 + I1)
    double inf_in_1 = 0;  ///< n12 I2 / (B + S2 + I2)
};

/// A parameter set that passed validation for its variant. Only `validate` constructs one.
class Model {
public:
    const ParameterSet& params() const noexcept { return params_; }
    Variant variant() const noexcept { return variant_; }
    bool infected_migrate() const noexcept { return variant_ != Variant::NoInfectedMigration; }

private:
    friend Model validate(ParameterSet params, Variant variant);
    Model(const ParameterSet& p, Variant v)
        : params_(p)
        , variant_(v)
    {
    }

    ParameterSet params_;
    Variant variant_;
};

Model validate(ParameterSet params, Variant variant);

Vector4 rhs(const State& x, const Model& model);

/// Reaction terms only (births, contagion, recovery, mortality), without any corridor flux.
Vector4 demographic_terms(const State& x, const Model& model);

FluxBreakdown migration_flux(const State& x, const Model& model);

/// demographic + signed fluxes; `rhs` is exactly this sum.
Vector4 assemble(const Vector4& demographic, const FluxBreakdown& flux);

bool is_finite(const State& x);

} // namespace metaepi
