#include "metaepi/model.hpp"

#include <array>
#include <cmath>

namespace metaepi {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::NegativeParameter:
        return "NegativeParameter";
    case ErrorCode::ZeroRequiredPositive:
        return "ZeroRequiredPositive";
    case ErrorCode::NonFiniteParameter:
        return "NonFiniteParameter";
    case ErrorCode::VariantConflict:
        return "VariantConflict";
    case ErrorCode::UnknownParameter:
        return "UnknownParameter";
    case ErrorCode::NonFiniteState:
        return "NonFiniteState";
    case ErrorCode::NegativeState:
        return "NegativeState";
    case ErrorCode::NonFiniteResult:
        return "NonFiniteResult";
    case ErrorCode::ConvergenceFailure:
        return "ConvergenceFailure";
    case ErrorCode::PreconditionViolated:
        return "PreconditionViolated";
    case ErrorCode::InfeasibleEquilibrium:
        return "InfeasibleEquilibrium";
    case ErrorCode::ResidualTooLarge:
        return "ResidualTooLarge";
    case ErrorCode::StepSizeUnderflow:
        return "StepSizeUnderflow";
    case ErrorCode::NegativityViolation:
        return "NegativityViolation";
    }
    return "Unknown";
}

std::string_view to_string(Variant v)
{
    switch (v) {
    case Variant::General:
        return "General";
    case Variant::Unidirectional:
        return "Unidirectional";
    case Variant::NoInfectedMigration:
        return "NoInfectedMigration";
    }
    return "Unknown";
}

Variant parse_variant(std::string_view name)
{
    for (auto v : {Variant::General, Variant::Unidirectional, Variant::NoInfectedMigration}) {
        if (to_string(v) == name) {
            return v;
        }
    }
    throw ModelError(ErrorCode::VariantConflict, "unknown variant '" + std::string(name) + "'");
}

namespace {

constexpr std::array<ParameterField, 14> kFields{{
    {"r1", &ParameterSet::r1},
    {"r2", &ParameterSet::r2},
    {"gamma1", &ParameterSet::gamma1},
    {"gamma2", &ParameterSet::gamma2},
    {"delta1", &ParameterSet::delta1},
    {"delta2", &ParameterSet::delta2},
    {"mu1", &ParameterSet::mu1},
    {"mu2", &ParameterSet::mu2},
    {"m12", &ParameterSet::m12},
    {"m21", &ParameterSet::m21},
    {"n12", &ParameterSet::n12},
    {"n21", &ParameterSet::n21},
    {"A", &ParameterSet::A},
    {"B", &ParameterSet::B},
}};

const ParameterField& find_field(std::string_view name)
{
    for (const auto& f : kFields) {
        if (f.name == name) {
            return f;
        }
    }
    throw ModelError(ErrorCode::UnknownParameter, "unknown parameter '" + std::string(name) + "'");
}

} // namespace

std::span<const ParameterField> parameter_fields()
{
    return kFields;
}

double& parameter_ref(ParameterSet& p, std::string_view name)
{
    return p.*(find_field(name).member);
}

double parameter_value(const ParameterSet& p, std::string_view name)
{
    return p.*(find_field(name).member);
}

Model validate(ParameterSet p, Variant variant)
{
    for (const auto& f : kFields) {
        const double v = p.*(f.member);
        if (!std::isfinite(v)) {
            throw ModelError(ErrorCode::NonFiniteParameter, std::string(f.name) + " is not finite");
        }
        if (v < 0) {
            throw ModelError(ErrorCode::NegativeParameter, std::string(f.name) + " is negative");
        }
    }

    auto forced_zero = [&](std::string_view name) {
        double& v = parameter_ref(p, name);
        if (v != 0) {
            throw ModelError(ErrorCode::VariantConflict,
                             std::string(name) + " must be 0 for variant " + std::string(to_string(variant)));
        }
        v = 0.0; // drops a possible -0.0
    };
    if (variant == Variant::Unidirectional) {
        forced_zero("m12");
        forced_zero("n12");
    }
    else if (variant == Variant::NoInfectedMigration) {
        forced_zero("n12");
        forced_zero("n21");
    }

    std::array<std::string_view, 8> positive{"r1", "r2", "gamma1", "gamma2", "mu1", "mu2", "A", "B"};
    const std::size_t n_positive = variant == Variant::NoInfectedMigration ? 7 : 8;
    for (std::size_t k = 0; k < n_positive; ++k) {
        if (!(parameter_value(p, positive[k]) > 0)) {
            throw ModelError(ErrorCode::ZeroRequiredPositive, std::string(positive[k]) + " must be > 0");
        }
    }
    return Model(p, variant);
}

bool is_finite(const State& x)
{
    return std::isfinite(x.s1) && std::isfinite(x.i1) && std::isfinite(x.s2) && std::isfinite(x.i2);
}

namespace {

FluxBreakdown flux_unchecked(const State& x, const Model& model)
{
    const auto& p = model.params();
    FluxBreakdown f;
    if (model.infected_migrate()) {
        f.sus_out_1 = p.m21 * x.s1 / (p.A + x.s1 + x.i1);
        f.sus_in_1  = p.m12 * x.s2 / (p.A + x.s2 + x.i2);
        f.inf_out_1 = p.n21 * x.i1 / (p.B + x.s1 + x.i1);
        f.inf_in_1  = p.n12 * x.i2 / (p.B + x.s2 + x.i2);
    }
    else {
        f.sus_out_1 = p.m21 * x.s1 / (p.A + x.s1);
        f.sus_in_1  = p.m12 * x.s2 / (p.A + x.s2);
    }
    return f;
}

} // namespace

Vector4 demographic_terms(const State& x, const Model& model)
{
    const auto& p = model.params();
    return {p.r1 * x.s1 - p.gamma1 * x.s1 * x.i1 + p.delta1 * x.i1,
            p.gamma1 * x.s1 * x.i1 - (p.delta1 + p.mu1) * x.i1,
            p.r2 * x.s2 - p.gamma2 * x.s2 * x.i2 + p.delta2 * x.i2,
            p.gamma2 * x.s2 * x.i2 - (p.delta2 + p.mu2) * x.i2};
}

Vector4 assemble(const Vector4& d, const FluxBreakdown& f)
{
    return {d[0] - f.sus_out_1 + f.sus_in_1, d[1] - f.inf_out_1 + f.inf_in_1, d[2] + f.sus_out_1 - f.sus_in_1,
            d[3] + f.inf_out_1 - f.inf_in_1};
}

Vector4 rhs(const State& x, const Model& model)
{
    if (!is_finite(x)) {
        throw ModelError(ErrorCode::NonFiniteState, "rhs: state has non-finite components");
    }
    return assemble(demographic_terms(x, model), flux_unchecked(x, model));
}

FluxBreakdown migration_flux(const State& x, const Model& model)
{
    if (!is_finite(x)) {
        throw ModelError(ErrorCode::NonFiniteState, "migration_flux: state has non-finite components");
    }
    if (x.s1 < 0 || x.i1 < 0 || x.s2 < 0 || x.i2 < 0) {
        throw ModelError(ErrorCode::NegativeState, "migration_flux: state has negative components");
    }
    return flux_unchecked(x, model);
}

} // namespace metaepi
