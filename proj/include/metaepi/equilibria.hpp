#pragma once

#include "metaepi/condition.hpp"
#include "metaepi/model.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace metaepi {

enum class EquilibriumId {
    Origin,
    E1,
    E2,
    Z1Plus,
    Z1Minus,
    Z2Plus,
    Z2Minus,
    CoexistenceClosedForm,
    CoexistenceNumeric,
};

enum class Provenance { ClosedForm, NewtonSolve };

std::string_view to_string(EquilibriumId id);
std::string_view to_string(Provenance p);

struct Equilibrium {
    State point;
    EquilibriumId identity = EquilibriumId::Origin;
    bool feasible = false;
    Provenance provenance = Provenance::ClosedForm;
    double residual = 0; ///< max-norm of rhs at `point`
    /// E2 at m21 == r1*A: S1 vanishes and the point is E1.
    bool coincides_with_e1 = false;
};

struct FeasibilityReport {
    bool feasible = false;
    std::vector<Condition> conditions;
    std::optional<double> ell;          ///< linear coefficient of the Z1 quadratic
    std::optional<double> h;            ///< linear coefficient of the Z2 quadratic
    std::optional<double> discriminant; ///< of the Z1 or Z2 quadratic
    std::vector<std::string> notes;
};

struct CatalogEntry {
    Equilibrium equilibrium;
    FeasibilityReport feasibility;
};

/// A Z pair whose quadratic has negative discriminant; the points are not emitted.
struct ComplexBranch {
    std::string pair; ///< "Z1" or "Z2"
    FeasibilityReport report;
};

struct ClosedFormCatalog {
    std::vector<CatalogEntry> entries;
    std::vector<ComplexBranch> complex_branches;
};

/// General: {Origin}; Unidirectional: {Origin, E1, E2}; NoInfectedMigration: {Origin, Z1+-, Z2+-,
/// coexistence}. Infeasible points are kept and flagged.
ClosedFormCatalog closed_form_equilibria(const Model& model);

struct E2Feasibility {
    bool feasible = false;
    bool degenerate = false; ///< m21 == r1 A exactly
    Condition condition;
};

E2Feasibility feasibility_E2(const Model& model);

/// Strict linear-coefficient inequality plus a nonnegative discriminant.
FeasibilityReport feasibility_Z1(const Model& model);
FeasibilityReport feasibility_Z2(const Model& model);

CatalogEntry coexistence_closed_form_no_migrate(const Model& model);

/// Diagnostic evaluation of the necessary conditions for general-model coexistence at a candidate.
struct GeneralConditionReport {
    std::optional<double> printed_s1; ///< S1 from the summed balance equations
    std::optional<double> printed_s2; ///< S2 closed expression as published
    std::vector<std::string> diagnostics;

    std::vector<Condition> first_set;
    std::vector<Condition> second_set;
    std::vector<Condition> interval_a; ///< (d2+mu2)/(g1 mu2) < I1 <= (d1+mu1)/(g2 mu1)
    std::vector<Condition> interval_b; ///< (d1+mu1)/(g2 mu1) <= I1 < (d2+mu2)/(g1 mu2)

    struct Pairing {
        std::string name;
        bool holds = false;
    };
    std::vector<Pairing> pairings; ///< every set x interval combination

    bool division_by_zero() const { return !diagnostics.empty(); }
};

GeneralConditionReport general_coexistence_conditions(const State& candidate, const Model& model);

double residual_norm(const State& x, const Model& model);

struct NewtonOptions {
    int max_iterations = 100;
    int max_halvings = 30;
    double tolerance = 1e-12;
};

struct NewtonResult {
    bool converged = false;
    bool singular = false;
    State point;
    double residual = 0;
    int iterations = 0;
};

/// Damped Newton on rhs = 0 with the analytic Jacobian.
NewtonResult newton_solve(const Model& model, const State& seed, const NewtonOptions& options = {});

enum class SeedFailureKind { NoConvergence, SingularJacobian };

struct SeedFailure {
    State seed;
    SeedFailureKind kind = SeedFailureKind::NoConvergence;
};

struct NumericSolveResult {
    std::vector<Equilibrium> roots;
    std::vector<SeedFailure> failures;
    std::size_t discarded_infeasible = 0;
};

/// Seeds must be strictly positive. Roots are deduplicated, sorted by identity then point, and
/// tagged with the closed-form identity they coincide with (CoexistenceNumeric otherwise).
NumericSolveResult solve_coexistence_numeric(const Model& model, std::span<const State> seeds);

inline constexpr double kDefaultSeedValues[] = {0.5, 1.5, 5.0};

/// Tensor grid over the given per-component values.
std::vector<State> seed_grid(std::span<const double> values = kDefaultSeedValues);

/// Orders by identity, then lexicographically by point.
void sort_equilibria(std::vector<Equilibrium>& eqs);

} // namespace metaepi
