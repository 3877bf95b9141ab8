#include "metaepi/equilibria.hpp"
#include "metaepi/verification.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace metaepi;

namespace {

const CatalogEntry* find(const ClosedFormCatalog& c, EquilibriumId id)
{
    for (const auto& e : c.entries) {
        if (e.equilibrium.identity == id) return &e;
    }
    return nullptr;
}

void expect_point(const State& got, const State& want, double tol)
{
    EXPECT_NEAR(got.s1, want.s1, tol);
    EXPECT_NEAR(got.i1, want.i1, tol);
    EXPECT_NEAR(got.s2, want.s2, tol);
    EXPECT_NEAR(got.i2, want.i2, tol);
}

Model unidirectional(double m21)
{
    ParameterSet p = unidirectional_fixture();
    p.m21 = m21;
    return validate(p, Variant::Unidirectional);
}

ParameterSet no_migrate_coexistence()
{
    ParameterSet p = symmetric_fixture();
    p.n12 = p.n21 = 0;
    return p;
}

} // namespace

TEST(Catalog, GeneralHasOnlyOrigin)
{
    const auto c = closed_form_equilibria(validate(symmetric_fixture(), Variant::General));
    ASSERT_EQ(c.entries.size(), 1u);
    EXPECT_EQ(c.entries[0].equilibrium.identity, EquilibriumId::Origin);
    EXPECT_TRUE(c.entries[0].equilibrium.feasible);
}

TEST(Catalog, UnidirectionalBoundaryEquilibria)
{
    const auto c = closed_form_equilibria(unidirectional(2));
    ASSERT_EQ(c.entries.size(), 3u);
    const auto* e1 = find(c, EquilibriumId::E1);
    const auto* e2 = find(c, EquilibriumId::E2);
    ASSERT_TRUE(e1 && e2);
    expect_point(e1->equilibrium.point, State{0, 0, 1.5, 1.5}, 1e-15);
    EXPECT_EQ(e1->equilibrium.point.s1, 0);
    EXPECT_EQ(e1->equilibrium.point.i1, 0);
    expect_point(e2->equilibrium.point, State{1, 0, 1.5, 2.5}, 1e-14);
    EXPECT_TRUE(e2->equilibrium.feasible);
    EXPECT_FALSE(e2->equilibrium.coincides_with_e1);
    EXPECT_LT(e2->equilibrium.residual, 1e-9);
}

TEST(Catalog, E2InfeasibleBelowThreshold)
{
    ParameterSet p = unidirectional_fixture();
    p.A = 5;
    const Model m = validate(p, Variant::Unidirectional);
    const auto f = feasibility_E2(m);
    EXPECT_FALSE(f.feasible);
    EXPECT_EQ(f.condition.lhs, 1);
    EXPECT_EQ(f.condition.rhs, 5);
    const auto* e2 = find(closed_form_equilibria(m), EquilibriumId::E2);
    ASSERT_TRUE(e2);
    EXPECT_FALSE(e2->equilibrium.feasible);
    EXPECT_LT(e2->equilibrium.point.s1, 0);
}

TEST(Catalog, E2DegenerateAtThreshold)
{
    const Model m = unidirectional(1);
    const auto f = feasibility_E2(m);
    EXPECT_TRUE(f.feasible);
    EXPECT_TRUE(f.degenerate);
    const auto* e2 = find(closed_form_equilibria(m), EquilibriumId::E2);
    ASSERT_TRUE(e2);
    EXPECT_TRUE(e2->equilibrium.coincides_with_e1);
    EXPECT_EQ(e2->equilibrium.point.s1, 0);
    EXPECT_FALSE(e2->feasibility.notes.empty());
}

TEST(Catalog, E2VerdictMatchesSignOfS1)
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const Model m = validate(random_parameters(rng, Variant::Unidirectional), Variant::Unidirectional);
        const auto* e2 = find(closed_form_equilibria(m), EquilibriumId::E2);
        ASSERT_TRUE(e2);
        EXPECT_EQ(feasibility_E2(m).feasible, e2->equilibrium.point.s1 >= 0);
    }
}

TEST(Catalog, Z1Pair)
{
    const Model m = validate(z1_fixture(), Variant::NoInfectedMigration);
    const auto c = closed_form_equilibria(m);
    const auto* plus = find(c, EquilibriumId::Z1Plus);
    const auto* minus = find(c, EquilibriumId::Z1Minus);
    ASSERT_TRUE(plus && minus);
    ASSERT_TRUE(plus->feasibility.ell.has_value());
    EXPECT_NEAR(*plus->feasibility.ell, 46, 1e-12);
    EXPECT_NEAR(*plus->feasibility.discriminant, 964, 1e-9);
    const double sp = (46 + std::sqrt(964.0)) / 14.4, sm = (46 - std::sqrt(964.0)) / 14.4;
    expect_point(plus->equilibrium.point, State{4, 4 + 0.8 * sp, sp, 0}, 1e-12);
    expect_point(minus->equilibrium.point, State{4, 4 + 0.8 * sm, sm, 0}, 1e-12);
    EXPECT_EQ(plus->equilibrium.point.i2, 0);
    EXPECT_EQ(minus->equilibrium.point.i2, 0);
    EXPECT_TRUE(plus->equilibrium.feasible);
    EXPECT_TRUE(minus->equilibrium.feasible);
    EXPECT_LE(plus->equilibrium.residual, 1e-9);
    EXPECT_LE(minus->equilibrium.residual, 1e-9);

    // Vieta: r2 (A + S1) S2^2 - ell S2 + m21 A S1 = 0
    const auto& p = m.params();
    const double a = p.r2 * (p.A + 4);
    EXPECT_NEAR(sp + sm, 46 / a, 1e-10);
    EXPECT_NEAR(sp * sm, p.m21 * p.A * 4 / a, 1e-10);
}

TEST(Catalog, Z1Feasibility)
{
    const auto f = feasibility_Z1(validate(z1_fixture(), Variant::NoInfectedMigration));
    EXPECT_TRUE(f.feasible);
    ASSERT_FALSE(f.conditions.empty());
    EXPECT_DOUBLE_EQ(f.conditions[0].lhs, 44);
    EXPECT_DOUBLE_EQ(f.conditions[0].rhs, 90);
    EXPECT_EQ(f.conditions[0].relation, Relation::Less);
}

TEST(Catalog, Z2Pair)
{
    const Model m = validate(z2_fixture(), Variant::NoInfectedMigration);
    EXPECT_TRUE(feasibility_Z2(m).feasible);
    const auto c = closed_form_equilibria(m);
    for (auto id : {EquilibriumId::Z2Plus, EquilibriumId::Z2Minus}) {
        const auto* z = find(c, id);
        ASSERT_TRUE(z);
        EXPECT_EQ(z->equilibrium.point.i1, 0);
        EXPECT_EQ(z->equilibrium.point.s2, 4);
        EXPECT_TRUE(z->equilibrium.feasible);
        EXPECT_LT(z->equilibrium.residual, 1e-9);
    }
    EXPECT_NEAR(find(c, EquilibriumId::Z2Plus)->equilibrium.point.s1, 3.59242, 1e-5);
    EXPECT_NEAR(find(c, EquilibriumId::Z2Minus)->equilibrium.point.s1, 1.54646, 1e-5);
}

TEST(Catalog, SymmetricParametersMakeZPairsInfeasible)
{
    const Model m = validate(no_migrate_coexistence(), Variant::NoInfectedMigration);
    EXPECT_FALSE(feasibility_Z1(m).feasible);
    EXPECT_FALSE(feasibility_Z2(m).feasible);
}

TEST(Catalog, NegativeDiscriminantGivesComplexBranch)
{
    // The Z1 fixture already has the Z2 quadratic without real roots.
    const auto c = closed_form_equilibria(validate(z1_fixture(), Variant::NoInfectedMigration));
    ASSERT_EQ(c.complex_branches.size(), 1u);
    EXPECT_EQ(c.complex_branches[0].pair, "Z2");
    ASSERT_TRUE(c.complex_branches[0].report.discriminant.has_value());
    EXPECT_LT(*c.complex_branches[0].report.discriminant, 0);
    EXPECT_EQ(find(c, EquilibriumId::Z2Plus), nullptr);
}

TEST(Coexistence, NoMigrateClosedForm)
{
    const auto e = coexistence_closed_form_no_migrate(validate(no_migrate_coexistence(), Variant::NoInfectedMigration));
    expect_point(e.equilibrium.point, State{1.5, 1.5, 1.5, 1.5}, 1e-15);
    EXPECT_TRUE(e.equilibrium.feasible);
    EXPECT_EQ(e.equilibrium.residual, 0);
}

TEST(Coexistence, ViolatedConditionFlagsNegativeInfected)
{
    ParameterSet p = no_migrate_coexistence();
    p.m21 = 10;
    const auto e = coexistence_closed_form_no_migrate(validate(p, Variant::NoInfectedMigration));
    EXPECT_FALSE(e.equilibrium.feasible);
    EXPECT_LT(e.equilibrium.point.i1, 0);
}

TEST(Coexistence, TwoFormsOfSecondConditionAgree)
{
    std::mt19937_64 rng(11);
    for (int i = 0; i < 300; ++i) {
        const Model m = validate(random_parameters(rng, Variant::NoInfectedMigration), Variant::NoInfectedMigration);
        const auto e = coexistence_closed_form_no_migrate(m);
        const Condition* direct = nullptr;
        const Condition* via_i1 = nullptr;
        for (const auto& c : e.feasibility.conditions) {
            if (c.name.starts_with("I2 >= 0:")) direct = &c;
            if (c.name.starts_with("I2 >= 0 via I1")) via_i1 = &c;
        }
        ASSERT_TRUE(direct && via_i1);
        if (std::abs(direct->lhs - direct->rhs) > 1e-9 * (1 + std::abs(direct->rhs))) {
            EXPECT_EQ(direct->holds, via_i1->holds);
        }
        EXPECT_EQ(direct->holds, e.equilibrium.point.i2 >= 0);
    }
}

TEST(GeneralConditions, SymmetricCandidateDividesByZero)
{
    const auto r = general_coexistence_conditions(State{1.5, 1.5, 1.5, 1.5},
                                                  validate(symmetric_fixture(), Variant::General));
    EXPECT_TRUE(r.division_by_zero());
}

TEST(GeneralConditions, AsymmetricCandidateEvaluatesAllPairings)
{
    ParameterSet p = symmetric_fixture();
    p.r2 = 0.5;
    const auto r = general_coexistence_conditions(State{1.0, 2.0, 1.2, 0.6}, validate(p, Variant::General));
    EXPECT_FALSE(r.division_by_zero());
    EXPECT_FALSE(r.first_set.empty());
    EXPECT_FALSE(r.second_set.empty());
    EXPECT_EQ(r.pairings.size(), 4u);
    for (const auto& c : r.first_set) {
        EXPECT_EQ(c.holds, evaluate(c.lhs, c.relation, c.rhs, c.tolerance));
    }
    ASSERT_FALSE(r.first_set.empty());
    // I1 = 2 exceeds r1 g2 I2 / (r2 g1) = 1.2
    EXPECT_TRUE(r.first_set[0].holds);
}

TEST(GeneralConditions, OriginFailsOrDivides)
{
    const auto r = general_coexistence_conditions(State{}, validate(symmetric_fixture(), Variant::General));
    for (const auto& pairing : r.pairings) {
        EXPECT_FALSE(pairing.holds);
    }
}

TEST(Newton, GeneralSymmetricRoot)
{
    const Model m = validate(symmetric_fixture(), Variant::General);
    const auto r = newton_solve(m, State{1, 1, 1, 1});
    ASSERT_TRUE(r.converged);
    expect_point(r.point, State{1.5, 1.5, 1.5, 1.5}, 1e-10);
    EXPECT_LT(r.residual, 1e-9);
}

TEST(Newton, NumericMatchesNoMigrateClosedForm)
{
    const Model m = validate(no_migrate_coexistence(), Variant::NoInfectedMigration);
    const auto seeds = seed_grid();
    const auto found = solve_coexistence_numeric(m, seeds);
    bool matched = false;
    for (const auto& e : found.roots) {
        EXPECT_LT(e.residual, 1e-9);
        EXPECT_GE(e.point.vec().minCoeff(), -1e-9);
        if (e.identity == EquilibriumId::CoexistenceClosedForm) {
            expect_point(e.point, State{1.5, 1.5, 1.5, 1.5}, 1e-8);
            matched = true;
        }
    }
    EXPECT_TRUE(matched);
}

TEST(Newton, ReproducesFeasibleZ1Points)
{
    const Model m = validate(z1_fixture(), Variant::NoInfectedMigration);
    const auto c = closed_form_equilibria(m);
    for (auto id : {EquilibriumId::Z1Plus, EquilibriumId::Z1Minus}) {
        const State z = find(c, id)->equilibrium.point;
        const std::vector<State> seeds{State{z.s1 * 1.01, z.i1 * 0.99, z.s2 * 1.01, 0.01}};
        const auto found = solve_coexistence_numeric(m, seeds);
        ASSERT_EQ(found.roots.size(), 1u);
        EXPECT_EQ(found.roots[0].identity, id);
        EXPECT_EQ(found.roots[0].provenance, Provenance::NewtonSolve);
        expect_point(found.roots[0].point, z, 1e-8);
    }
}

TEST(Newton, SeedsMustBePositive)
{
    const Model m = validate(symmetric_fixture(), Variant::General);
    const std::vector<State> seeds{State{}};
    try {
        solve_coexistence_numeric(m, seeds);
        FAIL();
    }
    catch (const ModelError& e) {
        EXPECT_EQ(e.code(), ErrorCode::PreconditionViolated);
    }
}

TEST(Newton, ResultsAreSortedAndDeduplicated)
{
    const Model m = validate(symmetric_fixture(), Variant::General);
    const auto seeds = seed_grid();
    const auto found = solve_coexistence_numeric(m, seeds);
    for (std::size_t i = 0; i < found.roots.size(); ++i) {
        for (std::size_t j = i + 1; j < found.roots.size(); ++j) {
            const double d = (found.roots[i].point.vec() - found.roots[j].point.vec()).cwiseAbs().maxCoeff();
            EXPECT_GT(d, 1e-6);
        }
    }
    auto sorted = found.roots;
    sort_equilibria(sorted);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        EXPECT_EQ(sorted[i].point, found.roots[i].point);
    }
}

TEST(SeedGrid, DefaultTensorGrid)
{
    const auto seeds = seed_grid();
    EXPECT_EQ(seeds.size(), 81u);
    EXPECT_EQ(seeds.front(), (State{0.5, 0.5, 0.5, 0.5}));
    EXPECT_EQ(seeds.back(), (State{5, 5, 5, 5}));
}

TEST(ConditionEval, Relations)
{
    EXPECT_TRUE(evaluate(1, Relation::Less, 2));
    EXPECT_FALSE(evaluate(2, Relation::Less, 2));
    EXPECT_TRUE(evaluate(2, Relation::LessEqual, 2));
    EXPECT_TRUE(evaluate(3, Relation::Greater, 2));
    EXPECT_TRUE(evaluate(2, Relation::GreaterEqual, 2));
    EXPECT_TRUE(evaluate(1.0, Relation::Equal, 1.0 + 1e-12, 1e-9));
    EXPECT_FALSE(evaluate(1.0, Relation::Equal, 1.1, 1e-9));
}
