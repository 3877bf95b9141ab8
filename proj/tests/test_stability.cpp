#include "metaepi/stability.hpp"
#include "metaepi/verification.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace metaepi;

namespace {

Model unidirectional(double m21)
{
    ParameterSet p = unidirectional_fixture();
    p.m21 = m21;
    return validate(p, Variant::Unidirectional);
}

Equilibrium entry(const Model& m, EquilibriumId id)
{
    for (const auto& e : closed_form_equilibria(m).entries) {
        if (e.equilibrium.identity == id) return e.equilibrium;
    }
    ADD_FAILURE() << "missing " << to_string(id);
    return {};
}

Equilibrium unidirectional_coexistence(const Model& m)
{
    const auto r = newton_solve(m, State{1.5, 1.5, 1.5, 1.5});
    EXPECT_TRUE(r.converged);
    Equilibrium e;
    e.point = r.point;
    e.identity = EquilibriumId::CoexistenceNumeric;
    e.provenance = Provenance::NewtonSolve;
    e.feasible = true;
    e.residual = r.residual;
    return e;
}

} // namespace

TEST(Origin, Factorization)
{
    const auto f = origin_factorization(validate(symmetric_fixture(), Variant::General));
    EXPECT_EQ(f.h, (std::array<double, 3>{1, 0, -1}));
    EXPECT_NEAR(f.k[1], 3.2, 1e-15);
    EXPECT_NEAR(f.k[2], 2.55, 1e-15);
    EXPECT_TRUE(f.explicit_eigenvalues.empty());
    const auto roots = quadratic_roots(f.h[1], f.h[2]);
    EXPECT_EQ(roots[0], std::complex<double>(1, 0));
    EXPECT_EQ(roots[1], std::complex<double>(-1, 0));
}

TEST(Origin, NoMigrateHasExplicitInfectedEigenvalues)
{
    const auto f = origin_factorization(validate(z1_fixture(), Variant::NoInfectedMigration));
    ASSERT_EQ(f.explicit_eigenvalues.size(), 2u);
    EXPECT_EQ(f.explicit_eigenvalues[0], -2);
    EXPECT_EQ(f.explicit_eigenvalues[1], -6);
}

TEST(Origin, AlwaysUnstable)
{
    std::mt19937_64 rng(3);
    for (Variant v : {Variant::General, Variant::Unidirectional, Variant::NoInfectedMigration}) {
        for (int i = 0; i < 50; ++i) {
            const Model m = validate(random_parameters(rng, v), v);
            const auto r = classify(Equilibrium{}, m);
            EXPECT_EQ(r.verdict, Verdict::Unstable);
            EXPECT_TRUE(r.agreement);
        }
    }
}

TEST(Origin, HopfExcluded)
{
    const auto c = origin_hopf_excluded(validate(symmetric_fixture(), Variant::General));
    EXPECT_EQ(c.vertex_r1, 1);
    EXPECT_EQ(c.vertex_value, -1);
    EXPECT_NEAR(c.psi_at_vertex, -1, 1e-15);
    EXPECT_TRUE(c.excluded);

    const auto u = origin_hopf_excluded(unidirectional(1));
    EXPECT_EQ(u.vertex_value, 0);
    EXPECT_TRUE(u.excluded);
}

TEST(BoundaryEquilibria, E1ExplicitSpectrum)
{
    const Model m = unidirectional(2);
    const auto s = explicit_eigen_E1(m);
    int complex_count = 0;
    bool has_minus_one = false, has_minus_1_6 = false;
    for (const auto& z : s.values) {
        if (z.imag() != 0) {
            ++complex_count;
            EXPECT_NEAR(z.real(), -0.25, 1e-15);
        }
        has_minus_one |= z == std::complex<double>(-1, 0);
        has_minus_1_6 |= std::abs(z - std::complex<double>(-1.6, 0)) < 1e-15;
    }
    EXPECT_EQ(complex_count, 2);
    EXPECT_TRUE(has_minus_one);
    EXPECT_TRUE(has_minus_1_6);

    const auto r = classify(entry(m, EquilibriumId::E1), m);
    EXPECT_EQ(r.verdict, Verdict::Stable);
    ASSERT_TRUE(r.analytic_stable.has_value());
    EXPECT_TRUE(*r.analytic_stable);
    EXPECT_TRUE(r.agreement);
}

TEST(BoundaryEquilibria, E1UnstableBelowThreshold)
{
    const Model m = unidirectional(0.5);
    const auto r = classify(entry(m, EquilibriumId::E1), m);
    EXPECT_EQ(r.verdict, Verdict::Unstable);
    EXPECT_FALSE(*r.analytic_stable);
    EXPECT_TRUE(r.agreement);
}

TEST(BoundaryEquilibria, E2Unstable)
{
    const Model m = unidirectional(2);
    const auto s = explicit_eigen_E2(m);
    EXPECT_GT(s.max_real_part, 0);
    const auto r = classify(entry(m, EquilibriumId::E2), m);
    EXPECT_EQ(r.verdict, Verdict::Unstable);
    EXPECT_TRUE(r.agreement);
    for (const auto& ev : r.explicit_eigenvalues) {
        EXPECT_TRUE(ev.present) << ev.name;
    }
}

TEST(BoundaryEquilibria, E2InfeasibleHasNoExplicitSpectrum)
{
    try {
        explicit_eigen_E2(unidirectional(0.5));
        FAIL();
    }
    catch (const ModelError& e) {
        EXPECT_EQ(e.code(), ErrorCode::InfeasibleEquilibrium);
    }
}

TEST(Classify, RejectsNonEquilibrium)
{
    Equilibrium e;
    e.point = State{1, 1, 1, 1};
    e.residual = 0;
    try {
        classify(e, validate(symmetric_fixture(), Variant::General));
        FAIL();
    }
    catch (const ModelError& err) {
        EXPECT_EQ(err.code(), ErrorCode::ResidualTooLarge);
    }
}

TEST(Classify, Z1BranchesAgreeWithSpectrum)
{
    const Model m = validate(z1_fixture(), Variant::NoInfectedMigration);
    const auto minus = classify(entry(m, EquilibriumId::Z1Minus), m);
    EXPECT_EQ(minus.verdict, Verdict::Stable);
    ASSERT_TRUE(minus.cubic.has_value());
    const auto [p2, p1, p0] = *minus.cubic;
    EXPECT_TRUE(routh_hurwitz_cubic(p2, p1, p0));
    EXPECT_TRUE(minus.agreement);
    EXPECT_TRUE(minus.criterion_complete);

    const auto plus = classify(entry(m, EquilibriumId::Z1Plus), m);
    EXPECT_EQ(plus.verdict, Verdict::Unstable);
    EXPECT_TRUE(plus.agreement);
}

TEST(Classify, Z2StableBranch)
{
    const Model m = validate(z2_fixture(), Variant::NoInfectedMigration);
    const auto r = classify(entry(m, EquilibriumId::Z2Minus), m);
    EXPECT_EQ(r.verdict, Verdict::Stable);
    EXPECT_TRUE(r.agreement);
}

TEST(Classify, PrintedCoefficientMismatchIsReported)
{
    const Model m = validate(z1_fixture(), Variant::NoInfectedMigration);
    const auto r = classify(entry(m, EquilibriumId::Z1Minus), m);
    ASSERT_FALSE(r.transcription.empty());
    bool any_mismatch = false;
    for (const auto& t : r.transcription) {
        any_mismatch |= !t.matches;
    }
    EXPECT_TRUE(any_mismatch);
    EXPECT_FALSE(r.notes.empty());
}

TEST(Coexistence, UnidirectionalIndicators)
{
    const Model m = unidirectional(1.2);
    const Equilibrium e = unidirectional_coexistence(m);
    ASSERT_GT(e.point.vec().minCoeff(), 0);
    const auto ind = coex_indicators_unidirectional(e, m);
    EXPECT_GT(ind.a1, 0);
    EXPECT_GT(ind.a0, 0);
    EXPECT_LT(ind.k, 0);
    EXPECT_LT(ind.h, 0);
    EXPECT_NEAR(ind.k, ind.k_block, 1e-12);
    EXPECT_NEAR(ind.h, ind.h_block, 1e-12);
    EXPECT_LT(ind.reconstruction_error, 1e-10);
    EXPECT_EQ(ind.a1_matches_printed, std::abs(ind.a1 - ind.a1_printed) <= 1e-9 * (1 + std::abs(ind.a1)));

    const auto r = classify(e, m);
    EXPECT_EQ(r.verdict, Verdict::Stable);
    EXPECT_TRUE(r.agreement);
    ASSERT_TRUE(r.hopf.has_value());
    EXPECT_FALSE(r.hopf->set1);
    EXPECT_FALSE(r.hopf->set2);
}

TEST(Coexistence, ReconstructionOnRandomFeasibleFixtures)
{
    std::mt19937_64 rng(21);
    int checked = 0;
    for (int i = 0; i < 300 && checked < 40; ++i) {
        const Model m = validate(random_parameters(rng, Variant::Unidirectional), Variant::Unidirectional);
        const auto seeds = seed_grid();
        for (const auto& e : solve_coexistence_numeric(m, seeds).roots) {
            if (e.identity != EquilibriumId::CoexistenceNumeric || e.point.vec().minCoeff() <= 0) continue;
            const auto ind = coex_indicators_unidirectional(e, m);
            EXPECT_LT(ind.reconstruction_error, 1e-10 * (1 + std::abs(ind.k) + std::abs(ind.h)));
            ++checked;
        }
    }
    EXPECT_GT(checked, 5);
}

TEST(Hopf, LiteralConditionSets)
{
    CoexIndicators a;
    a.a1 = 0, a.a0 = 1, a.k = -1, a.h = -1;
    const auto f1 = hopf_conditions(a);
    EXPECT_TRUE(f1.set1);
    EXPECT_FALSE(f1.set2);

    CoexIndicators b;
    b.a1 = 1, b.a0 = 1, b.k = 0, b.h = -1;
    b.lambda34 = {std::complex<double>(0, 1), std::complex<double>(0, -1)};
    const auto f2 = hopf_conditions(b);
    EXPECT_FALSE(f2.set1);
    EXPECT_TRUE(f2.set2);
    EXPECT_TRUE(f2.set2_consistent);

    CoexIndicators c;
    c.a1 = 1, c.a0 = 1, c.k = -1, c.h = -1;
    const auto f3 = hopf_conditions(c);
    EXPECT_FALSE(f3.set1);
    EXPECT_FALSE(f3.set2);
}

TEST(RouthHurwitz, Cubic)
{
    EXPECT_TRUE(routh_hurwitz_cubic(3, 3, 1));
    EXPECT_FALSE(routh_hurwitz_cubic(1, 1, 2));
    EXPECT_FALSE(routh_hurwitz_cubic(1, 1, 1));
    EXPECT_FALSE(routh_hurwitz_cubic(3, 3, -1));
}

TEST(Verdict, MarginalBand)
{
    const auto s = make_spectrum({std::complex<double>(1e-12, 1), std::complex<double>(1e-12, -1),
                                  std::complex<double>(-1, 0), std::complex<double>(-2, 0)});
    EXPECT_EQ(spectral_verdict(s), Verdict::Marginal);
    EXPECT_NEAR(marginal_band(s), 3e-9, 1e-20);
    const auto t = make_spectrum({std::complex<double>(-1e-3, 0), -1.0, -2.0, -3.0});
    EXPECT_EQ(spectral_verdict(t), Verdict::Stable);
}

TEST(Scan, ParameterOutsideBlockHasNoCrossings)
{
    // a1 and a0 depend only on patch-1 quantities; r2 moves patch 2 alone.
    const Model m = unidirectional(1.2);
    const auto scan = hopf_scan(m, ScanPath{"r2", 0.8, 1.2, 8});
    EXPECT_EQ(scan.points.size(), 9u);
    EXPECT_TRUE(scan.gaps.empty());
    EXPECT_TRUE(scan.crossings.empty());
    for (const auto& p : scan.points) {
        EXPECT_FALSE(p.lost);
        EXPECT_NEAR(p.a1, scan.points.front().a1, 1e-9);
    }
}

TEST(Scan, ChannelsAgreeOnCrossing)
{
    const auto scan = hopf_scan(unidirectional(1), ScanPath{"m21", 1.0, 2.1, 22});
    std::vector<Crossing> analytic, spectral;
    for (const auto& c : scan.crossings) {
        (c.channel == CrossingChannel::Analytic ? analytic : spectral).push_back(c);
    }
    ASSERT_EQ(analytic.size(), 1u);
    ASSERT_EQ(spectral.size(), 1u);
    EXPECT_EQ(analytic[0].indicator, "a1");
    EXPECT_TRUE(analytic[0].bisected);
    EXPECT_TRUE(analytic[0].matched);
    EXPECT_NEAR(analytic[0].value, spectral[0].value, 0.05);
    EXPECT_NEAR(analytic[0].value, 1.62539, 1e-4);
    EXPECT_TRUE(scan.channels_agree);
}

TEST(Scan, LeavingFeasibilityGivesGap)
{
    const auto scan = hopf_scan(unidirectional(1), ScanPath{"m21", 1.0, 3.0, 20});
    ASSERT_FALSE(scan.gaps.empty());
    EXPECT_GT(scan.gaps.back().from, 2.4);
    EXPECT_EQ(scan.gaps.back().to, 3.0);
    EXPECT_TRUE(scan.points.back().lost);
    EXPECT_FALSE(scan.discontinuities.empty());
}

TEST(Scan, RequiresUnidirectionalModel)
{
    EXPECT_THROW(hopf_scan(validate(symmetric_fixture(), Variant::General), ScanPath{"m21", 1, 2, 4}), ModelError);
}
