#include "metaepi/dynamics.hpp"
#include "metaepi/stability.hpp"
#include "metaepi/verification.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace metaepi;

namespace {

Model general() { return validate(symmetric_fixture(), Variant::General); }

double max_diff(const State& a, const State& b) { return (a.vec() - b.vec()).cwiseAbs().maxCoeff(); }

Trajectory synthetic(double t_end, double dt, double (*signal)(double))
{
    Trajectory t;
    for (double s = 0; s <= t_end + 1e-12; s += dt) {
        const double v = signal(s);
        t.times.push_back(s);
        t.states.push_back(State{v, 1, 2, 3});
    }
    return t;
}

} // namespace

TEST(Integrate, StationaryAtEndemicPoint)
{
    const State eq{1.5, 1.5, 1.5, 1.5};
    const auto traj = integrate(eq, general(), 100.0);
    double drift = 0;
    for (const auto& s : traj.states) drift = std::max(drift, max_diff(s, eq));
    EXPECT_LT(drift, 1e-7);
}

TEST(Integrate, OriginStaysZero)
{
    IntegrateOptions o;
    o.samples = sample_grid(50, 1);
    const auto traj = integrate(State{}, general(), 50.0, o);
    ASSERT_EQ(traj.states.size(), 51u);
    for (const auto& s : traj.states) EXPECT_EQ(s, State{});
}

TEST(Integrate, ConvergesToEndemicPoint)
{
    const auto traj = integrate(State{1, 1, 1, 1}, general(), 200.0);
    EXPECT_EQ(traj.times.back(), 200.0);
    EXPECT_LT(max_diff(traj.states.back(), State{1.5, 1.5, 1.5, 1.5}), 1e-6);
}

TEST(Integrate, DenseOutputHitsRequestedTimes)
{
    IntegrateOptions o;
    o.samples = sample_grid(10, 0.25);
    const auto traj = integrate(State{1, 1, 1, 1}, general(), 10.0, o);
    ASSERT_EQ(traj.times.size(), o.samples.size());
    for (std::size_t i = 0; i < o.samples.size(); ++i) EXPECT_EQ(traj.times[i], o.samples[i]);
}

TEST(Integrate, ExponentialDecayAccuracy)
{
    IntegrateOptions o;
    o.nonnegative = false;
    o.samples = {0.0, 1.0, 2.0};
    const VectorField f = [](double, const Vector4& y) -> Vector4 { return -y; };
    const auto traj = integrate(f, State{1, 2, 3, 4}, 2.0, o);
    EXPECT_NEAR(traj.states.back().s1, std::exp(-2.0), 1e-8);
    EXPECT_NEAR(traj.states.back().i2, 4 * std::exp(-2.0), 1e-8);
    EXPECT_GT(traj.stats.accepted, 0);
}

TEST(Integrate, HarmonicOscillatorDenseOutput)
{
    IntegrateOptions o;
    o.nonnegative = false;
    o.rel_tol = 1e-10;
    o.abs_tol = 1e-12;
    o.samples = sample_grid(10, 0.37);
    const VectorField f = [](double, const Vector4& y) -> Vector4 { return {y[1], -y[0], 0, 0}; };
    const auto traj = integrate(f, State{1, 0, 0, 0}, 10.0, o);
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        EXPECT_NEAR(traj.states[i].s1, std::cos(traj.times[i]), 1e-7);
    }
}

TEST(Integrate, TimesIncreasingAndOrthantPreserved)
{
    const Model m = validate(z1_fixture(), Variant::NoInfectedMigration);
    const auto traj = integrate(State{4.2, 5, 1, 1e-3}, m, 100.0);
    for (std::size_t i = 1; i < traj.times.size(); ++i) EXPECT_GT(traj.times[i], traj.times[i - 1]);
    for (const auto& s : traj.states) EXPECT_GE(s.vec().minCoeff(), -1e-9);
}

TEST(Integrate, TotalPopulationBalance)
{
    const Model m = general();
    const auto& p = m.params();
    const auto traj = integrate(State{0.3, 2, 4, 0.1}, m, 20.0);
    for (const auto& s : traj.states) {
        const double dp = rhs(s, m).sum();
        const double expected = p.r1 * s.s1 + p.r2 * s.s2 - p.mu1 * s.i1 - p.mu2 * s.i2;
        EXPECT_NEAR(dp, expected, 1e-10 * (1 + std::abs(expected)));
    }
}

TEST(Integrate, HalvingTolerancesIsSelfConsistent)
{
    const Model m = general();
    const IntegrateOptions coarse;
    IntegrateOptions fine = coarse;
    fine.rel_tol /= 2;
    fine.abs_tol /= 2;
    const State x0{1, 1, 1, 1};
    const State a = integrate(x0, m, 100.0, coarse).states.back();
    const State b = integrate(x0, m, 100.0, fine).states.back();
    const double scale = std::max(1.0, b.vec().cwiseAbs().maxCoeff());
    EXPECT_LT(max_diff(a, b), coarse.rel_tol * scale);
}

TEST(Integrate, GlobalErrorTracksTolerance)
{
    // Slowly damped oscillation: the endpoint error accumulates to a few tolerances, but scales with it.
    const Model m = validate(unidirectional_fixture(), Variant::Unidirectional);
    const State x0{0.5, 2, 1, 1};
    double previous = INFINITY;
    for (double tol : {1e-6, 1e-7, 1e-8}) {
        IntegrateOptions coarse;
        coarse.rel_tol = tol;
        coarse.abs_tol = tol / 100;
        IntegrateOptions fine = coarse;
        fine.rel_tol /= 2;
        fine.abs_tol /= 2;
        const double d = max_diff(integrate(x0, m, 100.0, coarse).states.back(),
                                  integrate(x0, m, 100.0, fine).states.back());
        EXPECT_LT(d, 5 * tol) << "tol " << tol;
        EXPECT_LT(d, previous);
        previous = d;
    }
}

TEST(Integrate, Preconditions)
{
    try {
        integrate(State{1, -0.5, 1, 1}, general(), 10.0);
        FAIL();
    }
    catch (const ModelError& e) {
        EXPECT_EQ(e.code(), ErrorCode::NegativeState);
    }
    try {
        integrate(State{1, 1, 1, 1}, general(), 0.0);
        FAIL();
    }
    catch (const ModelError& e) {
        EXPECT_EQ(e.code(), ErrorCode::PreconditionViolated);
    }
}

TEST(Integrate, NegativityBeyondToleranceIsAnError)
{
    // Constant negative drift cannot be fixed by shrinking the step.
    const VectorField f = [](double, const Vector4&) -> Vector4 { return {-1, 0, 0, 0}; };
    try {
        integrate(f, State{0, 1, 1, 1}, 1.0);
        FAIL();
    }
    catch (const IntegrationError& e) {
        EXPECT_EQ(e.code(), ErrorCode::NegativityViolation);
        EXPECT_FALSE(e.partial().times.empty());
    }
}

TEST(SampleGrid, IncludesEndpoint)
{
    const auto g = sample_grid(1.0, 0.25);
    ASSERT_EQ(g.size(), 5u);
    EXPECT_EQ(g.front(), 0);
    EXPECT_EQ(g.back(), 1.0);
}

TEST(SteadyState, DetectsEndemicPoint)
{
    const Model m = general();
    IntegrateOptions o;
    o.samples = sample_grid(500, 0.5);
    const auto traj = integrate(State{1, 1, 1, 1}, m, 500.0, o);
    const auto r = detect_steady_state(traj, m, 50, 1e-7);
    ASSERT_TRUE(r.state.has_value());
    EXPECT_LT(max_diff(*r.state, State{1.5, 1.5, 1.5, 1.5}), 1e-7);
    EXPECT_LT(r.variation, 1e-7);
}

TEST(SteadyState, SinusoidIsNotSteady)
{
    const auto traj = synthetic(200, 0.1, [](double t) { return 2 + std::sin(t); });
    const auto r = detect_steady_state(traj, general(), 50, 1e-7);
    EXPECT_FALSE(r.state.has_value());
    EXPECT_GT(r.variation, 1);
}

TEST(SteadyState, TooShortTrajectory)
{
    const auto traj = synthetic(60, 0.5, [](double) { return 1.5; });
    const auto r = detect_steady_state(traj, general(), 50, 1e-7);
    EXPECT_FALSE(r.state.has_value());
    EXPECT_NE(r.diagnostic.find("short"), std::string::npos);
}

TEST(Oscillation, ConstantSignal)
{
    const auto traj = synthetic(100, 0.1, [](double) { return 1.0; });
    const auto r = detect_oscillation(traj, 50);
    EXPECT_FALSE(r.oscillating);
    for (const auto& c : r.components) EXPECT_EQ(c.peaks, 0);
}

TEST(Oscillation, Sinusoid)
{
    const auto traj = synthetic(100, 0.1, [](double t) { return 2 + std::sin(t); });
    const auto r = detect_oscillation(traj, 50);
    EXPECT_TRUE(r.oscillating);
    EXPECT_NEAR(r.components[0].peaks, 8, 1);
    EXPECT_NEAR(r.components[0].period, 2 * std::numbers::pi, 0.05 * 2 * std::numbers::pi);
    EXPECT_EQ(r.components[0].trend, AmplitudeTrend::Sustained);
    EXPECT_FALSE(r.components[1].oscillating);
    EXPECT_NEAR(r.period, 2 * std::numbers::pi, 0.05 * 2 * std::numbers::pi);
}

TEST(Oscillation, DecayingSpiral)
{
    // Stable focus with eigenvalues -0.05 +- i.
    IntegrateOptions o;
    o.nonnegative = false;
    o.samples = sample_grid(100, 0.1);
    const VectorField f = [](double, const Vector4& y) -> Vector4 {
        return {-0.05 * y[0] + y[1], -y[0] - 0.05 * y[1], 0, 0};
    };
    const auto traj = integrate(f, State{1, 0, 0, 0}, 100.0, o);
    const auto r = detect_oscillation(traj, 50);
    EXPECT_FALSE(r.oscillating);
    EXPECT_EQ(r.components[0].trend, AmplitudeTrend::Decaying);
    EXPECT_GE(r.components[0].peaks, 4);
}

TEST(Consistency, SteadyStateIsNeverUnstable)
{
    const Model m = validate(z1_fixture(), Variant::NoInfectedMigration);
    IntegrateOptions o;
    o.samples = sample_grid(300, 0.5);
    const auto traj = integrate(State{4.2, 8, 1.1, 1e-3}, m, 300.0, o);
    const auto ss = detect_steady_state(traj, m, 50, 1e-7);
    ASSERT_TRUE(ss.state.has_value());
    const auto polished = newton_solve(m, *ss.state);
    ASSERT_TRUE(polished.converged);
    Equilibrium e;
    e.point = polished.point;
    e.identity = EquilibriumId::CoexistenceNumeric;
    e.residual = polished.residual;
    EXPECT_NE(classify(e, m).verdict, Verdict::Unstable);
}
