#include "metaepi/verification.hpp"

#include "metaepi/dynamics.hpp"
#include "metaepi/equilibria.hpp"
#include "metaepi/linearization.hpp"
#include "metaepi/stability.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace metaepi {

namespace {

constexpr Variant kVariants[] = {Variant::General, Variant::Unidirectional, Variant::NoInfectedMigration};

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double max_abs_diff(const State& a, const State& b)
{
    return (a.vec() - b.vec()).cwiseAbs().maxCoeff();
}

/// Greedy one-to-one matching of `expected` against `spectrum`; returns the worst scaled distance.
double match_values(std::vector<std::complex<double>> expected, const EigenSpectrum& spectrum)
{
    std::vector<std::complex<double>> pool(spectrum.values.begin(), spectrum.values.end());
    double worst = 0;
    for (const auto& e : expected) {
        auto best = std::min_element(pool.begin(), pool.end(), [&](auto a, auto b) {
            return std::abs(a - e) < std::abs(b - e);
        });
        worst = std::max(worst, std::abs(*best - e) / (1.0 + std::abs(e)));
        pool.erase(best);
    }
    return worst;
}

CriterionResult result(int id, std::string name, std::string tolerance)
{
    CriterionResult r;
    r.id        = id;
    r.name      = std::move(name);
    r.tolerance = std::move(tolerance);
    return r;
}

const Equilibrium* find_entry(const ClosedFormCatalog& cat, EquilibriumId id)
{
    for (const auto& e : cat.entries) {
        if (e.equilibrium.identity == id) {
            return &e.equilibrium;
        }
    }
    return nullptr;
}

bool all_hold(const std::vector<Condition>& cs)
{
    return !cs.empty() && std::all_of(cs.begin(), cs.end(), [](const Condition& c) { return c.holds; });
}

Equilibrium polished_equilibrium(const State& near, const Model& model)
{
    const auto nr = newton_solve(model, near);
    Equilibrium e;
    e.point      = State::from(nr.point.vec().cwiseMax(0.0));
    e.residual   = residual_norm(e.point, model);
    e.feasible   = true;
    e.provenance = Provenance::NewtonSolve;
    e.identity   = EquilibriumId::CoexistenceNumeric;
    for (const auto& entry : closed_form_equilibria(model).entries) {
        if (max_abs_diff(entry.equilibrium.point, e.point) <= 1e-6 * (1 + e.point.vec().cwiseAbs().maxCoeff())) {
            e.identity = entry.equilibrium.identity;
        }
    }
    return e;
}

// Shared body of the two one-patch-disease-free fixtures.
CriterionResult check_z_fixture(int id, const char* name, const ParameterSet& params, bool z1)
{
    auto r = result(id, name, "residual < 1e-9, branch value 1e-4, simulated infected < 1e-8");
    const Model model = validate(params, Variant::NoInfectedMigration);
    const auto cat    = closed_form_equilibria(model);
    const auto* plus  = find_entry(cat, z1 ? EquilibriumId::Z1Plus : EquilibriumId::Z2Plus);
    const auto* minus = find_entry(cat, z1 ? EquilibriumId::Z1Minus : EquilibriumId::Z2Minus);
    if (!plus || !minus) {
        r.detail = "branch pair missing from the catalog";
        return r;
    }

    std::ostringstream d;
    bool ok = true;
    if (z1) {
        const double expected_plus = (46 + std::sqrt(964.0)) / 14.4, expected_minus = (46 - std::sqrt(964.0)) / 14.4;
        ok = ok && plus->point.s1 == 4 && minus->point.s1 == 4;
        ok = ok && std::abs(plus->point.s2 - 5.3506) < 1e-4 && std::abs(minus->point.s2 - 1.0383) < 1e-4;
        ok = ok && std::abs(plus->point.s2 - expected_plus) < 1e-12 && std::abs(minus->point.s2 - expected_minus) < 1e-12;
        d << "S1=4, S2+=" << fmt(plus->point.s2) << ", S2-=" << fmt(minus->point.s2);
    }
    else {
        ok = ok && plus->point.s2 == 4 && minus->point.s2 == 4;
        ok = ok && std::abs(plus->point.s1 - 3.5924) < 1e-4 && std::abs(minus->point.s1 - 1.5464) < 1e-4;
        d << "S2=4, S1+=" << fmt(plus->point.s1) << ", S1-=" << fmt(minus->point.s1);
    }
    ok = ok && plus->residual < 1e-9 && minus->residual < 1e-9 && plus->feasible && minus->feasible;

    const Equilibrium* stable = nullptr;
    for (const auto* e : {plus, minus}) {
        const auto rep = classify(*e, model);
        if (rep.verdict == Verdict::Stable && all_hold(rep.analytic_checks) && rep.agreement &&
            rep.analytic_stable.value_or(false)) {
            stable = e;
        }
        d << "; " << to_string(e->identity) << " " << to_string(rep.verdict)
          << " max_re=" << fmt(rep.spectrum.max_real_part);
    }
    if (!stable) {
        r.detail = d.str() + "; no branch stable with all criterion conditions";
        return r;
    }

    // Nearby positive start, with a small seed of infection in the disease-free patch.
    State x0     = stable->point;
    x0.s1       *= 1.05;
    x0.s2       *= 0.95;
    (z1 ? x0.i2 : x0.i1) = 1e-3;
    (z1 ? x0.i1 : x0.i2) *= 1.05;
    const auto traj   = integrate(x0, model, 200.0);
    const State end   = traj.states.back();
    const double inf0 = z1 ? end.i2 : end.i1;
    const double dist = max_abs_diff(end, stable->point);
    d << "; simulated end distance " << fmt(dist) << ", disease-free infected " << fmt(inf0);
    r.passed = ok && inf0 < 1e-8 && dist < 1e-6;
    r.detail = d.str();
    return r;
}

} // namespace

ParameterSet random_parameters(std::mt19937_64& rng, Variant variant)
{
    std::uniform_real_distribution<double> u(std::log(0.1), std::log(10.0));
    ParameterSet p;
    for (const auto& f : parameter_fields()) {
        p.*f.member = std::exp(u(rng));
    }
    if (variant == Variant::Unidirectional) {
        p.m12 = p.n12 = 0;
    }
    if (variant == Variant::NoInfectedMigration) {
        p.n12 = p.n21 = 0;
    }
    return p;
}

State random_state(std::mt19937_64& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return {std::exp(u(rng)), std::exp(u(rng)), std::exp(u(rng)), std::exp(u(rng))};
}

ParameterSet symmetric_fixture()
{
    ParameterSet p;
    p.r1 = p.r2 = 1;
    p.gamma1 = p.gamma2 = 1;
    p.delta1 = p.delta2 = 0.5;
    p.mu1 = p.mu2 = 1;
    p.m12 = p.m21 = 1;
    p.n12 = p.n21 = 1;
    p.A = 1;
    p.B = 10;
    return p;
}

ParameterSet z1_fixture()
{
    ParameterSet p;
    p.r1 = 1, p.r2 = 0.8, p.gamma1 = 0.5, p.gamma2 = 1, p.delta1 = 1, p.delta2 = 4;
    p.mu1 = 1, p.mu2 = 2, p.m21 = 2, p.m12 = 10, p.A = 5;
    return p;
}

ParameterSet z2_fixture()
{
    ParameterSet p;
    p.r1 = 0.8, p.r2 = 1, p.gamma1 = 1, p.gamma2 = 0.5, p.delta1 = 4, p.delta2 = 1;
    p.mu1 = 2, p.mu2 = 1, p.m21 = 9, p.m12 = 2, p.A = 5;
    return p;
}

ParameterSet unidirectional_fixture()
{
    ParameterSet p = symmetric_fixture();
    p.m12 = p.n12 = 0;
    return p;
}

CriterionResult check_origin_instability()
{
    auto r = result(1, "origin instability", "max Re > 1e-9; K coefficients > 0");
    std::mt19937_64 rng(1001);
    int failures = 0, draws = 0;
    double min_re = INFINITY;
    for (Variant v : kVariants) {
        for (int i = 0; i < 200; ++i, ++draws) {
            const Model model = validate(random_parameters(rng, v), v);
            Equilibrium origin;
            origin.feasible = true;
            const auto rep  = classify(origin, model);
            min_re          = std::min(min_re, rep.spectrum.max_real_part);
            bool ok         = rep.verdict == Verdict::Unstable && rep.spectrum.max_real_part > 1e-9;
            if (v != Variant::NoInfectedMigration) {
                const auto f = origin_factorization(model);
                ok           = ok && f.k[1] > 0 && f.k[2] > 0;
            }
            failures += ok ? 0 : 1;
        }
    }
    r.passed = failures == 0;
    r.detail = std::to_string(draws) + " draws, " + std::to_string(failures) + " failures, smallest max Re " + fmt(min_re);
    return r;
}

CriterionResult check_origin_factorization()
{
    auto r = result(2, "origin factorization", "roots(H) U roots(K) vs spectrum 1e-8; fixture H exact");
    std::mt19937_64 rng(1002);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        const Variant v   = kVariants[i % 3];
        const Model model = validate(random_parameters(rng, v), v);
        const auto f      = origin_factorization(model);
        const auto hr     = quadratic_roots(f.h[1], f.h[2]);
        const auto kr     = quadratic_roots(f.k[1], f.k[2]);
        const auto spec   = eigenvalues(jacobian_analytic(State{}, model));
        worst             = std::max(worst, match_values({hr[0], hr[1], kr[0], kr[1]}, spec));
    }
    const auto fixture = origin_factorization(validate(symmetric_fixture(), Variant::General));
    const bool exact   = fixture.h[0] == 1 && fixture.h[1] == 0 && fixture.h[2] == -1;
    r.passed           = worst < 1e-8 && exact;
    r.detail = "worst scaled root distance " + fmt(worst) + "; fixture H = (" + fmt(fixture.h[0]) + ", " +
               fmt(fixture.h[1]) + ", " + fmt(fixture.h[2]) + ")";
    return r;
}

CriterionResult check_general_endemic_convergence()
{
    auto r = result(3, "general endemic convergence", "1e-6");
    const Model model = validate(symmetric_fixture(), Variant::General);
    const auto seeds  = seed_grid();
    const auto search = solve_coexistence_numeric(model, seeds);
    const State expected{1.5, 1.5, 1.5, 1.5};
    const Equilibrium* root = nullptr;
    for (const auto& e : search.roots) {
        if (e.point.vec().minCoeff() > 0 && max_abs_diff(e.point, expected) < 1e-6) {
            root = &e;
        }
    }
    const auto traj = integrate(State{1, 1, 1, 1}, model, 200.0);
    const double d  = max_abs_diff(traj.states.back(), expected);
    if (!root) {
        r.detail = "numeric search did not return the symmetric root; trajectory end distance " + fmt(d);
        return r;
    }
    const auto spec = eigenvalues(jacobian_analytic(root->point, model));
    r.passed        = d < 1e-6 && spec.max_real_part < 0 && max_abs_diff(traj.states.back(), root->point) < 1e-6;
    r.detail = "trajectory end distance " + fmt(d) + ", root distance " + fmt(max_abs_diff(root->point, expected)) +
               ", max Re " + fmt(spec.max_real_part);
    return r;
}

CriterionResult check_z1_fixture()
{
    return check_z_fixture(4, "Z1 fixture", z1_fixture(), true);
}

CriterionResult check_z2_fixture()
{
    return check_z_fixture(5, "Z2 fixture", z2_fixture(), false);
}

CriterionResult check_no_migrate_coexistence()
{
    auto r = result(6, "no-migrate coexistence", "closed form vs Newton 1e-8; feasibility sides 1e-12");
    ParameterSet p    = symmetric_fixture();
    p.n12 = p.n21 = 0;
    const Model model = validate(p, Variant::NoInfectedMigration);
    const auto entry  = coexistence_closed_form_no_migrate(model);
    const State expected{1.5, 1.5, 1.5, 1.5};
    const double closed_err = max_abs_diff(entry.equilibrium.point, expected);

    const auto seeds  = seed_grid();
    const auto search = solve_coexistence_numeric(model, seeds);
    double numeric_err = INFINITY;
    for (const auto& e : search.roots) {
        numeric_err = std::min(numeric_err, max_abs_diff(e.point, entry.equilibrium.point));
    }

    bool sides = entry.feasibility.feasible;
    std::ostringstream d;
    for (const auto& c : entry.feasibility.conditions) {
        if (c.name.starts_with("I1 >= 0:") || c.name.starts_with("I2 >= 0:")) {
            sides = sides && c.holds && std::abs(c.lhs - 2.1) < 1e-12 && std::abs(c.rhs - 0.6) < 1e-12;
        }
        d << c.name << ": " << fmt(c.lhs) << " " << to_string(c.relation) << " " << fmt(c.rhs) << "; ";
    }
    r.passed = closed_err < 1e-12 && numeric_err < 1e-8 && sides;
    d << "closed-form error " << fmt(closed_err) << ", Newton distance " << fmt(numeric_err);
    r.detail = d.str();
    return r;
}

CriterionResult check_e2_never_stable()
{
    auto r = result(7, "E2 never stable when feasible", "lambda2 > 0, verdict Unstable");
    std::mt19937_64 rng(1007);
    int draws = 0, failures = 0, attempts = 0;
    while (draws < 200 && attempts < 100000) {
        ++attempts;
        const ParameterSet p = random_parameters(rng, Variant::Unidirectional);
        if (!(p.m21 > p.r1 * p.A)) {
            continue;
        }
        ++draws;
        const Model model = validate(p, Variant::Unidirectional);
        const auto* e2    = find_entry(closed_form_equilibria(model), EquilibriumId::E2);
        const double l2   = p.r1 * (p.m21 - p.r1 * p.A) / p.m21;
        const bool ok = e2 && e2->feasible && l2 > 0 && classify(*e2, model).verdict == Verdict::Unstable;
        failures += ok ? 0 : 1;
    }
    r.passed = draws == 200 && failures == 0;
    r.detail = std::to_string(draws) + " feasible draws, " + std::to_string(failures) + " failures";
    return r;
}

CriterionResult check_e1_threshold()
{
    auto r = result(8, "E1 stability threshold", "outside the marginal band 1e-9*(1+rho)");
    std::mt19937_64 rng(1008);
    int failures = 0, marginal = 0, stable = 0;
    for (int i = 0; i < 200; ++i) {
        const ParameterSet p = random_parameters(rng, Variant::Unidirectional);
        const Model model    = validate(p, Variant::Unidirectional);
        const auto* e1       = find_entry(closed_form_equilibria(model), EquilibriumId::E1);
        const auto rep       = classify(*e1, model);
        if (rep.verdict == Verdict::Marginal) {
            ++marginal;
            continue;
        }
        const bool predicted = p.r1 * p.A < p.m21;
        stable += rep.verdict == Verdict::Stable ? 1 : 0;
        failures += (rep.verdict == Verdict::Stable) == predicted && rep.agreement ? 0 : 1;
    }
    r.passed = failures == 0;
    r.detail = "200 draws, " + std::to_string(stable) + " stable, " + std::to_string(marginal) + " marginal, " +
               std::to_string(failures) + " mismatches";
    return r;
}

CriterionResult check_origin_hopf_exclusion()
{
    auto r = result(9, "origin Hopf exclusion", "vertex value <= 0, strict when m12, m21 > 0");
    std::mt19937_64 rng(1009);
    int failures = 0;
    double worst = -INFINITY;
    for (int i = 0; i < 200; ++i) {
        const Variant v = kVariants[i % 3];
        const auto p    = random_parameters(rng, v);
        const auto c    = origin_hopf_excluded(validate(p, v));
        worst           = std::max(worst, c.vertex_value);
        const bool strict_needed = p.m12 > 0 && p.m21 > 0;
        const bool ok = c.excluded && c.vertex_value <= 0 && (!strict_needed || c.vertex_value < 0) &&
                        std::abs(c.psi_at_vertex - c.vertex_value) <= 1e-12 * (1 + std::abs(c.vertex_value));
        failures += ok ? 0 : 1;
    }
    r.passed = failures == 0;
    r.detail = "200 draws, largest vertex value " + fmt(worst) + ", " + std::to_string(failures) + " failures";
    return r;
}

CriterionResult check_jacobian()
{
    auto r = result(10, "Jacobian correctness", "relative entry error < 1e-5");
    std::mt19937_64 rng(1010);
    double worst       = 0;
    bool block_zero    = true;
    for (int i = 0; i < 100; ++i) {
        const Variant v   = kVariants[i % 3];
        const Model model = validate(random_parameters(rng, v), v);
        const State x     = random_state(rng);
        const Matrix4 ja  = jacobian_analytic(x, model);
        const Matrix4 jf  = jacobian_fd(x, model);
        const double floor_ = 1e-3 * std::max(ja.cwiseAbs().maxCoeff(), 1e-300);
        for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
                worst = std::max(worst, std::abs(ja(a, b) - jf(a, b)) / std::max(std::abs(ja(a, b)), floor_));
            }
        }
        if (v == Variant::Unidirectional) {
            block_zero = block_zero && (ja.block<2, 2>(0, 2).array() == 0).all();
        }
    }
    r.passed = worst < 1e-5 && block_zero;
    r.detail = "worst relative error " + fmt(worst) + (block_zero ? ", unidirectional upper-right block zero"
                                                                  : ", unidirectional upper-right block NOT zero");
    return r;
}

CriterionResult check_invariants()
{
    auto r = result(11, "invariant suite", "flux 1e-12 relative; orthant -1e-9; steady states never Unstable");
    std::mt19937_64 rng(1011);

    double flux_worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const Variant v   = kVariants[i % 3];
        const auto p      = random_parameters(rng, v);
        const Model model = validate(p, v);
        const State x     = random_state(rng);
        const double total = rhs(x, model).sum();
        const double expected = p.r1 * x.s1 + p.r2 * x.s2 - p.mu1 * x.i1 - p.mu2 * x.i2;
        const double scale    = std::max(1.0, rhs(x, model).cwiseAbs().sum() + std::abs(expected));
        flux_worst            = std::max(flux_worst, std::abs(total - expected) / scale);
    }

    double min_component = INFINITY;
    int integration_errors = 0, steady = 0, inconsistent = 0;
    std::bernoulli_distribution zero(0.2);
    for (int i = 0; i < 100; ++i) {
        const Variant v   = kVariants[i % 3];
        const Model model = validate(random_parameters(rng, v), v);
        State x0          = random_state(rng);
        const bool positive_start = i % 2 == 0;
        if (!positive_start) {
            for (double* c : {&x0.s1, &x0.i1, &x0.s2, &x0.i2}) {
                if (zero(rng)) *c = 0;
            }
        }
        // A patch without infected grows exponentially, so boundary starts get a horizon that
        // stays inside double range for rates up to 10.
        Trajectory traj;
        try {
            traj = integrate(x0, model, positive_start ? 300.0 : 50.0);
        }
        catch (const ModelError&) {
            ++integration_errors;
            continue;
        }
        for (const auto& s : traj.states) {
            min_component = std::min(min_component, s.vec().minCoeff());
        }
        if (!positive_start) {
            continue;
        }
        const auto ss = detect_steady_state(traj, model, 50.0, 1e-7);
        if (!ss.state) {
            continue;
        }
        ++steady;
        const auto e = polished_equilibrium(*ss.state, model);
        if (e.residual < 1e-9 && classify(e, model).verdict == Verdict::Unstable) {
            ++inconsistent;
        }
    }
    r.passed = flux_worst < 1e-12 && min_component >= -1e-9 && integration_errors == 0 && inconsistent == 0;
    r.detail = "flux worst " + fmt(flux_worst) + "; min component " + fmt(min_component) + "; integration errors " +
               std::to_string(integration_errors) + "; steady states " + std::to_string(steady) + ", unstable " +
               std::to_string(inconsistent);
    return r;
}

CriterionResult check_hopf_detector()
{
    auto r = result(12, "Hopf detector validation", "one grid cell; bisection 1e-6 relative");
    const Model model = validate(unidirectional_fixture(), Variant::Unidirectional);
    const ScanPath path{"m21", 1.0, 2.1, 22};
    const auto scan = hopf_scan(model, path);

    const Crossing* analytic = nullptr;
    const Crossing* spectral = nullptr;
    for (const auto& c : scan.crossings) {
        if (c.channel == CrossingChannel::Analytic && c.indicator == "a1") analytic = &c;
        if (c.channel == CrossingChannel::Spectral) spectral = &c;
    }
    if (!analytic || !spectral) {
        r.detail = "expected one crossing per channel, got " + std::to_string(scan.crossings.size()) + " crossings";
        return r;
    }
    const double cell = (path.end - path.start) / path.steps;
    const double gap  = std::abs(analytic->value - spectral->value);
    auto width_ok     = [](const Crossing& c) {
        return c.bisected && (c.upper - c.lower) <= 1e-6 * std::max(std::abs(c.lower), std::abs(c.upper));
    };
    r.passed = scan.channels_agree && gap <= cell && width_ok(*analytic) && width_ok(*spectral) && scan.gaps.empty();
    r.detail = "a1 crossing at m21=" + fmt(analytic->value) + ", complex-pair crossing at m21=" + fmt(spectral->value) +
               ", separation " + fmt(gap) + " (cell " + fmt(cell) + ")";
    return r;
}

std::vector<CriterionResult> run_acceptance()
{
    using Check = CriterionResult (*)();
    const Check checks[] = {check_origin_instability,     check_origin_factorization, check_general_endemic_convergence,
                            check_z1_fixture,             check_z2_fixture,           check_no_migrate_coexistence,
                            check_e2_never_stable,        check_e1_threshold,         check_origin_hopf_exclusion,
                            check_jacobian,               check_invariants,           check_hopf_detector};
    std::vector<CriterionResult> out;
    int id = 1;
    for (Check c : checks) {
        try {
            out.push_back(c());
        }
        catch (const std::exception& e) {
            CriterionResult r;
            r.id     = id;
            r.name   = "criterion " + std::to_string(id);
            r.detail = std::string("exception: ") + e.what();
            out.push_back(r);
        }
        ++id;
    }
    return out;
}

std::string format_result(const CriterionResult& r)
{
    return "AC" + std::to_string(r.id) + (r.passed ? " PASS " : " FAIL ") + r.name + " (tol: " + r.tolerance +
           ") - " + r.detail;
}

} // namespace metaepi
