#include "metaepi/equilibria.hpp"
#include "metaepi/linearization.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace metaepi {

std::string_view to_string(EquilibriumId id)
{
    switch (id) {
    case EquilibriumId::Origin:
        return "Origin";
    case EquilibriumId::E1:
        return "E1";
    case EquilibriumId::E2:
        return "E2";
    case EquilibriumId::Z1Plus:
        return "Z1Plus";
    case EquilibriumId::Z1Minus:
        return "Z1Minus";
    case EquilibriumId::Z2Plus:
        return "Z2Plus";
    case EquilibriumId::Z2Minus:
        return "Z2Minus";
    case EquilibriumId::CoexistenceClosedForm:
        return "CoexistenceClosedForm";
    case EquilibriumId::CoexistenceNumeric:
        return "CoexistenceNumeric";
    }
    return "Unknown";
}

std::string_view to_string(Provenance p)
{
    return p == Provenance::ClosedForm ? "ClosedForm" : "NewtonSolve";
}

double residual_norm(const State& x, const Model& model)
{
    return rhs(x, model).cwiseAbs().maxCoeff();
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool nonnegative(const State& x)
{
    return x.s1 >= 0 && x.i1 >= 0 && x.s2 >= 0 && x.i2 >= 0;
}

void require_variant(const Model& model, Variant v, const char* op)
{
    if (model.variant() != v) {
        throw ModelError(ErrorCode::PreconditionViolated,
                         std::string(op) + " requires variant " + std::string(to_string(v)));
    }
}

Equilibrium closed_form(const State& x, EquilibriumId id, bool predicate, const Model& model)
{
    Equilibrium e;
    e.point      = x;
    e.identity   = id;
    e.provenance = Provenance::ClosedForm;
    e.residual   = residual_norm(x, model);
    e.feasible   = predicate && nonnegative(x);
    return e;
}

CatalogEntry origin_entry(const Model& model)
{
    FeasibilityReport r;
    r.feasible = true;
    r.notes.push_back("origin is always an equilibrium");
    return {closed_form(State{}, EquilibriumId::Origin, true, model), r};
}

// Roots of a*x^2 - lin*x + c0 = 0 written as (lin +- sqrt(lin^2 - 4 a c0)) / (2a).
struct QuadraticBranches {
    double lin, disc, plus, minus;
};

QuadraticBranches branches(double lin, double a, double c0)
{
    QuadraticBranches q{lin, lin * lin - 4 * a * c0, kNaN, kNaN};
    if (q.disc >= 0) {
        const double root = std::sqrt(q.disc);
        q.plus            = (lin + root) / (2 * a);
        q.minus           = (lin - root) / (2 * a);
    }
    return q;
}

QuadraticBranches z1_quadratic(const ParameterSet& p)
{
    const double S1  = (p.delta1 + p.mu1) / p.gamma1;
    const double ell = p.m12 * p.A + p.m12 * S1 - p.r2 * p.A * p.A - p.r2 * p.A * S1 - p.m21 * S1;
    return branches(ell, p.r2 * (p.A + S1), p.m21 * p.A * S1);
}

QuadraticBranches z2_quadratic(const ParameterSet& p)
{
    const double S2 = (p.delta2 + p.mu2) / p.gamma2;
    const double h  = p.m21 * p.A + p.m21 * S2 - p.m12 * S2 - p.r1 * p.A * p.A - p.r1 * p.A * S2;
    return branches(h, p.r1 * (p.A + S2), p.m12 * p.A * S2);
}

} // namespace

E2Feasibility feasibility_E2(const Model& model)
{
    require_variant(model, Variant::Unidirectional, "feasibility_E2");
    const auto& p = model.params();
    E2Feasibility f;
    f.condition  = make_condition("E2 feasible: m21 >= r1*A", p.m21, Relation::GreaterEqual, p.r1 * p.A);
    f.feasible   = f.condition.holds;
    f.degenerate = p.m21 == p.r1 * p.A;
    return f;
}

FeasibilityReport feasibility_Z1(const Model& model)
{
    require_variant(model, Variant::NoInfectedMigration, "feasibility_Z1");
    const auto& p   = model.params();
    const double S1 = (p.delta1 + p.mu1) / p.gamma1;
    const auto q    = z1_quadratic(p);

    FeasibilityReport r;
    r.ell          = q.lin;
    r.discriminant = q.disc;
    r.conditions.push_back(make_condition("Z1: m21*S1 + r2*A^2 + r2*A*S1 < m12*A + m12*S1",
                                          p.m21 * S1 + p.r2 * p.A * p.A + p.r2 * p.A * S1, Relation::Less,
                                          p.m12 * p.A + p.m12 * S1));
    r.conditions.push_back(make_condition("Z1: discriminant >= 0", q.disc, Relation::GreaterEqual, 0.0));
    r.feasible = r.conditions[0].holds && r.conditions[1].holds;
    return r;
}

FeasibilityReport feasibility_Z2(const Model& model)
{
    require_variant(model, Variant::NoInfectedMigration, "feasibility_Z2");
    const auto& p   = model.params();
    const double S2 = (p.delta2 + p.mu2) / p.gamma2;
    const auto q    = z2_quadratic(p);

    FeasibilityReport r;
    r.h            = q.lin;
    r.discriminant = q.disc;
    r.conditions.push_back(make_condition("Z2: m12*S2 + r1*A^2 + r1*A*S2 < m21*A + m21*S2",
                                          p.m12 * S2 + p.r1 * p.A * p.A + p.r1 * p.A * S2, Relation::Less,
                                          p.m21 * p.A + p.m21 * S2));
    r.conditions.push_back(make_condition("Z2: discriminant >= 0", q.disc, Relation::GreaterEqual, 0.0));
    r.feasible = r.conditions[0].holds && r.conditions[1].holds;
    return r;
}

CatalogEntry coexistence_closed_form_no_migrate(const Model& model)
{
    require_variant(model, Variant::NoInfectedMigration, "coexistence_closed_form_no_migrate");
    const auto& p   = model.params();
    const double S1 = (p.delta1 + p.mu1) / p.gamma1;
    const double S2 = (p.delta2 + p.mu2) / p.gamma2;
    const double out1 = p.m21 * S1 / (p.A + S1);
    const double in1  = p.m12 * S2 / (p.A + S2);
    // gamma1*S1 - delta1 == mu1 at this S1.
    const double I1 = (p.r1 * S1 - out1 + in1) / p.mu1;
    const double I2_numerator =
        p.r1 * p.gamma2 * (p.delta1 + p.mu1) + p.r2 * p.gamma1 * (p.delta2 + p.mu2) - I1 * p.gamma1 * p.gamma2 * p.mu1;
    const double I2 = I2_numerator / (p.gamma1 * p.gamma2 * p.mu2);

    FeasibilityReport r;
    r.conditions.push_back(
        make_condition("I1 >= 0: r1*S1 + m12*S2/(A+S2) >= m21*S1/(A+S1)", p.r1 * S1 + in1, Relation::GreaterEqual,
                       out1));
    r.conditions.push_back(
        make_condition("I2 >= 0: r2*S2 + m21*S1/(A+S1) >= m12*S2/(A+S2)", p.r2 * S2 + out1, Relation::GreaterEqual,
                       in1));
    r.conditions.push_back(make_condition(
        "I2 >= 0 via I1: I1 <= (r1*g2*(d1+mu1) + r2*g1*(d2+mu2)) / (g1*g2*mu1)", I1, Relation::LessEqual,
        (p.r1 * p.gamma2 * (p.delta1 + p.mu1) + p.r2 * p.gamma1 * (p.delta2 + p.mu2)) / (p.gamma1 * p.gamma2 * p.mu1)));
    r.feasible = r.conditions[0].holds && r.conditions[1].holds;
    if (r.conditions[1].holds != r.conditions[2].holds) {
        r.notes.push_back("the two forms of I2 >= 0 disagree (rounding at the boundary)");
    }
    return {closed_form({S1, I1, S2, I2}, EquilibriumId::CoexistenceClosedForm, r.feasible, model), r};
}

ClosedFormCatalog closed_form_equilibria(const Model& model)
{
    const auto& p = model.params();
    ClosedFormCatalog cat;
    cat.entries.push_back(origin_entry(model));

    if (model.variant() == Variant::Unidirectional) {
        const double S2 = (p.delta2 + p.mu2) / p.gamma2;
        {
            FeasibilityReport r;
            r.feasible = true;
            r.notes.push_back("E1 is always feasible");
            const double I2 = p.r2 * (p.delta2 + p.mu2) / (p.gamma2 * p.mu2);
            cat.entries.push_back({closed_form({0, 0, S2, I2}, EquilibriumId::E1, true, model), r});
        }
        {
            const auto f    = feasibility_E2(model);
            const double S1 = (p.m21 - p.r1 * p.A) / p.r1;
            const double I2 = (p.gamma2 * (p.m21 - p.r1 * p.A) + p.r2 * (p.delta2 + p.mu2)) / (p.gamma2 * p.mu2);
            FeasibilityReport r;
            r.feasible = f.feasible;
            r.conditions.push_back(f.condition);
            auto e = closed_form({S1, 0, S2, I2}, EquilibriumId::E2, f.feasible, model);
            if (f.degenerate) {
                e.point.s1          = 0.0;
                e.coincides_with_e1 = true;
                r.notes.push_back("m21 == r1*A: S1 = 0 and E2 coincides with E1");
            }
            cat.entries.push_back({e, r});
        }
    }
    else if (model.variant() == Variant::NoInfectedMigration) {
        {
            auto r          = feasibility_Z1(model);
            const auto q    = z1_quadratic(p);
            const double S1 = (p.delta1 + p.mu1) / p.gamma1;
            if (q.disc < 0) {
                r.notes.push_back("complex branches: Z1 pair omitted");
                cat.complex_branches.push_back({"Z1", r});
            }
            else {
                for (auto [id, S2] : {std::pair{EquilibriumId::Z1Plus, q.plus}, std::pair{EquilibriumId::Z1Minus, q.minus}}) {
                    const double I1 = S1 * p.r1 / p.mu1 + p.r2 * S2 / p.mu1;
                    cat.entries.push_back({closed_form({S1, I1, S2, 0}, id, r.feasible, model), r});
                }
            }
        }
        {
            auto r          = feasibility_Z2(model);
            const auto q    = z2_quadratic(p);
            const double S2 = (p.delta2 + p.mu2) / p.gamma2;
            if (q.disc < 0) {
                r.notes.push_back("complex branches: Z2 pair omitted");
                cat.complex_branches.push_back({"Z2", r});
            }
            else {
                for (auto [id, S1] : {std::pair{EquilibriumId::Z2Plus, q.plus}, std::pair{EquilibriumId::Z2Minus, q.minus}}) {
                    const double I2 = p.r2 * (p.delta2 + p.mu2) / (p.gamma2 * p.mu2) + p.r1 * S1 / p.mu2;
                    cat.entries.push_back({closed_form({S1, 0, S2, I2}, id, r.feasible, model), r});
                }
            }
        }
        cat.entries.push_back(coexistence_closed_form_no_migrate(model));
    }
    return cat;
}

GeneralConditionReport general_coexistence_conditions(const State& x, const Model& model)
{
    require_variant(model, Variant::General, "general_coexistence_conditions");
    const auto& p = model.params();
    const double I1 = x.i1, I2 = x.i2, S2 = x.s2;
    GeneralConditionReport rep;

    auto safe_div = [&](double num, double den, double scale, const std::string& what) -> double {
        if (std::abs(den) <= 1e-14 * scale) {
            rep.diagnostics.push_back("DivisionByZero: " + what);
            return kNaN;
        }
        return num / den;
    };

    rep.printed_s1 = (-p.r2 * S2 + p.mu1 * I1 + p.mu2 * I2) / p.r1;

    const double s2_den = p.r1 * p.gamma2 * I2 - p.r2 * p.gamma1 * I1;
    const double s2_num = p.r1 * ((p.delta1 + p.mu1) * I1 + (p.delta2 + p.mu2) * I2) - p.gamma1 * p.mu1 * I1 * I1 -
                          p.gamma1 * p.mu1 * I1 * I2;
    const double s2 = safe_div(s2_num, s2_den, std::abs(p.r1 * p.gamma2 * I2) + std::abs(p.r2 * p.gamma1 * I1),
                               "r1*g2*I2 - r2*g1*I1 = 0 in the S2 expression");
    if (!std::isnan(s2)) {
        rep.printed_s2 = s2;
    }

    const double i1_bound = p.r1 * p.gamma2 * I2 / (p.r2 * p.gamma1);
    const double s2_bound = (p.mu1 * I1 + p.mu2 * I2) / p.r2;
    const double i2_den   = p.r1 * (p.delta2 + p.mu2) - p.gamma1 * p.mu2 * I1;
    const double i2_bound =
        safe_div(p.gamma1 * p.mu1 * I1 * I1 - p.r1 * (p.delta1 + p.mu1) * I1, i2_den,
                 std::abs(p.r1 * (p.delta2 + p.mu2)) + std::abs(p.gamma1 * p.mu2 * I1),
                 "r1*(d2+mu2) - g1*mu2*I1 = 0 in the I2 bound");

    rep.first_set = {make_condition("I1 > r1*g2*I2/(r2*g1)", I1, Relation::Greater, i1_bound),
                     make_condition("S2 <= (mu1*I1 + mu2*I2)/r2", S2, Relation::LessEqual, s2_bound),
                     make_condition("I2 >= (g1*mu1*I1^2 - r1*(d1+mu1)*I1)/(r1*(d2+mu2) - g1*mu2*I1)", I2,
                                    Relation::GreaterEqual, i2_bound)};
    rep.second_set = {make_condition("I1 < r1*g2*I2/(r2*g1)", I1, Relation::Less, i1_bound),
                      make_condition("S2 <= (mu1*I1 + mu2*I2)/r2", S2, Relation::LessEqual, s2_bound),
                      make_condition("I2 <= (g1*mu1*I1^2 - r1*(d1+mu1)*I1)/(r1*(d2+mu2) - g1*mu2*I1)", I2,
                                     Relation::LessEqual, i2_bound)};

    const double lo_a = (p.delta2 + p.mu2) / (p.gamma1 * p.mu2);
    const double hi_a = (p.delta1 + p.mu1) / (p.gamma2 * p.mu1);
    rep.interval_a    = {make_condition("I1 > (d2+mu2)/(g1*mu2)", I1, Relation::Greater, lo_a),
                         make_condition("I1 <= (d1+mu1)/(g2*mu1)", I1, Relation::LessEqual, hi_a)};
    rep.interval_b    = {make_condition("I1 >= (d1+mu1)/(g2*mu1)", I1, Relation::GreaterEqual, hi_a),
                         make_condition("I1 < (d2+mu2)/(g1*mu2)", I1, Relation::Less, lo_a)};

    auto all = [](const std::vector<Condition>& cs) {
        return std::all_of(cs.begin(), cs.end(), [](const Condition& c) { return c.holds; });
    };
    rep.pairings = {{"first_set+interval_a", all(rep.first_set) && all(rep.interval_a)},
                    {"first_set+interval_b", all(rep.first_set) && all(rep.interval_b)},
                    {"second_set+interval_a", all(rep.second_set) && all(rep.interval_a)},
                    {"second_set+interval_b", all(rep.second_set) && all(rep.interval_b)}};
    return rep;
}

NewtonResult newton_solve(const Model& model, const State& seed, const NewtonOptions& opt)
{
    NewtonResult res;
    Vector4 x = seed.vec();
    Vector4 F = rhs(seed, model);
    double fn = F.cwiseAbs().maxCoeff();

    auto finish = [&](bool converged) {
        res.converged = converged;
        res.point     = State::from(x);
        res.residual  = fn;
        return res;
    };

    for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
        const double xs = 1.0 + x.cwiseAbs().maxCoeff();
        if (fn == 0) {
            return finish(true);
        }
        const Matrix4 J = detail::jacobian_unchecked(State::from(x), model);
        if (!J.allFinite()) {
            return finish(false);
        }
        Eigen::FullPivLU<Matrix4> lu(J);
        if (!lu.isInvertible()) {
            res.singular = true;
            return finish(false);
        }
        const Vector4 dx = -lu.solve(F);

        double lam = 1.0;
        bool accepted = false;
        Vector4 xn, Fn;
        for (int k = 0; k <= opt.max_halvings; ++k, lam *= 0.5) {
            xn = x + lam * dx;
            if (!xn.allFinite()) {
                continue;
            }
            Fn = rhs(State::from(xn), model);
            if (Fn.allFinite() && Fn.cwiseAbs().maxCoeff() <= fn) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Stagnation at rounding level counts as convergence.
            return finish(fn < 1e-9 && dx.cwiseAbs().maxCoeff() <= 1e-10 * xs);
        }
        const double step = (lam * dx).cwiseAbs().maxCoeff();
        x  = xn;
        F  = Fn;
        fn = F.cwiseAbs().maxCoeff();
        const double xs_new = 1.0 + x.cwiseAbs().maxCoeff();
        if (step <= opt.tolerance * xs_new && fn <= opt.tolerance * xs_new * xs_new) {
            ++res.iterations;
            return finish(true);
        }
    }
    return finish(false);
}

std::vector<State> seed_grid(std::span<const double> values)
{
    std::vector<State> seeds;
    for (double a : values) {
        for (double b : values) {
            for (double c : values) {
                for (double d : values) {
                    seeds.push_back({a, b, c, d});
                }
            }
        }
    }
    return seeds;
}

void sort_equilibria(std::vector<Equilibrium>& eqs)
{
    std::stable_sort(eqs.begin(), eqs.end(), [](const Equilibrium& a, const Equilibrium& b) {
        return std::tuple(a.identity, a.point.s1, a.point.i1, a.point.s2, a.point.i2) <
               std::tuple(b.identity, b.point.s1, b.point.i1, b.point.s2, b.point.i2);
    });
}

namespace {

bool close_points(const State& a, const State& b, double rel)
{
    const Vector4 va = a.vec(), vb = b.vec();
    return (va - vb).cwiseAbs().maxCoeff() <= rel * (1.0 + std::max(va.cwiseAbs().maxCoeff(), vb.cwiseAbs().maxCoeff()));
}

} // namespace

NumericSolveResult solve_coexistence_numeric(const Model& model, std::span<const State> seeds)
{
    for (const auto& s : seeds) {
        if (!(s.s1 > 0 && s.i1 > 0 && s.s2 > 0 && s.i2 > 0) || !is_finite(s)) {
            throw ModelError(ErrorCode::PreconditionViolated, "solve_coexistence_numeric: seeds must be strictly positive");
        }
    }
    const auto catalog = closed_form_equilibria(model);

    NumericSolveResult out;
    for (const auto& seed : seeds) {
        auto nr = newton_solve(model, seed);
        if (nr.singular) {
            const State perturbed{seed.s1 * 1.01, seed.i1 * 0.99, seed.s2 * 1.02, seed.i2 * 0.98};
            nr = newton_solve(model, perturbed);
        }
        if (!nr.converged) {
            out.failures.push_back({seed, nr.singular ? SeedFailureKind::SingularJacobian : SeedFailureKind::NoConvergence});
            continue;
        }
        Vector4 v = nr.point.vec();
        if (v.minCoeff() < -1e-9) {
            ++out.discarded_infeasible;
            continue;
        }
        v = v.cwiseMax(0.0);

        Equilibrium e;
        e.point      = State::from(v);
        e.residual   = residual_norm(e.point, model);
        e.provenance = Provenance::NewtonSolve;
        e.feasible   = true;
        e.identity   = EquilibriumId::CoexistenceNumeric;
        if (!(e.residual < 1e-9)) {
            out.failures.push_back({seed, SeedFailureKind::NoConvergence});
            continue;
        }
        for (const auto& entry : catalog.entries) {
            if (close_points(entry.equilibrium.point, e.point, 1e-6)) {
                e.identity          = entry.equilibrium.identity;
                e.coincides_with_e1 = entry.equilibrium.coincides_with_e1;
                break;
            }
        }
        const bool duplicate = std::any_of(out.roots.begin(), out.roots.end(),
                                           [&](const Equilibrium& r) { return close_points(r.point, e.point, 1e-6); });
        if (!duplicate) {
            out.roots.push_back(e);
        }
    }
    sort_equilibria(out.roots);
    return out;
}

} // namespace metaepi
