#include "metaepi/stability.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>

namespace metaepi {

using cplx = std::complex<double>;

std::string_view to_string(Verdict v)
{
    switch (v) {
    case Verdict::Stable:
        return "Stable";
    case Verdict::Unstable:
        return "Unstable";
    case Verdict::Marginal:
        return "Marginal";
    }
    return "Unknown";
}

std::string_view to_string(CrossingChannel c)
{
    return c == CrossingChannel::Analytic ? "analytic" : "spectral";
}

double marginal_band(const EigenSpectrum& s)
{
    return 1e-9 * (1.0 + s.spectral_radius());
}

Verdict spectral_verdict(const EigenSpectrum& s)
{
    const double eps = marginal_band(s);
    if (s.max_real_part < -eps) {
        return Verdict::Stable;
    }
    if (std::abs(s.max_real_part) <= eps) {
        return Verdict::Marginal;
    }
    return Verdict::Unstable;
}

std::array<cplx, 2> quadratic_roots(double b, double c)
{
    const cplx root = std::sqrt(cplx(b * b - 4 * c, 0.0));
    cplx x1         = (-b + root) / 2.0;
    cplx x2         = (-b - root) / 2.0;
    if (x2.real() > x1.real() || (x2.real() == x1.real() && x2.imag() > x1.imag())) {
        std::swap(x1, x2);
    }
    return {x1, x2};
}

EigenSpectrum make_spectrum(std::array<cplx, 4> values)
{
    EigenSpectrum s;
    std::sort(values.begin(), values.end(), [](cplx a, cplx b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });
    s.values           = values;
    s.max_real_part    = values[0].real();
    s.has_complex_pair = std::any_of(values.begin(), values.end(), [](cplx v) { return v.imag() != 0; });
    return s;
}

OriginFactorization origin_factorization(const Model& model)
{
    const auto& p = model.params();
    OriginFactorization f;
    f.h = {1.0, p.m12 / p.A + p.m21 / p.A - p.r1 - p.r2, -p.m12 * p.r1 / p.A - p.m21 * p.r2 / p.A + p.r1 * p.r2};
    // n12 = n21 = 0 under NoInfectedMigration, where K collapses to (l + d1 + mu1)(l + d2 + mu2).
    const double nb12 = model.infected_migrate() ? p.n12 / p.B : 0.0;
    const double nb21 = model.infected_migrate() ? p.n21 / p.B : 0.0;
    f.k               = {1.0, p.delta1 + p.delta2 + p.mu1 + p.mu2 + nb12 + nb21,
                         (p.delta2 + p.mu2) * (p.delta1 + p.mu1 + nb21) + (p.delta1 + p.mu1) * nb12};
    if (model.variant() == Variant::NoInfectedMigration) {
        f.explicit_eigenvalues = {-p.delta1 - p.mu1, -p.delta2 - p.mu2};
    }
    return f;
}

PsiCheck origin_hopf_excluded(const Model& model)
{
    const auto& p = model.params();
    PsiCheck c;
    c.vertex_r1     = p.m21 / p.A;
    c.vertex_value  = -p.m21 * p.m12 / (p.A * p.A);
    const double r1 = c.vertex_r1;
    c.psi_at_vertex = -r1 * r1 + 2 * p.m21 * r1 / p.A - p.m21 / p.A * (p.m12 / p.A + p.m21 / p.A);
    // Psi <= vertex value everywhere; a crossing needs Psi > 0.
    c.excluded = c.vertex_value <= 0;
    return c;
}

namespace {

void require_variant(const Model& model, Variant v, const char* op)
{
    if (model.variant() != v) {
        throw ModelError(ErrorCode::PreconditionViolated,
                         std::string(op) + " requires variant " + std::string(to_string(v)));
    }
}

bool same_value(double printed, double derived)
{
    return std::abs(printed - derived) <= 1e-8 * (1.0 + std::abs(derived));
}

struct E2Point {
    double S1, S2, I2;
};

E2Point e2_point(const ParameterSet& p)
{
    return {(p.m21 - p.r1 * p.A) / p.r1, (p.delta2 + p.mu2) / p.gamma2,
            (p.gamma2 * (p.m21 - p.r1 * p.A) + p.r2 * (p.delta2 + p.mu2)) / (p.gamma2 * p.mu2)};
}

std::array<cplx, 4> e1_values(const ParameterSet& p)
{
    const cplx root = std::sqrt(cplx(p.r2 * p.r2 * p.delta2 * p.delta2 - 4 * p.mu2 * p.mu2 * p.r2 * (p.mu2 + p.delta2), 0));
    return {(-p.r2 * p.delta2 + root) / (2 * p.mu2), (-p.r2 * p.delta2 - root) / (2 * p.mu2),
            cplx((-p.m21 + p.r1 * p.A) / p.A, 0), cplx(-((p.delta1 + p.mu1) * p.B + p.n21) / p.B, 0)};
}

std::array<cplx, 4> e2_values(const ParameterSet& p)
{
    const auto e    = e2_point(p);
    const double tr = p.r2 - p.gamma2 * e.I2;
    const cplx root = std::sqrt(cplx(tr * tr - 4 * p.mu2 * p.gamma2 * e.I2, 0));
    return {cplx(p.gamma1 * e.S1 - p.delta1 - p.mu1 - p.n21 / (p.B + e.S1), 0),
            cplx(p.r1 * (p.m21 - p.r1 * p.A) / p.m21, 0), (tr + root) / 2.0, (tr - root) / 2.0};
}

bool in_spectrum(cplx v, const EigenSpectrum& s)
{
    return std::any_of(s.values.begin(), s.values.end(),
                       [&](cplx w) { return std::abs(v - w) <= 1e-8 * (1.0 + std::abs(v)); });
}

} // namespace

EigenSpectrum explicit_eigen_E1(const Model& model)
{
    require_variant(model, Variant::Unidirectional, "explicit_eigen_E1");
    return make_spectrum(e1_values(model.params()));
}

EigenSpectrum explicit_eigen_E2(const Model& model)
{
    require_variant(model, Variant::Unidirectional, "explicit_eigen_E2");
    const auto& p = model.params();
    if (p.m21 < p.r1 * p.A) {
        throw ModelError(ErrorCode::InfeasibleEquilibrium, "explicit_eigen_E2: m21 < r1*A");
    }
    return make_spectrum(e2_values(p));
}

CoexIndicators coex_indicators_at(const State& x, const Model& model)
{
    const auto& p  = model.params();
    const Matrix4 J = jacobian_analytic(x, model);
    const auto c    = saturation_coefficients(x, model);
    const double S1 = x.s1, I1 = x.i1, S2 = x.s2, I2 = x.i2;

    CoexIndicators ind;
    const Eigen::Matrix2d upper = J.block<2, 2>(0, 0);
    const Eigen::Matrix2d lower = J.block<2, 2>(2, 2);
    ind.a1                      = -upper.trace();
    ind.a0                      = upper.determinant();

    ind.a1_printed = p.gamma1 * I1 + c.eta1 - c.eta2 * S1 - p.r1 - p.gamma1 * S1 + p.delta1 + p.mu1 + c.rho1 -
                     c.rho2 * I1;
    ind.a0_printed = (-p.gamma1 * I1 - c.eta1 + p.r1) * (-p.delta1 - p.mu1 - c.rho1 + c.rho2 * I1) +
                     p.gamma1 * S1 * I1 * (c.rho2 - c.eta2) + c.eta2 * S1 * (p.gamma1 * S1 - p.delta1 - p.mu1 - c.rho1) -
                     p.delta1 * I1 * (p.gamma1 + c.rho2);
    ind.a1_matches_printed = same_value(ind.a1_printed, ind.a1);
    ind.a0_matches_printed = same_value(ind.a0_printed, ind.a0);

    ind.k = -p.gamma2 * I2 - p.delta2 - p.mu2 + p.gamma2 * S2 + p.r2;
    ind.h = p.r2 * p.delta2 + p.r2 * p.mu2 - p.r2 * p.gamma2 * S2 - p.mu2 * p.gamma2 * I2;
    ind.k_block = lower.trace();
    ind.h_block = -lower.determinant();

    const cplx root = std::sqrt(cplx(ind.k * ind.k + 4 * ind.h, 0));
    ind.lambda34    = {(ind.k + root) / 2.0, (ind.k - root) / 2.0};
    const auto block_roots = quadratic_roots(-ind.k_block, -ind.h_block);
    ind.reconstruction_error =
        std::max(std::abs(ind.lambda34[0] - block_roots[0]), std::abs(ind.lambda34[1] - block_roots[1]));
    return ind;
}

CoexIndicators coex_indicators_unidirectional(const Equilibrium& eq, const Model& model)
{
    require_variant(model, Variant::Unidirectional, "coex_indicators_unidirectional");
    if (!(residual_norm(eq.point, model) < 1e-9)) {
        throw ModelError(ErrorCode::ResidualTooLarge, "coex_indicators_unidirectional: residual >= 1e-9");
    }
    return coex_indicators_at(eq.point, model);
}

HopfFlag hopf_conditions(const CoexIndicators& ind)
{
    constexpr double tol = kHopfEqualityTolerance;
    HopfFlag f;
    f.set1_conditions = {make_condition("a1 = 0", ind.a1, Relation::Equal, 0.0, tol),
                         make_condition("a0 > 0", ind.a0, Relation::Greater, 0.0),
                         make_condition("k < 0", ind.k, Relation::Less, 0.0),
                         make_condition("h < 0", ind.h, Relation::Less, 0.0)};
    f.set2_conditions = {make_condition("a1 > 0", ind.a1, Relation::Greater, 0.0),
                         make_condition("a0 > 0", ind.a0, Relation::Greater, 0.0),
                         make_condition("k = 0", ind.k, Relation::Equal, 0.0, tol),
                         make_condition("h < 0", ind.h, Relation::Less, 0.0)};
    auto all = [](const std::vector<Condition>& cs) {
        return std::all_of(cs.begin(), cs.end(), [](const Condition& c) { return c.holds; });
    };
    f.set1 = all(f.set1_conditions);
    f.set2 = all(f.set2_conditions);
    if (f.set2) {
        const cplx root   = std::sqrt(cplx(ind.k * ind.k + 4 * ind.h, 0));
        const cplx l3     = (ind.k + root) / 2.0;
        const cplx l4     = (ind.k - root) / 2.0;
        const double scale = 1.0 + std::abs(l3);
        f.set2_consistent = std::abs(l3.real()) <= tol * scale && std::abs(l4.real()) <= tol * scale &&
                            l3.imag() > 0 && l4 == std::conj(l3);
    }
    return f;
}

bool routh_hurwitz_cubic(double p2, double p1, double p0)
{
    return p0 > 0 && p2 > 0 && p2 * p1 > p0;
}

namespace {

void add_explicit(StabilityReport& r, std::string name, cplx v)
{
    r.explicit_eigenvalues.push_back({std::move(name), v, in_spectrum(v, r.spectrum)});
}

std::array<double, 4> cubic_of(const Matrix4& J, std::array<int, 3> idx)
{
    Eigen::Matrix3d m;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            m(a, b) = J(idx[a], idx[b]);
        }
    }
    double minors2 = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
            minors2 += m(i, i) * m(j, j) - m(i, j) * m(j, i);
        }
    }
    return {1.0, -m.trace(), minors2, -m.determinant()};
}

void origin_criterion(StabilityReport& r, const Model& model)
{
    const auto& p = model.params();
    const auto f  = origin_factorization(model);
    r.criterion   = "origin: Routh-Hurwitz on H with K positive";
    r.analytic_checks = {make_condition("H linear coefficient > 0", f.h[1], Relation::Greater, 0.0),
                         make_condition("H constant coefficient > 0", f.h[2], Relation::Greater, 0.0),
                         make_condition("K linear coefficient > 0", f.k[1], Relation::Greater, 0.0),
                         make_condition("K constant coefficient > 0", f.k[2], Relation::Greater, 0.0)};
    r.criterion_complete = true;
    if (model.variant() == Variant::Unidirectional) {
        add_explicit(r, "r2", p.r2);
        add_explicit(r, "-delta2-mu2", -p.delta2 - p.mu2);
        add_explicit(r, "(r1*A-m21)/A", (p.r1 * p.A - p.m21) / p.A);
        add_explicit(r, "-(delta1*B+n21+mu1*B)/B", -(p.delta1 * p.B + p.n21 + p.mu1 * p.B) / p.B);
    }
    else if (model.variant() == Variant::NoInfectedMigration) {
        add_explicit(r, "-delta1-mu1", f.explicit_eigenvalues[0]);
        add_explicit(r, "-delta2-mu2", f.explicit_eigenvalues[1]);
    }
    for (const auto& root : quadratic_roots(f.h[1], f.h[2])) {
        add_explicit(r, "root of H", root);
    }
}

void e1_criterion(StabilityReport& r, const Model& model)
{
    const auto& p = model.params();
    const auto v  = e1_values(p);
    r.criterion   = "E1: r1*A < m21 with lambda_{1,2} in the left half-plane";
    r.analytic_checks = {make_condition("r1*A < m21", p.r1 * p.A, Relation::Less, p.m21),
                         make_condition("Re lambda_{1,2} = -r2*delta2/(2*mu2) < 0", v[0].real(), Relation::Less, 0.0),
                         make_condition("lambda4 < 0", v[3].real(), Relation::Less, 0.0)};
    r.criterion_complete = true;
    add_explicit(r, "lambda1", v[0]);
    add_explicit(r, "lambda2", v[1]);
    add_explicit(r, "lambda3", v[2]);
    add_explicit(r, "lambda4", v[3]);
}

void e2_criterion(StabilityReport& r, const Model& model)
{
    const auto& p = model.params();
    const auto v  = e2_values(p);
    const auto e  = e2_point(p);
    r.criterion   = "E2: explicit eigenvalues";
    r.analytic_checks = {make_condition("lambda1 < 0", v[0].real(), Relation::Less, 0.0),
                         make_condition("lambda2 = r1*(m21-r1*A)/m21 < 0", v[1].real(), Relation::Less, 0.0),
                         make_condition("Re lambda_{3,4} < 0", v[2].real(), Relation::Less, 0.0)};
    r.criterion_complete = true;
    const double lambda2_unsimplified =
        -p.m21 / (p.A + e.S1) + p.m21 * e.S1 / ((p.A + e.S1) * (p.A + e.S1)) + p.r1;
    r.transcription.push_back(
        {"E2 lambda2 simplified", v[1].real(), lambda2_unsimplified, same_value(v[1].real(), lambda2_unsimplified)});
    add_explicit(r, "lambda1", v[0]);
    add_explicit(r, "lambda2", v[1]);
    add_explicit(r, "lambda3", v[2]);
    add_explicit(r, "lambda4", v[3]);
    if (p.m21 > p.r1 * p.A) {
        r.notes.push_back("lambda2 > 0 whenever E2 is feasible and non-degenerate");
    }
}

void unidirectional_coexistence_criterion(StabilityReport& r, const Equilibrium& eq, const Model& model)
{
    const auto& p   = model.params();
    const auto ind  = coex_indicators_unidirectional(eq, model);
    const double S2 = eq.point.s2, I2 = eq.point.i2;
    r.criterion     = "coexistence: a1 > 0, a0 > 0, patch-2 trace and radicand negative";
    r.analytic_checks = {
        make_condition("a1 > 0", ind.a1, Relation::Greater, 0.0),
        make_condition("a0 > 0", ind.a0, Relation::Greater, 0.0),
        make_condition("g2*S2 + r2 < g2*I2 + d2 + mu2", p.gamma2 * S2 + p.r2, Relation::Less,
                       p.gamma2 * I2 + p.delta2 + p.mu2),
        make_condition("r2*d2 + r2*mu2 < r2*g2*S2 + mu2*g2*I2", p.r2 * p.delta2 + p.r2 * p.mu2, Relation::Less,
                       p.r2 * p.gamma2 * S2 + p.mu2 * p.gamma2 * I2)};
    r.criterion_complete = true;
    r.transcription.push_back({"a1", ind.a1_printed, ind.a1, ind.a1_matches_printed});
    r.transcription.push_back({"a0", ind.a0_printed, ind.a0, ind.a0_matches_printed});
    r.transcription.push_back({"k", ind.k, ind.k_block, same_value(ind.k, ind.k_block)});
    r.transcription.push_back({"h", ind.h, ind.h_block, same_value(ind.h, ind.h_block)});
    for (const auto& v : quadratic_roots(ind.a1, ind.a0)) {
        add_explicit(r, "root of l^2 + a1 l + a0", v);
    }
    add_explicit(r, "lambda3", ind.lambda34[0]);
    add_explicit(r, "lambda4", ind.lambda34[1]);
    r.notes.push_back("h taken as the radicand term r2*d2 + r2*mu2 - r2*g2*S2 - mu2*g2*I2");
    r.hopf       = hopf_conditions(ind);
    r.indicators = ind;
}

void z_criterion(StabilityReport& r, const Equilibrium& eq, const Model& model, bool z1)
{
    const auto& p = model.params();
    const auto c  = saturation_coefficients(eq.point, model);
    const Matrix4 J = jacobian_analytic(eq.point, model);
    const double S1 = eq.point.s1, I1 = eq.point.i1, S2 = eq.point.s2, I2 = eq.point.i2;
    const double g1 = p.gamma1, g2 = p.gamma2, d1 = p.delta1, d2 = p.delta2, r1 = p.r1, r2 = p.r2;

    const auto cub = z1 ? cubic_of(J, {0, 1, 2}) : cubic_of(J, {0, 2, 3});
    const double c2 = cub[1], c1 = cub[2], c0 = cub[3];
    r.cubic         = std::array{c2, c1, c0};

    double printed2, printed1, printed0;
    if (z1) {
        const double T = c.theta1 - c.theta2 * S2;
        printed2 = g1 * I1 - r2 - r1 + c.eta1 - c.eta2 * S1 + T - g1 * S1 + d1 + p.mu1;
        printed1 = g1 * I1 * (g1 * S1 - d1) + T * (g1 * I1 - r1 - g1 * S1 + d1 + p.mu1) +
                   (c.eta1 * S1 + r1 - g1 * I1 - c.eta1) * (r2 + g1 * S1 - d1 - p.mu1) + r2 * (g1 * S1 - d1 - p.mu1);
        printed0 = g1 * I1 * (g1 * S1 - d1) * (T - r2) -
                   (g1 * S1 - d1 - p.mu1) * (r2 * (c.eta2 * S1 + r1 - g1 * I1 - c.eta1) + (g1 * I1 - r1) * T);
    }
    else {
        const double E = -c.eta1 + c.eta2 * S1;
        printed2 = -r2 - r1 + g2 * I2 + c.theta1 - c.theta2 * S2 + c.eta1 - c.eta2 * S1 - g2 * S2 + d2 + p.mu2;
        printed1 = -g2 * I2 * (-g2 * S2 + d2) + E * (-g2 * I2 + r2 + g2 * S2 - d2 - p.mu2) +
                   (-g2 * I2 - c.theta1 + c.theta1 * S2 + r2) * (r1 + g2 * S2 - d2 - p.mu2) +
                   r1 * (g2 * S2 - d2 - p.mu2);
        printed0 = g2 * I2 * (-g2 * S2 + d2) * (E + r1) -
                   (g2 * S2 - d2 - p.mu2) * (r1 * (-g2 * I2 - c.theta1 + c.theta2 * S2 + r2) + (-g2 * I2 + r2) * E);
    }
    const char* sym = z1 ? "p" : "q";
    r.transcription.push_back({std::string(sym) + "2", printed2, c2, same_value(printed2, c2)});
    r.transcription.push_back({std::string(sym) + "1", printed1, c1, same_value(printed1, c1)});
    r.transcription.push_back({std::string(sym) + "0", printed0, c0, same_value(printed0, c0)});

    if (z1) {
        r.criterion = "Z1: explicit eigenvalue negative plus cubic Routh-Hurwitz";
        r.analytic_checks.push_back(
            make_condition("g2*S2 < d2 + mu2", g2 * S2, Relation::Less, d2 + p.mu2));
        add_explicit(r, "g2*S2 - d2 - mu2", g2 * S2 - d2 - p.mu2);
    }
    else {
        r.criterion = "Z2: explicit eigenvalue negative plus cubic Routh-Hurwitz";
        r.analytic_checks.push_back(
            make_condition("g1*S1 < d1 + mu1", g1 * S1, Relation::Less, d1 + p.mu1));
        add_explicit(r, "g1*S1 - d1 - mu1", g1 * S1 - d1 - p.mu1);
    }
    r.analytic_checks.push_back(make_condition(std::string(sym) + "0 > 0", c0, Relation::Greater, 0.0));
    r.analytic_checks.push_back(make_condition(std::string(sym) + "2 > 0", c2, Relation::Greater, 0.0));
    r.analytic_checks.push_back(
        make_condition(std::string(sym) + "2*" + sym + "1 > " + sym + "0", c2 * c1, Relation::Greater, c0));
    r.criterion_complete = true;
}

} // namespace

StabilityReport classify(const Equilibrium& eq, const Model& model)
{
    const double res = residual_norm(eq.point, model);
    if (!(res < 1e-9)) {
        throw ModelError(ErrorCode::ResidualTooLarge, "classify: equilibrium residual >= 1e-9");
    }
    StabilityReport r;
    r.spectrum = eigenvalues(jacobian_analytic(eq.point, model));
    r.verdict  = spectral_verdict(r.spectrum);
    r.band     = marginal_band(r.spectrum);

    const Variant v = model.variant();
    switch (eq.identity) {
    case EquilibriumId::Origin:
        origin_criterion(r, model);
        break;
    case EquilibriumId::E1:
        e1_criterion(r, model);
        break;
    case EquilibriumId::E2:
        e2_criterion(r, model);
        break;
    case EquilibriumId::Z1Plus:
    case EquilibriumId::Z1Minus:
        z_criterion(r, eq, model, true);
        break;
    case EquilibriumId::Z2Plus:
    case EquilibriumId::Z2Minus:
        z_criterion(r, eq, model, false);
        break;
    case EquilibriumId::CoexistenceNumeric:
        if (v == Variant::Unidirectional) {
            unidirectional_coexistence_criterion(r, eq, model);
        }
        break;
    case EquilibriumId::CoexistenceClosedForm:
        break;
    }

    if (r.criterion_complete) {
        const bool stable = std::all_of(r.analytic_checks.begin(), r.analytic_checks.end(),
                                        [](const Condition& c) { return c.holds; });
        r.analytic_stable = stable;
        r.agreement       = r.verdict == Verdict::Marginal || stable == (r.verdict == Verdict::Stable);
    }
    for (const auto& t : r.transcription) {
        if (!t.matches) {
            r.notes.push_back("printed expression for " + t.name + " differs from the Jacobian-derived value");
        }
    }
    for (const auto& e : r.explicit_eigenvalues) {
        if (!e.present) {
            r.notes.push_back("explicit eigenvalue " + e.name + " not found in the spectrum");
        }
    }
    return r;
}

// ---------------------------------------------------------------------------------------------
// Hopf scan

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool interior(const State& x)
{
    const double scale = 1.0 + x.vec().cwiseAbs().maxCoeff();
    return x.vec().minCoeff() > 1e-9 * scale;
}

std::optional<State> track(const Model& model, const std::optional<State>& warm)
{
    if (warm) {
        const auto nr = newton_solve(model, *warm);
        if (nr.converged && nr.residual < 1e-9 && interior(nr.point)) {
            return nr.point;
        }
    }
    const auto seeds = seed_grid();
    const auto found = solve_coexistence_numeric(model, seeds);
    std::optional<State> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (const auto& root : found.roots) {
        if (!interior(root.point)) {
            continue;
        }
        const double d = warm ? (root.point.vec() - warm->vec()).norm() : 0.0;
        if (!best || d < best_dist) {
            best      = root.point;
            best_dist = d;
        }
    }
    return best;
}

std::optional<double> complex_pair_real_part(const EigenSpectrum& s)
{
    std::optional<double> out;
    for (const auto& v : s.values) {
        if (v.imag() != 0 && (!out || v.real() > *out)) {
            out = v.real();
        }
    }
    return out;
}

Model with_value(const Model& base, const std::string& name, double value)
{
    ParameterSet p           = base.params();
    parameter_ref(p, name)   = value;
    return validate(p, base.variant());
}

void evaluate_point(ScanPoint& pt, const Model& model)
{
    const auto ind = coex_indicators_at(pt.equilibrium, model);
    pt.a1          = ind.a1;
    pt.a0          = ind.a0;
    pt.k           = ind.k;
    pt.h           = ind.h;
    const auto s   = eigenvalues(jacobian_analytic(pt.equilibrium, model));
    pt.max_real_part          = s.max_real_part;
    pt.complex_pair_real_part = complex_pair_real_part(s);
}

using Indicator = std::function<double(const ScanPoint&)>;

// Bisects on the sign of `indicator`, re-tracking the equilibrium from the lower bracket end.
Crossing bisect(const Model& base, const ScanPath& path, const ScanPoint& lo_pt, const ScanPoint& hi_pt,
                const Indicator& indicator, Crossing c)
{
    double lo = lo_pt.value, hi = hi_pt.value;
    double lo_val = indicator(lo_pt), hi_val = indicator(hi_pt);
    State lo_state  = lo_pt.equilibrium;
    const bool lo_positive = lo_val > 0;
    c.bisected      = false;
    for (int it = 0; it < 200; ++it) {
        if (std::abs(hi - lo) <= 1e-6 * std::max(std::abs(lo), std::abs(hi))) {
            c.bisected = true;
            break;
        }
        const double mid = 0.5 * (lo + hi);
        const Model m    = with_value(base, path.parameter, mid);
        const auto eq    = track(m, lo_state);
        if (!eq) {
            break;
        }
        ScanPoint pt;
        pt.value       = mid;
        pt.equilibrium = *eq;
        evaluate_point(pt, m);
        const double val = indicator(pt);
        if (std::isnan(val)) {
            break;
        }
        if ((val > 0) == lo_positive) {
            lo       = mid;
            lo_val   = val;
            lo_state = *eq;
        }
        else {
            hi     = mid;
            hi_val = val;
        }
    }
    c.lower       = lo;
    c.upper       = hi;
    c.lower_value = lo_val;
    c.upper_value = hi_val;
    c.value = 0.5 * (lo + hi);
    return c;
}

} // namespace

HopfScanResult hopf_scan(const Model& model, const ScanPath& path)
{
    require_variant(model, Variant::Unidirectional, "hopf_scan");
    if (path.steps < 1 || !std::isfinite(path.start) || !std::isfinite(path.end)) {
        throw ModelError(ErrorCode::PreconditionViolated, "hopf_scan: need steps >= 1 and a finite range");
    }
    HopfScanResult result;
    result.path = path;

    std::vector<Model> models;
    for (int i = 0; i <= path.steps; ++i) {
        const double v = path.start + (path.end - path.start) * i / path.steps;
        models.push_back(with_value(model, path.parameter, v));
        ScanPoint pt;
        pt.value = v;
        result.points.push_back(pt);
    }

    // Sequential warm-started tracking establishes the branch.
    std::optional<State> warm;
    for (std::size_t i = 0; i < result.points.size(); ++i) {
        auto& pt      = result.points[i];
        const auto eq = track(models[i], warm);
        if (!eq) {
            pt.lost = true;
            pt.a1 = pt.a0 = pt.k = pt.h = pt.max_real_part = kNaN;
            continue;
        }
        pt.equilibrium = *eq;
        warm           = *eq;
    }

    // Independent per-point linear algebra.
    std::vector<std::future<void>> jobs;
    for (std::size_t i = 0; i < result.points.size(); ++i) {
        if (!result.points[i].lost) {
            jobs.push_back(std::async(std::launch::async, [&, i] { evaluate_point(result.points[i], models[i]); }));
        }
    }
    for (auto& j : jobs) {
        j.get();
    }

    for (std::size_t i = 0; i < result.points.size(); ++i) {
        if (result.points[i].lost) {
            if (!result.gaps.empty() && result.gaps.back().to == result.points[i - 1].value &&
                result.points[i - 1].lost) {
                result.gaps.back().to = result.points[i].value;
            }
            else {
                result.gaps.push_back({result.points[i].value, result.points[i].value});
            }
        }
    }

    const Indicator a1_of = [](const ScanPoint& p) { return p.a1; };
    const Indicator k_of  = [](const ScanPoint& p) { return p.k; };
    const Indicator cp_of = [](const ScanPoint& p) { return p.complex_pair_real_part.value_or(kNaN); };

    for (std::size_t i = 0; i + 1 < result.points.size(); ++i) {
        const auto& a = result.points[i];
        const auto& b = result.points[i + 1];
        if (a.lost || b.lost) {
            continue;
        }
        auto base_crossing = [&](CrossingChannel ch, const char* name) {
            Crossing c;
            c.channel   = ch;
            c.indicator = name;
            c.cell      = i;
            return c;
        };
        const bool a1_flip = (a.a1 > 0) != (b.a1 > 0);
        const bool k_flip  = (a.k > 0) != (b.k > 0);
        if (a1_flip && a.a0 > 0 && b.a0 > 0 && a.k < 0 && b.k < 0 && a.h < 0 && b.h < 0) {
            result.crossings.push_back(
                bisect(model, path, a, b, a1_of, base_crossing(CrossingChannel::Analytic, "a1")));
        }
        if (k_flip && a.a1 > 0 && b.a1 > 0 && a.a0 > 0 && b.a0 > 0 && a.h < 0 && b.h < 0) {
            result.crossings.push_back(bisect(model, path, a, b, k_of, base_crossing(CrossingChannel::Analytic, "k")));
        }
        if (a.complex_pair_real_part && b.complex_pair_real_part &&
            (*a.complex_pair_real_part > 0) != (*b.complex_pair_real_part > 0)) {
            result.crossings.push_back(
                bisect(model, path, a, b, cp_of, base_crossing(CrossingChannel::Spectral, "complex_pair")));
        }
    }

    // A genuine crossing leaves the indicator near zero on both sides of the final bracket.
    std::vector<Crossing> continuous;
    for (auto& c : result.crossings) {
        const auto& a      = result.points[c.cell];
        const auto& b      = result.points[c.cell + 1];
        const double scale = 1.0 + std::max(std::abs(a.max_real_part), std::abs(b.max_real_part));
        if (c.bisected && std::max(std::abs(c.lower_value), std::abs(c.upper_value)) <= 1e-3 * scale) {
            continuous.push_back(c);
        }
        else {
            result.discontinuities.push_back(c);
        }
    }
    result.crossings = std::move(continuous);

    const double cell_width = std::abs(path.end - path.start) / path.steps;
    for (auto& c : result.crossings) {
        c.matched = std::any_of(result.crossings.begin(), result.crossings.end(), [&](const Crossing& o) {
            return o.channel != c.channel && std::abs(o.value - c.value) <= cell_width;
        });
        result.channels_agree = result.channels_agree && c.matched;
    }
    return result;
}

} // namespace metaepi
