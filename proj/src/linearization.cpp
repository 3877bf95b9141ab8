#include "metaepi/linearization.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace metaepi {

namespace {

void require_nonnegative(const State& x, const char* op)
{
    if (!is_finite(x)) {
        throw ModelError(ErrorCode::NonFiniteState, std::string(op) + ": state has non-finite components");
    }
    if (x.s1 < 0 || x.i1 < 0 || x.s2 < 0 || x.i2 < 0) {
        throw ModelError(ErrorCode::NegativeState, std::string(op) + ": state has negative components");
    }
}

} // namespace

SaturationCoefficients detail::saturation_unchecked(const State& x, const Model& model)
{
    const auto& p = model.params();
    SaturationCoefficients c;
    if (model.infected_migrate()) {
        const double d1 = p.A + x.s1 + x.i1;
        const double d2 = p.A + x.s2 + x.i2;
        const double e1 = p.B + x.s1 + x.i1;
        const double e2 = p.B + x.s2 + x.i2;
        c.eta1          = p.m21 / d1;
        c.eta2          = p.m21 / (d1 * d1);
        c.theta1        = p.m12 / d2;
        c.theta2        = p.m12 / (d2 * d2);
        c.rho1          = p.n21 / e1;
        c.rho2          = p.n21 / (e1 * e1);
        c.sigma1        = p.n12 / e2;
        c.sigma2        = p.n12 / (e2 * e2);
    }
    else {
        const double d1 = p.A + x.s1;
        const double d2 = p.A + x.s2;
        c.eta1          = p.m21 / d1;
        c.eta2          = p.m21 / (d1 * d1);
        c.theta1        = p.m12 / d2;
        c.theta2        = p.m12 / (d2 * d2);
    }
    return c;
}

SaturationCoefficients saturation_coefficients(const State& x, const Model& model)
{
    require_nonnegative(x, "saturation_coefficients");
    return detail::saturation_unchecked(x, model);
}

Matrix4 jacobian_analytic(const State& x, const Model& model)
{
    require_nonnegative(x, "jacobian_analytic");
    return detail::jacobian_unchecked(x, model);
}

Matrix4 detail::jacobian_unchecked(const State& x, const Model& model)
{
    const auto& p = model.params();
    const auto c  = saturation_unchecked(x, model);
    const double S1 = x.s1, I1 = x.i1, S2 = x.s2, I2 = x.i2;

    // Infected enter the susceptible-corridor denominators only when they migrate themselves.
    const double w = model.infected_migrate() ? 1.0 : 0.0;

    Matrix4 J;
    J(0, 0) = -p.gamma1 * I1 - c.eta1 + c.eta2 * S1 + p.r1;
    J(0, 1) = -p.gamma1 * S1 + p.delta1 + w * c.eta2 * S1;
    J(0, 2) = c.theta1 - c.theta2 * S2;
    J(0, 3) = -w * c.theta2 * S2;

    J(1, 0) = p.gamma1 * I1 + c.rho2 * I1;
    J(1, 1) = p.gamma1 * S1 - p.delta1 - c.rho1 + c.rho2 * I1 - p.mu1;
    J(1, 2) = -c.sigma2 * I2;
    J(1, 3) = c.sigma1 - c.sigma2 * I2;

    J(2, 0) = c.eta1 - c.eta2 * S1;
    J(2, 1) = -w * c.eta2 * S1;
    J(2, 2) = -p.gamma2 * I2 - c.theta1 + c.theta2 * S2 + p.r2;
    J(2, 3) = -p.gamma2 * S2 + p.delta2 + w * c.theta2 * S2;

    J(3, 0) = -c.rho2 * I1;
    J(3, 1) = c.rho1 - c.rho2 * I1;
    J(3, 2) = p.gamma2 * I2 + c.sigma2 * I2;
    J(3, 3) = p.gamma2 * S2 - p.delta2 - c.sigma1 + c.sigma2 * I2 - p.mu2;
    return J;
}

Matrix4 jacobian_fd(const State& x, const Model& model, double step)
{
    if (!(step > 0)) {
        throw ModelError(ErrorCode::PreconditionViolated, "jacobian_fd: step must be positive");
    }
    const Vector4 x0 = x.vec();
    Matrix4 J;
    for (int j = 0; j < 4; ++j) {
        const double h = step * (1.0 + std::abs(x0[j]));
        Vector4 xp = x0, xm = x0;
        xp[j] += h;
        xm[j] -= h;
        J.col(j) = (rhs(State::from(xp), model) - rhs(State::from(xm), model)) / (xp[j] - xm[j]);
    }
    if (!J.allFinite()) {
        throw ModelError(ErrorCode::NonFiniteResult, "jacobian_fd: non-finite difference quotient");
    }
    return J;
}

std::array<double, 5> characteristic_poly(const Matrix4& m)
{
    // Coefficients of det(lambda I - m) are signed sums of principal minors.
    double minors2 = 0;
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            minors2 += m(i, i) * m(j, j) - m(i, j) * m(j, i);
        }
    }
    double minors3 = 0;
    for (int skip = 0; skip < 4; ++skip) {
        int idx[3];
        for (int k = 0, n = 0; k < 4; ++k) {
            if (k != skip) {
                idx[n++] = k;
            }
        }
        Eigen::Matrix3d sub;
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                sub(a, b) = m(idx[a], idx[b]);
            }
        }
        minors3 += sub.determinant();
    }
    return {1.0, -m.trace(), minors2, -minors3, m.determinant()};
}

double EigenSpectrum::spectral_radius() const
{
    double r = 0;
    for (const auto& v : values) {
        r = std::max(r, std::abs(v));
    }
    return r;
}

EigenSpectrum eigenvalues(const Matrix4& m)
{
    if (!m.allFinite()) {
        throw ModelError(ErrorCode::NonFiniteResult, "eigenvalues: matrix has non-finite entries");
    }
    Eigen::EigenSolver<Matrix4> solver(m, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw ModelError(ErrorCode::ConvergenceFailure, "eigenvalues: QR iteration did not converge");
    }

    EigenSpectrum s;
    const auto ev = solver.eigenvalues();
    for (int i = 0; i < 4; ++i) {
        s.values[i] = ev[i];
    }
    // Real Schur blocks give exact conjugates; pin them so the pairing survives sorting.
    for (int i = 0; i < 4; ++i) {
        if (s.values[i].imag() > 0) {
            for (int j = 0; j < 4; ++j) {
                if (j != i && s.values[j].imag() < 0 &&
                    std::abs(s.values[j] - std::conj(s.values[i])) <= 1e-12 * (1 + std::abs(s.values[i]))) {
                    s.values[j] = std::conj(s.values[i]);
                    break;
                }
            }
        }
    }
    std::sort(s.values.begin(), s.values.end(), [](auto a, auto b) {
        return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag();
    });

    s.max_real_part    = s.values[0].real();
    s.has_complex_pair = std::any_of(s.values.begin(), s.values.end(), [](auto v) { return v.imag() != 0; });

    // |det(m - zI)| against (|m| + |z|)^4 stays meaningful at multiple roots, where coefficient
    // scaling degenerates (a defective double zero is only resolved to ~sqrt(eps)).
    const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
    const Eigen::Matrix4cd mc = m.cast<std::complex<double>>();
    for (const auto& v : s.values) {
        const double scale = std::pow(norm + std::abs(v), 4);
        if (scale > 0) {
            const double det = std::abs((mc - v * Eigen::Matrix4cd::Identity()).determinant());
            s.max_residual   = std::max(s.max_residual, det / scale);
        }
    }
    if (!(s.max_residual < 1e-8)) {
        throw ModelError(ErrorCode::ConvergenceFailure, "eigenvalues: characteristic residual above 1e-8");
    }
    return s;
}

} // namespace metaepi
