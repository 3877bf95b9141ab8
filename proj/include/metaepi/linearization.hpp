#pragma once

#include "metaepi/model.hpp"

#include <array>
#include <complex>

namespace metaepi {

/// First/second-order saturation factors of the four corridors at a state.
/// eta*: m21 corridor, theta*: m12, rho*: n21, sigma*: n12. The "1" factor is rate/denominator,
/// the "2" factor is rate/denominator^2.
struct SaturationCoefficients {
    double eta1 = 0, eta2 = 0;
    double theta1 = 0, theta2 = 0;
    double rho1 = 0, rho2 = 0;
    double sigma1 = 0, sigma2 = 0;
};

SaturationCoefficients saturation_coefficients(const State& x, const Model& model);

/// Rows and columns ordered (S1, I1, S2, I2).
Matrix4 jacobian_analytic(const State& x, const Model& model);

/// Central differences; the step for column j is `step * (1 + |x_j|)`.
Matrix4 jacobian_fd(const State& x, const Model& model, double step = 1e-6);

struct EigenSpectrum {
    /// Sorted by decreasing real part, then decreasing imaginary part.
    std::array<std::complex<double>, 4> values{};
    double max_real_part = 0;
    bool has_complex_pair = false;
    /// Largest |det(m - z I)| / (|m|_inf + |z|)^4 over the four values.
    double max_residual = 0;

    double spectral_radius() const;
};

/// Accuracy contract: every reported value has scaled characteristic residual below 1e-8.
EigenSpectrum eigenvalues(const Matrix4& m);

/// Monic quartic (1, c3, c2, c1, c0) of det(lambda I - m), highest power first.
std::array<double, 5> characteristic_poly(const Matrix4& m);

namespace detail {
// Same formulas without the nonnegativity precondition (Newton iterates may leave the orthant).
SaturationCoefficients saturation_unchecked(const State& x, const Model& model);
Matrix4 jacobian_unchecked(const State& x, const Model& model);
} // namespace detail

/// |p(z)| / sum_k |c_k| |z|^k for a real polynomial given highest power first.
template <std::size_t N>
double scaled_poly_residual(const std::array<double, N>& coeffs, std::complex<double> z)
{
    std::complex<double> acc = 0;
    double scale             = 0;
    for (double c : coeffs) {
        acc   = acc * z + c;
        scale = scale * std::abs(z) + std::abs(c);
    }
    return scale > 0 ? std::abs(acc) / scale : 0.0;
}

} // namespace metaepi
