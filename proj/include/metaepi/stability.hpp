#pragma once

#include "metaepi/condition.hpp"
#include "metaepi/equilibria.hpp"
#include "metaepi/linearization.hpp"

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace metaepi {

enum class Verdict { Stable, Unstable, Marginal };

std::string_view to_string(Verdict v);

/// Half-width of the zero band: 1e-9 * (1 + spectral radius).
double marginal_band(const EigenSpectrum& s);
Verdict spectral_verdict(const EigenSpectrum& s);

/// Roots of lambda^2 + b lambda + c, larger real part first.
std::array<std::complex<double>, 2> quadratic_roots(double b, double c);

/// Spectrum assembled from explicitly known eigenvalues (no residual check).
EigenSpectrum make_spectrum(std::array<std::complex<double>, 4> values);

/// Characteristic polynomial at the origin split into the susceptible block H and the infected
/// block K. Coefficients are (1, linear, constant).
struct OriginFactorization {
    std::array<double, 3> h{};
    std::array<double, 3> k{};
    /// NoInfectedMigration only: -delta1-mu1 and -delta2-mu2 (the roots of K there).
    std::vector<double> explicit_eigenvalues;
};

OriginFactorization origin_factorization(const Model& model);

/// Psi(r1) is the Hopf-at-origin condition with r2 eliminated; it is a concave parabola.
struct PsiCheck {
    double vertex_r1 = 0;     ///< m21 / A
    double vertex_value = 0;  ///< -m21 m12 / A^2
    double psi_at_vertex = 0; ///< Psi evaluated from its full expression at vertex_r1
    bool excluded = false;
};

PsiCheck origin_hopf_excluded(const Model& model);

EigenSpectrum explicit_eigen_E1(const Model& model);
/// Throws InfeasibleEquilibrium when m21 < r1 A.
EigenSpectrum explicit_eigen_E2(const Model& model);

/// Unidirectional coexistence: the Jacobian is block lower triangular. a1/a0 describe the patch-1
/// block; k/h describe the patch-2 block (k = trace, h = -det).
struct CoexIndicators {
    double a1 = 0, a0 = 0;
    double k = 0, h = 0;

    double a1_printed = 0, a0_printed = 0;
    bool a1_matches_printed = true, a0_matches_printed = true;

    double k_block = 0; ///< trace of the patch-2 block, should equal k
    double h_block = 0; ///< minus its determinant, should equal h
    std::array<std::complex<double>, 2> lambda34{}; ///< (k +- sqrt(k^2 + 4h)) / 2
    double reconstruction_error = 0; ///< vs eigenvalues of the patch-2 block
};

/// Pure computation at a point; no residual precondition.
CoexIndicators coex_indicators_at(const State& x, const Model& model);

/// Requires a Unidirectional model and an equilibrium with residual < 1e-9.
CoexIndicators coex_indicators_unidirectional(const Equilibrium& eq, const Model& model);

struct HopfFlag {
    bool set1 = false; ///< a1 = 0, a0 > 0, k < 0, h < 0
    bool set2 = false; ///< a1 > 0, a0 > 0, k = 0, h < 0
    std::vector<Condition> set1_conditions;
    std::vector<Condition> set2_conditions;
    /// With k = 0 and h < 0 the reconstructed lambda_{3,4} must be a purely imaginary pair.
    bool set2_consistent = true;
};

inline constexpr double kHopfEqualityTolerance = 1e-9;

HopfFlag hopf_conditions(const CoexIndicators& ind);

/// lambda^3 + p2 lambda^2 + p1 lambda + p0 has all roots in the open left half-plane.
bool routh_hurwitz_cubic(double p2, double p1, double p0);

struct TranscriptionCheck {
    std::string name;
    double printed = 0;
    double derived = 0;
    bool matches = false;
};

struct ExplicitEigenvalue {
    std::string name;
    std::complex<double> value;
    bool present = false; ///< found in the numerical spectrum within 1e-8 relative
};

struct StabilityReport {
    EigenSpectrum spectrum;
    Verdict verdict = Verdict::Unstable;
    double band = 0;

    std::string criterion; ///< empty when no closed criterion exists for this equilibrium
    std::vector<Condition> analytic_checks;
    std::optional<bool> analytic_stable;
    bool criterion_complete = false;
    bool agreement = true;

    std::vector<TranscriptionCheck> transcription;
    std::vector<ExplicitEigenvalue> explicit_eigenvalues;
    std::optional<std::array<double, 3>> cubic; ///< (p2, p1, p0) for Z1 / Z2
    std::optional<CoexIndicators> indicators;
    std::optional<HopfFlag> hopf;
    std::vector<std::string> notes;
};

StabilityReport classify(const Equilibrium& eq, const Model& model);

struct ScanPath {
    std::string parameter;
    double start = 0;
    double end = 0;
    int steps = 0; ///< number of grid intervals; steps + 1 points
};

struct ScanPoint {
    double value = 0;
    bool lost = false;
    State equilibrium;
    double a1 = 0, a0 = 0, k = 0, h = 0;
    double max_real_part = 0;
    std::optional<double> complex_pair_real_part; ///< largest real part among complex pairs
};

enum class CrossingChannel { Analytic, Spectral };

std::string_view to_string(CrossingChannel c);

struct Crossing {
    CrossingChannel channel = CrossingChannel::Analytic;
    std::string indicator; ///< "a1", "k" or "complex_pair"
    std::size_t cell = 0;  ///< crossing lies between grid points cell and cell + 1
    double lower = 0, upper = 0;
    double value = 0;
    bool bisected = false; ///< bracket reached relative width 1e-6
    bool matched = false;  ///< the other channel reports a crossing within one grid cell
    double lower_value = 0, upper_value = 0; ///< indicator at the final bracket ends
};

struct ScanGap {
    double from = 0, to = 0;
};

struct HopfScanResult {
    ScanPath path;
    std::vector<ScanPoint> points;
    std::vector<Crossing> crossings;
    /// Sign changes whose indicator jumps instead of passing through zero, e.g. the largest
    /// complex-pair real part switching to another pair when a pair becomes real.
    std::vector<Crossing> discontinuities;
    std::vector<ScanGap> gaps;
    bool channels_agree = true;
};

HopfScanResult hopf_scan(const Model& model, const ScanPath& path);

} // namespace metaepi
