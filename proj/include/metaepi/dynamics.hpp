#pragma once

#include "metaepi/model.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace metaepi {

struct IntegrateOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double initial_step = 0;      ///< 0 picks a step from the initial derivative
    double min_step = 1e-14;      ///< relative to max(1, |t|)
    std::vector<double> samples;  ///< output times; empty means every accepted step
    bool nonnegative = true;      ///< enforce the orthant (off for generic test systems)
};

struct SolverStats {
    long accepted = 0;
    long rejected = 0;
    long negativity_rejections = 0;
    double last_step = 0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<State> states;
    SolverStats stats;
};

/// Thrown on StepSizeUnderflow or NegativityViolation; carries whatever was integrated so far.
class IntegrationError : public ModelError {
public:
    IntegrationError(ErrorCode code, const std::string& what, Trajectory partial)
        : ModelError(code, what)
        , partial_(std::move(partial))
    {
    }
    const Trajectory& partial() const noexcept { return partial_; }

private:
    Trajectory partial_;
};

using VectorField = std::function<Vector4(double, const Vector4&)>;

/// Dormand-Prince 5(4) with FSAL and 4th-order dense output. Components slightly below zero
/// (within abs_tol) are clipped; deeper excursions shrink the step, and anything below
/// -10 abs_tol is an error.
Trajectory integrate(const VectorField& f, const State& x0, double t_end, const IntegrateOptions& opts = {});

Trajectory integrate(const State& x0, const Model& model, double t_end, const IntegrateOptions& opts = {});

/// Uniform sample grid 0, dt, 2dt, ... up to and including t_end.
std::vector<double> sample_grid(double t_end, double dt);

struct SteadyStateResult {
    std::optional<State> state;
    std::string diagnostic;
    double variation = 0;     ///< max component range over the trailing window
    double rhs_norm = 0;      ///< max-norm of rhs at the terminal state
};

SteadyStateResult detect_steady_state(const Trajectory& traj, const Model& model, double window, double tol);

enum class AmplitudeTrend { Growing, Decaying, Sustained };

std::string_view to_string(AmplitudeTrend t);

struct ComponentOscillation {
    int peaks = 0;
    double period = 0;        ///< mean spacing between peaks, 0 with fewer than two
    double slope = 0;         ///< fitted change of peak height per unit time
    AmplitudeTrend trend = AmplitudeTrend::Sustained;
    bool oscillating = false;
};

struct OscillationReport {
    bool oscillating = false;
    std::array<ComponentOscillation, 4> components{};
    double period = 0; ///< mean over oscillating components
    std::string diagnostic;
};

OscillationReport detect_oscillation(const Trajectory& traj, double window);

} // namespace metaepi
