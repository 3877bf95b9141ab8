#include "metaepi/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace metaepi {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense output (Hairer's contd5).
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

constexpr int kMaxNegativityRetries = 30;

struct Dense {
    Vector4 r1, r2, r3, r4, r5;
    double t0, h;

    Vector4 at(double t) const
    {
        const double s  = (t - t0) / h;
        const double s1 = 1.0 - s;
        return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
    }
};

double error_norm(const Vector4& err, const Vector4& y0, const Vector4& y1, const IntegrateOptions& o)
{
    double acc = 0;
    for (int i = 0; i < 4; ++i) {
        const double sc = o.abs_tol + o.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        acc += (err[i] / sc) * (err[i] / sc);
    }
    return std::sqrt(acc / 4);
}

void clip_small_negatives(Vector4& y, double abs_tol)
{
    for (int i = 0; i < 4; ++i) {
        if (y[i] < 0 && y[i] >= -abs_tol) {
            y[i] = 0;
        }
    }
}

} // namespace

Trajectory integrate(const VectorField& f, const State& x0, double t_end, const IntegrateOptions& o)
{
    if (!(t_end > 0) || !std::isfinite(t_end)) {
        throw ModelError(ErrorCode::PreconditionViolated, "integrate: t_end must be positive and finite");
    }
    if (!(o.rel_tol > 0) || !(o.abs_tol > 0)) {
        throw ModelError(ErrorCode::PreconditionViolated, "integrate: tolerances must be positive");
    }
    if (!is_finite(x0)) {
        throw ModelError(ErrorCode::NonFiniteState, "integrate: initial state is not finite");
    }
    if (o.nonnegative && x0.vec().minCoeff() < 0) {
        throw ModelError(ErrorCode::NegativeState, "integrate: initial state has negative components");
    }
    for (std::size_t i = 0; i < o.samples.size(); ++i) {
        const double s = o.samples[i];
        if (!(s >= 0 && s <= t_end) || (i > 0 && !(s > o.samples[i - 1]))) {
            throw ModelError(ErrorCode::PreconditionViolated,
                             "integrate: sample times must be strictly increasing within [0, t_end]");
        }
    }

    Trajectory traj;
    std::size_t next_sample = 0;
    const bool every_step   = o.samples.empty();

    double t  = 0;
    Vector4 y = x0.vec();
    Vector4 k1 = f(t, y);

    auto record = [&](double ts, Vector4 v) {
        if (o.nonnegative) {
            clip_small_negatives(v, o.abs_tol);
        }
        traj.times.push_back(ts);
        traj.states.push_back(State::from(v));
    };
    if (every_step) {
        record(t, y);
    }
    while (!every_step && next_sample < o.samples.size() && o.samples[next_sample] == 0.0) {
        record(0.0, y);
        ++next_sample;
    }

    double h = o.initial_step;
    if (!(h > 0)) {
        Vector4 sc;
        for (int i = 0; i < 4; ++i) {
            sc[i] = o.abs_tol + o.rel_tol * std::abs(y[i]);
        }
        const double dy = (y.array() / sc.array()).matrix().norm() / 2;
        const double df = (k1.array() / sc.array()).matrix().norm() / 2;
        h = (dy < 1e-5 || df < 1e-5) ? 1e-6 : 0.01 * dy / df;
        h = std::min(h, t_end);
    }

    int negativity_retries = 0;
    bool last_rejected     = false;
    while (t < t_end) {
        const double h_floor = o.min_step * std::max(1.0, std::abs(t));
        if (h < h_floor) {
            throw IntegrationError(ErrorCode::StepSizeUnderflow,
                                   "integrate: step size underflow at t = " + std::to_string(t), traj);
        }
        if (t + h > t_end || t + 1.01 * h >= t_end) {
            h = t_end - t;
        }

        // A trial step that overflows is rejected like any other failed step.
        Vector4 k2, k3, k4, k5, k6, k7, y1;
        try {
            k2 = f(t + c2 * h, y + h * (a21 * k1));
            k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
            k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
            k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
            k7 = f(t + h, y1);
        }
        catch (const ModelError& e) {
            if (e.code() != ErrorCode::NonFiniteState) {
                throw;
            }
            ++traj.stats.rejected;
            h *= 0.5;
            last_rejected = true;
            continue;
        }
        const Vector4 y1_raw = y1;
        const Vector4 err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        if (!y1.allFinite() || !err.allFinite()) {
            ++traj.stats.rejected;
            h *= 0.5;
            last_rejected = true;
            continue;
        }

        const double en = error_norm(err, y, y1, o);
        if (en > 1.0) {
            ++traj.stats.rejected;
            h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
            last_rejected = true;
            continue;
        }

        if (o.nonnegative && y1.minCoeff() < -o.abs_tol) {
            if (negativity_retries < kMaxNegativityRetries) {
                ++negativity_retries;
                ++traj.stats.negativity_rejections;
                h *= 0.5;
                last_rejected = true;
                continue;
            }
            if (y1.minCoeff() < -10 * o.abs_tol) {
                throw IntegrationError(ErrorCode::NegativityViolation,
                                       "integrate: component below -10*abs_tol at t = " + std::to_string(t + h),
                                       traj);
            }
            y1 = y1.cwiseMax(0.0);
        }
        // Steps that still needed clipping keep the retry budget spent, so persistent drift out of
        // the orthant ends in an error instead of stalling.
        if (!o.nonnegative || y1_raw.minCoeff() >= 0) {
            negativity_retries = 0;
        }

        Dense dense;
        if (!every_step) {
            dense.t0 = t;
            dense.h  = h;
            dense.r1 = y;
            dense.r2 = y1 - y;
            dense.r3 = h * k1 - dense.r2;
            dense.r4 = dense.r2 - h * k7 - dense.r3;
            dense.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        }

        const double t1 = (h == t_end - t) ? t_end : t + h;
        if (o.nonnegative) {
            clip_small_negatives(y1, o.abs_tol);
        }
        ++traj.stats.accepted;
        traj.stats.last_step = h;

        if (every_step) {
            record(t1, y1);
        }
        else {
            while (next_sample < o.samples.size() && o.samples[next_sample] <= t1) {
                const double ts = o.samples[next_sample];
                record(ts, ts == t1 ? y1 : dense.at(ts));
                ++next_sample;
            }
        }

        t  = t1;
        y  = y1;
        k1 = (y1 == y1_raw) ? k7 : f(t, y); // FSAL unless clipping moved the point

        double factor = 0.9 * std::pow(std::max(en, 1e-10), -0.2);
        factor        = std::clamp(factor, 0.2, last_rejected ? 1.0 : 10.0);
        h *= factor;
        last_rejected = false;
    }
    return traj;
}

Trajectory integrate(const State& x0, const Model& model, double t_end, const IntegrateOptions& opts)
{
    IntegrateOptions o = opts;
    o.nonnegative      = true;
    return integrate([&model](double, const Vector4& v) { return rhs(State::from(v), model); }, x0, t_end, o);
}

std::vector<double> sample_grid(double t_end, double dt)
{
    if (!(dt > 0) || !(t_end > 0)) {
        throw ModelError(ErrorCode::PreconditionViolated, "sample_grid: t_end and dt must be positive");
    }
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor(t_end / dt + 1e-9));
    for (long i = 0; i <= n; ++i) {
        out.push_back(std::min(i * dt, t_end));
    }
    if (out.back() < t_end) {
        out.push_back(t_end);
    }
    return out;
}

SteadyStateResult detect_steady_state(const Trajectory& traj, const Model& model, double window, double tol)
{
    SteadyStateResult r;
    if (traj.times.empty() || traj.times.back() - traj.times.front() < 2 * window) {
        r.diagnostic = "trajectory too short: spans less than 2*window";
        return r;
    }
    const double t_from = traj.times.back() - window;
    Vector4 lo          = traj.states.back().vec();
    Vector4 hi          = lo;
    for (std::size_t i = traj.times.size(); i-- > 0 && traj.times[i] >= t_from;) {
        lo = lo.cwiseMin(traj.states[i].vec());
        hi = hi.cwiseMax(traj.states[i].vec());
    }
    r.variation = (hi - lo).maxCoeff();
    r.rhs_norm  = rhs(traj.states.back(), model).cwiseAbs().maxCoeff();
    if (r.variation < tol && r.rhs_norm < tol) {
        r.state      = traj.states.back();
        r.diagnostic = "converged";
    }
    else if (r.variation >= tol) {
        r.diagnostic = "trailing-window variation " + std::to_string(r.variation) + " >= tol";
    }
    else {
        r.diagnostic = "terminal rhs norm " + std::to_string(r.rhs_norm) + " >= tol";
    }
    return r;
}

std::string_view to_string(AmplitudeTrend t)
{
    switch (t) {
    case AmplitudeTrend::Growing:
        return "growing";
    case AmplitudeTrend::Decaying:
        return "decaying";
    case AmplitudeTrend::Sustained:
        return "sustained";
    }
    return "unknown";
}

OscillationReport detect_oscillation(const Trajectory& traj, double window)
{
    constexpr double noise_floor     = 1e-10;
    constexpr double trend_threshold = 1e-2;

    OscillationReport rep;
    if (traj.times.size() < 3 || traj.times.back() - traj.times.front() < window) {
        rep.diagnostic = "trajectory too short: spans less than window";
        return rep;
    }
    const double t_from = traj.times.back() - window;
    const auto first    = static_cast<std::size_t>(
        std::lower_bound(traj.times.begin(), traj.times.end(), t_from) - traj.times.begin());

    double period_sum = 0;
    int period_count  = 0;
    for (int c = 0; c < 4; ++c) {
        auto& comp = rep.components[c];
        auto value = [&](std::size_t i) { return traj.states[i].vec()[c]; };

        double mean = 0;
        for (std::size_t i = first; i < traj.times.size(); ++i) {
            mean += value(i);
        }
        mean /= static_cast<double>(traj.times.size() - first);

        std::vector<double> pt, ph;
        for (std::size_t i = std::max<std::size_t>(first, 1); i + 1 < traj.times.size(); ++i) {
            if (value(i) > value(i - 1) + noise_floor && value(i) > value(i + 1) + noise_floor) {
                pt.push_back(traj.times[i]);
                ph.push_back(value(i) - mean);
            }
        }
        comp.peaks = static_cast<int>(pt.size());
        if (pt.size() >= 2) {
            comp.period = (pt.back() - pt.front()) / static_cast<double>(pt.size() - 1);

            const double tm = std::accumulate(pt.begin(), pt.end(), 0.0) / pt.size();
            const double hm = std::accumulate(ph.begin(), ph.end(), 0.0) / ph.size();
            double sxy = 0, sxx = 0;
            for (std::size_t i = 0; i < pt.size(); ++i) {
                sxy += (pt[i] - tm) * (ph[i] - hm);
                sxx += (pt[i] - tm) * (pt[i] - tm);
            }
            comp.slope = sxx > 0 ? sxy / sxx : 0.0;
            const double rel = comp.slope * (pt.back() - pt.front()) / std::max(std::abs(hm), 1e-300);
            comp.trend = rel < -trend_threshold  ? AmplitudeTrend::Decaying
                         : rel > trend_threshold ? AmplitudeTrend::Growing
                                                 : AmplitudeTrend::Sustained;
        }
        comp.oscillating = comp.peaks >= 4 && comp.trend != AmplitudeTrend::Decaying;
        if (comp.oscillating) {
            rep.oscillating = true;
            period_sum += comp.period;
            ++period_count;
        }
    }
    rep.period     = period_count > 0 ? period_sum / period_count : 0.0;
    rep.diagnostic = rep.oscillating ? "sustained or growing peaks in the trailing window" : "no sustained oscillation";
    return rep;
}

} // namespace metaepi
