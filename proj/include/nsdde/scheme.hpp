#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nsdde/common.hpp"
#include "nsdde/grid.hpp"
#include "nsdde/model.hpp"

namespace nsdde {

inline constexpr double kDivergenceThreshold = 1e150;

struct PathDivergedError : std::runtime_error {
    long step;
    explicit PathDivergedError(long k)
        : std::runtime_error("path diverged at step " + std::to_string(k)), step(k) {}
};

enum class SchemeKind { tamed, classic };

struct SchemeConfig {
    double alpha = 0.5;  // taming exponent, must lie in (0, 1/2]
    SchemeKind kind = SchemeKind::tamed;
};

inline void validate(const SchemeConfig& cfg) {
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 0.5))
        throw std::invalid_argument("SchemeConfig: alpha must lie in (0, 0.5]");
}

// Tamed drift b_h = b / (1 + h^alpha |b|). Direction-preserving, with
// |b_h| <= min(|b|, h^{-alpha}) and |b_h h| <= h^{1-alpha}.
inline Vec tame_drift(const Vec& b_value, double h, double alpha) {
    const double factor = 1.0 / (1.0 + std::pow(h, alpha) * norm(b_value));
    return scale(b_value, factor);
}

// State of one path at step k. The invariant Z = Y - D(Y_{k-m}) is maintained
// by the steppers and recomputable from the buffer.
struct PathState {
    long k = 0;
    Vec Y;
    DelayBuffer buffer;
    Vec Z;
};

inline PathState make_initial_state(const NeutralSystem& system, const InitialSegment& segment,
                                    const TimeGrid& grid) {
    DelayBuffer buf = buffer_init(segment, grid);
    Vec y0 = buf.lag(0);
    Vec z0 = sub(y0, system.D(buf.lag(grid.m)));
    return PathState{0, std::move(y0), std::move(buf), std::move(z0)};
}

// The three martingale-difference terms of one step, recorded for diagnostics:
//   M1 = 2<Z_k, sigma dw>, M2 = 2<b_h h, sigma dw>, M3 = |sigma|^2 (|dw|^2 - h).
struct StepDecomposition {
    double M1 = 0.0;
    double M2 = 0.0;
    double M3 = 0.0;
};

namespace detail {

inline PathState step_impl(const PathState& state, const NeutralSystem& system,
                           const TimeGrid& grid, const Vec& drift_value, const Vec& dw,
                           StepDecomposition* decomp) {
    if (dw.size() != system.noise_dim)
        throw std::invalid_argument("step: increment has wrong noise dimension");

    const Vec& y = state.Y;
    const Vec& y_lag = state.buffer.lag(grid.m);
    const Mat sig = system.sigma(y, y_lag);
    const Vec diffusion = mat_vec(sig, dw);
    const Vec drift_h = scale(drift_value, grid.h);

    if (decomp) {
        decomp->M1 = 2.0 * dot(state.Z, diffusion);
        decomp->M2 = 2.0 * dot(drift_h, diffusion);
        decomp->M3 = hs_norm_sq(sig) * (norm_sq(dw) - grid.h);
    }

    Vec z_next = add(add(state.Z, drift_h), diffusion);
    DelayBuffer buf = state.buffer;
    // Y_{k+1-m} before the push is lag(m-1); after the push it is lag(m).
    Vec y_next = add(z_next, system.D(buf.lag(grid.m - 1)));

    bool bad = !all_finite(y_next);
    if (!bad)
        for (double c : y_next)
            if (std::abs(c) > kDivergenceThreshold) bad = true;
    if (bad) throw PathDivergedError(state.k + 1);

    buf.push(y_next);
    return PathState{state.k + 1, std::move(y_next), std::move(buf), std::move(z_next)};
}

}  // namespace detail

// One step of the tamed EM scheme, in differenced form:
//   Z_{k+1} = Z_k + b_h(Y_k, Y_{k-m}) h + sigma(Y_k, Y_{k-m}) dw,
//   Y_{k+1} = Z_{k+1} + D(Y_{k+1-m}).
inline PathState step_tamed(const PathState& state, const NeutralSystem& system,
                            const TimeGrid& grid, const SchemeConfig& config, const Vec& dw,
                            StepDecomposition* decomp = nullptr) {
    const Vec b_raw = system.b(state.Y, state.buffer.lag(grid.m));
    return detail::step_impl(state, system, grid, tame_drift(b_raw, grid.h, config.alpha), dw,
                             decomp);
}

// One step of the classic EM scheme (untamed drift), kept for blow-up
// contrast experiments.
inline PathState step_classic(const PathState& state, const NeutralSystem& system,
                              const TimeGrid& grid, const Vec& dw,
                              StepDecomposition* decomp = nullptr) {
    const Vec b_raw = system.b(state.Y, state.buffer.lag(grid.m));
    return detail::step_impl(state, system, grid, b_raw, dw, decomp);
}

inline PathState step(const PathState& state, const NeutralSystem& system, const TimeGrid& grid,
                      const SchemeConfig& config, const Vec& dw,
                      StepDecomposition* decomp = nullptr) {
    return config.kind == SchemeKind::tamed ? step_tamed(state, system, grid, config, dw, decomp)
                                            : step_classic(state, system, grid, dw, decomp);
}

// A fully recorded path: states Y_{-m}..Y_M (truncated early if the path
// diverged) plus per-step martingale decompositions.
struct SimulatedPath {
    TimeGrid grid;
    std::vector<Vec> states;  // index i holds Y_{i-m}
    std::vector<StepDecomposition> decompositions;
    std::optional<long> diverged_at;

    const Vec& y(long k) const {
        const long i = k + grid.m;
        if (i < 0 || i >= static_cast<long>(states.size()))
            throw std::out_of_range("SimulatedPath: step index out of range");
        return states[static_cast<std::size_t>(i)];
    }

    long last_step() const { return static_cast<long>(states.size()) - 1 - grid.m; }
};

inline SimulatedPath simulate_path(const NeutralSystem& system, const InitialSegment& segment,
                                   const TimeGrid& grid, const SchemeConfig& config,
                                   const BrownianDriver& driver) {
    validate(config);
    SimulatedPath path{grid, {}, {}, std::nullopt};
    path.states.reserve(static_cast<std::size_t>(grid.M + grid.m + 1));
    path.decompositions.reserve(static_cast<std::size_t>(grid.M));

    PathState state = make_initial_state(system, segment, grid);
    for (long k = -grid.m; k < 0; ++k) path.states.push_back(state.buffer.lag(-k));
    path.states.push_back(state.Y);

    for (long k = 0; k < grid.M; ++k) {
        const Vec dw = sample_increment(driver, k, grid.h);
        StepDecomposition d;
        try {
            state = step(state, system, grid, config, dw, &d);
        } catch (const PathDivergedError& e) {
            path.diverged_at = e.step;
            break;
        }
        path.decompositions.push_back(d);
        path.states.push_back(state.Y);
    }
    return path;
}

// Piecewise-constant interpolant: returns Y_{floor(s/h)} for s in [-tau, T].
inline const Vec& interpolate(const SimulatedPath& path, const TimeGrid& grid, double s) {
    if (s < -grid.tau || s > grid.T)
        throw std::out_of_range("interpolate: s outside [-tau, T]");
    const double q = s / grid.h;
    long k = static_cast<long>(std::floor(q));
    // snap up when q sits a rounding error below the next grid index
    if (q - static_cast<double>(k) > 1.0 - 1e-9) ++k;
    if (k > grid.M) k = grid.M;
    if (k < -grid.m) k = -grid.m;
    return path.y(k);
}

}  // namespace nsdde
