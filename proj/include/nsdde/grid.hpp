#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsdde/common.hpp"
#include "nsdde/model.hpp"

namespace nsdde {

struct GridError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Uniform time grid with the exact divisibility constraint h = tau/m = T/M.
// Construction fails loudly if T is not a whole number of steps; silent
// rounding would corrupt the delay alignment Y_{k-m}.
struct TimeGrid {
    double tau;
    double T;
    long m;  // delay lag in steps
    long M;  // total steps
    double h;
};

inline TimeGrid make_grid(double tau, double T, long m) {
    if (!(tau > 0.0)) throw GridError("make_grid: tau must be positive");
    if (!(T > tau)) throw GridError("make_grid: need T > tau");
    if (m < 1) throw GridError("make_grid: m must be at least 1");
    const double h = tau / static_cast<double>(m);
    if (!(h < 1.0))
        throw GridError("make_grid: step size h = tau/m = " + std::to_string(h) +
                        " not in (0,1); increase m");
    const double steps = T / h;
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-9 * steps)
        throw GridError("make_grid: T/h = " + std::to_string(steps) +
                        " is not an integer; tau, T, m are grid-incompatible");
    return TimeGrid{tau, T, m, static_cast<long>(rounded), h};
}

// Counter-based Brownian increment source. Increments are a pure function of
// (seed, stream_id, step_index, coordinate), so paths are reproducible
// independent of execution order and distinct stream_ids give independent
// sequences.
struct BrownianDriver {
    std::uint64_t seed;
    std::uint64_t stream_id;
    std::size_t noise_dim;
};

inline double standard_normal_draw(std::uint64_t seed, std::uint64_t stream_id,
                                   std::uint64_t step_index, std::uint64_t coord) {
    using detail::mix64;
    using detail::unit_open;
    const std::uint64_t base =
        mix64(mix64(mix64(mix64(seed) ^ stream_id) ^ step_index) ^ coord);
    const double u1 = unit_open(mix64(base));
    const double u2 = unit_open(mix64(base ^ 0xda3e39cb94b95bdbULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// One increment vector Delta w_k = w_{(k+1)h} - w_{kh}: noise_dim independent
// N(0, h) draws.
inline Vec sample_increment(const BrownianDriver& driver, long step_index, double h) {
    if (step_index < 0) throw std::invalid_argument("sample_increment: negative step index");
    const double sd = std::sqrt(h);
    Vec dw(driver.noise_dim);
    for (std::size_t j = 0; j < driver.noise_dim; ++j)
        dw[j] = sd * standard_normal_draw(driver.seed, driver.stream_id,
                                          static_cast<std::uint64_t>(step_index), j);
    return dw;
}

// Ring buffer of the last m+1 states, serving Y_{k-m}..Y_k lookups.
class DelayBuffer {
public:
    // initial_states in chronological order: Y_{-m}, ..., Y_0
    DelayBuffer(long m, std::vector<Vec> initial_states)
        : m_(m), head_index_(0), entries_(static_cast<std::size_t>(m + 1)) {
        if (static_cast<long>(initial_states.size()) != m_ + 1)
            throw std::invalid_argument("DelayBuffer: need exactly m+1 initial states");
        for (long k = -m_; k <= 0; ++k) {
            const long slot = ((k % (m_ + 1)) + (m_ + 1)) % (m_ + 1);
            entries_[static_cast<std::size_t>(slot)] =
                std::move(initial_states[static_cast<std::size_t>(k + m_)]);
        }
    }

    long head_index() const { return head_index_; }
    long m() const { return m_; }

    // lag(j) returns Y_{k-j} for j in {0,...,m}.
    const Vec& lag(long j) const {
        if (j < 0 || j > m_) throw std::invalid_argument("DelayBuffer::lag: lag out of range");
        long idx = (head_index_ - j) % (m_ + 1);
        if (idx < 0) idx += m_ + 1;
        return entries_[static_cast<std::size_t>(idx)];
    }

    void push(Vec value) {
        ++head_index_;
        entries_[static_cast<std::size_t>(head_index_ % (m_ + 1))] = std::move(value);
    }

private:
    long m_;
    long head_index_;
    std::vector<Vec> entries_;  // slot for step k is k mod (m+1)
};

// Fills the buffer from the initial segment: Y_k = xi(kh) for k = -m..0,
// stored so that head_index 0 corresponds to Y_0.
inline DelayBuffer buffer_init(const InitialSegment& segment, const TimeGrid& grid) {
    if (!segment.at) throw std::invalid_argument("buffer_init: segment has no evaluator");
    std::vector<Vec> states(static_cast<std::size_t>(grid.m + 1));
    for (long k = -grid.m; k <= 0; ++k) {
        Vec v;
        try {
            v = segment.at(static_cast<double>(k) * grid.h);
        } catch (const std::exception& e) {
            throw std::invalid_argument("buffer_init: segment undefined at offset " +
                                        std::to_string(k * grid.h) + ": " + e.what());
        }
        if (v.empty() || !all_finite(v))
            throw std::invalid_argument("buffer_init: segment value at offset " +
                                        std::to_string(k * grid.h) + " is missing or non-finite");
        states[static_cast<std::size_t>(k + grid.m)] = std::move(v);
    }
    return DelayBuffer(grid.m, std::move(states));
}

}  // namespace nsdde
