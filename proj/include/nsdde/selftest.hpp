#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nsdde/builtin.hpp"
#include "nsdde/scheme.hpp"
#include "nsdde/stability.hpp"

namespace nsdde {

struct SelftestReport {
    std::vector<std::pair<std::string, bool>> suites;
    bool all_passed = true;

    void record(std::string name, bool ok) {
        all_passed = all_passed && ok;
        suites.emplace_back(std::move(name), ok);
    }

    std::string render() const {
        std::ostringstream os;
        for (const auto& [name, ok] : suites)
            os << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
        os << (all_passed ? "selftest: all suites passed\n" : "selftest: FAILURES present\n");
        return os.str();
    }
};

namespace detail {

inline double selftest_uniform(std::uint64_t& ctr) { return unit_open(mix64(ctr++)); }

inline bool suite_taming_bound(double alpha_override = 0.0) {
    if (alpha_override > 0.0) {
        try {
            validate(SchemeConfig{alpha_override, SchemeKind::tamed});
        } catch (const std::exception&) {
            return false;
        }
    }
    std::uint64_t ctr = mix64(101);
    for (int i = 0; i < 100000; ++i) {
        const double h = 1e-4 + 0.999 * selftest_uniform(ctr);
        const double alpha =
            alpha_override > 0.0 ? alpha_override : 1e-3 + 0.499 * selftest_uniform(ctr);
        const double mag = std::exp(20.0 * (selftest_uniform(ctr) - 0.5));
        const Vec b{mag * std::cos(selftest_uniform(ctr)), mag * std::sin(selftest_uniform(ctr))};
        const Vec tamed = tame_drift(b, h, alpha);
        const double tn = norm(tamed);
        const double slack = 1.0 + 4e-16;
        if (tn > norm(b) * slack) return false;
        if (tn > std::pow(h, -alpha) * slack) return false;
        if (tn * h > std::pow(h, 1.0 - alpha) * slack) return false;
    }
    return true;
}

inline bool suite_elementary_inequality() {
    std::uint64_t ctr = mix64(202);
    for (int i = 0; i < 20000; ++i) {
        Vec a(3), b(3);
        for (int j = 0; j < 3; ++j) {
            a[j] = 10.0 * (selftest_uniform(ctr) - 0.5);
            b[j] = 10.0 * (selftest_uniform(ctr) - 0.5);
        }
        const double eps = 1e-3 + 10.0 * selftest_uniform(ctr);
        if (norm_sq(add(a, b)) > pair_norm_bound(norm_sq(a), norm_sq(b), eps) * (1.0 + 1e-12))
            return false;
    }
    return true;
}

inline bool suite_buffer_oracle() {
    std::uint64_t ctr = mix64(303);
    for (int trial = 0; trial < 50; ++trial) {
        const long m = 1 + static_cast<long>(mix64(ctr++) % 8);
        std::vector<Vec> history;
        std::vector<Vec> init;
        for (long k = 0; k <= m; ++k) {
            init.push_back(Vec{selftest_uniform(ctr)});
            history.push_back(init.back());
        }
        DelayBuffer buf(m, init);
        for (int push = 0; push < 40; ++push) {
            Vec v{selftest_uniform(ctr)};
            history.push_back(v);
            buf.push(v);
            for (long j = 0; j <= m; ++j)
                if (buf.lag(j) != history[history.size() - 1 - static_cast<std::size_t>(j)])
                    return false;
        }
    }
    return true;
}

inline bool suite_martingale_means() {
    const NeutralSystem sys = make_linear_system(0.1, 2.0, 0.25, 0.25);
    const TimeGrid grid = make_grid(1.0, 2.0, 10);
    const InitialSegment seg = constant_segment(1.0, Vec{1.0});
    const SchemeConfig cfg{0.5, SchemeKind::tamed};
    PathState state = make_initial_state(sys, seg, grid);
    // march to a nontrivial state first
    BrownianDriver warm{7, 0, sys.noise_dim};
    for (long k = 0; k < 5; ++k) state = step(state, sys, grid, cfg, sample_increment(warm, k, grid.h));

    const int n = 100000;
    double sum[3] = {0, 0, 0}, sum_sq[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) {
        BrownianDriver d{7, static_cast<std::uint64_t>(i + 1), sys.noise_dim};
        StepDecomposition dec;
        step(state, sys, grid, cfg, sample_increment(d, 1000, grid.h), &dec);
        const double vals[3] = {dec.M1, dec.M2, dec.M3};
        for (int j = 0; j < 3; ++j) {
            sum[j] += vals[j];
            sum_sq[j] += vals[j] * vals[j];
        }
    }
    for (int j = 0; j < 3; ++j) {
        const double mean = sum[j] / n;
        const double var = (sum_sq[j] - n * mean * mean) / (n - 1);
        const double se = std::sqrt(var / n);
        if (std::abs(mean) > 4.0 * se + 1e-300) return false;
    }
    return true;
}

inline bool suite_decay_root() {
    const StabilityCertificate cert = find_decay_base(0.1, 1.0, 1.0, 0.1, 0.05, 0.01);
    if (std::abs(eval_f(cert.C_bar, 0.1, 1.0, 1.0, 0.1, 0.05, 0.01)) > 1e-10) return false;
    if (!(cert.C > 1.0 && cert.C < cert.C_bar)) return false;
    // single sign change on a fine grid over [1, 2 C_bar]
    int changes = 0;
    double prev = eval_f(1.0, 0.1, 1.0, 1.0, 0.1, 0.05, 0.01);
    for (int i = 1; i <= 10000; ++i) {
        const double x = 1.0 + (2.0 * cert.C_bar - 1.0) * i / 10000.0;
        const double v = eval_f(x, 0.1, 1.0, 1.0, 0.1, 0.05, 0.01);
        if ((prev < 0.0) != (v < 0.0)) ++changes;
        prev = v;
    }
    return changes == 1;
}

inline bool suite_determinism() {
    const NeutralSystem sys = make_linear_system(0.1, 2.0, 0.25, 0.25);
    const TimeGrid grid = make_grid(1.0, 3.0, 5);
    const InitialSegment seg = constant_segment(1.0, Vec{1.0});
    const SchemeConfig cfg{0.5, SchemeKind::tamed};
    const MomentTrajectory t1 = estimate_second_moment(sys, seg, grid, cfg, 42, 64, 1);
    const MomentTrajectory t2 = estimate_second_moment(sys, seg, grid, cfg, 42, 64, 3);
    if (t1.moments != t2.moments || t1.std_errors != t2.std_errors) return false;
    const SimulatedPath p1 = simulate_path(sys, seg, grid, cfg, BrownianDriver{42, 5, 1});
    const SimulatedPath p2 = simulate_path(sys, seg, grid, cfg, BrownianDriver{42, 5, 1});
    return p1.states == p2.states;
}

}  // namespace detail

// Runs the property suites of all modules and reports pass/fail per suite.
// Deterministic: two invocations produce identical reports.
inline SelftestReport run_selftest(double alpha_override = 0.0) {
    SelftestReport rep;
    rep.record("taming bound", detail::suite_taming_bound(alpha_override));
    rep.record("elementary inequality", detail::suite_elementary_inequality());
    rep.record("delay buffer oracle", detail::suite_buffer_oracle());
    rep.record("martingale step means", detail::suite_martingale_means());
    rep.record("decay base root", detail::suite_decay_root());
    rep.record("determinism", detail::suite_determinism());
    return rep;
}

}  // namespace nsdde
