#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nsdde/common.hpp"
#include "nsdde/grid.hpp"
#include "nsdde/model.hpp"
#include "nsdde/scheme.hpp"

namespace nsdde {

struct HypothesisViolatedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Ensemble estimate of E|Y_k|^2 on the grid, with per-path squared norms
// retained for bootstrap resampling and pathwise exponent estimates.
struct MomentTrajectory {
    std::vector<double> times;       // kh
    std::vector<double> moments;     // ensemble averages of |Y_k|^2
    std::vector<double> std_errors;  // sample std / sqrt(N)
    std::size_t path_count = 0;
    std::size_t divergence_count = 0;
    double h = 0.0;
    // row i holds |Y_k|^2 for path with stream_id i, k = 0..times.size()-1
    std::vector<std::vector<double>> path_sq;
};

// Runs N independent tamed/classic EM paths with stream_ids 0..N-1 and
// averages |Y_k|^2 in stream order. The reduction order is fixed, so the
// result is bit-identical for any worker count. If paths diverge, the
// trajectory truncates at the earliest divergence time and records the count.
inline MomentTrajectory estimate_second_moment(const NeutralSystem& system,
                                               const InitialSegment& segment,
                                               const TimeGrid& grid, const SchemeConfig& config,
                                               std::uint64_t seed, std::size_t N,
                                               unsigned workers = 1) {
    if (N < 2) throw std::invalid_argument("estimate_second_moment: need at least 2 paths");
    validate(config);

    std::vector<std::vector<double>> path_sq(N);
    std::vector<long> diverged_at(N, -1);

    auto run_block = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            BrownianDriver driver{seed, i, system.noise_dim};
            PathState state = make_initial_state(system, segment, grid);
            std::vector<double>& sq = path_sq[i];
            sq.reserve(static_cast<std::size_t>(grid.M + 1));
            sq.push_back(norm_sq(state.Y));
            for (long k = 0; k < grid.M; ++k) {
                const Vec dw = sample_increment(driver, k, grid.h);
                try {
                    state = step(state, system, grid, config, dw);
                } catch (const PathDivergedError& e) {
                    diverged_at[i] = e.step;
                    break;
                }
                sq.push_back(norm_sq(state.Y));
            }
        }
    };

    if (workers <= 1) {
        run_block(0, N);
    } else {
        const std::size_t nw = std::min<std::size_t>(workers, N);
        std::vector<std::thread> pool;
        pool.reserve(nw);
        for (std::size_t w = 0; w < nw; ++w) {
            const std::size_t lo = N * w / nw;
            const std::size_t hi = N * (w + 1) / nw;
            pool.emplace_back(run_block, lo, hi);
        }
        for (auto& t : pool) t.join();
    }

    std::size_t keep = static_cast<std::size_t>(grid.M + 1);
    std::size_t divergences = 0;
    for (std::size_t i = 0; i < N; ++i) {
        if (diverged_at[i] >= 0) {
            ++divergences;
            keep = std::min(keep, path_sq[i].size());
        }
    }

    MomentTrajectory traj;
    traj.path_count = N;
    traj.divergence_count = divergences;
    traj.h = grid.h;
    traj.times.resize(keep);
    traj.moments.resize(keep);
    traj.std_errors.resize(keep);
    for (std::size_t k = 0; k < keep; ++k) {
        traj.times[k] = static_cast<double>(k) * grid.h;
        double mean = 0.0;
        for (std::size_t i = 0; i < N; ++i) mean += path_sq[i][k];
        mean /= static_cast<double>(N);
        double var = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double d = path_sq[i][k] - mean;
            var += d * d;
        }
        var /= static_cast<double>(N - 1);
        traj.moments[k] = mean;
        traj.std_errors[k] = std::sqrt(var / static_cast<double>(N));
    }
    for (auto& row : path_sq) row.resize(keep);
    traj.path_sq = std::move(path_sq);
    return traj;
}

// Ordinary least squares of y against t, with the slope's standard error
// from the residual variance.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

inline LinearFit least_squares(const std::vector<double>& t, const std::vector<double>& y) {
    const std::size_t n = t.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("least_squares: need >= 2 points");
    double tm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tm += t[i];
        ym += y[i];
    }
    tm /= static_cast<double>(n);
    ym /= static_cast<double>(n);
    double stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        sty += (t[i] - tm) * (y[i] - ym);
    }
    if (stt == 0.0) throw std::invalid_argument("least_squares: degenerate abscissae");
    LinearFit fit;
    fit.slope = sty / stt;
    fit.intercept = ym - fit.slope * tm;
    if (n > 2) {
        double ss_res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - fit.intercept - fit.slope * t[i];
            ss_res += r * r;
        }
        fit.slope_stderr = std::sqrt(ss_res / static_cast<double>(n - 2) / stt);
    }
    return fit;
}

struct SlopeEstimate {
    double slope = 0.0;
    double ci_lo = 0.0;  // bootstrap 95% interval over path resampling
    double ci_hi = 0.0;
};

namespace detail {

inline std::vector<std::size_t> window_indices(const std::vector<double>& times,
                                               double window_fraction) {
    if (!(window_fraction > 0.0 && window_fraction <= 1.0))
        throw std::invalid_argument("window_fraction must lie in (0, 1]");
    const double t_end = times.back();
    const double t_start = t_end * (1.0 - window_fraction);
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < times.size(); ++k)
        if (times[k] >= t_start - 1e-12) idx.push_back(k);
    return idx;
}

}  // namespace detail

// Finite-horizon proxy for the mean-square Lyapunov exponent: the
// least-squares slope of log E|Y_k|^2 against kh over the final
// window_fraction of the horizon, with a bootstrap confidence interval over
// path resampling.
inline SlopeEstimate estimate_ms_exponent(const MomentTrajectory& traj, double window_fraction,
                                          std::size_t bootstrap_resamples = 1000,
                                          std::uint64_t bootstrap_seed = 0x9d2c5680ULL) {
    const auto idx = detail::window_indices(traj.times, window_fraction);
    if (idx.size() < 10)
        throw std::invalid_argument("estimate_ms_exponent: fewer than 10 points in window");

    std::vector<double> t, logm;
    t.reserve(idx.size());
    logm.reserve(idx.size());
    for (std::size_t k : idx) {
        if (!(traj.moments[k] > 0.0))
            throw std::runtime_error("estimate_ms_exponent: non-positive moment in window");
        t.push_back(traj.times[k]);
        logm.push_back(std::log(traj.moments[k]));
    }
    SlopeEstimate est;
    est.slope = least_squares(t, logm).slope;

    const std::size_t N = traj.path_count;
    std::vector<double> slopes;
    slopes.reserve(bootstrap_resamples);
    std::vector<double> resampled(idx.size());
    std::uint64_t ctr = detail::mix64(bootstrap_seed);
    for (std::size_t r = 0; r < bootstrap_resamples; ++r) {
        std::fill(resampled.begin(), resampled.end(), 0.0);
        for (std::size_t j = 0; j < N; ++j) {
            const std::size_t pick = static_cast<std::size_t>(detail::mix64(ctr++) % N);
            const auto& row = traj.path_sq[pick];
            for (std::size_t a = 0; a < idx.size(); ++a) resampled[a] += row[idx[a]];
        }
        bool ok = true;
        for (double& v : resampled) {
            v /= static_cast<double>(N);
            if (!(v > 0.0)) ok = false;
        }
        if (!ok) continue;
        std::vector<double> lr(idx.size());
        for (std::size_t a = 0; a < idx.size(); ++a) lr[a] = std::log(resampled[a]);
        slopes.push_back(least_squares(t, lr).slope);
    }
    if (slopes.size() < 2) {
        est.ci_lo = est.ci_hi = est.slope;
        return est;
    }
    std::sort(slopes.begin(), slopes.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(slopes.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, slopes.size() - 1);
        const double w = pos - static_cast<double>(lo);
        return slopes[lo] * (1.0 - w) + slopes[hi] * w;
    };
    est.ci_lo = quantile(0.025);
    est.ci_hi = quantile(0.975);
    return est;
}

// The decay-base function
//   f(x) = (1 + x^tau)(x - 1)(1 + kappa^2) + (-lambda2 + x^tau lambda3
//          + 2 K_tilde (1 + x^tau)) h,
// increasing on [1, inf) with f(1) < 0 exactly when lambda2 > lambda3 + 4 K_tilde.
inline double eval_f(double x, double kappa, double tau, double lambda2, double lambda3,
                     double K_tilde, double h) {
    const double xt = std::pow(x, tau);
    return (1.0 + xt) * (x - 1.0) * (1.0 + kappa * kappa) +
           (-lambda2 + xt * lambda3 + 2.0 * K_tilde * (1.0 + xt)) * h;
}

// Constructive certificate of exponential decay: the root C_bar of f, a
// decay base C in (1, C_bar), and the certified rates.
struct StabilityCertificate {
    double kappa = 0.0;
    double K_tilde = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
    double tau = 0.0;
    double h = 0.0;
    double f_at_one = 0.0;
    double C_bar = 0.0;  // root of f
    double C = 0.0;      // chosen base, bracket midpoint (1 + C_bar)/2
    double ms_rate = 0.0;  // -log C
    double as_rate = 0.0;  // -(log C)/2
};

inline StabilityCertificate find_decay_base(double kappa, double tau, double lambda2,
                                            double lambda3, double K_tilde, double h) {
    if (!(h > 0.0 && h < 1.0)) throw std::invalid_argument("find_decay_base: h must lie in (0,1)");
    StabilityCertificate cert;
    cert.kappa = kappa;
    cert.K_tilde = K_tilde;
    cert.lambda2 = lambda2;
    cert.lambda3 = lambda3;
    cert.tau = tau;
    cert.h = h;
    cert.f_at_one = eval_f(1.0, kappa, tau, lambda2, lambda3, K_tilde, h);
    if (!(cert.f_at_one < 0.0))
        throw HypothesisViolatedError(
            "find_decay_base: f(1) = " + std::to_string(cert.f_at_one) +
            " is not negative; the construction needs lambda2 > lambda3 + 4*K_tilde");

    auto f = [&](double x) { return eval_f(x, kappa, tau, lambda2, lambda3, K_tilde, h); };

    double hi = 2.0;
    while (f(hi) <= 0.0) {
        hi *= 2.0;
        if (hi > 1e12) throw std::runtime_error("find_decay_base: failed to bracket root");
    }
    double lo = 1.0;
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 500; ++it) {
        mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) break;
        (fm < 0.0 ? lo : hi) = mid;
        if (hi - lo <= 1e-12 && std::abs(f(mid)) <= 1e-10) break;
    }
    cert.C_bar = mid;
    cert.C = 0.5 * (1.0 + cert.C_bar);
    cert.ms_rate = -std::log(cert.C);
    cert.as_rate = 0.5 * cert.ms_rate;
    return cert;
}

// Empirical check of the weighted bound C^{kh} E|Y_k|^2 <= K_bar: reports the
// sup of w_k = C^{kh} m_k and whether w_k shows a statistically significant
// positive trend (one-sided test at 95% on the regression slope).
struct WeightedBoundReport {
    std::vector<double> weighted;  // w_k
    double K_bar_empirical = 0.0;
    double trend_slope = 0.0;
    double trend_tstat = 0.0;
    bool positive_trend = false;
};

inline WeightedBoundReport verify_weighted_bound(const MomentTrajectory& traj,
                                                 const StabilityCertificate& cert) {
    WeightedBoundReport rep;
    rep.weighted.resize(traj.times.size());
    for (std::size_t k = 0; k < traj.times.size(); ++k)
        rep.weighted[k] = std::pow(cert.C, traj.times[k]) * traj.moments[k];
    rep.K_bar_empirical = *std::max_element(rep.weighted.begin(), rep.weighted.end());

    std::vector<double> ks(rep.weighted.size());
    for (std::size_t k = 0; k < ks.size(); ++k) ks[k] = static_cast<double>(k);
    const LinearFit fit = least_squares(ks, rep.weighted);
    rep.trend_slope = fit.slope;
    rep.trend_tstat = fit.slope_stderr > 0.0 ? fit.slope / fit.slope_stderr : 0.0;
    rep.positive_trend = rep.trend_tstat > 1.6448536269514722;  // one-sided 95% normal quantile
    return rep;
}

// Finite-horizon proxy for the pathwise limsup: the maximum of
// log|Y_k| / (kh) over the tail window. Returns -inf if the path hits zero
// in the window (stable by convention).
inline double estimate_as_exponent(const std::vector<double>& sq_norms, const TimeGrid& grid,
                                   double tail_fraction) {
    if (sq_norms.empty()) throw std::invalid_argument("estimate_as_exponent: empty path");
    std::vector<double> times(sq_norms.size());
    for (std::size_t k = 0; k < times.size(); ++k) times[k] = static_cast<double>(k) * grid.h;
    const auto idx = detail::window_indices(times, tail_fraction);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k : idx) {
        if (k == 0) continue;  // kh = 0 carries no rate information
        if (sq_norms[k] == 0.0) return -std::numeric_limits<double>::infinity();
        best = std::max(best, 0.5 * std::log(sq_norms[k]) / times[k]);
    }
    return best;
}

inline double estimate_as_exponent(const SimulatedPath& path, const TimeGrid& grid,
                                   double tail_fraction) {
    std::vector<double> sq;
    sq.reserve(static_cast<std::size_t>(path.last_step() + 1));
    for (long k = 0; k <= path.last_step(); ++k) sq.push_back(norm_sq(path.y(k)));
    return estimate_as_exponent(sq, grid, tail_fraction);
}

// Second moments of the initial segment needed by the recursion bound:
// E|xi(ih)|^2 for i = -m..0 and E|Z_0|^2 with Z_0 = xi(0) - D(xi(-tau)).
struct SegmentMoments {
    std::vector<double> xi_sq;  // index i+m holds E|xi(ih)|^2
    double z0_sq = 0.0;
};

inline SegmentMoments segment_moments(const NeutralSystem& system, const InitialSegment& segment,
                                      const TimeGrid& grid) {
    SegmentMoments sm;
    sm.xi_sq.resize(static_cast<std::size_t>(grid.m + 1));
    for (long i = -grid.m; i <= 0; ++i)
        sm.xi_sq[static_cast<std::size_t>(i + grid.m)] =
            norm_sq(segment.at(static_cast<double>(i) * grid.h));
    const Vec xi0 = segment.at(0.0);
    const Vec xi_tau = segment.at(-grid.tau);
    sm.z0_sq = norm_sq(sub(xi0, system.D(xi_tau)));
    return sm;
}

// The proof-style recursion a_{k+1} <= c1 + c2 a_{k+1-m} unrolled into an
// explicit upper-bound sequence on C^{(k+1)h} E|Y_{k+1}|^2. The constants are
// computed literally; c2 = (1+kappa^2) C^tau exceeds 1 whenever C > 1, so the
// unrolled bound can grow, and it is reported as-is without asserting
// boundedness.
struct RecursionDiagnostics {
    double c1 = 0.0;
    double c2 = 0.0;
    std::vector<double> bound;  // bound[j] constrains a_{j+1}, j = 0..steps-1
};

inline RecursionDiagnostics recursion_diagnostics(const StabilityCertificate& cert,
                                                  const SegmentMoments& sm, const TimeGrid& grid,
                                                  std::size_t steps) {
    RecursionDiagnostics diag;
    const double kap2 = 1.0 + cert.kappa * cert.kappa;
    const double C = cert.C;
    const double Ctau = std::pow(C, cert.tau);

    double seg_sum = 0.0;
    for (long i = -grid.m; i <= -1; ++i) {
        const double ci1 = std::pow(C, static_cast<double>(i + 1) * grid.h);
        const double ci = std::pow(C, static_cast<double>(i) * grid.h);
        seg_sum += ((ci1 - ci) * kap2 + ci1 * (cert.lambda3 + 2.0 * cert.K_tilde) * grid.h) *
                   sm.xi_sq[static_cast<std::size_t>(i + grid.m)];
    }
    diag.c1 = kap2 * (sm.z0_sq + Ctau * seg_sum);
    diag.c2 = kap2 * Ctau;

    diag.bound.resize(steps);
    for (std::size_t j = 0; j < steps; ++j) {
        const long kp1 = static_cast<long>(j) + 1;
        const long q = kp1 / grid.m;  // floor
        double geom = 0.0;
        double c2_pow = 1.0;
        for (long i = 0; i <= q; ++i) {
            geom += c2_pow;
            c2_pow *= diag.c2;
        }
        // c2_pow is now c2^{q+1}; the residual index k+1-(q+1)m lies in [-m,-1]
        const long xi_index = kp1 - (q + 1) * grid.m;
        diag.bound[j] = diag.c1 * geom +
                        c2_pow * sm.xi_sq[static_cast<std::size_t>(xi_index + grid.m)];
    }
    return diag;
}

}  // namespace nsdde
