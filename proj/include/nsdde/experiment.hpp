#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nsdde/config.hpp"
#include "nsdde/stability.hpp"

namespace nsdde {

struct ExperimentResult {
    int exit_status = 0;
    std::string message;
    std::size_t divergence_count = 0;
    long first_divergence_step = -1;
    bool hypothesis_failure = false;
};

namespace detail {

// Fixed 17-significant-digit rendering so output determinism is
// byte-level testable.
inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Full file is either written or absent: write to a temporary name in the
// same directory, then rename.
inline void write_atomic(const std::filesystem::path& target, const std::string& content) {
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - w) + sorted[hi] * w;
}

inline void append_report(std::ostream& os, const AssumptionReport& rep, const std::string& label) {
    os << "[" << to_string(rep.assumption_id) << "] " << label << "\n";
    os << "  holds_on_sample: " << (rep.holds_on_sample ? "yes" : "no") << "\n";
    os << "  estimated_constant: " << fmt17(rep.estimated_constant) << "\n";
    os << "  sample_count: " << rep.sample_count << "\n";
    if (rep.assumption_id == AssumptionId::A3)
        os << "  drift_sup_on_ball: " << fmt17(rep.drift_sup) << "\n";
    if (rep.assumption_id == AssumptionId::SigmaCond)
        os << "  negative_rhs_points: " << rep.negative_rhs_points.size() << "\n";
    if (!rep.worst_point.empty()) {
        os << "  worst_point:";
        for (const auto& v : rep.worst_point) {
            os << " (";
            for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << fmt17(v[i]);
            os << ")";
        }
        os << "\n";
    }
}

}  // namespace detail

// Runs the configured ensemble, the stability analysis, and the assumption
// checkers, and writes moments.csv, exponents.csv, certificate.txt and
// assumptions.txt into the output directory. Divergence still writes the
// partial outputs and yields a nonzero exit status.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, unsigned workers = 1,
                                       bool strict = false, const std::string& out_override = "") {
    namespace fs = std::filesystem;
    ExperimentResult result;
    const fs::path out_dir = out_override.empty() ? cfg.out_dir : out_override;
    fs::create_directories(out_dir);

    const NeutralSystem system = build_system(cfg);
    const TimeGrid grid = make_grid(cfg.tau, cfg.T, cfg.m);
    const InitialSegment segment = constant_segment(cfg.tau, Vec{cfg.xi0});
    const SchemeConfig scheme_cfg{cfg.alpha, cfg.kind};

    const MomentTrajectory traj =
        estimate_second_moment(system, segment, grid, scheme_cfg, cfg.seed, cfg.N, workers);
    result.divergence_count = traj.divergence_count;
    if (traj.divergence_count > 0)
        result.first_divergence_step = static_cast<long>(traj.times.size());

    // moments.csv
    {
        std::ostringstream os;
        os << "step,k_times_h,mean_sq,std_err\n";
        for (std::size_t k = 0; k < traj.times.size(); ++k)
            os << k << "," << detail::fmt17(traj.times[k]) << ","
               << detail::fmt17(traj.moments[k]) << "," << detail::fmt17(traj.std_errors[k])
               << "\n";
        detail::write_atomic(out_dir / "moments.csv", os.str());
    }

    // exponents.csv
    SlopeEstimate ms{std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN()};
    std::string ms_error;
    try {
        ms = estimate_ms_exponent(traj, cfg.window);
    } catch (const std::exception& e) {
        ms_error = e.what();
    }
    std::vector<double> as_exps;
    as_exps.reserve(traj.path_count);
    if (traj.times.size() >= 2) {
        for (const auto& row : traj.path_sq)
            as_exps.push_back(estimate_as_exponent(row, grid, cfg.window));
        std::sort(as_exps.begin(), as_exps.end());
    }
    {
        std::ostringstream os;
        os << "ms_slope,ms_ci_lo,ms_ci_hi,as_q05,as_q50,as_q95\n";
        os << detail::fmt17(ms.slope) << "," << detail::fmt17(ms.ci_lo) << ","
           << detail::fmt17(ms.ci_hi) << "," << detail::fmt17(detail::quantile_sorted(as_exps, 0.05))
           << "," << detail::fmt17(detail::quantile_sorted(as_exps, 0.50)) << ","
           << detail::fmt17(detail::quantile_sorted(as_exps, 0.95)) << "\n";
        detail::write_atomic(out_dir / "exponents.csv", os.str());
    }

    // certificate.txt
    {
        std::ostringstream os;
        os << "lambda2: " << detail::fmt17(cfg.lambda2) << "\n";
        os << "lambda3: " << detail::fmt17(cfg.lambda3) << "\n";
        os << "K_tilde: " << detail::fmt17(cfg.K_tilde) << "\n";
        os << "kappa: " << detail::fmt17(cfg.kappa) << "\n";
        os << "tau: " << detail::fmt17(cfg.tau) << "\n";
        os << "h: " << detail::fmt17(grid.h) << "\n";
        const double f1 = eval_f(1.0, cfg.kappa, cfg.tau, cfg.lambda2, cfg.lambda3, cfg.K_tilde,
                                 grid.h);
        os << "f_at_one: " << detail::fmt17(f1) << "\n";
        const bool gap_ok = cfg.lambda2 > cfg.lambda3 + 4.0 * cfg.K_tilde;
        os << "check lambda2 > lambda3 + 4*K_tilde: " << (gap_ok ? "pass" : "fail") << "\n";
        try {
            const StabilityCertificate cert = find_decay_base(cfg.kappa, cfg.tau, cfg.lambda2,
                                                              cfg.lambda3, cfg.K_tilde, grid.h);
            os << "C_bar: " << detail::fmt17(cert.C_bar) << "\n";
            os << "C: " << detail::fmt17(cert.C) << "\n";
            os << "ms_rate: " << detail::fmt17(cert.ms_rate) << "  # -log C\n";
            os << "as_rate: " << detail::fmt17(cert.as_rate) << "  # -(log C)/2\n";
            const WeightedBoundReport wb = verify_weighted_bound(traj, cert);
            os << "K_bar_empirical: " << detail::fmt17(wb.K_bar_empirical) << "\n";
            os << "alt_rate_product: " << detail::fmt17(-std::log(cert.C) *
                                                        std::log(wb.K_bar_empirical))
               << "  # -log C * log K_bar, alternative display\n";
            os << "weighted_trend_slope: " << detail::fmt17(wb.trend_slope) << "\n";
            os << "weighted_trend_tstat: " << detail::fmt17(wb.trend_tstat) << "\n";
            os << "check weighted bound has no positive trend: "
               << (wb.positive_trend ? "fail" : "pass") << "\n";
            if (wb.positive_trend) result.hypothesis_failure = true;
            const RecursionDiagnostics rd =
                recursion_diagnostics(cert, segment_moments(system, segment, grid), grid,
                                      std::min<std::size_t>(traj.times.size(), 64));
            os << "recursion_c1: " << detail::fmt17(rd.c1) << "\n";
            os << "recursion_c2: " << detail::fmt17(rd.c2)
               << (rd.c2 > 1.0 ? "  # exceeds 1: unrolled bound grows" : "") << "\n";
        } catch (const HypothesisViolatedError& e) {
            os << "certificate: unavailable (" << e.what() << ")\n";
            result.hypothesis_failure = true;
        }
        if (!ms_error.empty()) os << "ms_slope: unavailable (" << ms_error << ")\n";
        detail::write_atomic(out_dir / "certificate.txt", os.str());
    }

    // assumptions.txt
    {
        std::ostringstream os;
        const auto pairs = default_sample_pairs(system.state_dim);
        const AssumptionReport a2 = check_contraction(system.D, pairs);
        detail::append_report(os, a2, "neutral map contraction, D(0)=0");
        const AssumptionReport a1 = check_coercivity(system, cfg.K_tilde, pairs);
        detail::append_report(os, a1, "coercivity with K_tilde=" + detail::fmt17(cfg.K_tilde));
        std::vector<std::array<Vec, 4>> quads;
        const auto xs = default_sample_points(system.state_dim, 10.0, 5000, 11);
        const auto ys = default_sample_points(system.state_dim, 10.0, 5000, 12);
        const auto xbs = default_sample_points(system.state_dim, 10.0, 5000, 13);
        const auto ybs = default_sample_points(system.state_dim, 10.0, 5000, 14);
        for (std::size_t i = 0; i < xs.size(); ++i) quads.push_back({xs[i], ys[i], xbs[i], ybs[i]});
        const AssumptionReport a3 = check_local_monotonicity(system, 10.0, quads);
        detail::append_report(os, a3, "local monotonicity on ball R=10");

        bool sigma_ok = true;
        try {
            const StabilityParams sp{cfg.lambda1, cfg.lambda2, cfg.lambda3};
            validate(sp);
            const AssumptionReport sc_stmt = check_sigma_condition(
                system, sp, grid.h, SigmaCondVariant::statement, pairs);
            detail::append_report(os, sc_stmt, "diffusion bound, factor 1/h");
            const AssumptionReport sc_proof =
                check_sigma_condition(system, sp, grid.h, SigmaCondVariant::proof, pairs);
            detail::append_report(os, sc_proof, "diffusion bound, factor h");
            sigma_ok = sc_stmt.holds_on_sample;
        } catch (const std::exception& e) {
            os << "[SigmaCond] skipped: " << e.what() << "\n";
            sigma_ok = false;
        }
        if (!a2.holds_on_sample || !a1.holds_on_sample || !sigma_ok)
            result.hypothesis_failure = true;
        detail::write_atomic(out_dir / "assumptions.txt", os.str());
    }

    if (result.divergence_count > 0) {
        result.exit_status = 1;
        result.message = std::to_string(result.divergence_count) +
                         " path(s) diverged; trajectory truncated after " +
                         std::to_string(traj.times.size()) + " grid points";
    } else if (strict && result.hypothesis_failure) {
        result.exit_status = 2;
        result.message = "hypothesis check failed (strict mode)";
    } else {
        result.message = "ok";
        if (result.hypothesis_failure) result.message = "ok (hypothesis check annotations present)";
    }
    return result;
}

}  // namespace nsdde
