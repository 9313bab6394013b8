#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nsdde/common.hpp"

namespace nsdde {

// The triple (D, b, sigma) of an n-dimensional neutral stochastic delay system
//   d[X(t) - D(X(t-tau))] = b(X(t), X(t-tau)) dt + sigma(X(t), X(t-tau)) dw(t).
// noise_dim is the Wiener dimension (named to avoid clashing with the delay lag).
struct NeutralSystem {
    std::size_t state_dim = 1;
    std::size_t noise_dim = 1;
    std::function<Vec(const Vec&)> D;
    std::function<Vec(const Vec&, const Vec&)> b;
    std::function<Mat(const Vec&, const Vec&)> sigma;
};

// Initial segment on [-tau, 0], evaluated at grid offsets theta = k*h, k = -m..0.
// `at` must return a finite state_dim-vector at every such offset.
struct InitialSegment {
    double tau = 0.0;
    std::function<Vec(double theta)> at;
};

inline InitialSegment constant_segment(double tau, Vec value) {
    return InitialSegment{tau, [v = std::move(value)](double) { return v; }};
}

// Parameters of the diffusion stability condition
//   |sigma(x,y)|^2 <= (1/h)(-lambda1 - lambda2|x|^2 + lambda3|y|^2),
// requiring lambda1 > 2 and lambda2 > lambda3 > 0.
struct StabilityParams {
    double lambda1;
    double lambda2;
    double lambda3;
};

inline void validate(const StabilityParams& p) {
    if (!(p.lambda1 > 2.0)) throw std::invalid_argument("StabilityParams: lambda1 must exceed 2");
    if (!(p.lambda2 > p.lambda3 && p.lambda3 > 0.0))
        throw std::invalid_argument("StabilityParams: need lambda2 > lambda3 > 0");
}

enum class AssumptionId { A1, A2, A3, SigmaCond };

inline std::string to_string(AssumptionId id) {
    switch (id) {
        case AssumptionId::A1: return "A1";
        case AssumptionId::A2: return "A2";
        case AssumptionId::A3: return "A3";
        case AssumptionId::SigmaCond: return "SigmaCond";
    }
    return "?";
}

// Result of a sampling-based assumption check. The checkers are falsifiers,
// not proofs: estimated_constant is the maximum observed ratio over the
// sample, a lower bound on the true constant.
struct AssumptionReport {
    AssumptionId assumption_id;
    bool holds_on_sample = false;
    double estimated_constant = 0.0;
    std::vector<Vec> worst_point;  // the sampled input achieving the tightest/violating ratio
    std::size_t sample_count = 0;
    // A3 only: empirical sup of |b| over the sampled ball.
    double drift_sup = 0.0;
    // SigmaCond only: sampled pairs where the right-hand side is negative,
    // i.e. where no diffusion coefficient could satisfy the inequality.
    std::vector<std::pair<Vec, Vec>> negative_rhs_points;
};

// Contraction check for the neutral map: D(0) = 0 and
// |D(x) - D(xbar)| <= kappa |x - xbar| with kappa < 1.
inline AssumptionReport check_contraction(const std::function<Vec(const Vec&)>& D,
                                          const std::vector<std::pair<Vec, Vec>>& sample_pairs,
                                          double tolerance = 1e-9) {
    if (sample_pairs.empty()) throw std::invalid_argument("check_contraction: empty sample list");
    if (tolerance < 0.0) throw std::invalid_argument("check_contraction: negative tolerance");

    AssumptionReport rep;
    rep.assumption_id = AssumptionId::A2;
    rep.sample_count = sample_pairs.size();
    double kappa_hat = 0.0;
    for (const auto& [x, xbar] : sample_pairs) {
        const double denom = norm(sub(x, xbar));
        if (denom == 0.0) continue;  // degenerate pair
        const double ratio = norm(sub(D(x), D(xbar))) / denom;
        if (ratio >= kappa_hat) {
            kappa_hat = ratio;
            rep.worst_point = {x, xbar};
        }
    }
    rep.estimated_constant = kappa_hat;
    const Vec zero(sample_pairs.front().first.size(), 0.0);
    const double d0 = norm(D(zero));
    rep.holds_on_sample = (kappa_hat < 1.0 - tolerance) && (d0 <= tolerance);
    return rep;
}

// Coercivity check:
//   <x - D(y), b(x,y)> v |sigma(x,y)|^2 <= K_tilde (1 + |x|^2 + |y|^2).
inline AssumptionReport check_coercivity(const NeutralSystem& system, double K_tilde,
                                         const std::vector<std::pair<Vec, Vec>>& sample_pairs) {
    if (!(K_tilde > 0.0)) throw std::invalid_argument("check_coercivity: K_tilde must be positive");

    AssumptionReport rep;
    rep.assumption_id = AssumptionId::A1;
    rep.sample_count = sample_pairs.size();
    rep.holds_on_sample = true;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& [x, y] : sample_pairs) {
        const double lhs = std::max(dot(sub(x, system.D(y)), system.b(x, y)),
                                    hs_norm_sq(system.sigma(x, y)));
        const double rhs_scale = 1.0 + norm_sq(x) + norm_sq(y);
        const double ratio = lhs / rhs_scale;
        if (ratio > worst) {
            worst = ratio;
            rep.worst_point = {x, y};
        }
        if (lhs > K_tilde * rhs_scale) rep.holds_on_sample = false;
    }
    rep.estimated_constant = std::max(worst, 0.0);
    return rep;
}

// Local monotonicity check on the radius-ball:
//   <x - D(y) - xbar + D(ybar), b(x,y) - b(xbar,ybar)> v |sigma(x,y)-sigma(xbar,ybar)|^2
//     <= K_tilde_R (|x-xbar|^2 + |y-ybar|^2),
// plus the empirical sup of |b| on the sampled ball.
inline AssumptionReport check_local_monotonicity(
    const NeutralSystem& system, double radius,
    const std::vector<std::array<Vec, 4>>& sample_quads) {
    if (!(radius > 0.0))
        throw std::invalid_argument("check_local_monotonicity: radius must be positive");

    AssumptionReport rep;
    rep.assumption_id = AssumptionId::A3;
    rep.sample_count = sample_quads.size();
    rep.holds_on_sample = true;
    double worst = 0.0;
    double drift_sup = 0.0;
    for (const auto& quad : sample_quads) {
        const Vec& x = quad[0];
        const Vec& y = quad[1];
        const Vec& xb = quad[2];
        const Vec& yb = quad[3];
        for (const Vec* p : {&x, &y, &xb, &yb})
            if (norm(*p) > radius * (1.0 + 1e-12))
                throw std::invalid_argument("check_local_monotonicity: sampled point outside ball");

        drift_sup = std::max(drift_sup, norm(system.b(x, y)));
        const double denom = norm_sq(sub(x, xb)) + norm_sq(sub(y, yb));
        if (denom == 0.0) continue;  // degenerate quad
        const Vec lhs_vec = sub(sub(x, system.D(y)), sub(xb, system.D(yb)));
        const double inner = dot(lhs_vec, sub(system.b(x, y), system.b(xb, yb)));
        Mat ds = system.sigma(x, y);
        const Mat s2 = system.sigma(xb, yb);
        for (std::size_t i = 0; i < ds.data.size(); ++i) ds.data[i] -= s2.data[i];
        const double ratio = std::max(inner, hs_norm_sq(ds)) / denom;
        if (ratio > worst) {
            worst = ratio;
            rep.worst_point = {x, y, xb, yb};
        }
    }
    rep.estimated_constant = worst;
    rep.drift_sup = drift_sup;
    return rep;
}

enum class SigmaCondVariant {
    statement,  // |sigma|^2 <= (1/h)(-l1 - l2|x|^2 + l3|y|^2)
    proof,      // |sigma|^2 <=   h  (-l1 - l2|x|^2 + l3|y|^2)
};

// Checks the diffusion stability condition in either of its two forms (the
// factor on the right-hand side differs by h^2 between them); also reports
// every sampled pair where the parenthesised term is negative, since no sigma
// can satisfy the inequality there.
inline AssumptionReport check_sigma_condition(const NeutralSystem& system,
                                              const StabilityParams& params, double h,
                                              SigmaCondVariant variant,
                                              const std::vector<std::pair<Vec, Vec>>& sample_pairs) {
    if (!(h > 0.0 && h < 1.0)) throw std::invalid_argument("check_sigma_condition: h must lie in (0,1)");

    AssumptionReport rep;
    rep.assumption_id = AssumptionId::SigmaCond;
    rep.sample_count = sample_pairs.size();
    rep.holds_on_sample = true;
    const double factor = (variant == SigmaCondVariant::statement) ? 1.0 / h : h;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& [x, y] : sample_pairs) {
        const double core = -params.lambda1 - params.lambda2 * norm_sq(x) + params.lambda3 * norm_sq(y);
        if (core < 0.0) rep.negative_rhs_points.emplace_back(x, y);
        const double lhs = hs_norm_sq(system.sigma(x, y));
        const double slack = lhs - factor * core;
        if (slack > 0.0) rep.holds_on_sample = false;
        if (slack > worst) {
            worst = slack;
            rep.worst_point = {x, y};
        }
    }
    rep.estimated_constant = worst;
    return rep;
}

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double unit_open(std::uint64_t bits) {
    // maps to (0,1), never exactly 0 or 1
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}
}  // namespace detail

// Default checker sample domain: uniform on the ball of radius R plus the
// coordinate axes and the origin. Deterministic for a fixed seed.
inline std::vector<Vec> default_sample_points(std::size_t dim, double radius = 10.0,
                                              std::size_t count = 10000,
                                              std::uint64_t seed = 20240901ULL) {
    std::vector<Vec> pts;
    pts.reserve(count + 2 * dim + 1);
    pts.emplace_back(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) {
        for (double s : {radius, -radius}) {
            Vec v(dim, 0.0);
            v[i] = s;
            pts.push_back(std::move(v));
        }
    }
    std::uint64_t ctr = detail::mix64(seed);
    while (pts.size() < count + 2 * dim + 1) {
        // gaussian direction, radius ~ U^(1/dim) for uniformity in the ball
        Vec v(dim);
        double r2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double u1 = detail::unit_open(detail::mix64(ctr++));
            const double u2 = detail::unit_open(detail::mix64(ctr++));
            v[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
            r2 += v[i] * v[i];
        }
        if (r2 == 0.0) continue;
        const double u = detail::unit_open(detail::mix64(ctr++));
        const double scale_to = radius * std::pow(u, 1.0 / static_cast<double>(dim)) / std::sqrt(r2);
        for (double& c : v) c *= scale_to;
        pts.push_back(std::move(v));
    }
    return pts;
}

inline std::vector<std::pair<Vec, Vec>> default_sample_pairs(std::size_t dim, double radius = 10.0,
                                                             std::size_t count = 10000,
                                                             std::uint64_t seed = 20240901ULL) {
    const auto xs = default_sample_points(dim, radius, count, seed);
    const auto ys = default_sample_points(dim, radius, count, seed ^ 0x5bf03635ULL);
    std::vector<std::pair<Vec, Vec>> pairs;
    pairs.reserve(xs.size());
    for (std::size_t i = 0; i < std::min(xs.size(), ys.size()); ++i)
        pairs.emplace_back(xs[i], ys[i]);
    return pairs;
}

}  // namespace nsdde
