#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nsdde {

using Vec = std::vector<double>;

// Dense row-major matrix, used for diffusion coefficient values (n x noise_dim).
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_sq(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double norm(const Vec& v) { return std::sqrt(norm_sq(v)); }

// Squared Hilbert-Schmidt norm, trace(A^T A).
inline double hs_norm_sq(const Mat& a) {
    double s = 0.0;
    for (double x : a.data) s += x * x;
    return s;
}

inline double hs_norm(const Mat& a) { return std::sqrt(hs_norm_sq(a)); }

inline Vec mat_vec(const Mat& a, const Vec& v) {
    if (a.cols != v.size()) throw std::invalid_argument("mat_vec: dimension mismatch");
    Vec out(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) s += a(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

inline Vec add(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("add: dimension mismatch");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

inline Vec sub(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("sub: dimension mismatch");
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

inline Vec scale(const Vec& a, double c) {
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = c * a[i];
    return out;
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Mat& a) {
    for (double x : a.data)
        if (!std::isfinite(x)) return false;
    return true;
}

// |a+b|^2 <= (1+eps)(|a|^2 + |b|^2/eps) for any eps > 0.
inline double pair_norm_bound(double a_norm_sq, double b_norm_sq, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("pair_norm_bound: eps must be positive");
    return (1.0 + eps) * (a_norm_sq + b_norm_sq / eps);
}

}  // namespace nsdde
