#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "nsdde/common.hpp"
#include "nsdde/model.hpp"

namespace nsdde {

// Scalar linear system D(y) = kappa0 y, b(x,y) = -a x + btilde y,
// sigma(x,y) = s y. Satisfies the standing assumptions by construction for
// |kappa0| < 1.
inline NeutralSystem make_linear_system(double kappa0, double a, double btilde, double s) {
    if (!(std::abs(kappa0) < 1.0))
        throw std::invalid_argument("make_linear_system: need |kappa0| < 1");
    NeutralSystem sys;
    sys.state_dim = 1;
    sys.noise_dim = 1;
    sys.D = [kappa0](const Vec& y) { return Vec{kappa0 * y[0]}; };
    sys.b = [a, btilde](const Vec& x, const Vec& y) { return Vec{-a * x[0] + btilde * y[0]}; };
    sys.sigma = [s](const Vec&, const Vec& y) {
        Mat out(1, 1);
        out(0, 0) = s * y[0];
        return out;
    };
    return sys;
}

// Scalar cubic system D = 0, b(x,y) = -x^3, sigma = 0: superlinear drift for
// the blow-up contrast between the classic and tamed steppers.
inline NeutralSystem make_cubic_system() {
    NeutralSystem sys;
    sys.state_dim = 1;
    sys.noise_dim = 1;
    sys.D = [](const Vec& y) { return Vec(y.size(), 0.0); };
    sys.b = [](const Vec& x, const Vec&) { return Vec{-x[0] * x[0] * x[0]}; };
    sys.sigma = [](const Vec&, const Vec&) { return Mat(1, 1, 0.0); };
    return sys;
}

// Scalar additive-noise system D = 0, b = 0, sigma = 1, whose second moment
// from xi = 1 is exactly 1 + kh. Used as an analytic oracle.
inline NeutralSystem make_pure_noise_system() {
    NeutralSystem sys;
    sys.state_dim = 1;
    sys.noise_dim = 1;
    sys.D = [](const Vec& y) { return Vec(y.size(), 0.0); };
    sys.b = [](const Vec& x, const Vec&) { return Vec(x.size(), 0.0); };
    sys.sigma = [](const Vec&, const Vec&) { return Mat(1, 1, 1.0); };
    return sys;
}

}  // namespace nsdde
