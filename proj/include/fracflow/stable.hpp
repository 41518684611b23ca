#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "fracflow/errors.hpp"
#include "fracflow/rng.hpp"

namespace fracflow {

/// Parameters of an isotropic alpha-stable increment, generator convention
/// Delta^{alpha/2}: characteristic function E e^{i xi . L_t} = e^{-t |xi|^alpha}.
/// At alpha = 2 this degenerates to a Gaussian with per-coordinate variance 2t.
struct StableParams {
    double alpha = 1.0;
    int dimension = 1;
    double t = 1.0;

    void validate() const {
        if (!(alpha > 0.0) || alpha > 2.0) throw usage_error("StableParams: alpha must be in (0,2]");
        if (dimension != 1 && dimension != 2) throw usage_error("StableParams: dimension must be 1 or 2");
        if (!(t > 0.0)) throw usage_error("StableParams: time step must be positive");
    }
};

/// One draw of a symmetric alpha-stable variable with CF e^{-|xi|^alpha}
/// (Chambers-Mallows-Stuck; exact in law, handles alpha = 1 and 2).
inline double sym_stable_draw(double alpha, RngStream& rng) {
    const double u = rng.uniform(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
    const double e = rng.exponential();
    const double s = std::sin(alpha * u) / std::pow(std::cos(u), 1.0 / alpha);
    const double c = std::pow(std::cos((1.0 - alpha) * u) / e, (1.0 - alpha) / alpha);
    return s * c;
}

inline std::vector<double> sample_sym_stable_1d(double alpha, std::size_t n, RngStream& rng) {
    if (!(alpha > 0.0) || alpha > 2.0) throw usage_error("sample_sym_stable_1d: alpha must be in (0,2]");
    std::vector<double> out(n);
    for (auto& v : out) v = sym_stable_draw(alpha, rng);
    return out;
}

/// One draw of a positive stable variable with Laplace transform e^{-lambda^a},
/// a in (0,1) (Kanter's representation).
inline double positive_stable_draw(double a, RngStream& rng) {
    const double u = rng.uniform(0.0, std::numbers::pi);
    const double e = rng.exponential();
    const double A = std::pow(std::sin(a * u) / std::sin(u), a / (1.0 - a)) *
                     (std::sin((1.0 - a) * u) / std::sin(u));
    return std::pow(A / e, (1.0 - a) / a);
}

inline std::vector<double> sample_positive_stable(double a, std::size_t n, RngStream& rng) {
    if (!(a > 0.0) || !(a < 1.0)) throw usage_error("sample_positive_stable: index must be in (0,1)");
    std::vector<double> out(n);
    for (auto& v : out) v = positive_stable_draw(a, rng);
    return out;
}

/// One isotropic increment via the subordinated-Gaussian construction
/// L_t = B_{S_t}, B with per-coordinate CF e^{-t xi^2}, S the (alpha/2)-
/// subordinator, so E e^{i xi . L_t} = e^{-t |xi|^alpha}.
/// Draw budget per call is fixed (4 uniforms in d=2), so per-particle streams
/// stay aligned across steps.
inline std::array<double, 2> isotropic_stable_draw(const StableParams& p, RngStream& rng) {
    double s;  // subordinator value; per-coordinate Gaussian variance is 2s
    if (p.alpha == 2.0) {
        s = p.t;
    } else {
        s = std::pow(p.t, 2.0 / p.alpha) * positive_stable_draw(0.5 * p.alpha, rng);
    }
    double z0, z1;
    rng.normal_pair(z0, z1);
    const double sd = std::sqrt(2.0 * s);
    return {sd * z0, p.dimension == 2 ? sd * z1 : 0.0};
}

inline std::vector<std::array<double, 2>> sample_isotropic_increments(const StableParams& p,
                                                                      std::size_t n, RngStream& rng) {
    p.validate();
    std::vector<std::array<double, 2>> out(n);
    for (auto& v : out) v = isotropic_stable_draw(p, rng);
    return out;
}

/// Empirical characteristic function Re E e^{i xi . X} of a sample.
inline double empirical_cf(const std::vector<std::array<double, 2>>& xs, double xi0, double xi1) {
    double acc = 0.0;
    for (const auto& x : xs) acc += std::cos(xi0 * x[0] + xi1 * x[1]);
    return acc / static_cast<double>(xs.size());
}

inline double empirical_cf(const std::vector<double>& xs, double xi) {
    double acc = 0.0;
    for (double x : xs) acc += std::cos(xi * x);
    return acc / static_cast<double>(xs.size());
}

}  // namespace fracflow
