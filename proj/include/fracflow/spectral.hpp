#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "fracflow/errors.hpp"
#include "fracflow/fft.hpp"
#include "fracflow/field.hpp"

namespace fracflow {

using cdouble = std::complex<double>;

// ---------------------------------------------------------------------------
// Transforms.  Forward is unnormalized, inverse applies 1/n^d (exact pair).
// ---------------------------------------------------------------------------

inline SpectralField to_modes(const SampledField& f, int t_index = 0) {
    SpectralField out(f.grid(), f.components());
    std::vector<cdouble> buf(f.grid().size());
    for (int c = 0; c < f.components(); ++c) {
        const auto s = f.slice(t_index, c);
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = {s[i], 0.0};
        detail::FftCache::instance().forward(f.grid(), buf, out.comp(c));
    }
    return out;
}

/// Inverse transform into one time slice of `out` (real part; the operators
/// preserve Hermitian symmetry so the imaginary residue is roundoff).
inline void from_modes(const SpectralField& F, SampledField& out, int t_index = 0) {
    if (!(F.grid() == out.grid())) throw usage_error("from_modes: grid mismatch");
    if (F.components() != out.components()) throw usage_error("from_modes: component mismatch");
    std::vector<cdouble> buf(F.grid().size());
    for (int c = 0; c < F.components(); ++c) {
        detail::FftCache::instance().inverse(F.grid(), F.comp(c), buf);
        auto s = out.slice(t_index, c);
        for (std::size_t i = 0; i < buf.size(); ++i) s[i] = buf[i].real();
    }
}

inline SampledField from_modes(const SpectralField& F, double t = 0.0) {
    SampledField out = SampledField::at_time(F.grid(), t, F.components());
    from_modes(F, out, 0);
    return out;
}

// ---------------------------------------------------------------------------
// Per-mode multiplier plumbing
// ---------------------------------------------------------------------------

namespace detail {

/// Visit every mode: fn(flat index, k0, k1, signed mode numbers m0, m1).
template <typename Fn>
inline void for_each_mode(const PeriodicGrid& g, Fn&& fn) {
    const int n = g.n();
    if (g.dim() == 1) {
        for (int i = 0; i < n; ++i) fn(static_cast<std::size_t>(i), g.wavenumber(i), 0.0, g.mode_number(i), 0);
    } else {
        std::size_t idx = 0;
        for (int i = 0; i < n; ++i) {
            const double k0 = g.wavenumber(i);
            const int m0 = g.mode_number(i);
            for (int j = 0; j < n; ++j, ++idx) fn(idx, k0, g.wavenumber(j), m0, g.mode_number(j));
        }
    }
}

}  // namespace detail

/// Apply a scalar multiplier lambda(|k|) to every component in place.
inline void apply_radial_multiplier(SpectralField& F, const std::function<double(double)>& mult) {
    std::vector<double> m(F.grid().size());
    detail::for_each_mode(F.grid(), [&](std::size_t idx, double k0, double k1, int, int) {
        m[idx] = mult(std::hypot(k0, k1));
    });
    for (int c = 0; c < F.components(); ++c) {
        auto s = F.comp(c);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] *= m[i];
    }
}

// ---------------------------------------------------------------------------
// Fractional Laplacian and heat semigroup
// ---------------------------------------------------------------------------

/// Fractional Laplacian: multiplier -|k|^alpha per mode (zero mode -> 0).
inline SpectralField frac_laplacian_modes(const SpectralField& F, double alpha) {
    if (!(alpha > 0.0) || alpha > 2.0) throw usage_error("frac_laplacian: alpha must be in (0,2]");
    SpectralField out = F;
    apply_radial_multiplier(out, [alpha](double k) { return k == 0.0 ? 0.0 : -std::pow(k, alpha); });
    return out;
}

inline SampledField frac_laplacian(const SampledField& f, double alpha, int t_index = 0) {
    return from_modes(frac_laplacian_modes(to_modes(f, t_index), alpha), f.times()[t_index]);
}

/// Fractional heat semigroup e^{t Delta^{alpha/2}}: multiplier e^{-t|k|^alpha}.
inline SpectralField semigroup_apply_modes(const SpectralField& F, double t, double alpha) {
    if (t < 0.0) throw usage_error("semigroup_apply: t must be >= 0");
    if (!(alpha > 0.0) || alpha > 2.0) throw usage_error("semigroup_apply: alpha must be in (0,2]");
    SpectralField out = F;
    apply_radial_multiplier(out, [t, alpha](double k) { return std::exp(-t * std::pow(k, alpha)); });
    return out;
}

inline SampledField semigroup_apply(const SampledField& f, double t, double alpha, int t_index = 0) {
    return from_modes(semigroup_apply_modes(to_modes(f, t_index), t, alpha), f.times()[t_index]);
}

// ---------------------------------------------------------------------------
// Derivatives.  Odd multipliers zero the unpaired Nyquist line so real fields
// map to real fields.
// ---------------------------------------------------------------------------

namespace detail {
inline double odd_k(double k, int m, int n) { return m == -n / 2 ? 0.0 : k; }
}  // namespace detail

inline SpectralField gradient_modes(const SpectralField& F) {
    if (F.components() != 1) throw usage_error("gradient: scalar field expected");
    const auto& g = F.grid();
    SpectralField out(g, g.dim());
    const auto in = F.comp(0);
    detail::for_each_mode(g, [&](std::size_t idx, double k0, double k1, int m0, int m1) {
        const cdouble v = in[idx];
        out.comp(0)[idx] = cdouble(0.0, detail::odd_k(k0, m0, g.n())) * v;
        if (g.dim() == 2) out.comp(1)[idx] = cdouble(0.0, detail::odd_k(k1, m1, g.n())) * v;
    });
    return out;
}

inline SpectralField divergence_modes(const SpectralField& V) {
    const auto& g = V.grid();
    if (V.components() != g.dim()) throw usage_error("divergence: vector field expected");
    SpectralField out(g, 1);
    detail::for_each_mode(g, [&](std::size_t idx, double k0, double k1, int m0, int m1) {
        cdouble s = cdouble(0.0, detail::odd_k(k0, m0, g.n())) * V.comp(0)[idx];
        if (g.dim() == 2) s += cdouble(0.0, detail::odd_k(k1, m1, g.n())) * V.comp(1)[idx];
        out.comp(0)[idx] = s;
    });
    return out;
}

inline SampledField gradient(const SampledField& f, int t_index = 0) {
    return from_modes(gradient_modes(to_modes(f, t_index)), f.times()[t_index]);
}

inline SampledField divergence(const SampledField& v, int t_index = 0) {
    return from_modes(divergence_modes(to_modes(v, t_index)), v.times()[t_index]);
}

// ---------------------------------------------------------------------------
// SQG / Navier-Stokes velocity laws (d = 2)
// ---------------------------------------------------------------------------

/// Riesz-transform velocity R theta = (-d2 (-Delta)^{-1/2}, d1 (-Delta)^{-1/2}) theta.
/// Per-mode multiplier (-i k2/|k|, i k1/|k|); zero mode annihilated.
inline SpectralField riesz_velocity_modes(const SpectralField& F) {
    const auto& g = F.grid();
    if (g.dim() != 2) throw usage_error("riesz_velocity: d must be 2");
    if (F.components() != 1) throw usage_error("riesz_velocity: scalar field expected");
    SpectralField out(g, 2);
    const auto in = F.comp(0);
    detail::for_each_mode(g, [&](std::size_t idx, double k0, double k1, int m0, int m1) {
        const double kk = std::hypot(k0, k1);
        if (kk == 0.0) return;
        const double a = detail::odd_k(k0, m0, g.n()) / kk;
        const double b = detail::odd_k(k1, m1, g.n()) / kk;
        out.comp(0)[idx] = cdouble(0.0, -b) * in[idx];
        out.comp(1)[idx] = cdouble(0.0, a) * in[idx];
    });
    return out;
}

inline SampledField riesz_velocity(const SampledField& theta, int t_index = 0) {
    return from_modes(riesz_velocity_modes(to_modes(theta, t_index)), theta.times()[t_index]);
}

/// Periodic Biot-Savart velocity u = K2 * rho: per-mode multiplier
/// i (k2, -k1)/|k|^2 so that curl u = rho - mean(rho); zero mode annihilated.
inline SpectralField biot_savart_velocity_modes(const SpectralField& F) {
    const auto& g = F.grid();
    if (g.dim() != 2) throw usage_error("biot_savart_velocity: d must be 2");
    if (F.components() != 1) throw usage_error("biot_savart_velocity: scalar field expected");
    SpectralField out(g, 2);
    const auto in = F.comp(0);
    detail::for_each_mode(g, [&](std::size_t idx, double k0, double k1, int m0, int m1) {
        const double kk2 = k0 * k0 + k1 * k1;
        if (kk2 == 0.0) return;
        const double a = detail::odd_k(k0, m0, g.n()) / kk2;
        const double b = detail::odd_k(k1, m1, g.n()) / kk2;
        out.comp(0)[idx] = cdouble(0.0, b) * in[idx];
        out.comp(1)[idx] = cdouble(0.0, -a) * in[idx];
    });
    return out;
}

inline SampledField biot_savart_velocity(const SampledField& rho, int t_index = 0) {
    return from_modes(biot_savart_velocity_modes(to_modes(rho, t_index)), rho.times()[t_index]);
}

/// The 2D Biot-Savart kernel K2(x) = (1/2pi) (-x2, x1)/|x|^2, x != 0.
inline std::array<double, 2> k2_eval(double x0, double x1) {
    const double r2 = x0 * x0 + x1 * x1;
    if (r2 == 0.0) throw usage_error("k2_eval: x must be nonzero");
    const double c = 1.0 / (2.0 * std::numbers::pi * r2);
    return {-x1 * c, x0 * c};
}

// ---------------------------------------------------------------------------
// Dealiasing and helpers
// ---------------------------------------------------------------------------

/// 2/3-rule truncation: zero modes with |m| > n/3 on any axis.
inline void dealias_23(SpectralField& F) {
    const int cutoff = F.grid().n() / 3;
    for (int c = 0; c < F.components(); ++c) {
        auto s = F.comp(c);
        detail::for_each_mode(F.grid(), [&](std::size_t idx, double, double, int m0, int m1) {
            if (std::abs(m0) > cutoff || std::abs(m1) > cutoff) s[idx] = {0.0, 0.0};
        });
    }
}

/// Lattice L^2 norm (integral form, weight dx^d).
inline double l2_norm(std::span<const double> s, const PeriodicGrid& g) {
    double acc = 0.0;
    for (double v : s) acc += v * v;
    return std::sqrt(acc * g.cell_volume());
}

/// Same L^2 norm computed from mode coefficients (Parseval).
inline double l2_norm_modes(const SpectralField& F, int c = 0) {
    double acc = 0.0;
    for (const auto& v : F.comp(c)) acc += std::norm(v);
    const double nd = static_cast<double>(F.grid().size());
    return std::sqrt(acc * F.grid().cell_volume() / nd);
}

inline double max_abs(std::span<const double> s) {
    double m = 0.0;
    for (double v : s) m = std::max(m, std::abs(v));
    return m;
}

/// Evaluate a band-limited field at an arbitrary point by direct mode summation
/// (spectral interpolation; used by scaling_transform for off-lattice points).
/// The mode phases use lattice offsets, so the physical coordinate is shifted
/// by L/2 to match the storage convention (see PeriodicGrid::coord).
inline double spectral_eval(const SpectralField& F, double x0, double x1, int c = 0) {
    const auto& g = F.grid();
    const auto s = F.comp(c);
    const double half = 0.5 * g.period();
    cdouble acc{0.0, 0.0};
    detail::for_each_mode(g, [&](std::size_t idx, double k0, double k1, int, int) {
        acc += s[idx] * std::exp(cdouble(0.0, k0 * (x0 + half) + k1 * (x1 + half)));
    });
    return acc.real() / static_cast<double>(g.size());
}

}  // namespace fracflow
