#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fracflow/errors.hpp"
#include "fracflow/field.hpp"
#include "fracflow/spectral.hpp"

namespace fracflow {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// MultiIndex: exponent vector p in (0, inf]^N
// ---------------------------------------------------------------------------

class MultiIndex {
  public:
    MultiIndex(std::initializer_list<double> e) : exps_(e) { validate(); }
    explicit MultiIndex(std::vector<double> e) : exps_(std::move(e)) { validate(); }
    static MultiIndex uniform(double p, int n) { return MultiIndex(std::vector<double>(n, p)); }

    int size() const { return static_cast<int>(exps_.size()); }
    double operator[](int i) const { return exps_[i]; }
    const std::vector<double>& exponents() const { return exps_; }

    /// |1/p| = sum of reciprocals (0 for an infinite entry).
    double reciprocal_sum() const {
        double s = 0.0;
        for (double p : exps_)
            if (std::isfinite(p)) s += 1.0 / p;
        return s;
    }

    bool all_finite() const {
        return std::all_of(exps_.begin(), exps_.end(), [](double p) { return std::isfinite(p); });
    }
    bool all_greater_than(double lo) const {
        return std::all_of(exps_.begin(), exps_.end(), [lo](double p) { return p > lo; });
    }

  private:
    void validate() const {
        if (exps_.empty()) throw usage_error("MultiIndex: empty exponent vector");
        for (double p : exps_)
            if (!(p > 0.0)) throw usage_error("MultiIndex: every entry must be > 0");
    }
    std::vector<double> exps_;
};

// ---------------------------------------------------------------------------
// Mixed and space-time norms (iterated trapezoidal sums on the lattice)
// ---------------------------------------------------------------------------

namespace detail {

/// Reduce the innermost axis of a row-major [rows x len] array.
inline std::vector<double> reduce_axis(const std::vector<double>& a, std::size_t rows,
                                       std::size_t len, double p, double weight) {
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = a.data() + r * len;
        if (std::isfinite(p)) {
            double acc = 0.0;
            for (std::size_t i = 0; i < len; ++i) acc += std::pow(std::abs(row[i]), p) * weight;
            out[r] = std::pow(acc, 1.0 / p);
        } else {
            double m = 0.0;
            for (std::size_t i = 0; i < len; ++i) m = std::max(m, std::abs(row[i]));
            out[r] = m;
        }
    }
    return out;
}

/// Trapezoidal weights on a (possibly nonuniform, non-periodic) time lattice.
inline std::vector<double> time_weights(const std::vector<double>& t) {
    const std::size_t m = t.size();
    std::vector<double> w(m, 1.0);
    if (m == 1) return w;
    w[0] = 0.5 * (t[1] - t[0]);
    w[m - 1] = 0.5 * (t[m - 1] - t[m - 2]);
    for (std::size_t i = 1; i + 1 < m; ++i) w[i] = 0.5 * (t[i + 1] - t[i - 1]);
    return w;
}

}  // namespace detail

/// Mixed L^p norm of one spatial slice: iterated integrals, innermost axis
/// integrated first with the last exponent; infinite entries reduce by max.
inline double mixed_norm(const SampledField& f, const MultiIndex& p, int t_index = 0, int comp = 0) {
    const auto& g = f.grid();
    if (p.size() != g.dim()) throw usage_error("mixed_norm: exponent count must match dimension");
    const auto s = f.slice(t_index, comp);
    for (double v : s)
        if (!std::isfinite(v)) throw data_error("mixed_norm: field has non-finite values");
    const double dx = g.spacing();
    std::vector<double> work(s.begin(), s.end());
    std::size_t rows = g.size();
    for (int axis = g.dim() - 1; axis >= 0; --axis) {
        rows /= static_cast<std::size_t>(g.n());
        work = detail::reduce_axis(work, rows, g.n(), p[axis], dx);
    }
    return work[0];
}

/// Space-time norm: L^q in time (trapezoid) of the spatial mixed norm; q = inf
/// takes the max over time samples.
inline double space_time_norm(const SampledField& f, double q, const MultiIndex& p, int comp = 0) {
    if (f.num_times() == 0) throw usage_error("space_time_norm: empty time lattice");
    std::vector<double> g(f.num_times());
    for (int ti = 0; ti < f.num_times(); ++ti) g[ti] = mixed_norm(f, p, ti, comp);
    if (f.num_times() == 1) return g[0];
    if (!std::isfinite(q)) return *std::max_element(g.begin(), g.end());
    if (!(q > 0.0)) throw usage_error("space_time_norm: q must be positive");
    const auto w = detail::time_weights(f.times());
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) acc += std::pow(g[i], q) * w[i];
    return std::pow(acc, 1.0 / q);
}

// ---------------------------------------------------------------------------
// Tail functional: integral of |f(y)| / |y|^{d+alpha} outside B_r, truncated
// at the fundamental cell (torus surrogate).
// ---------------------------------------------------------------------------

struct TailResult {
    double value = 0.0;
    /// Upper bound on the discarded mass beyond the cell, sup|f| * int_{|y|>L/2} |y|^{-d-a}.
    double truncation_bound = 0.0;
};

inline TailResult tail_report(const SampledField& f, double r, double alpha, int t_index = 0) {
    const auto& g = f.grid();
    if (!(r > 0.0) || r >= 0.5 * g.period()) throw usage_error("tail: need 0 < r < L/2");
    const auto s = f.slice(t_index);
    const double dpa = g.dim() + alpha;
    double acc = 0.0, sup = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) {
        const auto y = g.point(c);
        const double rho = std::hypot(y[0], g.dim() == 2 ? y[1] : 0.0);
        sup = std::max(sup, std::abs(s[c]));
        if (rho < r) continue;
        acc += std::abs(s[c]) / std::pow(rho, dpa) * g.cell_volume();
    }
    const double surface = g.dim() == 1 ? 2.0 : 2.0 * std::numbers::pi;
    TailResult out;
    out.value = acc;
    out.truncation_bound = sup * surface * std::pow(0.5 * g.period(), -alpha) / alpha;
    return out;
}

inline double tail(const SampledField& f, double r, double alpha, int t_index = 0) {
    return tail_report(f, r, alpha, t_index).value;
}

// ---------------------------------------------------------------------------
// Kernel specification K(t,y), comparable to |y|^{-d-alpha} (two-sided bound)
// ---------------------------------------------------------------------------

/// Normalization constant of the fractional Laplacian kernel:
/// (-Delta)^{a/2} f = C(d,a) p.v. int (f(x) - f(x+y)) |y|^{-d-a} dy.
inline double frac_kernel_constant(int d, double alpha) {
    if (!(alpha > 0.0) || alpha >= 2.0) throw usage_error("frac_kernel_constant: alpha in (0,2)");
    return std::pow(2.0, alpha) * std::tgamma(0.5 * (d + alpha)) /
           (std::pow(std::numbers::pi, 0.5 * d) * std::abs(std::tgamma(-0.5 * alpha)));
}

struct KernelSpec {
    double alpha = 1.0;
    double kappa0 = 1.0;
    double kappa1 = 1.0;
    /// K(t, y); must be symmetric in y and obey kappa0 |y|^{-d-a} <= K <= kappa1 |y|^{-d-a}.
    std::function<double(double, double, double)> profile;
    /// True when K is exactly the normalized fractional-Laplacian kernel, so
    /// spectral multipliers may stand in for the quadrature.
    bool exact_fractional = false;

    static KernelSpec fractional(int d, double alpha) {
        const double c = frac_kernel_constant(d, alpha);
        KernelSpec k;
        k.alpha = alpha;
        k.kappa0 = k.kappa1 = c;
        k.profile = [c, d, alpha](double, double y0, double y1) {
            return c * std::pow(std::hypot(y0, y1), -(d + alpha));
        };
        k.exact_fractional = true;
        return k;
    }

    /// Check the two-sided bound and symmetry on a sample lattice.
    void validate(const PeriodicGrid& g, double t = 0.0) const {
        for (std::size_t c = 0; c < g.size(); ++c) {
            const auto y = g.point(c);
            const double rho = std::hypot(y[0], g.dim() == 2 ? y[1] : 0.0);
            if (rho == 0.0) continue;
            const double env = std::pow(rho, -(g.dim() + alpha));
            const double v = profile(t, y[0], y[1]);
            if (v < kappa0 * env * (1 - 1e-9) || v > kappa1 * env * (1 + 1e-9))
                throw data_error("KernelSpec: two-sided bound violated at a sample point");
            const double vm = profile(t, -y[0], -y[1]);
            if (std::abs(v - vm) > 1e-9 * std::abs(v))
                throw data_error("KernelSpec: kernel not symmetric in y");
        }
    }
};

// ---------------------------------------------------------------------------
// Nonlocal energy form E(f,g) with singular cutoff delta
// ---------------------------------------------------------------------------

/// (1/2) sum_{|x-y| >= delta} (f(x)-f(y)) (g(x)-g(y)) K(t, x-y) dx dy over the
/// fundamental cell with periodic (minimum-image) displacement.
inline double energy_form(const SampledField& f, const SampledField& g, const KernelSpec& K,
                          double delta, double t = 0.0, int t_index = 0) {
    const auto& gr = f.grid();
    if (!(gr == g.grid())) throw usage_error("energy_form: mismatched grids");
    if (delta < gr.spacing() * (1 - 1e-12)) throw usage_error("energy_form: delta must be >= lattice spacing");
    const auto fs = f.slice(t_index);
    const auto gs = g.slice(t_index);
    const double w = gr.cell_volume() * gr.cell_volume();
    double acc = 0.0;
    const std::size_t m = gr.size();
    for (std::size_t a = 0; a < m; ++a) {
        const auto xa = gr.point(a);
        for (std::size_t b = 0; b < m; ++b) {
            if (a == b) continue;
            const auto xb = gr.point(b);
            const double u0 = gr.min_image(xa[0] - xb[0]);
            const double u1 = gr.dim() == 2 ? gr.min_image(xa[1] - xb[1]) : 0.0;
            const double rho = std::hypot(u0, u1);
            if (rho < delta) continue;
            acc += (fs[a] - fs[b]) * (gs[a] - gs[b]) * K.profile(t, u0, u1);
        }
    }
    return 0.5 * acc * w;
}

// ---------------------------------------------------------------------------
// Energy space norm ||f||_{V_alpha} = ||f||_{Linf_t L2_x} + ||D^{a/4} f||_{L2}
// ---------------------------------------------------------------------------

inline double valpha_norm(const SampledField& f, double alpha) {
    double sup_l2 = 0.0;
    std::vector<double> frac_l2_sq(f.num_times());
    for (int ti = 0; ti < f.num_times(); ++ti) {
        sup_l2 = std::max(sup_l2, l2_norm(f.slice(ti), f.grid()));
        auto F = to_modes(f, ti);
        apply_radial_multiplier(F, [alpha](double k) { return std::pow(k, 0.5 * alpha); });
        const double v = l2_norm_modes(F);
        frac_l2_sq[ti] = v * v;
    }
    double st = 0.0;
    if (f.num_times() == 1) {
        st = std::sqrt(frac_l2_sq[0]);
    } else {
        const auto w = detail::time_weights(f.times());
        for (std::size_t i = 0; i < frac_l2_sq.size(); ++i) st += frac_l2_sq[i] * w[i];
        st = std::sqrt(st);
    }
    return sup_l2 + st;
}

// ---------------------------------------------------------------------------
// Bessel norm: sum form for beta >= 0, (I - Delta)^{beta/2} multiplier for
// beta < 0.
// ---------------------------------------------------------------------------

inline double bessel_norm(const SampledField& f, double beta, const MultiIndex& p, int t_index = 0) {
    if (!p.all_greater_than(1.0) || !p.all_finite())
        throw usage_error("bessel_norm: p entries must be in (1, inf)");
    if (beta >= 0.0) {
        if (beta == 0.0) return 2.0 * mixed_norm(f, p, t_index);
        auto F = to_modes(f, t_index);
        apply_radial_multiplier(F, [beta](double k) { return std::pow(k, beta); });
        const SampledField Df = from_modes(F, f.times()[t_index]);
        return mixed_norm(f, p, t_index) + mixed_norm(Df, p, 0);
    }
    auto F = to_modes(f, t_index);
    apply_radial_multiplier(F, [beta](double k) { return std::pow(1.0 + k * k, 0.5 * beta); });
    const SampledField Jf = from_modes(F, f.times()[t_index]);
    return mixed_norm(Jf, p, 0);
}

// ---------------------------------------------------------------------------
// Localization: cutoff chi^z_r(x) = chi((x-z)/r), 1 on B_1, 0 outside B_2
// ---------------------------------------------------------------------------

/// Smooth radial transition profile: 1 for s <= 1, 0 for s >= 2.
inline double smooth_bump_profile(double s) {
    if (s <= 1.0) return 1.0;
    if (s >= 2.0) return 0.0;
    const auto h = [](double u) { return u > 0.0 ? std::exp(-1.0 / u) : 0.0; };
    return h(2.0 - s) / (h(2.0 - s) + h(s - 1.0));
}

struct LocalizationSpec {
    double r = 1.0;
    std::function<double(double)> chi = smooth_bump_profile;
    std::vector<std::array<double, 2>> shifts;

    /// Shift lattice of m^d grid-aligned centers over the cell.
    static LocalizationSpec uniform(const PeriodicGrid& g, double r, int m) {
        LocalizationSpec loc;
        loc.r = r;
        const int stride = std::max(1, g.n() / m);
        if (g.dim() == 1) {
            for (int i = 0; i < g.n(); i += stride) loc.shifts.push_back({g.coord(i), 0.0});
        } else {
            for (int i = 0; i < g.n(); i += stride)
                for (int j = 0; j < g.n(); j += stride) loc.shifts.push_back({g.coord(i), g.coord(j)});
        }
        return loc;
    }

    double chi_at(const PeriodicGrid& g, const std::array<double, 2>& x,
                  const std::array<double, 2>& z) const {
        return chi(g.distance(x, z) / r);
    }
};

/// Localized space-time Bessel norm: sup over shifts z of || f chi^z_r ||_{L^q_t H^beta_p}.
inline double localized_norm(const SampledField& f, double beta, const MultiIndex& p, double q,
                             const LocalizationSpec& loc) {
    if (loc.shifts.empty()) throw usage_error("localized_norm: empty shift lattice");
    const auto& g = f.grid();
    double best = 0.0;
    SampledField cut(g, f.times(), 1);
    std::vector<double> chi_cache(g.size());
    for (const auto& z : loc.shifts) {
        for (std::size_t c = 0; c < g.size(); ++c) chi_cache[c] = loc.chi_at(g, g.point(c), z);
        for (int ti = 0; ti < f.num_times(); ++ti) {
            const auto src = f.slice(ti);
            auto dst = cut.slice(ti);
            for (std::size_t c = 0; c < g.size(); ++c) dst[c] = src[c] * chi_cache[c];
        }
        std::vector<double> slice_norm(f.num_times());
        for (int ti = 0; ti < f.num_times(); ++ti) slice_norm[ti] = bessel_norm(cut, beta, p, ti);
        double v;
        if (f.num_times() == 1) {
            v = slice_norm[0];
        } else if (!std::isfinite(q)) {
            v = *std::max_element(slice_norm.begin(), slice_norm.end());
        } else {
            const auto w = detail::time_weights(f.times());
            double acc = 0.0;
            for (std::size_t i = 0; i < slice_norm.size(); ++i) acc += std::pow(slice_norm[i], q) * w[i];
            v = std::pow(acc, 1.0 / q);
        }
        best = std::max(best, v);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Index set I^beta_alpha and the scaling trichotomy
// ---------------------------------------------------------------------------

enum class Regime { subcritical, critical, supercritical, out_of_range };

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::subcritical: return "subcritical";
        case Regime::critical: return "critical";
        case Regime::supercritical: return "supercritical";
        default: return "out-of-range";
    }
}

struct IndexVerdict {
    bool member = false;          ///< (q,p) in I^beta_alpha, i.e. alpha/q + |1/p| < alpha - beta
    Regime regime = Regime::out_of_range;
    double scaling_exponent = 0.0;  ///< alpha - 1 - |1/p| - alpha/q (drift rescaling power)
    double index_sum = 0.0;         ///< alpha/q + |1/p|
};

inline IndexVerdict index_classify(double q, const MultiIndex& p, double alpha, double beta) {
    if (!(alpha > 0.0) || !(alpha < 2.0)) throw usage_error("index_classify: alpha must be in (0,2)");
    if (!(beta >= 0.0) || !(beta < 0.5 * alpha)) throw usage_error("index_classify: beta must be in [0, alpha/2)");
    if (!(q > 1.0) || !std::isfinite(q)) throw usage_error("index_classify: q must be in (1, inf)");
    if (!p.all_greater_than(1.0) || !p.all_finite())
        throw usage_error("index_classify: p entries must be in (1, inf)");
    IndexVerdict v;
    v.index_sum = alpha / q + p.reciprocal_sum();
    v.member = v.index_sum < alpha - beta;
    v.scaling_exponent = alpha - 1.0 - p.reciprocal_sum() - alpha / q;
    if (v.index_sum < alpha - 1.0 && alpha > 1.0)
        v.regime = Regime::subcritical;
    else if (v.index_sum == alpha - 1.0 && alpha >= 1.0)
        v.regime = Regime::critical;
    else if (v.index_sum > alpha - 1.0 && v.index_sum < alpha)
        v.regime = Regime::supercritical;
    else
        v.regime = Regime::out_of_range;
    return v;
}

/// Exponent pair (q, p) with its evaluated index sum and verdicts.
struct IndexPair {
    double q;
    MultiIndex p;
    double alpha;
    double beta;
    IndexVerdict verdict;

    IndexPair(double q_, MultiIndex p_, double alpha_, double beta_)
        : q(q_), p(std::move(p_)), alpha(alpha_), beta(beta_), verdict(index_classify(q, p, alpha, beta)) {}
};

// ---------------------------------------------------------------------------
// Parabolic cylinders Q_r(t0), Q_r^+/-(t0)
// ---------------------------------------------------------------------------

struct Cylinder {
    enum class Kind { two_sided, plus, minus };

    double t0 = 0.0;
    double r = 1.0;
    Kind kind = Kind::two_sided;
    std::array<double, 2> ball_center{0.0, 0.0};

    Cylinder(double t0_, double r_, Kind k = Kind::two_sided, std::array<double, 2> c = {0.0, 0.0})
        : t0(t0_), r(r_), kind(k), ball_center(c) {
        if (!(r > 0.0)) throw usage_error("Cylinder: radius must be positive");
    }

    double t_min() const { return kind == Kind::plus ? t0 : t0 - r; }
    double t_max() const { return kind == Kind::minus ? t0 : t0 + r; }
    bool contains_time(double t) const { return t >= t_min() - 1e-12 && t <= t_max() + 1e-12; }
    bool contains_point(const PeriodicGrid& g, const std::array<double, 2>& x) const {
        return g.distance(x, ball_center) <= r + 1e-12;
    }
};

}  // namespace fracflow
