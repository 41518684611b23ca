#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fracflow/errors.hpp"
#include "fracflow/field.hpp"
#include "fracflow/norms.hpp"
#include "fracflow/spectral.hpp"

namespace fracflow {

// ---------------------------------------------------------------------------
// Test functions: tensor bumps B(s) = (1 - s^2)^3 on |s| < 1
// ---------------------------------------------------------------------------

struct TestBump {
    double t_center = 0.0, t_radius = 1.0;
    std::array<double, 2> x_center{0.0, 0.0};
    double x_radius = 1.0;

    static double B(double s) {
        const double w = 1.0 - s * s;
        return w > 0.0 ? w * w * w : 0.0;
    }
    static double dB(double s) {
        const double w = 1.0 - s * s;
        return w > 0.0 ? -6.0 * s * w * w : 0.0;
    }

    double value(double t, double x0, double x1, const PeriodicGrid& g) const {
        const double st = (t - t_center) / t_radius;
        const double s0 = g.min_image(x0 - x_center[0]) / x_radius;
        const double s1 = g.dim() == 2 ? g.min_image(x1 - x_center[1]) / x_radius : 0.0;
        return B(st) * B(s0) * (g.dim() == 2 ? B(s1) : 1.0);
    }
    double dt(double t, double x0, double x1, const PeriodicGrid& g) const {
        const double st = (t - t_center) / t_radius;
        const double s0 = g.min_image(x0 - x_center[0]) / x_radius;
        const double s1 = g.dim() == 2 ? g.min_image(x1 - x_center[1]) / x_radius : 0.0;
        return dB(st) / t_radius * B(s0) * (g.dim() == 2 ? B(s1) : 1.0);
    }
    std::array<double, 2> grad(double t, double x0, double x1, const PeriodicGrid& g) const {
        const double st = (t - t_center) / t_radius;
        const double s0 = g.min_image(x0 - x_center[0]) / x_radius;
        const double s1 = g.dim() == 2 ? g.min_image(x1 - x_center[1]) / x_radius : 0.0;
        std::array<double, 2> out{0.0, 0.0};
        out[0] = B(st) * dB(s0) / x_radius * (g.dim() == 2 ? B(s1) : 1.0);
        if (g.dim() == 2) out[1] = B(st) * B(s0) * dB(s1) / x_radius;
        return out;
    }
};

/// Default bank: 3 scales x 5 centers inside the space-time box.
inline std::vector<TestBump> default_test_bank(const PeriodicGrid& g, double t0, double t1) {
    std::vector<TestBump> bank;
    const double tc = 0.5 * (t0 + t1), tr_max = 0.45 * (t1 - t0);
    const double xr_max = 0.45 * g.period();
    const std::array<std::array<double, 2>, 5> centers{{{0.0, 0.0},
                                                        {0.25 * g.period(), 0.0},
                                                        {0.0, 0.25 * g.period()},
                                                        {-0.2 * g.period(), -0.15 * g.period()},
                                                        {0.15 * g.period(), -0.25 * g.period()}}};
    for (double scale : {1.0, 0.6, 0.35}) {
        for (const auto& c : centers) {
            TestBump b;
            b.t_center = tc;
            b.t_radius = tr_max * scale;
            b.x_center = c;
            b.x_radius = xr_max * scale;
            bank.push_back(b);
        }
    }
    return bank;
}

// ---------------------------------------------------------------------------
// Weak residual of Definition 1.1
// ---------------------------------------------------------------------------

/// Per-bump signed residuals ( -int u dphi/dt - int u L^a phi + int (b.grad
/// phi + phi div b) u - int f phi ) / scale(phi).  L^a phi is the spectral
/// multiplier when K is the exact fractional kernel, otherwise the energy-form
/// quadrature via the (SY1) pairing.
inline std::vector<double> weak_residuals(const SampledField& u, const SampledField* b,
                                          const SampledField* f, const KernelSpec& K,
                                          const std::vector<TestBump>& bank) {
    const auto& g = u.grid();
    const auto& times = u.times();
    if (times.size() < 2) throw usage_error("weak_residual: need a space-time field");
    for (const auto& phi : bank) {
        if (phi.t_center - phi.t_radius < times.front() - 1e-12 ||
            phi.t_center + phi.t_radius > times.back() + 1e-12)
            throw usage_error("weak_residual: test function support touches the time boundary");
        if (2.0 * phi.x_radius > g.period())
            throw usage_error("weak_residual: test function support exceeds the cell");
    }
    const auto tw = detail::time_weights(times);
    std::vector<double> out;
    out.reserve(bank.size());
    for (const auto& phi : bank) {
        // Mean-project the d/dt quadrature weights so that u and u + kappa
        // give identical residuals (constants are exact solutions).
        std::vector<double> wdt(times.size());
        double wsum = 0.0, twsum = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            wdt[i] = tw[i] * TestBump::dB((times[i] - phi.t_center) / phi.t_radius) / phi.t_radius;
            wsum += wdt[i];
            twsum += tw[i];
        }
        for (std::size_t i = 0; i < times.size(); ++i) wdt[i] -= tw[i] * wsum / twsum;

        // The bump factorizes in time, so the spatial pieces are computed once:
        // phi(t,x) = B_t(t) Phi(x).
        SampledField Phi = SampledField::at_time(g);
        Phi.fill(0, [&](double x, double y) { return phi.value(phi.t_center, x, y, g); });
        SampledField LPhi = SampledField::at_time(g);
        if (K.exact_fractional) {
            LPhi = frac_laplacian(Phi, K.alpha);
        } else {
            // quadrature route via the (SY1) kernel pairing
            const auto ps = Phi.slice(0);
            auto ls = LPhi.slice(0);
            for (std::size_t a = 0; a < g.size(); ++a) {
                const auto xa = g.point(a);
                double acc = 0.0;
                for (std::size_t bb = 0; bb < g.size(); ++bb) {
                    if (a == bb) continue;
                    const auto xb = g.point(bb);
                    const double u0 = g.min_image(xb[0] - xa[0]);
                    const double u1 = g.dim() == 2 ? g.min_image(xb[1] - xa[1]) : 0.0;
                    acc += (ps[bb] - ps[a]) * K.profile(0.0, u0, u1) * g.cell_volume();
                }
                ls[a] = acc;
            }
        }
        // spectral gradient of Phi: paired with the spectral div b it cancels
        // exactly against constants (int div(b phi) = 0 on the lattice)
        const SampledField GPhi = gradient(Phi);

        double acc_dt = 0.0, acc_L = 0.0, acc_b = 0.0, acc_f = 0.0;
        double norm_phi = 0.0, norm_L = 0.0, norm_g = 0.0, wsum_dt = 0.0, wsum_b = 0.0;
        for (std::size_t cc = 0; cc < g.size(); ++cc) {
            norm_phi += std::abs(Phi.slice(0)[cc]) * g.cell_volume();
            norm_L += std::abs(LPhi.slice(0)[cc]) * g.cell_volume();
            norm_g += std::hypot(GPhi.at(0, cc, 0), g.dim() == 2 ? GPhi.at(0, cc, 1) : 0.0) * g.cell_volume();
        }
        for (int ti = 0; ti < u.num_times(); ++ti) {
            const double t = times[ti];
            const double bt = TestBump::B((t - phi.t_center) / phi.t_radius);
            wsum_dt += std::abs(wdt[ti]);
            wsum_b += tw[ti] * bt;
            const auto us = u.slice(ti);
            double su = 0.0, sl = 0.0, sf = 0.0, sb = 0.0;
            for (std::size_t cc = 0; cc < g.size(); ++cc) {
                su += us[cc] * Phi.slice(0)[cc];
                sl += us[cc] * LPhi.slice(0)[cc];
            }
            if (f)
                for (std::size_t cc = 0; cc < g.size(); ++cc)
                    sf += f->at(std::min(ti, f->num_times() - 1), cc) * Phi.slice(0)[cc];
            if (b && bt != 0.0) {
                SampledField bs = SampledField::at_time(g, t, g.dim());
                for (int c = 0; c < g.dim(); ++c) {
                    if (b->num_times() == 1) {
                        std::copy(b->slice(0, c).begin(), b->slice(0, c).end(), bs.slice(0, c).begin());
                    } else {
                        const int i = b->time_bracket(t);
                        double w = (t - b->times()[i]) / (b->times()[i + 1] - b->times()[i]);
                        w = std::clamp(w, 0.0, 1.0);
                        const auto lo = b->slice(i, c), hi = b->slice(i + 1, c);
                        auto dst = bs.slice(0, c);
                        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = (1 - w) * lo[j] + w * hi[j];
                    }
                }
                const SampledField divb = divergence(bs);
                for (std::size_t cc = 0; cc < g.size(); ++cc) {
                    double dot = GPhi.at(0, cc, 0) * bs.at(0, cc, 0);
                    if (g.dim() == 2) dot += GPhi.at(0, cc, 1) * bs.at(0, cc, 1);
                    sb += (dot + Phi.slice(0)[cc] * divb.slice(0)[cc]) * us[cc];
                }
            }
            acc_dt += wdt[ti] * su * g.cell_volume();
            acc_L += tw[ti] * bt * sl * g.cell_volume();
            acc_b += tw[ti] * bt * sb * g.cell_volume();
            acc_f += tw[ti] * bt * sf * g.cell_volume();
        }
        const double R = -acc_dt - acc_L + acc_b - acc_f;
        const double scale = wsum_dt * norm_phi + wsum_b * (norm_L + norm_g) + 1e-300;
        out.push_back(R / scale);
    }
    return out;
}

inline double weak_residual(const SampledField& u, const SampledField* b, const SampledField* f,
                            const KernelSpec& K, const std::vector<TestBump>& bank) {
    double worst = 0.0;
    for (double r : weak_residuals(u, b, f, K, bank)) worst = std::max(worst, std::abs(r));
    return worst;
}

// ---------------------------------------------------------------------------
// Oscillation over parabolic cylinders
// ---------------------------------------------------------------------------

struct OscReport {
    Cylinder cylinder;
    double osc = 0.0;
    double sup = 0.0;
    double inf = 0.0;
    std::size_t samples = 0;
};

inline OscReport oscillation(const SampledField& u, const Cylinder& q) {
    OscReport rep{q, 0.0, -std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity(), 0};
    const auto& g = u.grid();
    for (int ti = 0; ti < u.num_times(); ++ti) {
        if (!q.contains_time(u.times()[ti])) continue;
        const auto s = u.slice(ti);
        for (std::size_t c = 0; c < g.size(); ++c) {
            const auto p = g.point(c);
            if (!q.contains_point(g, {p[0], p[1]})) continue;
            rep.sup = std::max(rep.sup, s[c]);
            rep.inf = std::min(rep.inf, s[c]);
            ++rep.samples;
        }
    }
    if (rep.samples == 0) throw usage_error("oscillation: cylinder does not intersect the sampled box");
    rep.osc = rep.sup - rep.inf;
    return rep;
}

// ---------------------------------------------------------------------------
// Harnack diagnostics (Theorem 1.5 geometry)
// ---------------------------------------------------------------------------

struct HarnackReport {
    double sup_early = 0.0;     // sup over Q_1^+(-2)
    double lp0_early = 0.0;     // L^{p0} average over Q_{3/2}^+(-2) (weak form)
    double inf_late = 0.0;      // inf over Q_1^-(2)
    double inf_late_weak = 0.0; // inf over Q_{3/2}^-(2)
    double f_term = 0.0;        // ||f 1_{Q_2}||_{L^{q0}_t L^{p0}_x}
    double sup_term = 0.0;      // ||u 1_{[-4,4]}||_{L^inf}
    double tail_term = 0.0;     // ||Tail(u^-, 1) 1_{[-2,2]}||_{L^1_t} (torus-truncated)
    /// sup / (inf + f term + tail term); equals sup/inf for globally
    /// nonnegative unforced solutions.
    double constant_estimate = 0.0;
    double wh2_with_sup_constant = 0.0;  // sup / (inf + f_term + sup_term)
    double wh1_constant = 0.0;           // lp0 / (inf_weak + f_term + tail_term)
};

struct HarnackGeometry {
    double t_origin = 0.0;
    std::array<double, 2> x_origin{0.0, 0.0};
    double q0 = 4.0;
    double p0 = 8.0;       // uniform spatial exponent of the f norm
    double p0_knob = 1.0;  // the existential p0 of (WH1), exposed as a knob
    double alpha = 1.0;    // for the tail term
};

namespace detail {

/// || f 1_{Q} ||_{L^{q}_t L^{p}_x} on the lattice (uniform spatial exponent).
inline double cylinder_space_time_norm(const SampledField& f, const Cylinder& q, double qexp,
                                       double pexp) {
    const auto& g = f.grid();
    std::vector<double> tsel;
    std::vector<double> snorm;
    for (int ti = 0; ti < f.num_times(); ++ti) {
        if (!q.contains_time(f.times()[ti])) continue;
        const auto s = f.slice(ti);
        double acc = 0.0;
        for (std::size_t c = 0; c < g.size(); ++c) {
            const auto p = g.point(c);
            if (!q.contains_point(g, {p[0], p[1]})) continue;
            acc += std::pow(std::abs(s[c]), pexp) * g.cell_volume();
        }
        tsel.push_back(f.times()[ti]);
        snorm.push_back(std::pow(acc, 1.0 / pexp));
    }
    if (tsel.empty()) return 0.0;
    if (tsel.size() == 1) return snorm[0];
    const auto w = detail::time_weights(tsel);
    double acc = 0.0;
    for (std::size_t i = 0; i < tsel.size(); ++i) acc += std::pow(snorm[i], qexp) * w[i];
    return std::pow(acc, 1.0 / qexp);
}

}  // namespace detail

/// Fill the (WH1)/(WH2) report for a solution sampled on (a torus copy of)
/// Q_4.  Precondition: u >= -1e-8 on Q_4.
inline HarnackReport harnack_report(const SampledField& u, const SampledField* f,
                                    const HarnackGeometry& geo) {
    const auto& g = u.grid();
    const double t0 = geo.t_origin;
    const Cylinder q4(t0, 4.0, Cylinder::Kind::two_sided, geo.x_origin);
    auto check = oscillation(u, q4);
    if (check.inf < -1e-8) throw usage_error("harnack_report: u must be nonnegative on Q_4");

    HarnackReport rep;
    const Cylinder q1_early(t0 - 2.0, 1.0, Cylinder::Kind::plus, geo.x_origin);
    const Cylinder q1_late(t0 + 2.0, 1.0, Cylinder::Kind::minus, geo.x_origin);
    const Cylinder q32_early(t0 - 2.0, 1.5, Cylinder::Kind::plus, geo.x_origin);
    const Cylinder q32_late(t0 + 2.0, 1.5, Cylinder::Kind::minus, geo.x_origin);
    const Cylinder q2(t0, 2.0, Cylinder::Kind::two_sided, geo.x_origin);

    rep.sup_early = oscillation(u, q1_early).sup;
    rep.inf_late = oscillation(u, q1_late).inf;
    rep.inf_late_weak = oscillation(u, q32_late).inf;

    // L^{p0_knob} space-time average over Q_{3/2}^+(-2)
    {
        const Cylinder& q = q32_early;
        double acc = 0.0, vol = 0.0;
        for (int ti = 0; ti < u.num_times(); ++ti) {
            if (!q.contains_time(u.times()[ti])) continue;
            const auto s = u.slice(ti);
            for (std::size_t c = 0; c < g.size(); ++c) {
                const auto p = g.point(c);
                if (!q.contains_point(g, {p[0], p[1]})) continue;
                acc += std::pow(std::max(s[c], 0.0), geo.p0_knob);
                vol += 1.0;
            }
        }
        rep.lp0_early = vol > 0 ? std::pow(acc / vol, 1.0 / geo.p0_knob) : 0.0;
    }

    if (f) rep.f_term = detail::cylinder_space_time_norm(*f, q2, geo.q0, geo.p0);

    for (int ti = 0; ti < u.num_times(); ++ti) {
        const double t = u.times()[ti];
        if (t < t0 - 4.0 - 1e-12 || t > t0 + 4.0 + 1e-12) continue;
        rep.sup_term = std::max(rep.sup_term, max_abs(u.slice(ti)));
    }

    // || Tail(u^-, 1) 1_{[-2,2]} ||_{L^1_t} with the torus-truncated tail
    {
        std::vector<double> tsel, tv;
        SampledField um = SampledField::at_time(g);
        for (int ti = 0; ti < u.num_times(); ++ti) {
            const double t = u.times()[ti];
            if (t < t0 - 2.0 - 1e-12 || t > t0 + 2.0 + 1e-12) continue;
            const auto s = u.slice(ti);
            auto d = um.slice(0);
            for (std::size_t c = 0; c < g.size(); ++c) d[c] = std::max(-s[c], 0.0);
            tsel.push_back(t);
            tv.push_back(tail(um, 1.0, geo.alpha));
        }
        if (tsel.size() >= 2) {
            const auto w = detail::time_weights(tsel);
            for (std::size_t i = 0; i < tsel.size(); ++i) rep.tail_term += tv[i] * w[i];
        } else if (tsel.size() == 1) {
            rep.tail_term = tv[0];
        }
    }

    const double den = rep.inf_late + rep.f_term + rep.tail_term;
    if (den > 0.0) rep.constant_estimate = rep.sup_early / den;
    const double den2 = rep.inf_late + rep.f_term + rep.sup_term;
    if (den2 > 0.0) rep.wh2_with_sup_constant = rep.sup_early / den2;
    const double den1 = rep.inf_late_weak + rep.f_term + rep.tail_term;
    if (den1 > 0.0) rep.wh1_constant = rep.lp0_early / den1;
    return rep;
}

// ---------------------------------------------------------------------------
// Holder exponent fit from dyadic oscillation decay
// ---------------------------------------------------------------------------

struct HolderFit {
    double gamma_hat = 0.0;
    double r_squared = 0.0;
    bool zero_oscillation = false;
    std::vector<double> radii, osc;
};

inline HolderFit holder_fit(const SampledField& u, double t_center,
                            const std::array<double, 2>& x_center, const std::vector<double>& radii) {
    const auto& g = u.grid();
    HolderFit fit;
    double dt_max = 0.0;
    for (std::size_t i = 1; i < u.times().size(); ++i)
        dt_max = std::max(dt_max, u.times()[i] - u.times()[i - 1]);
    for (double r : radii) {
        if (r < 4.0 * g.spacing()) continue;  // lattice floor
        if (r < 2.0 * dt_max) continue;       // need >= 2 time slices in the window
        if (t_center - r < u.times().front() - 1e-9 || t_center + r > u.times().back() + 1e-9) continue;
        const Cylinder q(t_center, r, Cylinder::Kind::two_sided, x_center);
        const auto rep = oscillation(u, q);
        fit.radii.push_back(r);
        fit.osc.push_back(rep.osc);
    }
    if (fit.radii.size() < 3) throw usage_error("holder_fit: fewer than 3 usable scales");
    bool all_zero = true;
    for (double o : fit.osc) all_zero &= (o <= 0.0);
    if (all_zero) {
        fit.zero_oscillation = true;
        fit.gamma_hat = std::numeric_limits<double>::infinity();
        fit.r_squared = 1.0;
        return fit;
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < fit.radii.size(); ++i) {
        if (fit.osc[i] <= 0.0) continue;
        lx.push_back(std::log(fit.radii[i]));
        ly.push_back(std::log(fit.osc[i]));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
    mx /= lx.size(), my /= lx.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    fit.gamma_hat = sxy / sxx;
    fit.r_squared = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return fit;
}

// ---------------------------------------------------------------------------
// Global L^inf bound ratio of (EA80)
// ---------------------------------------------------------------------------

inline double linfty_ratio(const SampledField& u, const SampledField& f, double beta,
                           const MultiIndex& p0, double q0, const LocalizationSpec& loc) {
    if (max_abs(u.slice(0)) > 1e-10)
        throw usage_error("linfty_ratio: expected a zero-initial-data run");
    double sup = 0.0;
    for (int ti = 0; ti < u.num_times(); ++ti) sup = std::max(sup, max_abs(u.slice(ti)));
    const double denom = localized_norm(f, -beta, p0, q0, loc);
    if (denom <= 0.0) throw usage_error("linfty_ratio: zero forcing makes the ratio undefined");
    return sup / denom;
}

// ---------------------------------------------------------------------------
// De Giorgi truncation profiles
// ---------------------------------------------------------------------------

struct TruncationProfile {
    std::vector<double> kappa_grid, tau_grid, p_list;
    // indexed [p][kappa][tau]
    std::vector<std::vector<std::vector<double>>> trunc_norms;
    std::vector<std::vector<std::vector<double>>> level_measures;
    // empirical best constant of (DX-1) for each p and kappa over tau < sigma
    std::vector<std::vector<double>> best_constants;
};

/// Space-time L^p norm (uniform exponent) of a masked quantity over a cylinder.
namespace detail {
template <typename F>
inline double cylinder_lp(const SampledField& u, const Cylinder& q, double p, F&& value) {
    const auto& g = u.grid();
    std::vector<double> tsel, sl;
    for (int ti = 0; ti < u.num_times(); ++ti) {
        if (!q.contains_time(u.times()[ti])) continue;
        const auto s = u.slice(ti);
        double acc = 0.0;
        for (std::size_t c = 0; c < g.size(); ++c) {
            const auto pt = g.point(c);
            if (!q.contains_point(g, {pt[0], pt[1]})) continue;
            acc += std::pow(value(s[c]), p) * g.cell_volume();
        }
        tsel.push_back(u.times()[ti]);
        sl.push_back(acc);
    }
    if (tsel.empty()) return 0.0;
    if (tsel.size() == 1) return std::pow(sl[0], 1.0 / p);
    const auto w = detail::time_weights(tsel);
    double acc = 0.0;
    for (std::size_t i = 0; i < tsel.size(); ++i) acc += sl[i] * w[i];
    return std::pow(acc, 1.0 / p);
}
}  // namespace detail

inline TruncationProfile degiorgi_profile(const SampledField& u, std::vector<double> kappa_grid,
                                          std::vector<double> tau_grid, std::vector<double> p_list,
                                          double gamma = 1.0, double A = 1.0,
                                          std::size_t j_split = std::numeric_limits<std::size_t>::max(),
                                          const std::array<double, 2>& center = {0.0, 0.0},
                                          double t_center = 0.0) {
    TruncationProfile prof;
    prof.kappa_grid = std::move(kappa_grid);
    prof.tau_grid = std::move(tau_grid);
    prof.p_list = std::move(p_list);
    if (j_split > prof.p_list.size()) j_split = prof.p_list.size();

    const std::size_t np = prof.p_list.size(), nk = prof.kappa_grid.size(), nt = prof.tau_grid.size();
    prof.trunc_norms.assign(np, std::vector<std::vector<double>>(nk, std::vector<double>(nt, 0.0)));
    prof.level_measures = prof.trunc_norms;
    for (std::size_t ip = 0; ip < np; ++ip)
        for (std::size_t ik = 0; ik < nk; ++ik)
            for (std::size_t it = 0; it < nt; ++it) {
                const Cylinder q(t_center, prof.tau_grid[it], Cylinder::Kind::two_sided, center);
                const double kap = prof.kappa_grid[ik];
                prof.trunc_norms[ip][ik][it] = detail::cylinder_lp(
                    u, q, prof.p_list[ip], [kap](double v) { return std::max(v - kap, 0.0); });
                prof.level_measures[ip][ik][it] = detail::cylinder_lp(
                    u, q, prof.p_list[ip], [kap](double v) { return v > kap ? 1.0 : 0.0; });
            }

    // empirical best constant making (DX-1) hold for the configured gamma, A
    prof.best_constants.assign(np, std::vector<double>(nk, 0.0));
    for (std::size_t ip = 0; ip < np; ++ip)
        for (std::size_t ik = 0; ik < nk; ++ik) {
            double best = 0.0;
            for (std::size_t it = 0; it < nt; ++it)
                for (std::size_t is = it + 1; is < nt; ++is) {
                    const double tau = prof.tau_grid[it], sigma = prof.tau_grid[is];
                    double rhs = 0.0;
                    for (std::size_t i = 0; i < np; ++i) {
                        if (i < j_split) rhs += prof.trunc_norms[i][ik][is];
                        else rhs += A * prof.level_measures[i][ik][is];
                    }
                    if (rhs <= 0.0) continue;
                    best = std::max(best, std::pow(sigma - tau, gamma) *
                                              prof.trunc_norms[ip][ik][it] / rhs);
                }
            prof.best_constants[ip][ik] = best;
        }
    return prof;
}

// ---------------------------------------------------------------------------
// Moser iteration constant (closed form of the infinite product)
// ---------------------------------------------------------------------------

/// Evaluates ( e^{ theta/(theta-1)^2 ln(2^gamma theta^beta)
///              + 1/(theta-1) ln((sigma-tau)^{-gamma} 2 m C0) } )^{theta/q},
/// the closed form of prod_j (2^{gamma j} (sigma-tau)^{-gamma} 2 m C0
/// theta^{beta j})^{theta^{1-j}/q}.
inline double moser_iteration_constant(double theta, double gamma, double beta, double m, double C0,
                                       double q, double sigma_minus_tau) {
    if (!(theta > 1.0)) throw usage_error("moser_iteration_constant: theta must be > 1");
    if (gamma < 0.0 || beta < 0.0) throw usage_error("moser_iteration_constant: gamma, beta >= 0");
    if (!(m >= 1.0) || !(C0 > 0.0)) throw usage_error("moser_iteration_constant: need m >= 1, C0 > 0");
    if (!(q > 0.0) || !(q < 1.0)) throw usage_error("moser_iteration_constant: q must be in (0,1)");
    if (!(sigma_minus_tau > 0.0) || sigma_minus_tau > 1.0)
        throw usage_error("moser_iteration_constant: sigma - tau must be in (0,1]");
    const double t1 = theta / ((theta - 1.0) * (theta - 1.0)) * std::log(std::pow(2.0, gamma) * std::pow(theta, beta));
    const double t2 = 1.0 / (theta - 1.0) * std::log(std::pow(sigma_minus_tau, -gamma) * 2.0 * m * C0);
    return std::exp((t1 + t2) * theta / q);
}

// ---------------------------------------------------------------------------
// Scaling transform of Section 1.3
// ---------------------------------------------------------------------------

enum class ScalingRole { solution, drift, forcing };

/// u_lambda(t,x) = lam^w u(lam^alpha t, lam x) with w = 0 / (alpha-1) / alpha
/// for solution / drift / forcing.  The natural output lives on the cell of
/// period L/lambda with the same lattice, which makes the resampling exact;
/// an explicit target grid triggers spectral interpolation instead.
inline SampledField scaling_transform(const SampledField& u, double lambda, double alpha,
                                      ScalingRole role,
                                      std::optional<PeriodicGrid> target = std::nullopt) {
    if (!(lambda > 0.0)) throw usage_error("scaling_transform: lambda must be positive");
    const auto& g = u.grid();
    double w = 0.0;
    if (role == ScalingRole::drift) w = alpha - 1.0;
    if (role == ScalingRole::forcing) w = alpha;
    const double pref = std::pow(lambda, w);
    const double la = std::pow(lambda, alpha);

    std::vector<double> times(u.times());
    for (auto& t : times) t /= la;

    if (!target) {
        PeriodicGrid gout(g.dim(), g.n(), g.period() / lambda);
        SampledField out(gout, times, u.components());
        for (int ti = 0; ti < u.num_times(); ++ti)
            for (int c = 0; c < u.components(); ++c) {
                const auto src = u.slice(ti, c);
                auto dst = out.slice(ti, c);
                for (std::size_t i = 0; i < src.size(); ++i) dst[i] = pref * src[i];
            }
        return out;
    }
    if (target->period() * lambda > g.period() * (1 + 1e-12))
        throw usage_error("scaling_transform: scaled support exits the box");
    SampledField out(*target, times, u.components());
    for (int ti = 0; ti < u.num_times(); ++ti) {
        const auto F = to_modes(u, ti);
        for (int c = 0; c < u.components(); ++c) {
            auto dst = out.slice(ti, c);
            for (std::size_t i = 0; i < target->size(); ++i) {
                const auto p = target->point(i);
                dst[i] = pref * spectral_eval(F, lambda * p[0], lambda * p[1], c);
            }
        }
    }
    return out;
}

}  // namespace fracflow
