#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fracflow/errors.hpp"
#include "fracflow/field.hpp"
#include "fracflow/rng.hpp"
#include "fracflow/spectral.hpp"

namespace fracflow {

enum class Scheme { etd_euler, etd_rk2 };

struct SolverConfig {
    double alpha = 1.0;      // (0, 2]
    double dt = 1e-3;        // base step; adaptively halved on CFL violation
    double t_end = 1.0;
    bool dealias = true;     // 2/3-rule truncation of quadratic products
    Scheme scheme = Scheme::etd_rk2;
    double cfl_safety = 0.5;  // dt <= cfl_safety * dx / max|b| at every accepted step
    double blowup_factor = 1e6;
    std::vector<double> output_times;  // defaults to {0, t_end}

    void validate() const {
        if (!(alpha > 0.0) || alpha > 2.0) throw usage_error("SolverConfig: alpha must be in (0,2]");
        if (!(dt > 0.0)) throw usage_error("SolverConfig: dt must be positive");
        if (!(t_end > 0.0)) throw usage_error("SolverConfig: t_end must be positive");
        if (!(cfl_safety > 0.0) || cfl_safety > 1.0) throw usage_error("SolverConfig: cfl_safety in (0,1]");
    }
};

/// Drift b of the transport term b . grad u.
struct DriftSpec {
    enum class Kind { none, fixed_field, riesz_of_state, biot_savart_of_state, mollified_kernel };
    Kind kind = Kind::none;
    /// fixed_field payload: d-component samples on a time lattice (linear
    /// interpolation in between).
    std::shared_ptr<const SampledField> fixed;
    /// mollified_kernel payload: per-mode multipliers m_c(k) with
    /// b_hat_c = m_c(k) u_hat(k) (convolution of the state with a tabulated kernel).
    std::vector<std::vector<cdouble>> kernel_mult;

    static DriftSpec none() { return {}; }
    static DriftSpec fixed_field(SampledField b) {
        DriftSpec d;
        d.kind = Kind::fixed_field;
        d.fixed = std::make_shared<SampledField>(std::move(b));
        return d;
    }
    static DriftSpec riesz_of_state() {
        DriftSpec d;
        d.kind = Kind::riesz_of_state;
        return d;
    }
    static DriftSpec biot_savart_of_state() {
        DriftSpec d;
        d.kind = Kind::biot_savart_of_state;
        return d;
    }
    static DriftSpec mollified_kernel(std::vector<std::vector<cdouble>> mult) {
        DriftSpec d;
        d.kind = Kind::mollified_kernel;
        d.kernel_mult = std::move(mult);
        return d;
    }
};

/// Additive noise sum_k g_k dW^k with finitely many Fourier modes.  Each entry
/// forces the +/-k pair with a real Brownian motion, so the field stays real.
struct NoiseSpec {
    struct Mode {
        int m0 = 0, m1 = 0;   // signed mode numbers, |m| < n/2 and not both zero
        /// Physical mode coefficient: the noise field is 2 Re(A e^{ik.x}) dW,
        /// so each forced mode is an exact OU process with stationary
        /// variance |A|^2 / (2 |k|^alpha).
        cdouble amplitude{0.0, 0.0};
    };
    std::vector<Mode> modes;
    std::uint64_t seed = 0;
};

struct Metrics {
    std::vector<double> t, sup_norm, l2, mass, max_div_drift, dt_used;
    std::vector<std::pair<double, std::string>> events;
};

struct Trajectory {
    SampledField field;  // snapshots at the requested output times
    Metrics metrics;
};

/// Optional forcing; sampled series with linear interpolation in time.
struct Forcing {
    std::shared_ptr<const SampledField> series;

    bool empty() const { return !series; }
    static Forcing none() { return {}; }
    static Forcing sampled(SampledField f) { return {std::make_shared<SampledField>(std::move(f))}; }
};

// ---------------------------------------------------------------------------
// ETD stepper
// ---------------------------------------------------------------------------

namespace detail {

inline double phi1(double z) {
    if (std::abs(z) < 1e-4) return 1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0));
    return std::expm1(z) / z;
}
inline double phi2(double z) {
    if (std::abs(z) < 1e-4) return 0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0));
    return (std::expm1(z) - z) / (z * z);
}
/// OU step variance factor (1 - e^{-2 h lam}) / (2 lam), continuous at lam = 0.
inline double ou_var_factor(double h, double lam) {
    if (2.0 * h * lam < 1e-6) return h * (1.0 - h * lam);
    return -std::expm1(-2.0 * h * lam) / (2.0 * lam);
}

}  // namespace detail

/// Time integrator for d_t u = Delta^{alpha/2} u + b . grad u + f (+ noise).
/// A solver instance owns its state; distinct instances may run concurrently.
class Solver {
  public:
    Solver(PeriodicGrid grid, SolverConfig cfg, DriftSpec drift, Forcing forcing = Forcing::none(),
           std::optional<NoiseSpec> noise = std::nullopt)
        : grid_(grid), cfg_(cfg), drift_(std::move(drift)), forcing_(std::move(forcing)),
          noise_(std::move(noise)), rng_(noise_ ? noise_->seed : 0) {
        cfg_.validate();
        if (cfg_.output_times.empty()) cfg_.output_times = {0.0, cfg_.t_end};
        for (double t : cfg_.output_times)
            if (t < 0.0 || t > cfg_.t_end + 1e-12) throw usage_error("Solver: output time outside [0, t_end]");
        if ((drift_.kind == DriftSpec::Kind::riesz_of_state ||
             drift_.kind == DriftSpec::Kind::biot_savart_of_state) && grid_.dim() != 2)
            throw usage_error("Solver: state-coupled drifts require d = 2");
        if (noise_) {
            for (const auto& m : noise_->modes) {
                if (std::abs(m.m0) >= grid_.n() / 2 || (grid_.dim() == 2 && std::abs(m.m1) >= grid_.n() / 2) ||
                    (grid_.dim() == 1 && m.m1 != 0))
                    throw usage_error("Solver: noise mode outside grid");
                if (m.m0 == 0 && m.m1 == 0) throw usage_error("Solver: zero-mode noise not supported");
            }
        }
        lam_.resize(grid_.size());
        detail::for_each_mode(grid_, [&](std::size_t idx, double k0, double k1, int, int) {
            lam_[idx] = std::pow(std::hypot(k0, k1), cfg_.alpha);
        });
    }

    Trajectory run(const SampledField& u0) {
        if (!(u0.grid() == grid_)) throw usage_error("Solver: initial state grid mismatch");
        if (!u0.all_finite()) throw data_error("Solver: initial state has non-finite values");
        SpectralField u = to_modes(u0, u0.num_times() - 1);
        if (cfg_.dealias) dealias_23(u);

        Trajectory out{SampledField(grid_, cfg_.output_times, 1), {}};
        const double ceiling = cfg_.blowup_factor * std::max(max_abs(u0.slice(u0.num_times() - 1)), 1.0);

        double t = 0.0;
        int next_out = 0;
        record_snapshot_if_due(u, t, next_out, out);
        record_metrics(u, t, cfg_.dt, 0.0, out.metrics);

        while (next_out < static_cast<int>(cfg_.output_times.size())) {
            const double t_hit = cfg_.output_times[next_out];
            while (t < t_hit - 1e-12) {
                double h = std::min(cfg_.dt, t_hit - t);
                const DriftEval drift = eval_drift(t, u);
                if (drift.max_abs > 0.0) {
                    const double hmax = cfg_.cfl_safety * grid_.spacing() / drift.max_abs;
                    while (h > hmax) {
                        h *= 0.5;
                        out.metrics.events.emplace_back(t, "cfl: dt halved to " + std::to_string(h));
                    }
                }
                step(u, t, h, drift);
                t += h;
                record_metrics(u, t, h, drift.max_div, out.metrics);
                if (out.metrics.sup_norm.back() > ceiling)
                    throw solve_error("blow-up ceiling exceeded at t = " + std::to_string(t) +
                                      " (sup = " + std::to_string(out.metrics.sup_norm.back()) + ")");
                if (!std::isfinite(out.metrics.sup_norm.back()))
                    throw solve_error("non-finite state at t = " + std::to_string(t));
            }
            t = t_hit;
            record_snapshot_if_due(u, t, next_out, out);
        }
        return out;
    }

  private:
    struct DriftEval {
        SpectralField modes;     // d components
        SampledField phys;       // d components
        double max_abs = 0.0;
        double max_div = 0.0;
        bool divergence_free = true;
    };

    DriftEval eval_drift(double t, const SpectralField& u) {
        DriftEval ev{SpectralField(grid_, grid_.dim()), SampledField::at_time(grid_, t, grid_.dim())};
        switch (drift_.kind) {
            case DriftSpec::Kind::none:
                return ev;
            case DriftSpec::Kind::riesz_of_state:
                ev.modes = riesz_velocity_modes(u);
                break;
            case DriftSpec::Kind::biot_savart_of_state:
                ev.modes = biot_savart_velocity_modes(u);
                break;
            case DriftSpec::Kind::mollified_kernel: {
                if (static_cast<int>(drift_.kernel_mult.size()) != grid_.dim())
                    throw usage_error("Solver: kernel_mult must have d components");
                const auto in = u.comp(0);
                for (int c = 0; c < grid_.dim(); ++c) {
                    auto dst = ev.modes.comp(c);
                    const auto& m = drift_.kernel_mult[c];
                    if (m.size() != grid_.size()) throw usage_error("Solver: kernel_mult size mismatch");
                    for (std::size_t i = 0; i < m.size(); ++i) dst[i] = m[i] * in[i];
                }
                break;
            }
            case DriftSpec::Kind::fixed_field: {
                const auto& b = *drift_.fixed;
                if (b.components() != grid_.dim()) throw usage_error("Solver: fixed drift must have d components");
                // linear interpolation between provided samples
                SampledField slice = SampledField::at_time(grid_, t, grid_.dim());
                if (b.num_times() == 1) {
                    for (int c = 0; c < grid_.dim(); ++c)
                        std::copy(b.slice(0, c).begin(), b.slice(0, c).end(), slice.slice(0, c).begin());
                } else {
                    const int i = b.time_bracket(t);
                    double w = (t - b.times()[i]) / (b.times()[i + 1] - b.times()[i]);
                    w = std::clamp(w, 0.0, 1.0);
                    for (int c = 0; c < grid_.dim(); ++c) {
                        auto dst = slice.slice(0, c);
                        const auto lo = b.slice(i, c), hi = b.slice(i + 1, c);
                        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = (1 - w) * lo[j] + w * hi[j];
                    }
                }
                ev.modes = to_modes(slice, 0);
                ev.divergence_free = false;
                break;
            }
        }
        if (cfg_.dealias) dealias_23(ev.modes);
        from_modes(ev.modes, ev.phys, 0);
        for (int c = 0; c < grid_.dim(); ++c) ev.max_abs = std::max(ev.max_abs, max_abs(ev.phys.slice(0, c)));
        const SampledField div = from_modes(divergence_modes(ev.modes));
        ev.max_div = max_abs(div.slice(0));
        if (drift_.kind == DriftSpec::Kind::riesz_of_state ||
            drift_.kind == DriftSpec::Kind::biot_savart_of_state) {
            if (ev.max_div > 1e-10)
                throw solve_error("state-coupled drift failed the divergence-free gate");
            ev.divergence_free = true;
        } else {
            ev.divergence_free = ev.max_div <= 1e-12 * std::max(1.0, ev.max_abs);
        }
        return ev;
    }

    /// N = div(u b) - u div b + f  (= b . grad u + f when div b = 0),
    /// pseudo-spectral with optional 2/3 dealiasing.
    std::vector<cdouble> nonlinear(double t, const SpectralField& u, const DriftEval& drift) {
        std::vector<cdouble> N(grid_.size(), cdouble{0.0, 0.0});
        if (drift_.kind != DriftSpec::Kind::none) {
            SpectralField uc = u;
            if (cfg_.dealias) dealias_23(uc);
            const SampledField up = from_modes(uc);
            SampledField prod = SampledField::at_time(grid_, t, grid_.dim());
            for (int c = 0; c < grid_.dim(); ++c) {
                auto dst = prod.slice(0, c);
                const auto us = up.slice(0);
                const auto bs = drift.phys.slice(0, c);
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = us[i] * bs[i];
            }
            SpectralField prod_hat = to_modes(prod, 0);
            if (cfg_.dealias) dealias_23(prod_hat);
            const SpectralField divm = divergence_modes(prod_hat);
            for (std::size_t i = 0; i < N.size(); ++i) N[i] += divm.comp(0)[i];
            if (!drift.divergence_free) {
                SpectralField divb = divergence_modes(drift.modes);
                const SampledField divb_p = from_modes(divb);
                SampledField ud = SampledField::at_time(grid_, t, 1);
                auto dst = ud.slice(0);
                const auto us = up.slice(0);
                const auto ds = divb_p.slice(0);
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = us[i] * ds[i];
                SpectralField ud_hat = to_modes(ud, 0);
                if (cfg_.dealias) dealias_23(ud_hat);
                for (std::size_t i = 0; i < N.size(); ++i) N[i] -= ud_hat.comp(0)[i];
            }
        }
        if (!forcing_.empty()) {
            const auto& f = *forcing_.series;
            SampledField slice = SampledField::at_time(grid_, t, 1);
            if (f.num_times() == 1) {
                std::copy(f.slice(0).begin(), f.slice(0).end(), slice.slice(0).begin());
            } else {
                const int i = f.time_bracket(t);
                double w = (t - f.times()[i]) / (f.times()[i + 1] - f.times()[i]);
                w = std::clamp(w, 0.0, 1.0);
                const auto lo = f.slice(i), hi = f.slice(i + 1);
                auto dst = slice.slice(0);
                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = (1 - w) * lo[j] + w * hi[j];
            }
            SpectralField fh = to_modes(slice, 0);
            if (cfg_.dealias) dealias_23(fh);
            for (std::size_t i = 0; i < N.size(); ++i) N[i] += fh.comp(0)[i];
        }
        return N;
    }

    void step(SpectralField& u, double t, double h, const DriftEval& drift) {
        const auto N0 = nonlinear(t, u, drift);
        auto s = u.comp(0);
        SpectralField a(grid_, 1);
        auto as = a.comp(0);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double z = -h * lam_[i];
            as[i] = std::exp(z) * s[i] + h * detail::phi1(z) * N0[i];
        }
        if (cfg_.scheme == Scheme::etd_rk2) {
            DriftEval drift1 = drift_coupled() ? eval_drift(t + h, a) : eval_drift(t + h, u);
            // for fixed drifts, stage-2 drift is evaluated at t + h from the series
            const auto N1 = nonlinear(t + h, a, drift1);
            for (std::size_t i = 0; i < s.size(); ++i) {
                const double z = -h * lam_[i];
                s[i] = as[i] + h * detail::phi2(z) * (N1[i] - N0[i]);
            }
        } else {
            for (std::size_t i = 0; i < s.size(); ++i) s[i] = as[i];
        }
        if (noise_) apply_noise(u, h);
    }

    bool drift_coupled() const {
        return drift_.kind == DriftSpec::Kind::riesz_of_state ||
               drift_.kind == DriftSpec::Kind::biot_savart_of_state ||
               drift_.kind == DriftSpec::Kind::mollified_kernel;
    }

    /// Exact per-mode mean-reverting Gaussian update for the forced modes.
    void apply_noise(SpectralField& u, double h) {
        auto s = u.comp(0);
        const int n = grid_.n();
        for (const auto& m : noise_->modes) {
            const int i0 = (m.m0 % n + n) % n;
            const int i1 = (m.m1 % n + n) % n;
            const std::size_t idx = grid_.dim() == 2 ? grid_.flat(i0, i1) : static_cast<std::size_t>(i0);
            const std::size_t idxc = grid_.dim() == 2 ? grid_.flat((n - i0) % n, (n - i1) % n)
                                                      : static_cast<std::size_t>((n - i0) % n);
            const double sd = std::sqrt(detail::ou_var_factor(h, lam_[idx]));
            const double xi = rng_.normal();
            // amplitudes are mode coefficients of the unnormalized transform,
            // matching SpectralField storage: scale by n^d
            const cdouble incr = m.amplitude * (xi * sd) * static_cast<double>(grid_.size());
            s[idx] += incr;
            s[idxc] += std::conj(incr);
        }
    }

    void record_metrics(const SpectralField& u, double t, double h, double max_div, Metrics& m) {
        const SampledField phys = from_modes(u);
        m.t.push_back(t);
        m.sup_norm.push_back(max_abs(phys.slice(0)));
        m.l2.push_back(l2_norm(phys.slice(0), grid_));
        m.mass.push_back(u.comp(0)[0].real() / static_cast<double>(grid_.size()) *
                         std::pow(grid_.period(), grid_.dim()));
        m.max_div_drift.push_back(max_div);
        m.dt_used.push_back(h);
    }

    void record_snapshot_if_due(const SpectralField& u, double t, int& next_out, Trajectory& out) {
        while (next_out < static_cast<int>(cfg_.output_times.size()) &&
               std::abs(cfg_.output_times[next_out] - t) <= 1e-12) {
            from_modes(u, out.field, next_out);
            ++next_out;
        }
    }

    PeriodicGrid grid_;
    SolverConfig cfg_;
    DriftSpec drift_;
    Forcing forcing_;
    std::optional<NoiseSpec> noise_;
    RngStream rng_;
    std::vector<double> lam_;
};

// ---------------------------------------------------------------------------
// Named solvers
// ---------------------------------------------------------------------------

/// Linear transport-diffusion with a fixed (time-interpolated) drift.
inline Trajectory solve_transport_diffusion(const SampledField& u0, DriftSpec drift,
                                            Forcing forcing, SolverConfig cfg) {
    if (drift.kind != DriftSpec::Kind::fixed_field && drift.kind != DriftSpec::Kind::none &&
        drift.kind != DriftSpec::Kind::mollified_kernel)
        throw usage_error("solve_transport_diffusion: drift must be fixed-field (or none)");
    Solver s(u0.grid(), cfg, std::move(drift), std::move(forcing));
    return s.run(u0);
}

/// Stochastically forced SQG; with an empty NoiseSpec this is the
/// deterministic dissipative SQG solve (bitwise identical path).
inline Trajectory simulate_stochastic_sqg(const SampledField& theta0, const NoiseSpec& noise,
                                          SolverConfig cfg, Forcing forcing = Forcing::none()) {
    Solver s(theta0.grid(), cfg, DriftSpec::riesz_of_state(), std::move(forcing), noise);
    return s.run(theta0);
}

/// Dissipative (deterministic) SQG: d_t theta = Delta^{a/2} theta + R theta . grad theta.
inline Trajectory solve_sqg(const SampledField& theta0, double alpha, SolverConfig cfg,
                            Forcing forcing = Forcing::none()) {
    cfg.alpha = alpha;
    return simulate_stochastic_sqg(theta0, NoiseSpec{}, cfg, std::move(forcing));
}

/// 2D fractional Navier-Stokes vorticity: d_t rho = Delta^{a/2} rho + div(rho u),
/// u = Biot-Savart(rho).  The mean of rho rides along untouched (zero mode).
inline Trajectory solve_ns_vorticity(const SampledField& rho0, double alpha, SolverConfig cfg) {
    cfg.alpha = alpha;
    Solver s(rho0.grid(), cfg, DriftSpec::biot_savart_of_state());
    return s.run(rho0);
}

/// Backward Kolmogorov equation d_t u + Delta^{a/2} u + b . grad u = f on [0,T]
/// with u(T) = 0, solved through the time-reversed forward problem
/// v(s) = u(T - s):  d_s v = Delta^{a/2} v + b(T-s) . grad v - f(T-s).
inline Trajectory solve_backward_kolmogorov(const Forcing& f, const DriftSpec& drift, double T,
                                            SolverConfig cfg) {
    cfg.t_end = T;
    auto reverse_series = [T](const SampledField& src, double sign) {
        std::vector<double> rt(src.num_times());
        for (int i = 0; i < src.num_times(); ++i) rt[i] = T - src.times()[src.num_times() - 1 - i];
        for (auto& t : rt) t = std::max(t, 0.0);  // guard roundoff at the ends
        SampledField rev(src.grid(), rt, src.components());
        for (int i = 0; i < src.num_times(); ++i)
            for (int c = 0; c < src.components(); ++c) {
                const auto s = src.slice(src.num_times() - 1 - i, c);
                auto d = rev.slice(i, c);
                for (std::size_t j = 0; j < d.size(); ++j) d[j] = sign * s[j];
            }
        return rev;
    };

    Forcing frev = Forcing::none();
    if (!f.empty()) frev = Forcing::sampled(reverse_series(*f.series, -1.0));
    DriftSpec drev = drift;
    if (drift.kind == DriftSpec::Kind::fixed_field) drev = DriftSpec::fixed_field(reverse_series(*drift.fixed, 1.0));

    if (f.empty() && drift.kind != DriftSpec::Kind::fixed_field)
        throw usage_error("solve_backward_kolmogorov: need a forcing series or a fixed drift to infer the grid");
    std::vector<double> out_s;
    if (cfg.output_times.empty()) {
        for (int i = 0; i <= 32; ++i) out_s.push_back(T * i / 32.0);
    } else {
        for (auto it = cfg.output_times.rbegin(); it != cfg.output_times.rend(); ++it)
            out_s.push_back(T - *it);
    }
    cfg.output_times = out_s;

    const PeriodicGrid& g = f.empty() ? drift.fixed->grid() : f.series->grid();
    Solver s(g, cfg, std::move(drev), std::move(frev));
    Trajectory v = s.run(SampledField::at_time(g, 0.0));

    // flip back: u(t) = v(T - t)
    std::vector<double> ut(v.field.num_times());
    for (int i = 0; i < v.field.num_times(); ++i) ut[i] = T - v.field.times()[v.field.num_times() - 1 - i];
    for (auto& t : ut) t = std::max(t, 0.0);
    Trajectory out{SampledField(g, ut, 1), std::move(v.metrics)};
    for (int i = 0; i < v.field.num_times(); ++i) {
        const auto src = v.field.slice(v.field.num_times() - 1 - i);
        auto dst = out.field.slice(i);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return out;
}

}  // namespace fracflow
