#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "fracflow/errors.hpp"
#include "fracflow/field.hpp"
#include "fracflow/rng.hpp"
#include "fracflow/spectral.hpp"
#include "fracflow/stable.hpp"

namespace fracflow {

using Vec2 = std::array<double, 2>;

// ---------------------------------------------------------------------------
// Ensemble of N interacting particles in the fundamental cell
// ---------------------------------------------------------------------------

struct ParticleEnsemble {
    PeriodicGrid grid;   // supplies the cell geometry and periodic wrap
    std::vector<Vec2> positions;
    double time = 0.0;

    int n() const { return static_cast<int>(positions.size()); }
    double weight() const { return 1.0 / positions.size(); }

    void validate() const {
        if (n() < 2) throw usage_error("ParticleEnsemble: need N >= 2");
        for (const auto& p : positions)
            if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
                throw data_error("ParticleEnsemble: non-finite position");
    }

    void wrap() {
        for (auto& p : positions) {
            p[0] = grid.wrap(p[0]);
            if (grid.dim() == 2) p[1] = grid.wrap(p[1]);
        }
    }
};

// ---------------------------------------------------------------------------
// Interaction kernel b(t, x, y), optionally backed by a displacement table
// ---------------------------------------------------------------------------

/// Periodic displacement table V(u) with bilinear lookup (fast pairwise path).
struct KernelTable {
    int n = 0;
    double period = 0.0;
    std::vector<double> vx, vy;  // row-major, component values of V at lattice points

    void eval(double u0, double u1, double& b0, double& b1) const {
        const double h = period / n;
        double a0 = (u0 + 0.5 * period) / h;
        double a1 = (u1 + 0.5 * period) / h;
        int i0 = static_cast<int>(std::floor(a0));
        int i1 = static_cast<int>(std::floor(a1));
        const double f0 = a0 - i0, f1 = a1 - i1;
        i0 = ((i0 % n) + n) % n;
        i1 = ((i1 % n) + n) % n;
        const int i0p = (i0 + 1) % n, i1p = (i1 + 1) % n;
        const std::size_t c00 = static_cast<std::size_t>(i0) * n + i1;
        const std::size_t c01 = static_cast<std::size_t>(i0) * n + i1p;
        const std::size_t c10 = static_cast<std::size_t>(i0p) * n + i1;
        const std::size_t c11 = static_cast<std::size_t>(i0p) * n + i1p;
        const double w00 = (1 - f0) * (1 - f1), w01 = (1 - f0) * f1, w10 = f0 * (1 - f1), w11 = f0 * f1;
        b0 = w00 * vx[c00] + w01 * vx[c01] + w10 * vx[c10] + w11 * vx[c11];
        b1 = w00 * vy[c00] + w01 * vy[c01] + w10 * vy[c10] + w11 * vy[c11];
    }
};

struct InteractionKernel {
    /// General handle b(t, x, y).
    std::function<Vec2(double, const Vec2&, const Vec2&)> b;
    /// Dominating envelope h(t, x - y); empty when no bound is declared.
    std::function<double(double, const Vec2&)> envelope;
    bool divergence_free = false;
    /// Fast path: when set, b(t,x,y) = table(min_image(x - y)).
    std::shared_ptr<const KernelTable> table;

    static InteractionKernel zero() {
        InteractionKernel k;
        k.b = [](double, const Vec2&, const Vec2&) { return Vec2{0.0, 0.0}; };
        k.divergence_free = true;
        return k;
    }

    /// Raw (singular) Biot-Savart kernel with minimum-image displacement.
    static InteractionKernel biot_savart(const PeriodicGrid& g) {
        InteractionKernel k;
        k.b = [g](double, const Vec2& x, const Vec2& y) -> Vec2 {
            const double u0 = g.min_image(x[0] - y[0]);
            const double u1 = g.min_image(x[1] - y[1]);
            if (u0 == 0.0 && u1 == 0.0) return {0.0, 0.0};
            return k2_eval(u0, u1);
        };
        k.envelope = [g](double, const Vec2& u) {
            const double r = std::hypot(g.min_image(u[0]), g.min_image(u[1]));
            return r == 0.0 ? 0.0 : 1.0 / (2.0 * std::numbers::pi * r);
        };
        k.divergence_free = true;
        return k;
    }

    static InteractionKernel from_table(std::shared_ptr<const KernelTable> t, bool div_free) {
        InteractionKernel k;
        k.table = t;
        const KernelTable* raw = t.get();
        k.b = [raw](double, const Vec2& x, const Vec2& y) -> Vec2 {
            double b0, b1;
            double u0 = std::remainder(x[0] - y[0], raw->period);
            double u1 = std::remainder(x[1] - y[1], raw->period);
            raw->eval(u0, u1, b0, b1);
            return {b0, b1};
        };
        k.divergence_free = div_free;
        return k;
    }

    /// Check |b(t,x,y)| <= h(t, x-y) on sampled test points.
    void check_envelope(const PeriodicGrid& g, double t, int samples, std::uint64_t seed) const {
        if (!envelope) return;
        RngStream rng(seed);
        const double half = 0.5 * g.period();
        for (int s = 0; s < samples; ++s) {
            Vec2 x{rng.uniform(-half, half), rng.uniform(-half, half)};
            Vec2 y{rng.uniform(-half, half), rng.uniform(-half, half)};
            const Vec2 v = b(t, x, y);
            const double h = envelope(t, {x[0] - y[0], x[1] - y[1]});
            if (std::hypot(v[0], v[1]) > h * (1.0 + 1e-9) + 1e-14)
                throw data_error("InteractionKernel: envelope bound violated at a sample point");
        }
    }
};

// ---------------------------------------------------------------------------
// Mollifier Gamma_n(t, x, y) = n^{1+2d} Gamma(nt, nx, ny); the default
// collapses the time marginal (space-only smoothing), the spec'd knob enables
// the full space-time form on the generic path.
// ---------------------------------------------------------------------------

struct MollifierSpec {
    int level = 1;            // n
    int dim = 2;
    double base_radius = 1.0; // support radius of the spatial bump
    bool space_time = false;  // mollify the time variable as well
    double time_radius = 1.0;
    /// Multiplies the base bump; anything but 1 breaks the probability-density
    /// normalization and is rejected by validate().
    double amplitude_scale = 1.0;

    /// Normalized base bump: c exp(-1/(1-|s|^2)) on |s| < 1.
    double gamma(const Vec2& x) const {
        const double s2 = (x[0] * x[0] + x[1] * x[1]) / (base_radius * base_radius);
        if (s2 >= 1.0) return 0.0;
        return amplitude_scale * norm_const() * std::exp(-1.0 / (1.0 - s2));
    }
    double gamma_n(const Vec2& x) const {
        const double nl = level;
        return std::pow(nl, dim) * gamma({nl * x[0], nl * x[1]});
    }
    double gamma_time(double t) const {
        const double s2 = (t / time_radius) * (t / time_radius);
        if (s2 >= 1.0) return 0.0;
        return time_norm_const() * std::exp(-1.0 / (1.0 - s2));
    }

    /// Quadrature check that the base bump integrates to 1 (within 1e-8).
    void validate() const {
        const int m = 400;
        double acc = 0.0;
        const double h = 2.0 * base_radius / m;
        if (dim == 1) {
            for (int i = 0; i < m; ++i) acc += gamma({-base_radius + (i + 0.5) * h, 0.0}) * h;
        } else {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    acc += gamma({-base_radius + (i + 0.5) * h, -base_radius + (j + 0.5) * h}) * h * h;
        }
        if (std::abs(acc - 1.0) > 1e-8) throw usage_error("MollifierSpec: bump does not integrate to 1");
    }

  private:
    double norm_const() const {
        // normalization of exp(-1/(1-s^2)) over the unit ball, then rescaled
        static const double c1 = []() {
            double acc = 0.0;
            const int m = 20000;
            for (int i = 0; i < m; ++i) {
                const double x = -1.0 + (i + 0.5) * 2.0 / m;
                acc += std::exp(-1.0 / (1.0 - x * x)) * 2.0 / m;
            }
            return 1.0 / acc;
        }();
        static const double c2 = []() {
            double acc = 0.0;
            const int m = 2000;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) {
                    const double x = -1.0 + (i + 0.5) * 2.0 / m;
                    const double y = -1.0 + (j + 0.5) * 2.0 / m;
                    const double s2 = x * x + y * y;
                    if (s2 < 1.0) acc += std::exp(-1.0 / (1.0 - s2)) * 4.0 / m / m;
                }
            return 1.0 / acc;
        }();
        return (dim == 1 ? c1 : c2) / std::pow(base_radius, dim);
    }
    double time_norm_const() const {
        static const double c1 = []() {
            double acc = 0.0;
            const int m = 20000;
            for (int i = 0; i < m; ++i) {
                const double x = -1.0 + (i + 0.5) * 2.0 / m;
                acc += std::exp(-1.0 / (1.0 - x * x)) * 2.0 / m;
            }
            return 1.0 / acc;
        }();
        return c1 / time_radius;
    }
};

// ---------------------------------------------------------------------------
// Kernel mollification
// ---------------------------------------------------------------------------

struct MollifiedKernel {
    InteractionKernel kernel;
    double bound = 0.0;  // reported sup bound of the mollified kernel
};

/// Tabulated periodic mollification of a shift-invariant kernel V(x - y):
/// b_n = V * (gamma_n * gamma_n) computed by FFT quadrature on `table_grid`
/// (the pair mollifier is the self-convolution of the spatial bump, since
/// Gamma(x, y) factorizes).  Also used for the mollified Biot-Savart kernel.
inline MollifiedKernel mollify_shift_invariant(const std::function<Vec2(const Vec2&)>& V,
                                               const MollifierSpec& moll, const PeriodicGrid& table_grid,
                                               bool divergence_free, bool spectral_biot_savart = false) {
    moll.validate();
    // refine the internal table until the mollifier support spans >= 8 cells
    int n_tab = table_grid.n();
    const double support = 2.0 * moll.base_radius / moll.level;
    while (support / (table_grid.period() / n_tab) < 8.0 && n_tab < 2048) n_tab *= 2;
    const PeriodicGrid g(2, n_tab, table_grid.period());

    SampledField gam = SampledField::at_time(g);
    gam.fill(0, [&](double x, double y) { return moll.gamma_n({x, y}); });
    // normalize the lattice quadrature exactly so constants are preserved
    double mass = 0.0;
    for (double v : gam.slice(0)) mass += v * g.cell_volume();
    if (std::abs(mass - 1.0) > 0.2)
        throw usage_error("mollify_kernel: mollifier under-resolved on the table grid");
    for (auto& v : gam.raw()) v /= mass;
    SpectralField gh = to_modes(gam);

    SpectralField Vh(g, 2);
    if (spectral_biot_savart) {
        // exact periodic Biot-Savart multiplier i (k2, -k1) / |k|^2
        detail::for_each_mode(g, [&](std::size_t idx, double k0, double k1, int m0, int m1) {
            const double kk2 = k0 * k0 + k1 * k1;
            if (kk2 == 0.0) return;
            const double a = detail::odd_k(k0, m0, g.n()) / kk2;
            const double b = detail::odd_k(k1, m1, g.n()) / kk2;
            Vh.comp(0)[idx] = cdouble(0.0, b);
            Vh.comp(1)[idx] = cdouble(0.0, -a);
        });
        // multiplier convention: coefficients of a field with unit vorticity mass
        for (int c = 0; c < 2; ++c) {
            auto s = Vh.comp(c);
            const double scale = static_cast<double>(g.size()) / std::pow(g.period(), 2);
            for (auto& v : s) v *= scale;
        }
    } else {
        if (!V) throw usage_error("mollify_shift_invariant: kernel handle required");
        SampledField vf = SampledField::at_time(g, 0.0, 2);
        vf.fill(0, [&](double x, double y) { return (x == 0.0 && y == 0.0) ? 0.0 : V({x, y})[0]; }, 0);
        vf.fill(0, [&](double x, double y) { return (x == 0.0 && y == 0.0) ? 0.0 : V({x, y})[1]; }, 1);
        Vh = to_modes(vf);
    }
    // quadrature convolution theorem: each lattice convolution contributes one
    // factor hat(gamma) * dx^d
    auto tbl = std::make_shared<KernelTable>();
    tbl->n = g.n();
    tbl->period = g.period();
    tbl->vx.resize(g.size());
    tbl->vy.resize(g.size());
    SpectralField out(g, 2);
    const double w2 = g.cell_volume() * g.cell_volume();
    for (int c = 0; c < 2; ++c) {
        const auto vh = Vh.comp(c);
        const auto gh0 = gh.comp(0);
        auto o = out.comp(c);
        for (std::size_t i = 0; i < g.size(); ++i) o[i] = vh[i] * gh0[i] * gh0[i] * w2;
    }
    SampledField phys = from_modes(out);
    std::copy(phys.slice(0, 0).begin(), phys.slice(0, 0).end(), tbl->vx.begin());
    std::copy(phys.slice(0, 1).begin(), phys.slice(0, 1).end(), tbl->vy.begin());

    MollifiedKernel mk{InteractionKernel::from_table(tbl, divergence_free), 0.0};
    for (std::size_t i = 0; i < g.size(); ++i)
        mk.bound = std::max(mk.bound, std::hypot(tbl->vx[i], tbl->vy[i]));
    return mk;
}

/// Generic mollification b_n(t,x,y) = ((b 1_[0,T]) * Gamma_n)(t,x,y) by direct
/// quadrature over the mollifier support (slow path, arbitrary kernels).
inline MollifiedKernel mollify_kernel(const InteractionKernel& kernel, const MollifierSpec& moll,
                                      double T = std::numeric_limits<double>::infinity()) {
    moll.validate();
    const int q = 9;  // quadrature points per axis over the bump support
    const double reach = moll.base_radius / moll.level;
    const double step = 2.0 * reach / q;
    struct Node {
        Vec2 w;
        double weight;
    };
    auto nodes = std::make_shared<std::vector<Node>>();
    MollifierSpec m2 = moll;
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
            Vec2 w{-reach + (i + 0.5) * step, -reach + (j + 0.5) * step};
            const double gw = m2.gamma_n(w);
            if (gw > 0.0) nodes->push_back({w, gw * step * step});
        }
    double wsum = 0.0;
    for (const auto& nd : *nodes) wsum += nd.weight;
    for (auto& nd : *nodes) nd.weight /= wsum;  // exact discrete normalization

    std::vector<double> tnodes{0.0}, tweights{1.0};
    if (moll.space_time) {
        tnodes.clear();
        tweights.clear();
        const double treach = moll.time_radius / moll.level;
        const double tstep = 2.0 * treach / q;
        double tw = 0.0;
        for (int i = 0; i < q; ++i) {
            const double t = -treach + (i + 0.5) * tstep;
            const double gw = m2.gamma_time(t * moll.level) * moll.level * tstep;
            tnodes.push_back(t);
            tweights.push_back(gw);
            tw += gw;
        }
        for (auto& v : tweights) v /= tw;
    }

    auto base = kernel.b;
    InteractionKernel out;
    out.divergence_free = kernel.divergence_free;
    out.b = [base, nodes, tnodes, tweights, T](double t, const Vec2& x, const Vec2& y) -> Vec2 {
        Vec2 acc{0.0, 0.0};
        for (std::size_t ti = 0; ti < tnodes.size(); ++ti) {
            double ts = t - tnodes[ti];
            if (ts < 0.0 || ts > T) continue;
            for (const auto& nd : *nodes) {
                for (const auto& me : *nodes) {
                    const Vec2 v = base(ts, {x[0] - nd.w[0], x[1] - nd.w[1]},
                                        {y[0] - me.w[0], y[1] - me.w[1]});
                    acc[0] += v[0] * nd.weight * me.weight * tweights[ti];
                    acc[1] += v[1] * nd.weight * me.weight * tweights[ti];
                }
            }
        }
        return acc;
    };
    // reported bound: sampled sup over random argument pairs
    MollifiedKernel mk{out, 0.0};
    RngStream rng(2718);
    for (int s = 0; s < 128; ++s) {
        const Vec2 x{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
        const Vec2 y{x[0] - rng.uniform(-1.0, 1.0), x[1] - rng.uniform(-1.0, 1.0)};
        const Vec2 v = out.b(0.0, x, y);
        mk.bound = std::max(mk.bound, std::hypot(v[0], v[1]));
    }
    return mk;
}

// ---------------------------------------------------------------------------
// Euler-Maruyama propagation
// ---------------------------------------------------------------------------

/// One EM step: X_i += dt * (1/N) sum_j b(t, X_i, X_j) + dL_i, periodic wrap.
/// O(N^2) pairwise sum in deterministic order (inner sum sequential in j, so
/// parallelizing over i cannot change results).
inline ParticleEnsemble em_step(const ParticleEnsemble& ens, const InteractionKernel& kernel,
                                double dt, std::span<const Vec2> increments) {
    if (static_cast<int>(increments.size()) != ens.n())
        throw usage_error("em_step: one increment per particle required");
    ParticleEnsemble out = ens;
    const int N = ens.n();
    const double wN = 1.0 / N;
    const double t = ens.time;
    const KernelTable* tbl = kernel.table.get();
    const double period = ens.grid.period();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < N; ++i) {
        double f0 = 0.0, f1 = 0.0;
        const Vec2 xi = ens.positions[i];
        if (tbl) {
            for (int j = 0; j < N; ++j) {
                double u0 = xi[0] - ens.positions[j][0];
                double u1 = xi[1] - ens.positions[j][1];
                u0 -= period * std::floor(u0 / period + 0.5);
                u1 -= period * std::floor(u1 / period + 0.5);
                double b0, b1;
                tbl->eval(u0, u1, b0, b1);
                f0 += b0;
                f1 += b1;
            }
        } else {
            for (int j = 0; j < N; ++j) {
                const Vec2 v = kernel.b(t, xi, ens.positions[j]);
                f0 += v[0];
                f1 += v[1];
            }
        }
        out.positions[i][0] = xi[0] + dt * wN * f0 + increments[i][0];
        out.positions[i][1] = xi[1] + dt * wN * f1 + increments[i][1];
        if (!std::isfinite(out.positions[i][0]) || !std::isfinite(out.positions[i][1]))
            out.positions[i] = {std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN()};
    }
    for (const auto& p : out.positions)
        if (!std::isfinite(p[0])) throw solve_error("em_step: non-finite particle position");
    out.wrap();
    out.time = ens.time + dt;
    return out;
}

// ---------------------------------------------------------------------------
// Initial laws
// ---------------------------------------------------------------------------

struct InitialLaw {
    std::function<Vec2(RngStream&)> sampler;
    std::string tag;

    static InitialLaw uniform(const PeriodicGrid& g) {
        const double half = 0.5 * g.period();
        return {[half, d = g.dim()](RngStream& r) -> Vec2 {
                    return {r.uniform(-half, half), d == 2 ? r.uniform(-half, half) : 0.0};
                },
                "uniform"};
    }

    static InitialLaw wrapped_gaussian(const PeriodicGrid& g, Vec2 center, double sigma) {
        return {[g, center, sigma](RngStream& r) -> Vec2 {
                    double z0, z1;
                    r.normal_pair(z0, z1);
                    Vec2 p{g.wrap(center[0] + sigma * z0),
                           g.dim() == 2 ? g.wrap(center[1] + sigma * z1) : 0.0};
                    return p;
                },
                "wrapped-gaussian"};
    }

    /// Inverse-CDF sampling of a nonnegative grid density (piecewise constant
    /// within cells); fixed two/three draws per particle.
    static InitialLaw from_density(const SampledField& rho, int t_index = 0) {
        auto grid = rho.grid();
        auto cdf = std::make_shared<std::vector<double>>();
        const auto s = rho.slice(t_index);
        double acc = 0.0;
        for (double v : s) {
            if (v < -1e-12) throw usage_error("InitialLaw: density must be nonnegative");
            acc += std::max(v, 0.0);
            cdf->push_back(acc);
        }
        if (acc <= 0.0) throw usage_error("InitialLaw: density has zero mass");
        for (auto& v : *cdf) v /= acc;
        return {[grid, cdf](RngStream& r) -> Vec2 {
                    const double u = r.uniform();
                    const auto it = std::lower_bound(cdf->begin(), cdf->end(), u);
                    std::size_t cell = static_cast<std::size_t>(it - cdf->begin());
                    if (cell >= cdf->size()) cell = cdf->size() - 1;
                    const auto p = grid.point(cell);
                    const double h = grid.spacing();
                    return {p[0] + (r.uniform() - 0.5) * h,
                            grid.dim() == 2 ? p[1] + (r.uniform() - 0.5) * h : 0.0};
                },
                "from-density"};
    }
};

// ---------------------------------------------------------------------------
// DDSDE simulation
// ---------------------------------------------------------------------------

struct ParticleTrajectory {
    std::vector<double> times;
    std::vector<ParticleEnsemble> snapshots;
    // provenance
    std::uint64_t seed = 0;
    int N = 0;
    int moll_level = 0;
    double dt = 0.0;
};

/// Seeded, reproducible EM trajectory of the mollified DDSDE.  Noise streams
/// are per-particle (stream id = particle index + 1), so parallel force
/// evaluation cannot change the draws.
inline ParticleTrajectory simulate_ddsde(const PeriodicGrid& grid, const InitialLaw& law,
                                         const InteractionKernel& kernel, double alpha, double T,
                                         int N, double dt, std::uint64_t seed,
                                         const std::vector<double>& snapshot_times = {}) {
    if (N < 2) throw usage_error("simulate_ddsde: need N >= 2");
    StableParams sp{alpha, grid.dim(), dt};
    sp.validate();
    ParticleTrajectory out;
    out.seed = seed;
    out.N = N;
    out.dt = dt;
    out.times = snapshot_times;
    if (out.times.empty()) out.times = {0.0, T};

    ParticleEnsemble ens{grid, {}, 0.0};
    RngStream init_stream(seed, 0);
    ens.positions.reserve(N);
    for (int i = 0; i < N; ++i) ens.positions.push_back(law.sampler(init_stream));
    ens.wrap();

    std::vector<RngStream> streams;
    streams.reserve(N);
    for (int i = 0; i < N; ++i) streams.emplace_back(seed, static_cast<std::uint64_t>(i) + 1);

    std::size_t next = 0;
    auto maybe_snapshot = [&](double t) {
        while (next < out.times.size() && std::abs(out.times[next] - t) <= 1e-12) {
            out.snapshots.push_back(ens);
            ++next;
        }
    };
    maybe_snapshot(0.0);

    double t = 0.0;
    std::vector<Vec2> incr(N);
    while (t < T - 1e-12) {
        double h = std::min(dt, T - t);
        if (next < out.times.size()) h = std::min(h, out.times[next] - t);
        StableParams sh{alpha, grid.dim(), h};
        for (int i = 0; i < N; ++i) incr[i] = isotropic_stable_draw(sh, streams[i]);
        ens = em_step(ens, kernel, h, incr);
        t += h;
        ens.time = t;
        maybe_snapshot(t);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Empirical density (periodic Gaussian KDE: CIC deposit + spectral smoothing)
// ---------------------------------------------------------------------------

/// Silverman-type bandwidth scaled to the cell, clamped to the lattice spacing.
inline double silverman_bandwidth(const ParticleEnsemble& ens) {
    const int d = ens.grid.dim();
    // circular mean, then min-image spread around it
    double c0 = 0, s0 = 0, c1 = 0, s1 = 0;
    const double w = 2.0 * std::numbers::pi / ens.grid.period();
    for (const auto& p : ens.positions) {
        c0 += std::cos(w * p[0]);
        s0 += std::sin(w * p[0]);
        c1 += std::cos(w * p[1]);
        s1 += std::sin(w * p[1]);
    }
    const Vec2 mean{std::atan2(s0, c0) / w, std::atan2(s1, c1) / w};
    double var = 0.0;
    for (const auto& p : ens.positions) {
        const double d0 = ens.grid.min_image(p[0] - mean[0]);
        const double d1 = d == 2 ? ens.grid.min_image(p[1] - mean[1]) : 0.0;
        var += d0 * d0 + d1 * d1;
    }
    var /= (d * ens.positions.size());
    const double sigma = std::sqrt(var);
    const double h = sigma * std::pow(4.0 / (d + 2.0), 1.0 / (d + 4.0)) *
                     std::pow(static_cast<double>(ens.positions.size()), -1.0 / (d + 4.0));
    return std::max(h, ens.grid.spacing());
}

/// Periodic Gaussian-kernel density estimate on the grid; integrates to 1.
inline SampledField empirical_density(const ParticleEnsemble& ens, double bandwidth) {
    const auto& g = ens.grid;
    if (bandwidth < g.spacing() * (1 - 1e-12))
        throw usage_error("empirical_density: bandwidth must be >= lattice spacing");
    SampledField rho = SampledField::at_time(g, ens.time);
    auto s = rho.slice(0);
    const double h = g.spacing();
    const double wmass = 1.0 / (ens.positions.size() * g.cell_volume());
    for (const auto& p : ens.positions) {
        // cloud-in-cell deposit
        const double a0 = (p[0] + 0.5 * g.period()) / h;
        int i0 = static_cast<int>(std::floor(a0));
        const double f0 = a0 - i0;
        i0 = ((i0 % g.n()) + g.n()) % g.n();
        const int i0p = (i0 + 1) % g.n();
        if (g.dim() == 1) {
            s[i0] += (1 - f0) * wmass;
            s[i0p] += f0 * wmass;
        } else {
            const double a1 = (p[1] + 0.5 * g.period()) / h;
            int i1 = static_cast<int>(std::floor(a1));
            const double f1 = a1 - i1;
            i1 = ((i1 % g.n()) + g.n()) % g.n();
            const int i1p = (i1 + 1) % g.n();
            s[g.flat(i0, i1)] += (1 - f0) * (1 - f1) * wmass;
            s[g.flat(i0, i1p)] += (1 - f0) * f1 * wmass;
            s[g.flat(i0p, i1)] += f0 * (1 - f1) * wmass;
            s[g.flat(i0p, i1p)] += f0 * f1 * wmass;
        }
    }
    auto F = to_modes(rho);
    apply_radial_multiplier(F, [bandwidth](double k) { return std::exp(-0.5 * k * k * bandwidth * bandwidth); });
    from_modes(F, rho, 0);
    return rho;
}

/// L^1 distance after smoothing both densities with the same Gaussian.
inline double smoothed_l1_distance(const SampledField& a, const SampledField& b, double bandwidth,
                                   int ta = 0, int tb = 0) {
    if (!(a.grid() == b.grid())) throw usage_error("smoothed_l1_distance: grid mismatch");
    SampledField diff = SampledField::at_time(a.grid());
    const auto sa = a.slice(ta), sb = b.slice(tb);
    auto d = diff.slice(0);
    for (std::size_t c = 0; c < d.size(); ++c) d[c] = sa[c] - sb[c];
    auto F = to_modes(diff);
    apply_radial_multiplier(F, [bandwidth](double k) { return std::exp(-0.5 * k * k * bandwidth * bandwidth); });
    from_modes(F, diff, 0);
    double acc = 0.0;
    for (double v : diff.slice(0)) acc += std::abs(v) * a.grid().cell_volume();
    return acc;
}

// ---------------------------------------------------------------------------
// Krylov functional and martingale residual
// ---------------------------------------------------------------------------

struct MonteCarloValue {
    double value = 0.0;
    double std_error = 0.0;
};

/// Monte Carlo estimate of E int_0^T f(r, X_r) dr along the trajectory
/// (trapezoid over snapshot times, bilinear interpolation of f in space).
inline MonteCarloValue krylov_functional(const ParticleTrajectory& traj, const SampledField& f) {
    if (traj.snapshots.size() < 2) throw usage_error("krylov_functional: need >= 2 snapshots");
    const int N = traj.snapshots.front().n();
    std::vector<double> per(N, 0.0);
    for (std::size_t s = 0; s + 1 < traj.snapshots.size(); ++s) {
        const double t0 = traj.times[s], t1 = traj.times[s + 1];
        const double w = 0.5 * (t1 - t0);
        for (int i = 0; i < N; ++i) {
            const auto& p0 = traj.snapshots[s].positions[i];
            const auto& p1 = traj.snapshots[s + 1].positions[i];
            per[i] += w * (f.interp(t0, p0[0], p0[1]) + f.interp(t1, p1[0], p1[1]));
        }
    }
    MonteCarloValue out;
    for (double v : per) out.value += v;
    out.value /= N;
    double var = 0.0;
    for (double v : per) var += (v - out.value) * (v - out.value);
    out.std_error = std::sqrt(var / (N - 1.0) / N);
    return out;
}

/// Martingale residual of M_t = u_f(t, X_t) - u_f(t0, X_{t0}) - int_{t0}^t f(X_r) dr:
/// max over G in {1, clamp(X^1_{t0})} of |E[M_{t1} G]| with its MC error.
inline MonteCarloValue martingale_residual(const ParticleTrajectory& traj, const SampledField& u_f,
                                           const SampledField& f, double t0, double t1) {
    const int N = traj.snapshots.front().n();
    // locate snapshot indices
    auto locate = [&](double t) {
        for (std::size_t s = 0; s < traj.times.size(); ++s)
            if (std::abs(traj.times[s] - t) <= 1e-10) return s;
        throw usage_error("martingale_residual: time not on the trajectory snapshot lattice");
    };
    const std::size_t s0 = locate(t0), s1 = locate(t1);
    if (s1 <= s0) throw usage_error("martingale_residual: need t0 < t1");

    std::vector<double> m(N, 0.0), g1(N, 1.0), g2(N);
    for (int i = 0; i < N; ++i) {
        const auto& x0 = traj.snapshots[s0].positions[i];
        g2[i] = std::clamp(x0[0], -1.0, 1.0);
    }
    for (int i = 0; i < N; ++i) {
        double integral = 0.0;
        for (std::size_t s = s0; s < s1; ++s) {
            const double ta = traj.times[s], tb = traj.times[s + 1];
            const auto& pa = traj.snapshots[s].positions[i];
            const auto& pb = traj.snapshots[s + 1].positions[i];
            integral += 0.5 * (tb - ta) * (f.interp(ta, pa[0], pa[1]) + f.interp(tb, pb[0], pb[1]));
        }
        const auto& xa = traj.snapshots[s0].positions[i];
        const auto& xb = traj.snapshots[s1].positions[i];
        m[i] = u_f.interp(t1, xb[0], xb[1]) - u_f.interp(t0, xa[0], xa[1]) - integral;
    }
    MonteCarloValue best{0.0, 0.0};
    bool first = true;
    for (const auto* G : {&g1, &g2}) {
        double mean = 0.0;
        for (int i = 0; i < N; ++i) mean += m[i] * (*G)[i];
        mean /= N;
        double var = 0.0;
        for (int i = 0; i < N; ++i) var += (m[i] * (*G)[i] - mean) * (m[i] * (*G)[i] - mean);
        const double se = std::sqrt(var / (N - 1.0) / N);
        if (first || std::abs(mean) > best.value) best = {std::abs(mean), se};
        first = false;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Fractional Navier-Stokes particle system
// ---------------------------------------------------------------------------

struct NsParticleRun {
    ParticleTrajectory trajectory;
    std::vector<SampledField> densities;  // one per snapshot
    double bandwidth = 0.0;
    bool alpha_in_corollary_range = true;
};

/// McKean-Vlasov particle solver for 2D fractional NS vorticity: mollified
/// periodic Biot-Savart interaction at mollification level n, density
/// estimates via the periodic KDE.  alpha outside (1,2) is allowed but
/// flagged experimental.
inline NsParticleRun simulate_ns_particles(const SampledField& rho0, double alpha, double T, int N,
                                           int moll_level, double dt, std::uint64_t seed,
                                           double bandwidth = 0.0,
                                           const std::vector<double>& snapshot_times = {}) {
    const auto& g = rho0.grid();
    if (g.dim() != 2) throw usage_error("simulate_ns_particles: d must be 2");
    double mass = 0.0;
    for (double v : rho0.slice(0)) mass += v * g.cell_volume();
    if (std::abs(mass - 1.0) > 1e-6)
        throw usage_error("simulate_ns_particles: rho0 must be a probability density");

    MollifierSpec moll;
    moll.level = moll_level;
    moll.dim = 2;
    auto mk = mollify_shift_invariant({}, moll, g, /*divergence_free=*/true, /*spectral_biot_savart=*/true);

    NsParticleRun run;
    run.alpha_in_corollary_range = alpha > 1.0 && alpha < 2.0;
    run.trajectory = simulate_ddsde(g, InitialLaw::from_density(rho0), mk.kernel, alpha, T, N, dt,
                                    seed, snapshot_times);
    run.trajectory.moll_level = moll_level;
    for (const auto& ens : run.trajectory.snapshots) {
        const double h = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(ens);
        run.bandwidth = h;
        run.densities.push_back(empirical_density(ens, h));
    }
    return run;
}

}  // namespace fracflow
