// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one pass/fail line per criterion.  Exit code 0 iff all pass.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "fracflow/fracflow.hpp"

using namespace fracflow;
namespace fs = std::filesystem;

namespace {

struct Harness {
    int failures = 0;
    std::chrono::steady_clock::time_point t0;

    void start() { t0 = std::chrono::steady_clock::now(); }
    void report(int id, const std::string& what, bool pass, const std::string& detail) {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %2d: %s  [%s] (%.1f s)\n", pass ? "PASS" : "FAIL", id, what.c_str(),
                    detail.c_str(), secs);
        std::fflush(stdout);
        if (!pass) ++failures;
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Spectral exactness
// ---------------------------------------------------------------------------
void criterion_spectral(Harness& h) {
    h.start();
    bool ok = true;
    double worst = 0.0;
    PeriodicGrid g(2, 64);
    for (double alpha : {0.7, 1.0, 1.5, 2.0}) {
        for (auto [k0, k1] : {std::pair{1, 0}, {3, 2}, {7, 5}}) {
            auto f = SampledField::at_time(g);
            f.fill(0, [&](double x, double y) { return std::cos(k0 * x + k1 * y); });
            auto Lf = frac_laplacian(f, alpha);
            const double lam = std::pow(std::hypot(double(k0), double(k1)), alpha);
            for (std::size_t c = 0; c < g.size(); ++c)
                worst = std::max(worst, std::abs(Lf.slice(0)[c] + lam * f.slice(0)[c]) / lam);
        }
    }
    ok = ok && worst <= 1e-12;

    // semigroup composition
    double comp = 0.0;
    {
        RngStream rng(3);
        auto f = SampledField::at_time(g);
        for (auto& v : f.raw()) v = rng.uniform(-1, 1);
        auto ab = semigroup_apply(semigroup_apply(f, 0.3, 1.2), 0.5, 1.2);
        auto apb = semigroup_apply(f, 0.8, 1.2);
        for (std::size_t c = 0; c < g.size(); ++c)
            comp = std::max(comp, std::abs(ab.slice(0)[c] - apb.slice(0)[c]));
    }
    ok = ok && comp <= 1e-13;

    // transform round trip
    double rt = 0.0;
    {
        RngStream rng(9);
        auto f = SampledField::at_time(g);
        for (auto& v : f.raw()) v = rng.uniform(-1, 1);
        auto back = from_modes(to_modes(f));
        for (std::size_t c = 0; c < g.size(); ++c)
            rt = std::max(rt, std::abs(back.slice(0)[c] - f.slice(0)[c]));
    }
    ok = ok && rt <= 1e-12;
    h.report(1, "spectral exactness (plane waves 1e-12, composition 1e-13, round trip 1e-12)", ok,
             "wave " + fmt(worst) + ", comp " + fmt(comp) + ", rt " + fmt(rt));
}

// ---------------------------------------------------------------------------
// 2 & 4a. Critical SQG maximum principle + divergence gate
// ---------------------------------------------------------------------------
double g_div_gate = 0.0;

void criterion_maxprinciple(Harness& h) {
    h.start();
    MaxPrincipleParams p;  // n=128, alpha=1, T=1, tol=1e-6
    auto out = verify_maxprinciple(p);
    for (const auto& c : out.checks)
        if (c.name == "riesz drift divergence gate") g_div_gate = std::max(g_div_gate, c.value);
    h.report(2, "maximum principle for critical SQG (alpha=1, n=128, t<=1, 1e-6)",
             out.checks[0].pass, "excess " + fmt(out.checks[0].value));
}

// ---------------------------------------------------------------------------
// 3. NS vorticity mass conservation
// ---------------------------------------------------------------------------
SampledField g_ns_rho0{};  // reused by criterion 7
Trajectory g_ns_traj{};

void criterion_mass(Harness& h) {
    h.start();
    PeriodicGrid g(2, 128);
    g_ns_rho0 = make_gaussian_bump(g, {0.0, 0.0}, 0.8, 1.0, 0.0, /*normalize=*/true);
    SolverConfig cfg;
    cfg.alpha = 1.5;
    cfg.dt = 2e-3;
    cfg.t_end = 1.0;
    cfg.output_times = {0.0, 0.5, 1.0};
    g_ns_traj = solve_ns_vorticity(g_ns_rho0, 1.5, cfg);
    double worst = 0.0;
    for (double m : g_ns_traj.metrics.mass) worst = std::max(worst, std::abs(m - 1.0));
    for (double d : g_ns_traj.metrics.max_div_drift) g_div_gate = std::max(g_div_gate, d);
    double mn = 0.0;
    for (double v : g_ns_traj.field.slice(2)) mn = std::min(mn, v);
    h.report(3, "NS vorticity mass conservation (alpha=1.5, n=128, t<=1, 1e-10)", worst <= 1e-10,
             "max |mass-1| " + fmt(worst) + ", min rho " + fmt(mn));
}

void criterion_divfree(Harness& h) {
    h.start();
    h.report(4, "divergence-free drift gate on every stage of criteria 2-3 (1e-10)",
             g_div_gate <= 1e-10, "max |div| " + fmt(g_div_gate));
}

// ---------------------------------------------------------------------------
// 5. Stable sampler law
// ---------------------------------------------------------------------------
void criterion_stable(Harness& h) {
    h.start();
    bool ok = true;
    double worst_cf = 0.0;
    for (double alpha : {0.8, 1.0, 1.5, 2.0}) {
        for (int d : {1, 2}) {
            RngStream rng(40 + d + static_cast<int>(10 * alpha));
            StableParams p{alpha, d, 1.0};
            auto xs = sample_isotropic_increments(p, 100000, rng);
            for (double xi0 = -3.0; xi0 <= 3.0; xi0 += 0.75) {
                for (double xi1 = (d == 2 ? -3.0 : 0.0); xi1 <= (d == 2 ? 3.0 : 0.0); xi1 += 0.75) {
                    const double r = std::hypot(xi0, xi1);
                    const double dev = std::abs(empirical_cf(xs, xi0, xi1) - std::exp(-std::pow(r, alpha)));
                    worst_cf = std::max(worst_cf, dev);
                }
            }
        }
    }
    ok = ok && worst_cf <= 0.02;

    // tail slopes (power tails exist only for alpha < 2)
    double worst_slope_err = 0.0;
    for (double alpha : {0.8, 1.0, 1.5}) {
        RngStream rng(77);
        auto xs = sample_sym_stable_1d(alpha, 1000000, rng);
        std::vector<double> ab(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) ab[i] = std::abs(xs[i]);
        std::sort(ab.begin(), ab.end());
        std::vector<double> lx, ly;
        for (double ls = -2.0; ls >= -3.5; ls -= 0.25) {
            const double s = std::pow(10.0, ls);
            lx.push_back(std::log(ab[static_cast<std::size_t>((1.0 - s) * ab.size())]));
            ly.push_back(std::log(s));
        }
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
        mx /= lx.size(), my /= lx.size();
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            sxy += (lx[i] - mx) * (ly[i] - my);
            sxx += (lx[i] - mx) * (lx[i] - mx);
        }
        worst_slope_err = std::max(worst_slope_err, std::abs(sxy / sxx + alpha));
    }
    ok = ok && worst_slope_err <= 0.15;
    h.report(5, "stable sampler law (CF sup 0.02 at n=1e5; tail slope 0.15 at n=1e6)", ok,
             "cf " + fmt(worst_cf) + ", slope err " + fmt(worst_slope_err));
}

// ---------------------------------------------------------------------------
// 6. Scaling covariance
// ---------------------------------------------------------------------------
void criterion_scaling(Harness& h) {
    h.start();
    ScalingParams p;  // n=128, lambda=1/2, tol 1e-3
    auto out = verify_scaling(p);
    h.report(6, "scaling covariance (lambda=1/2, rel Linf 1e-3, n=128)", out.pass(),
             "rel err " + fmt(out.checks[0].value));
}

// ---------------------------------------------------------------------------
// 7. Particle-PDE cross-validation
// ---------------------------------------------------------------------------
void criterion_particles(Harness& h) {
    h.start();
    const auto& g = g_ns_rho0.grid();
    const double T = 0.5, alpha = 1.5, dt = 1.0 / 64.0;
    SampledField pde_final = SampledField::at_time(g, T);
    std::copy(g_ns_traj.field.slice(1).begin(), g_ns_traj.field.slice(1).end(),
              pde_final.slice(0).begin());

    // smoothed-L1 distance with a quarter-split standard error estimate:
    // quarter-sample distances fluctuate at ~2x the full-sample level, so
    // SE_N is taken as std(quarters) / 2
    auto measure = [&](int N, std::uint64_t seed, double& dist, double& se, double& bw) {
        auto run = simulate_ns_particles(g_ns_rho0, alpha, T, N, 16, dt, seed, 0.0, {0.0, T});
        bw = run.bandwidth;
        dist = smoothed_l1_distance(run.densities.back(), pde_final, run.bandwidth);
        const auto& ens = run.trajectory.snapshots.back();
        std::vector<double> dq;
        for (int q = 0; q < 4; ++q) {
            ParticleEnsemble sub{g, {}, ens.time};
            for (int i = q; i < ens.n(); i += 4) sub.positions.push_back(ens.positions[i]);
            auto rho_q = empirical_density(sub, silverman_bandwidth(sub));
            dq.push_back(smoothed_l1_distance(rho_q, pde_final, run.bandwidth));
        }
        double mean = 0.0;
        for (double v : dq) mean += v;
        mean /= dq.size();
        double var = 0.0;
        for (double v : dq) var += (v - mean) * (v - mean);
        se = std::sqrt(var / (dq.size() - 1)) / 2.0;
    };

    double d5000, se5000, bw;
    measure(5000, 11, d5000, se5000, bw);
    const bool main_ok = d5000 <= 0.1;

    std::vector<int> Ns{1000, 4000, 16000};
    std::vector<double> dist(3), se(3);
    for (int i = 0; i < 3; ++i) {
        double b;
        measure(Ns[i], 21 + i, dist[i], se[i], b);
    }
    const bool mono = dist[1] <= dist[0] + std::sqrt(se[0] * se[0] + se[1] * se[1]) &&
                      dist[2] <= dist[1] + std::sqrt(se[1] * se[1] + se[2] * se[2]);
    h.report(7, "particle-PDE cross-validation (N=5000, level 16, L1 <= 0.1; N-sweep monotone)",
             main_ok && mono,
             "d(5000)=" + fmt(d5000) + "; sweep " + fmt(dist[0]) + "/" + fmt(dist[1]) + "/" +
                 fmt(dist[2]) + " (se " + fmt(se[0]) + "/" + fmt(se[1]) + "/" + fmt(se[2]) + ")");
}

// ---------------------------------------------------------------------------
// 8. Harnack diagnostics
// ---------------------------------------------------------------------------
void criterion_harnack(Harness& h) {
    h.start();
    HarnackParams p;  // 20 cases, n=128, L=16
    auto out = verify_harnack(p);
    h.report(8, "Harnack diagnostics (20 cases: constants finite, adjusted ratio < 1 in >= 90%)",
             out.pass(), "fraction " + fmt(out.checks[1].value));
}

// ---------------------------------------------------------------------------
// 9. Holder regularity
// ---------------------------------------------------------------------------
void criterion_holder(Harness& h) {
    h.start();
    HolderParams p;  // n=256, 5 probes, control 0.5 +/- 0.05
    auto out = verify_holder(p);
    std::string detail = "control gamma " + fmt(out.checks[2].value);
    h.report(9, "Holder regularity (gamma>0, R^2>=0.9 at 5 probes; sqrt control 0.5+/-0.05)",
             out.pass(), detail);
}

// ---------------------------------------------------------------------------
// 10. Global L^inf bound ratios
// ---------------------------------------------------------------------------
void criterion_linfty(Harness& h) {
    h.start();
    PeriodicGrid g(2, 128);
    auto f = SampledField::at_time(g);
    f.fill(0, [](double x, double y) { return std::cos(2.0 * x) * std::cos(y) + 0.4 * std::sin(x); });
    SolverConfig cfg;
    cfg.alpha = 1.2;
    cfg.dt = 2e-3;
    cfg.t_end = 1.0;
    for (int i = 0; i <= 10; ++i) cfg.output_times.push_back(i * 0.1);
    auto loc = LocalizationSpec::uniform(g, 1.0, 4);
    const MultiIndex p0{8.0, 8.0};
    const double q0 = 4.0;

    auto run_ratio = [&](const SampledField& force, std::uint64_t seed) {
        auto b = make_stream_drift(g, seed, 0.5);  // fixed (H_b)-style sup norm
        auto traj = solve_transport_diffusion(SampledField::at_time(g), DriftSpec::fixed_field(b),
                                              Forcing::sampled(force), cfg);
        SampledField fst(g, traj.field.times(), 1);
        for (int ti = 0; ti < fst.num_times(); ++ti)
            std::copy(force.slice(0).begin(), force.slice(0).end(), fst.slice(ti).begin());
        return linfty_ratio(traj.field, fst, 0.0, p0, q0, loc);
    };

    std::vector<double> ratios;
    for (int c = 0; c < 10; ++c) ratios.push_back(run_ratio(f, 300 + c));
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    const double med = 0.5 * (sorted[4] + sorted[5]);
    bool banded = true;
    for (double r : ratios) banded = banded && r >= 0.5 * med && r <= 1.5 * med;

    // exact homogeneity under forcing rescale
    SampledField f5 = f;
    for (auto& v : f5.raw()) v *= 7.0;
    const double r1 = run_ratio(f, 300), r5 = run_ratio(f5, 300);
    const bool homog = std::abs(r5 - r1) <= 1e-10 * r1;
    h.report(10, "L^inf bound ratio (10-drift ensemble within +/-50%; forcing homogeneity exact)",
             banded && homog,
             "median " + fmt(med) + ", spread [" + fmt(sorted.front()) + "," + fmt(sorted.back()) +
                 "], homog dev " + fmt(std::abs(r5 - r1)));
}

// ---------------------------------------------------------------------------
// 11. Martingale residual
// ---------------------------------------------------------------------------
void criterion_martingale(Harness& h) {
    h.start();
    MartingaleParams p;
    auto out = verify_martingale(p);
    h.report(11, "martingale residual (b=0 control passes; perturbed u_f control fails)", out.pass(),
             "control " + fmt(out.checks[0].value) + " vs " + fmt(out.checks[0].threshold));
}

// ---------------------------------------------------------------------------
// 12. Moser iteration constants
// ---------------------------------------------------------------------------
void criterion_moser(Harness& h) {
    h.start();
    // 100-point parameter grid with theta >= 1.25 (200-term tails < 1e-10 there;
    // see the decisions ledger for the theta -> 1 regime)
    auto partial = [](double theta, double gamma, double beta, double m, double C0, double q,
                      double smt, int terms) {
        double logp = 0.0;
        for (int j = 1; j <= terms; ++j)
            logp += std::pow(theta, 1.0 - j) / q *
                    (j * std::log(std::pow(2.0, gamma) * std::pow(theta, beta)) +
                     std::log(std::pow(smt, -gamma) * 2.0 * m * C0));
        return std::exp(logp);
    };
    double worst = 0.0;
    int points = 0;
    for (double theta : {1.25, 1.5, 2.0, 3.0}) {
        for (double gamma : {0.0, 0.5, 1.0, 2.5}) {
            for (double beta : {0.0, 1.5}) {
                for (double q : {0.2, 0.6}) {
                    for (double smt : {1.0, 0.3}) {
                        if (points >= 100) break;
                        const double c0 = 0.8, m = 2.0;
                        const double closed = moser_iteration_constant(theta, gamma, beta, m, c0, q, smt);
                        const double p200 = partial(theta, gamma, beta, m, c0, q, smt, 200);
                        worst = std::max(worst, std::abs(p200 - closed) / closed);
                        ++points;
                    }
                }
            }
        }
    }
    h.report(12, "Moser iteration constants match 200-term partial products (1e-10, " +
                     std::to_string(points) + "-pt grid)",
             worst <= 1e-10, "max rel dev " + fmt(worst));
}

// ---------------------------------------------------------------------------
// 13. Norm inequalities
// ---------------------------------------------------------------------------
void criterion_inequalities(Harness& h) {
    h.start();
    int violations = 0;
    RngStream rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        PeriodicGrid g(2, 8);
        SampledField f = SampledField::at_time(g), k = SampledField::at_time(g);
        RngStream fr(3000 + trial), kr(9000 + trial);
        for (auto& v : f.raw()) v = fr.uniform(-1, 1);
        for (auto& v : k.raw()) v = kr.uniform(-1, 1);
        const double q0 = rng.uniform(1.0, 6.0), q1 = rng.uniform(1.0, 6.0), t = rng.uniform(0.15, 0.85);
        MultiIndex q{q0, q1}, p{q0 / t, q1 / t}, r{q0 / (1 - t), q1 / (1 - t)};
        SampledField fk = f;
        for (std::size_t c = 0; c < g.size(); ++c) fk.slice(0)[c] *= k.slice(0)[c];
        if (mixed_norm(fk, q) > mixed_norm(f, p) * mixed_norm(k, r) + 1e-12) ++violations;
    }
    int yviol = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        PeriodicGrid g(1, 16);
        SampledField f = SampledField::at_time(g), k = SampledField::at_time(g);
        RngStream fr(5000 + trial), kr(15000 + trial), er(25000 + trial);
        for (auto& v : f.raw()) v = fr.uniform(-1, 1);
        for (auto& v : k.raw()) v = kr.uniform(-1, 1);
        const double q = er.uniform(1.0, 4.0), s = er.uniform(0.1, 0.9);
        MultiIndex mq{q}, mp{1.0 / (s * (1.0 - 1.0 / q) + 1.0 / q)};
        MultiIndex mr{1.0 / (1.0 + 1.0 / q - 1.0 / mp[0])};
        SampledField conv = SampledField::at_time(g);
        for (int i = 0; i < g.n(); ++i) {
            double acc = 0.0;
            for (int a = 0; a < g.n(); ++a)
                acc += f.slice(0)[a] * k.slice(0)[(i - a + g.n()) % g.n()];
            conv.slice(0)[i] = acc * g.cell_volume();
        }
        if (mixed_norm(conv, mq) > mixed_norm(f, mp) * mixed_norm(k, mr) + 1e-12) ++yviol;
    }
    h.report(13, "mixed-norm Holder and Young inequalities (1000 randomized trials each)",
             violations == 0 && yviol == 0,
             "holder violations " + std::to_string(violations) + ", young " + std::to_string(yviol));
}

// ---------------------------------------------------------------------------
// 14. Determinism of every scenario
// ---------------------------------------------------------------------------
void criterion_determinism(Harness& h) {
    h.start();
    auto tmp = fs::temp_directory_path() / "fracflow_acceptance_det";
    fs::remove_all(tmp);

    auto small = [](const std::string& scenario) {
        json j;
        j["scenario"] = scenario;
        j["grid"] = {{"d", 2}, {"n", 32}};
        j["alpha"] = 1.2;
        j["time"] = {{"dt", 0.01}, {"t_end", 0.05}};
        j["seed"] = 11;
        j["initial"] = {{"kind", "gaussian-bump"}, {"sigma", 0.8}, {"floor", 0.1}};
        if (scenario == "solve-pde") j["drift"] = {{"kind", "fixed-field"}, {"amplitude", 0.4}};
        if (scenario == "solve-sqg")
            j["noise"] = {{"modes", json::array({{{"m", json::array({2, 1})}, {"re", 0.2}}})}};
        if (scenario == "solve-ns2d" || scenario == "run-particles")
            j["initial"] = {{"kind", "gaussian-bump"}, {"sigma", 0.8}, {"normalize", true}};
        if (scenario == "run-particles")
            j["particles"] = {{"N", 300}, {"mollification_level", 4}, {"dt", 0.025}};
        if (scenario == "verify-maxprinciple") j["time"] = {{"dt", 0.01}, {"t_end", 0.1}};
        if (scenario == "verify-harnack") {
            j["grid"] = {{"d", 2}, {"n", 64}, {"L", 16.0}};
            j["alpha"] = 1.0;
            j["time"] = {{"dt", 0.02}, {"t_end", 12.0}};
            j["verification"] = {{"cases", 2}};
        }
        if (scenario == "verify-holder") {
            j["grid"] = {{"d", 2}, {"n", 128}};
            j["alpha"] = 1.0;
            j["time"] = {{"dt", 0.01}, {"t_end", 2.0}};
            j["verification"] = {{"probes", 2}};
        }
        if (scenario == "verify-scaling") {
            j["grid"] = {{"d", 2}, {"n", 64}};
            j["time"] = {{"dt", 0.005}, {"t_end", 0.2}};
        }
        if (scenario == "verify-degiorgi") {
            j["grid"] = {{"d", 2}, {"n", 32}, {"L", 16.0}};
            j["time"] = {{"dt", 0.02}, {"t_end", 4.0}};
        }
        if (scenario == "verify-krylov" || scenario == "verify-martingale") {
            j["grid"] = {{"d", 2}, {"n", 32}};
            j["alpha"] = 1.5;
            j["time"] = {{"dt", 0.01}, {"t_end", 0.25}};
            j["particles"] = {{"N", 400}, {"dt", 0.015625}};
        }
        if (scenario == "sample-stable") j["grid"] = {{"d", 2}, {"n", 32}};
        return parse_config(j);
    };

    const std::vector<std::string> scenarios{
        "solve-pde",      "solve-sqg",           "solve-ns2d",     "run-particles",
        "sample-stable",  "verify-maxprinciple", "verify-harnack", "verify-holder",
        "verify-scaling", "verify-degiorgi",     "verify-krylov",  "verify-martingale"};
    bool ok = true;
    std::string bad;
    for (const auto& s : scenarios) {
        const auto cfg = small(s);
        const auto d1 = tmp / (s + "_1"), d2 = tmp / (s + "_2");
        run_scenario(cfg, d1);
        run_scenario(cfg, d2);
        auto read = [](const fs::path& p) {
            std::ifstream in(p, std::ios::binary);
            return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        };
        if (read(d1 / "checksums.txt") != read(d2 / "checksums.txt") ||
            read(d1 / "checksums.txt").empty()) {
            ok = false;
            bad += s + " ";
        }
    }
    h.report(14, "determinism: every scenario re-run reproduces identical checksums", ok,
             ok ? "12 scenarios" : ("mismatch: " + bad));
}

}  // namespace

int main() {
    Harness h;
    std::printf("fracflow acceptance suite (%s)\n", version_string());
    criterion_spectral(h);
    criterion_maxprinciple(h);
    criterion_mass(h);
    criterion_divfree(h);
    criterion_stable(h);
    criterion_scaling(h);
    criterion_particles(h);
    criterion_harnack(h);
    criterion_holder(h);
    criterion_linfty(h);
    criterion_martingale(h);
    criterion_moser(h);
    criterion_inequalities(h);
    criterion_determinism(h);
    std::printf(h.failures == 0 ? "all criteria passed\n" : "%d criteria FAILED\n", h.failures);
    return h.failures == 0 ? 0 : 1;
}
