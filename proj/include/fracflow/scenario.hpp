#pragma once

#include <filesystem>
#include <fstream>
#include <map>

#include "fracflow/io.hpp"
#include "fracflow/verify.hpp"

namespace fracflow {

// ---------------------------------------------------------------------------
// Config-driven building blocks
// ---------------------------------------------------------------------------

inline SampledField make_initial(const RunConfig& cfg, const PeriodicGrid& g) {
    const json& init = cfg.initial;
    const std::string kind = init.is_object() ? init.value("kind", "gaussian-bump") : "gaussian-bump";
    if (kind == "zero") return SampledField::at_time(g);
    if (kind == "cos-product") {
        auto f = SampledField::at_time(g);
        const double amp = init.is_object() ? init.value("amplitude", 1.0) : 1.0;
        f.fill(0, [&](double x, double y) { return amp * std::cos(x) * (g.dim() == 2 ? std::cos(y) : 1.0); });
        return f;
    }
    if (kind == "gaussian-bump") {
        std::array<double, 2> c{0.0, 0.0};
        if (init.is_object() && init.contains("center")) {
            c[0] = init["center"][0].get<double>();
            if (init["center"].size() > 1) c[1] = init["center"][1].get<double>();
        }
        const double sigma = init.is_object() ? init.value("sigma", 0.8) : 0.8;
        const double amp = init.is_object() ? init.value("amplitude", 1.0) : 1.0;
        const double floor = init.is_object() ? init.value("floor", 0.0) : 0.0;
        const bool norm = init.is_object() ? init.value("normalize", false) : false;
        return make_gaussian_bump(g, c, sigma, amp, floor, norm);
    }
    throw config_error("config.initial.kind: unknown kind '" + kind + "'");
}

inline DriftSpec make_drift(const RunConfig& cfg, const PeriodicGrid& g) {
    const json& d = cfg.drift;
    const std::string kind = d.is_object() ? d.value("kind", "none") : "none";
    if (kind == "none") return DriftSpec::none();
    if (kind == "riesz-of-state") return DriftSpec::riesz_of_state();
    if (kind == "biot-savart-of-state") return DriftSpec::biot_savart_of_state();
    if (kind == "fixed-field") {
        if (d.contains("file")) return DriftSpec::fixed_field(load_field(d["file"].get<std::string>()));
        const double amp = d.value("amplitude", 0.5);
        const std::uint64_t seed = d.value("seed", cfg.seed + 17);
        const int modes = static_cast<int>(d.value("modes", 3.0));
        return DriftSpec::fixed_field(make_stream_drift(g, seed, amp, modes));
    }
    if (kind == "mollified-kernel") {
        // mollified periodic Biot-Savart as a per-mode multiplier on the state
        int level = 16;
        if (cfg.particles.is_object()) level = static_cast<int>(cfg.particles.value("mollification_level", 16.0));
        MollifierSpec moll;
        moll.level = level;
        auto mk = mollify_shift_invariant({}, moll, g, true, true);
        // table -> multiplier: quadrature convolution contributes one dx^d
        SampledField tab = SampledField::at_time(g, 0.0, 2);
        for (std::size_t i = 0; i < g.size(); ++i) {
            double b0, b1;
            const auto p = g.point(i);
            mk.kernel.table->eval(p[0], p[1], b0, b1);
            tab.at(0, i, 0) = b0;
            tab.at(0, i, 1) = b1;
        }
        auto T = to_modes(tab, 0);
        std::vector<std::vector<cdouble>> mult(2, std::vector<cdouble>(g.size()));
        for (int c = 0; c < 2; ++c)
            for (std::size_t i = 0; i < g.size(); ++i) mult[c][i] = T.comp(c)[i] * g.cell_volume();
        return DriftSpec::mollified_kernel(std::move(mult));
    }
    throw config_error("config.drift.kind: unknown kind '" + kind + "'");
}

inline Forcing make_forcing(const RunConfig& cfg, const PeriodicGrid& g) {
    const json& f = cfg.forcing;
    const std::string kind = f.is_object() ? f.value("kind", "none") : "none";
    if (kind == "none") return Forcing::none();
    if (kind == "file") return Forcing::sampled(load_field(f["file"].get<std::string>()));
    if (kind == "single-mode") {
        double k0 = 1.0, k1 = 0.0;
        if (f.contains("k")) {
            k0 = f["k"][0].get<double>();
            if (f["k"].size() > 1) k1 = f["k"][1].get<double>();
        }
        const double amp = f.value("amplitude", 1.0);
        auto field = SampledField::at_time(g);
        field.fill(0, [&](double x, double y) { return amp * std::cos(k0 * x + k1 * y); });
        return Forcing::sampled(field);
    }
    throw config_error("config.forcing.kind: unknown kind '" + kind + "'");
}

inline NoiseSpec make_noise(const RunConfig& cfg) {
    NoiseSpec noise;
    noise.seed = cfg.seed;
    if (cfg.noise.is_object() && cfg.noise.contains("modes")) {
        for (const auto& m : cfg.noise["modes"]) {
            NoiseSpec::Mode mode;
            mode.m0 = m["m"][0].get<int>();
            mode.m1 = m["m"].size() > 1 ? m["m"][1].get<int>() : 0;
            mode.amplitude = {m.value("re", 0.0), m.value("im", 0.0)};
            noise.modes.push_back(mode);
        }
    }
    return noise;
}

inline SolverConfig make_solver_config(const RunConfig& cfg) {
    SolverConfig sc;
    sc.alpha = cfg.alpha;
    sc.dt = cfg.dt;
    sc.t_end = cfg.t_end;
    sc.dealias = cfg.dealias;
    sc.cfl_safety = cfg.cfl_safety;
    sc.scheme = cfg.scheme == "etd-euler" ? Scheme::etd_euler : Scheme::etd_rk2;
    sc.output_times = cfg.output_times;
    return sc;
}

// ---------------------------------------------------------------------------
// Artifact writing
// ---------------------------------------------------------------------------

namespace detail {

class ArtifactWriter {
  public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    void write_text(const std::string& name, const std::string& content) {
        const auto p = dir_ / name;
        std::ofstream out(p, std::ios::binary);
        out << content;
        out.close();
        checksums_[name] = file_checksum(p);
    }

    void write_field(const std::string& name, const SampledField& f) {
        const auto p = dir_ / name;
        dump_field(f, p);
        checksums_[name] = file_checksum(p);
    }

    void write_metrics(const Metrics& m) {
        std::string csv = "t,sup_norm,l2,mass,max_div_drift,dt_used\n";
        for (std::size_t i = 0; i < m.t.size(); ++i) {
            csv += fmt(m.t[i]) + "," + fmt(m.sup_norm[i]) + "," + fmt(m.l2[i]) + "," + fmt(m.mass[i]) +
                   "," + fmt(m.max_div_drift[i]) + "," + fmt(m.dt_used[i]) + "\n";
        }
        write_text("metrics.csv", csv);
        if (!m.events.empty()) {
            std::string ev;
            for (const auto& [t, what] : m.events) ev += fmt(t) + "," + what + "\n";
            write_text("events.csv", ev);
        }
    }

    void write_verdict(const VerifyOutcome& v) {
        json out;
        out["scenario"] = v.scenario;
        out["pass"] = v.pass();
        out["checks"] = json::array();
        for (const auto& c : v.checks)
            out["checks"].push_back({{"name", c.name},
                                     {"pass", c.pass},
                                     {"value", c.value},
                                     {"threshold", c.threshold},
                                     {"detail", c.detail}});
        write_text("verdict.json", out.dump(2) + "\n");
        if (!v.csv_rows.empty()) {
            std::string csv = v.csv_header + "\n";
            for (const auto& r : v.csv_rows) csv += r + "\n";
            write_text("cases.csv", csv);
        }
        // append-only verdict block
        std::ofstream append(dir_ / "verdicts.txt", std::ios::app);
        append << "[" << v.scenario << "] " << (v.pass() ? "PASS" : "FAIL") << "\n";
        for (const auto& c : v.checks)
            append << "  " << (c.pass ? "pass" : "FAIL") << " " << c.name << " (value " << c.value
                   << ", threshold " << c.threshold << ")\n";
    }

    void write_provenance(const RunConfig& cfg) {
        json p;
        p["version"] = version_string();
        p["scenario"] = cfg.scenario;
        p["seed"] = cfg.seed;
        p["config_hash"] = hex64(cfg.config_hash());
        write_text("provenance.json", p.dump(2) + "\n");
    }

    void finalize() {
        std::string sums;
        for (const auto& [name, sum] : checksums_) sums += hex64(sum) + "  " + name + "\n";
        std::ofstream out(dir_ / "checksums.txt", std::ios::binary);
        out << sums;
    }

  private:
    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return buf;
    }
    static std::uint64_t file_checksum(const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return fnv1a64(bytes.data(), bytes.size());
    }

    std::filesystem::path dir_;
    std::map<std::string, std::uint64_t> checksums_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario dispatch
// ---------------------------------------------------------------------------

inline double vnum(const json& j, const std::string& key, double fallback) {
    return j.is_object() ? j.value(key, fallback) : fallback;
}

/// Execute one scenario; writes field dumps, metrics CSV, verdict blocks, a
/// provenance record and a checksum manifest into `out_dir`.
inline VerifyOutcome run_scenario(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    detail::ArtifactWriter w(out_dir);
    w.write_provenance(cfg);
    PeriodicGrid g(cfg.dim, cfg.n, cfg.period);
    VerifyOutcome outcome;
    outcome.scenario = cfg.scenario;

    if (cfg.scenario == "solve-pde") {
        auto traj = solve_transport_diffusion(make_initial(cfg, g), make_drift(cfg, g),
                                              make_forcing(cfg, g), make_solver_config(cfg));
        w.write_metrics(traj.metrics);
        w.write_field("state.fld", traj.field);
    } else if (cfg.scenario == "solve-sqg") {
        Solver s(g, make_solver_config(cfg), DriftSpec::riesz_of_state(), make_forcing(cfg, g),
                 make_noise(cfg));
        auto traj = s.run(make_initial(cfg, g));
        w.write_metrics(traj.metrics);
        w.write_field("state.fld", traj.field);
    } else if (cfg.scenario == "solve-ns2d") {
        auto rho0 = make_initial(cfg, g);
        auto traj = solve_ns_vorticity(rho0, cfg.alpha, make_solver_config(cfg));
        w.write_metrics(traj.metrics);
        w.write_field("state.fld", traj.field);
    } else if (cfg.scenario == "run-particles") {
        const int N = static_cast<int>(vnum(cfg.particles, "N", 2000.0));
        const int level = static_cast<int>(vnum(cfg.particles, "mollification_level", 16.0));
        const double bandwidth = vnum(cfg.particles, "bandwidth", 0.0);
        const double dt = vnum(cfg.particles, "dt", cfg.dt);
        auto rho0 = make_initial(cfg, g);
        double mass = 0.0;
        for (double v : rho0.slice(0)) mass += v * g.cell_volume();
        for (auto& v : rho0.raw()) v /= mass;
        std::vector<double> snaps = cfg.output_times;
        if (snaps.empty()) snaps = {0.0, cfg.t_end};
        auto run = simulate_ns_particles(rho0, cfg.alpha, cfg.t_end, N, level, dt, cfg.seed,
                                         bandwidth, snaps);
        for (std::size_t i = 0; i < run.densities.size(); ++i)
            w.write_field("density_" + std::to_string(i) + ".fld", run.densities[i]);
        json prov;
        prov["seed"] = run.trajectory.seed;
        prov["N"] = run.trajectory.N;
        prov["mollification_level"] = run.trajectory.moll_level;
        prov["dt"] = run.trajectory.dt;
        prov["bandwidth"] = run.bandwidth;
        prov["alpha_in_corollary_range"] = run.alpha_in_corollary_range;
        w.write_text("particles_provenance.json", prov.dump(2) + "\n");
    } else if (cfg.scenario == "sample-stable") {
        const std::size_t count = 100000;
        RngStream rng(cfg.seed, 1);
        StableParams sp{cfg.alpha, cfg.dim, 1.0};
        auto xs = sample_isotropic_increments(sp, count, rng);
        std::string csv = cfg.dim == 2 ? "x0,x1\n" : "x0\n";
        for (std::size_t i = 0; i < 10000; ++i) {
            csv += detail::fmt(xs[i][0]);
            if (cfg.dim == 2) csv += std::string(",") + detail::fmt(xs[i][1]);
            csv += "\n";
        }
        w.write_text("samples.csv", csv);
        std::string cf = "xi0,xi1,empirical_cf,exact_cf\n";
        double worst = 0.0;
        for (double xi0 = -3.0; xi0 <= 3.0; xi0 += 0.5) {
            for (double xi1 = (cfg.dim == 2 ? -3.0 : 0.0); xi1 <= (cfg.dim == 2 ? 3.0 : 0.0); xi1 += 0.5) {
                const double emp = empirical_cf(xs, xi0, xi1);
                const double exact = std::exp(-std::pow(std::hypot(xi0, xi1), cfg.alpha));
                worst = std::max(worst, std::abs(emp - exact));
                cf += detail::fmt(xi0) + "," + detail::fmt(xi1) + "," + detail::fmt(emp) + "," +
                      detail::fmt(exact) + "\n";
            }
        }
        w.write_text("cf_report.csv", cf);
        outcome.checks.push_back({"empirical CF sup error", worst <= 0.02, worst, 0.02, ""});
        w.write_verdict(outcome);
    } else if (cfg.scenario == "verify-maxprinciple") {
        MaxPrincipleParams p;
        p.n = cfg.n;
        p.alpha = cfg.alpha;
        p.T = cfg.t_end;
        p.dt = cfg.dt;
        p.tol = vnum(cfg.verification, "tolerance", 1e-6);
        outcome = verify_maxprinciple(p);
        w.write_verdict(outcome);
    } else if (cfg.scenario == "verify-harnack") {
        HarnackParams p;
        p.cases = static_cast<int>(vnum(cfg.verification, "cases", 20.0));
        p.n = cfg.n;
        p.L = cfg.period;
        p.alpha = cfg.alpha;
        p.dt = cfg.dt;
        p.seed = cfg.seed + 1000;
        outcome = verify_harnack(p);
        w.write_verdict(outcome);
    } else if (cfg.scenario == "verify-holder") {
        HolderParams p;
        p.n = cfg.n;
        p.T = cfg.t_end;
        p.dt = cfg.dt;
        p.probes = static_cast<int>(vnum(cfg.verification, "probes", 5.0));
        p.seed = cfg.seed + 5;
        outcome = verify_holder(p);
        w.write_verdict(outcome);
    } else if (cfg.scenario == "verify-scaling") {
        ScalingParams p;
        p.n = cfg.n;
        p.alpha = cfg.alpha;
        p.T = cfg.t_end;
        p.dt = cfg.dt;
        p.tol = vnum(cfg.verification, "tolerance", 1e-3);
        p.seed = cfg.seed + 21;
        outcome = verify_scaling(p);
        w.write_verdict(outcome);
    } else if (cfg.scenario == "verify-degiorgi") {
        DeGiorgiParams p;
        p.n_coarse = cfg.n;
        p.n_fine = 2 * cfg.n;
        p.L = cfg.period;
        p.alpha = cfg.alpha;
        p.dt = cfg.dt;
        outcome = verify_degiorgi(p);
        w.write_verdict(outcome);
    } else if (cfg.scenario == "verify-krylov") {
        KrylovParams p;
        p.n = cfg.n;
        p.alpha = cfg.alpha;
        p.T = cfg.t_end;
        p.seed = cfg.seed + 5;
        if (cfg.particles.is_object()) {
            p.N = static_cast<int>(vnum(cfg.particles, "N", 3000.0));
            p.dt = vnum(cfg.particles, "dt", p.T / 32.0);
        }
        p.q0 = vnum(cfg.verification, "q0", 4.0);
        p.p0 = vnum(cfg.verification, "p0", 4.0);
        outcome = verify_krylov(p);
        w.write_verdict(outcome);
    } else if (cfg.scenario == "verify-martingale") {
        MartingaleParams p;
        p.n = cfg.n;
        p.alpha = cfg.alpha;
        p.T = cfg.t_end;
        p.seed = cfg.seed + 8;
        if (cfg.particles.is_object()) {
            p.N = static_cast<int>(vnum(cfg.particles, "N", 2000.0));
            p.dt = vnum(cfg.particles, "dt", p.T / 64.0);
        }
        outcome = verify_martingale(p);
        w.write_verdict(outcome);
    } else {
        throw config_error("config.scenario: unknown scenario '" + cfg.scenario + "'");
    }
    w.finalize();
    return outcome;
}

}  // namespace fracflow
