#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fracflow/errors.hpp"
#include "fracflow/field.hpp"

namespace fracflow {

inline const char* version_string() { return "fracflow 1.0.0"; }

// ---------------------------------------------------------------------------
// Checksums
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// FieldDump: text header + little-endian float64 payload in row-major
// (time, x1, x2, component) order
// ---------------------------------------------------------------------------

namespace detail {
inline bool machine_is_little_endian() {
    const std::uint16_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace detail

inline void dump_field(const SampledField& f, const std::filesystem::path& path) {
    if (!detail::machine_is_little_endian())
        throw data_error("dump_field: only little-endian hosts are supported");
    // reorder [time][component][cell] -> (time, cell, component)
    const auto& g = f.grid();
    std::vector<double> payload;
    payload.reserve(f.raw().size());
    for (int ti = 0; ti < f.num_times(); ++ti)
        for (std::size_t c = 0; c < g.size(); ++c)
            for (int comp = 0; comp < f.components(); ++comp) payload.push_back(f.at(ti, c, comp));
    const std::size_t bytes = payload.size() * sizeof(double);
    const std::uint64_t sum = fnv1a64(payload.data(), bytes);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("dump_field: cannot open " + path.string());
    out << "FRACFLOW FIELD v1\n";
    out << "dim: " << g.dim() << "\n";
    out << "n: " << g.n() << "\n";
    out << "period: " << detail::format_double(g.period()) << "\n";
    out << "components: " << f.components() << "\n";
    out << "times:";
    for (double t : f.times()) out << " " << detail::format_double(t);
    out << "\n";
    out << "order: time x1 x2 component\n";
    out << "endianness: little\n";
    out << "payload_bytes: " << bytes << "\n";
    out << "checksum: " << hex64(sum) << "\n";
    out << "\n";
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(bytes));
}

inline SampledField load_field(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("load_field: cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "FRACFLOW FIELD v1") throw data_error("load_field: bad magic line");
    std::map<std::string, std::string> kv;
    while (std::getline(in, line) && !line.empty()) {
        const auto colon = line.find(": ");
        if (colon == std::string::npos) throw data_error("load_field: malformed header line: " + line);
        kv[line.substr(0, colon)] = line.substr(colon + 2);
    }
    for (const char* key : {"dim", "n", "period", "components", "times", "payload_bytes", "checksum"})
        if (!kv.count(key)) throw data_error(std::string("load_field: missing header field ") + key);

    const int dim = std::stoi(kv["dim"]);
    const int n = std::stoi(kv["n"]);
    const double period = std::stod(kv["period"]);
    const int comps = std::stoi(kv["components"]);
    std::vector<double> times;
    {
        std::istringstream ts(kv["times"]);
        double t;
        while (ts >> t) times.push_back(t);
    }
    const std::size_t bytes = std::stoull(kv["payload_bytes"]);
    std::vector<double> payload(bytes / sizeof(double));
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) throw data_error("load_field: truncated payload");
    if (hex64(fnv1a64(payload.data(), bytes)) != kv["checksum"])
        throw data_error("load_field: checksum mismatch");

    SampledField f(PeriodicGrid(dim, n, period), times, comps);
    if (payload.size() != f.raw().size()) throw data_error("load_field: payload length mismatch");
    std::size_t idx = 0;
    for (int ti = 0; ti < f.num_times(); ++ti)
        for (std::size_t c = 0; c < f.grid().size(); ++c)
            for (int comp = 0; comp < comps; ++comp) f.at(ti, c, comp) = payload[idx++];
    return f;
}

// ---------------------------------------------------------------------------
// RunConfig: schema-validated JSON with unknown-key rejection
// ---------------------------------------------------------------------------

using json = nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& path) {
    if (!j.is_object()) throw config_error(path + ": expected an object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw config_error(path + "." + key + ": unknown key");
}

inline double require_number(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw config_error(path + "." + key + ": missing");
    if (!j[key].is_number()) throw config_error(path + "." + key + ": expected a number");
    return j[key].get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback) {
    return j.contains(key) ? j[key].get<double>() : fallback;
}

}  // namespace detail

struct RunConfig {
    std::string scenario;
    int dim = 2;
    int n = 64;
    double period = 2.0 * std::numbers::pi;
    double alpha = 1.0;
    double dt = 1e-3;
    double t_end = 1.0;
    std::vector<double> output_times;
    std::string scheme = "etd-rk2";
    bool dealias = true;
    double cfl_safety = 0.5;
    std::uint64_t seed = 0;
    json initial;       // validated sub-document
    json drift;
    json forcing;
    json noise;
    json particles;
    json verification;
    json raw;           // the full parsed document (for hashing)

    std::uint64_t config_hash() const {
        const std::string canon = raw.dump();
        return fnv1a64(canon.data(), canon.size());
    }
};

inline RunConfig parse_config(const json& j) {
    static const std::set<std::string> top{"scenario", "grid",  "alpha",    "time",  "scheme",
                                           "dealias",  "cfl_safety", "seed", "initial", "drift",
                                           "forcing",  "noise", "particles", "verification"};
    detail::reject_unknown(j, top, "config");
    RunConfig cfg;
    cfg.raw = j;
    if (!j.contains("scenario") || !j["scenario"].is_string())
        throw config_error("config.scenario: missing or not a string");
    cfg.scenario = j["scenario"].get<std::string>();
    static const std::set<std::string> scenarios{
        "solve-pde",      "solve-sqg",      "solve-ns2d",     "run-particles",
        "sample-stable",  "verify-maxprinciple", "verify-harnack", "verify-holder",
        "verify-scaling", "verify-degiorgi", "verify-krylov",  "verify-martingale"};
    if (!scenarios.count(cfg.scenario))
        throw config_error("config.scenario: unknown scenario '" + cfg.scenario + "'");

    if (j.contains("grid")) {
        detail::reject_unknown(j["grid"], {"d", "n", "L"}, "config.grid");
        cfg.dim = static_cast<int>(detail::require_number(j["grid"], "d", "config.grid"));
        cfg.n = static_cast<int>(detail::require_number(j["grid"], "n", "config.grid"));
        cfg.period = detail::number_or(j["grid"], "L", cfg.period);
        if (cfg.dim != 1 && cfg.dim != 2) throw config_error("config.grid.d: must be 1 or 2");
        if (cfg.n < 8 || (cfg.n & (cfg.n - 1)) != 0)
            throw config_error("config.grid.n: must be a power of two >= 8");
        if (!(cfg.period > 0)) throw config_error("config.grid.L: must be positive");
    }
    if (j.contains("alpha")) {
        cfg.alpha = j["alpha"].get<double>();
        if (!(cfg.alpha > 0.0) || cfg.alpha > 2.0)
            throw config_error("config.alpha: must be in (0, 2]");
    }
    if (j.contains("time")) {
        detail::reject_unknown(j["time"], {"dt", "t_end", "output_times"}, "config.time");
        cfg.dt = detail::number_or(j["time"], "dt", cfg.dt);
        cfg.t_end = detail::number_or(j["time"], "t_end", cfg.t_end);
        if (!(cfg.dt > 0)) throw config_error("config.time.dt: must be positive");
        if (!(cfg.t_end > 0)) throw config_error("config.time.t_end: must be positive");
        if (j["time"].contains("output_times"))
            for (const auto& t : j["time"]["output_times"]) cfg.output_times.push_back(t.get<double>());
    }
    if (j.contains("scheme")) {
        cfg.scheme = j["scheme"].get<std::string>();
        if (cfg.scheme != "etd-rk2" && cfg.scheme != "etd-euler")
            throw config_error("config.scheme: must be etd-rk2 or etd-euler");
    }
    if (j.contains("dealias")) cfg.dealias = j["dealias"].get<bool>();
    if (j.contains("cfl_safety")) {
        cfg.cfl_safety = j["cfl_safety"].get<double>();
        if (!(cfg.cfl_safety > 0) || cfg.cfl_safety > 1)
            throw config_error("config.cfl_safety: must be in (0, 1]");
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();

    if (j.contains("initial")) {
        detail::reject_unknown(j["initial"],
                               {"kind", "sigma", "center", "amplitude", "floor", "normalize", "modes"},
                               "config.initial");
        cfg.initial = j["initial"];
    }
    if (j.contains("drift")) {
        detail::reject_unknown(j["drift"], {"kind", "amplitude", "modes", "seed", "file"}, "config.drift");
        const std::string kind = j["drift"].value("kind", "none");
        static const std::set<std::string> kinds{"none", "fixed-field", "riesz-of-state",
                                                 "biot-savart-of-state", "mollified-kernel"};
        if (!kinds.count(kind)) throw config_error("config.drift.kind: unknown kind '" + kind + "'");
        cfg.drift = j["drift"];
    }
    if (j.contains("forcing")) {
        detail::reject_unknown(j["forcing"], {"kind", "k", "amplitude", "file"}, "config.forcing");
        cfg.forcing = j["forcing"];
    }
    if (j.contains("noise")) {
        detail::reject_unknown(j["noise"], {"modes"}, "config.noise");
        cfg.noise = j["noise"];
    }
    if (j.contains("particles")) {
        detail::reject_unknown(j["particles"], {"N", "mollification_level", "bandwidth", "dt"},
                               "config.particles");
        cfg.particles = j["particles"];
        const double N = detail::require_number(j["particles"], "N", "config.particles");
        if (N < 2) throw config_error("config.particles.N: must be >= 2");
    }
    if (j.contains("verification")) {
        detail::reject_unknown(j["verification"],
                               {"q0", "p0", "beta", "p0_knob", "cases", "probes", "radii", "tolerance",
                                "kappa_grid", "tau_grid", "p_list", "gamma", "A"},
                               "config.verification");
        cfg.verification = j["verification"];
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw config_error(std::string("config: parse error: ") + e.what());
    }
    return parse_config(j);
}

}  // namespace fracflow
