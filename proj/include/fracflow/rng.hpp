#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fracflow {

/// Splittable counter-seeded random stream.  (seed, stream, draw index) -> value
/// is a pure function, so per-particle streams give schedule-independent draws.
/// Core generator is splitmix64; distinct stream ids are decorrelated by mixing.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream = 0) {
        state_ = mix64(seed + 0x9E3779B97F4A7C15ull * (stream + 1));
        state_ = mix64(state_ ^ mix64(stream + 0x6A09E667F3BCC909ull));
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix64(state_);
    }

    /// Uniform in the open interval (0,1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform in (lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential() { return -std::log(uniform()); }

    /// One pair of independent standard normals (Box-Muller, fixed two draws).
    void normal_pair(double& z0, double& z1) {
        const double r = std::sqrt(2.0 * exponential());
        const double phi = 2.0 * std::numbers::pi * uniform();
        z0 = r * std::cos(phi);
        z1 = r * std::sin(phi);
    }

    double normal() {
        double z0, z1;
        normal_pair(z0, z1);
        return z0;
    }

  private:
    static std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
};

}  // namespace fracflow
