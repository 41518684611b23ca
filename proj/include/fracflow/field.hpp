#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "fracflow/errors.hpp"
#include "fracflow/grid.hpp"

namespace fracflow {

/// Real scalar/vector field sampled on grid x times.  Memory layout is
/// [time][component][cell] with cells row-major (last spatial axis fastest).
class SampledField {
  public:
    SampledField() = default;

    SampledField(PeriodicGrid grid, std::vector<double> times, int components = 1)
        : grid_(grid), times_(std::move(times)), components_(components) {
        if (components_ < 1) throw usage_error("SampledField: components must be >= 1");
        if (times_.empty()) throw usage_error("SampledField: times must be nonempty");
        for (std::size_t i = 1; i < times_.size(); ++i)
            if (!(times_[i] > times_[i - 1])) throw usage_error("SampledField: times must be increasing");
        values_.assign(times_.size() * components_ * grid_.size(), 0.0);
    }

    /// Single-time scalar field.
    static SampledField at_time(PeriodicGrid grid, double t = 0.0, int components = 1) {
        return SampledField(grid, std::vector<double>{t}, components);
    }

    const PeriodicGrid& grid() const { return grid_; }
    const std::vector<double>& times() const { return times_; }
    int components() const { return components_; }
    int num_times() const { return static_cast<int>(times_.size()); }

    std::span<double> slice(int t_index, int comp = 0) {
        return {values_.data() + offset(t_index, comp), grid_.size()};
    }
    std::span<const double> slice(int t_index, int comp = 0) const {
        return {values_.data() + offset(t_index, comp), grid_.size()};
    }

    double& at(int t_index, std::size_t cell, int comp = 0) {
        return values_[offset(t_index, comp) + cell];
    }
    double at(int t_index, std::size_t cell, int comp = 0) const {
        return values_[offset(t_index, comp) + cell];
    }

    std::vector<double>& raw() { return values_; }
    const std::vector<double>& raw() const { return values_; }

    /// Fill one component at one time from a pointwise function of position.
    void fill(int t_index, const std::function<double(double, double)>& f, int comp = 0) {
        auto s = slice(t_index, comp);
        for (std::size_t c = 0; c < grid_.size(); ++c) {
            const auto p = grid_.point(c);
            s[c] = f(p[0], p[1]);
        }
    }

    /// Fill every time slice from a function of (t, x).
    void fill_all(const std::function<double(double, double, double)>& f, int comp = 0) {
        for (int ti = 0; ti < num_times(); ++ti) {
            auto s = slice(ti, comp);
            for (std::size_t c = 0; c < grid_.size(); ++c) {
                const auto p = grid_.point(c);
                s[c] = f(times_[ti], p[0], p[1]);
            }
        }
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    /// Nearest lower time index for linear interpolation; clamps to range.
    int time_bracket(double t) const {
        if (t <= times_.front()) return 0;
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        const int i = static_cast<int>(it - times_.begin()) - 1;
        return std::min(i, num_times() - 2 >= 0 ? num_times() - 2 : 0);
    }

    /// Periodic bilinear interpolation of one component at time index t_index.
    double interp_space(int t_index, double x0, double x1, int comp = 0) const {
        const auto s = slice(t_index, comp);
        const int n = grid_.n();
        const double h = grid_.spacing();
        const double u0 = (x0 + 0.5 * grid_.period()) / h;
        int i0 = static_cast<int>(std::floor(u0));
        const double f0 = u0 - i0;
        i0 = ((i0 % n) + n) % n;
        const int i0p = (i0 + 1) % n;
        if (grid_.dim() == 1) return (1 - f0) * s[i0] + f0 * s[i0p];
        const double u1 = (x1 + 0.5 * grid_.period()) / h;
        int i1 = static_cast<int>(std::floor(u1));
        const double f1 = u1 - i1;
        i1 = ((i1 % n) + n) % n;
        const int i1p = (i1 + 1) % n;
        return (1 - f0) * ((1 - f1) * s[grid_.flat(i0, i1)] + f1 * s[grid_.flat(i0, i1p)]) +
               f0 * ((1 - f1) * s[grid_.flat(i0p, i1)] + f1 * s[grid_.flat(i0p, i1p)]);
    }

    /// Space-time interpolation (linear in time, bilinear in space).
    double interp(double t, double x0, double x1, int comp = 0) const {
        if (num_times() == 1) return interp_space(0, x0, x1, comp);
        const int i = time_bracket(t);
        const double t0 = times_[i], t1 = times_[i + 1];
        double w = (t - t0) / (t1 - t0);
        w = std::clamp(w, 0.0, 1.0);
        return (1 - w) * interp_space(i, x0, x1, comp) + w * interp_space(i + 1, x0, x1, comp);
    }

  private:
    std::size_t offset(int t_index, int comp) const {
        return (static_cast<std::size_t>(t_index) * components_ + comp) * grid_.size();
    }

    PeriodicGrid grid_;
    std::vector<double> times_;
    int components_ = 1;
    std::vector<double> values_;
};

/// Complex mode coefficients on a periodic grid, same cell layout as
/// SampledField but indexed by wavenumber.  Hermitian symmetry is maintained
/// by the operators whenever the physical field is real.
class SpectralField {
  public:
    SpectralField() = default;

    SpectralField(PeriodicGrid grid, int components = 1)
        : grid_(grid), components_(components),
          modes_(static_cast<std::size_t>(components) * grid.size(), {0.0, 0.0}) {}

    const PeriodicGrid& grid() const { return grid_; }
    int components() const { return components_; }

    std::span<std::complex<double>> comp(int c = 0) {
        return {modes_.data() + static_cast<std::size_t>(c) * grid_.size(), grid_.size()};
    }
    std::span<const std::complex<double>> comp(int c = 0) const {
        return {modes_.data() + static_cast<std::size_t>(c) * grid_.size(), grid_.size()};
    }

  private:
    PeriodicGrid grid_;
    int components_ = 1;
    std::vector<std::complex<double>> modes_;
};

}  // namespace fracflow
