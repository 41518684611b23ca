#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "fracflow/errors.hpp"

namespace fracflow {

/// Uniform periodic grid on the fundamental cell [-L/2, L/2)^d, d in {1,2},
/// n points per axis (power of two, n >= 8).  Wavenumbers are
/// (2*pi/L) * {-n/2, ..., n/2-1} in standard FFT index order.
class PeriodicGrid {
  public:
    PeriodicGrid() = default;

    PeriodicGrid(int dim, int n, double period = 2.0 * std::numbers::pi)
        : dim_(dim), n_(n), period_(period) {
        if (dim != 1 && dim != 2) throw usage_error("PeriodicGrid: dimension must be 1 or 2");
        if (n < 8 || (n & (n - 1)) != 0) throw usage_error("PeriodicGrid: n must be a power of two >= 8");
        if (!(period > 0.0)) throw usage_error("PeriodicGrid: period must be positive");
    }

    int dim() const { return dim_; }
    int n() const { return n_; }
    double period() const { return period_; }
    double spacing() const { return period_ / n_; }
    std::size_t size() const {
        std::size_t s = 1;
        for (int a = 0; a < dim_; ++a) s *= static_cast<std::size_t>(n_);
        return s;
    }
    /// Cell volume element used by all lattice quadratures.
    double cell_volume() const { return std::pow(spacing(), dim_); }

    /// Physical coordinate of lattice index i along one axis.
    double coord(int i) const { return -0.5 * period_ + i * spacing(); }

    /// Signed FFT mode number for index i: {0,...,n/2-1, -n/2,...,-1}.
    int mode_number(int i) const { return i < n_ / 2 ? i : i - n_; }

    /// Wavenumber (2*pi/L)*m for index i along one axis.
    double wavenumber(int i) const { return 2.0 * std::numbers::pi / period_ * mode_number(i); }

    /// Flat cell index, row-major with the last axis fastest.
    std::size_t flat(int i0, int i1 = 0) const {
        return dim_ == 1 ? static_cast<std::size_t>(i0)
                         : static_cast<std::size_t>(i0) * n_ + i1;
    }

    /// Coordinates of a flat cell index.
    std::array<double, 2> point(std::size_t cell) const {
        if (dim_ == 1) return {coord(static_cast<int>(cell)), 0.0};
        return {coord(static_cast<int>(cell / n_)), coord(static_cast<int>(cell % n_))};
    }

    /// Minimum-image representative of a displacement, in [-L/2, L/2].
    double min_image(double u) const { return std::remainder(u, period_); }

    /// Wrap a coordinate into the fundamental cell [-L/2, L/2).
    double wrap(double x) const {
        const double y = x - period_ * std::floor(x / period_ + 0.5);
        return y >= 0.5 * period_ ? y - period_ : y;
    }

    /// Periodic Euclidean distance between two points.
    double distance(const std::array<double, 2>& a, const std::array<double, 2>& b) const {
        double s = 0.0;
        for (int ax = 0; ax < dim_; ++ax) {
            const double u = min_image(a[ax] - b[ax]);
            s += u * u;
        }
        return std::sqrt(s);
    }

    bool operator==(const PeriodicGrid& o) const {
        return dim_ == o.dim_ && n_ == o.n_ && period_ == o.period_;
    }

  private:
    int dim_ = 1;
    int n_ = 8;
    double period_ = 2.0 * std::numbers::pi;
};

}  // namespace fracflow
