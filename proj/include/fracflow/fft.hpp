#pragma once

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <span>

#include <fftw3.h>

#include "fracflow/grid.hpp"

namespace fracflow {
namespace detail {

/// Cached FFTW plans per (dim, n).  Plans are built once on internal aligned
/// buffers and executed under a lock; callers pass data by copy.  Forward is
/// unnormalized, inverse applies 1/n^d, so the pair is an exact inverse.
class FftCache {
  public:
    static FftCache& instance() {
        static FftCache cache;
        return cache;
    }

    void forward(const PeriodicGrid& g, std::span<const std::complex<double>> in,
                 std::span<std::complex<double>> out) {
        execute(g, in, out, FFTW_FORWARD);
    }

    void inverse(const PeriodicGrid& g, std::span<const std::complex<double>> in,
                 std::span<std::complex<double>> out) {
        execute(g, in, out, FFTW_BACKWARD);
        const double scale = 1.0 / static_cast<double>(g.size());
        for (auto& v : out) v *= scale;
    }

  private:
    struct Entry {
        fftw_plan fwd = nullptr;
        fftw_plan bwd = nullptr;
        fftw_complex* buf = nullptr;
        std::size_t size = 0;
        std::mutex mtx;
    };

    void execute(const PeriodicGrid& g, std::span<const std::complex<double>> in,
                 std::span<std::complex<double>> out, int sign) {
        Entry& e = entry(g);
        std::lock_guard<std::mutex> lock(e.mtx);
        std::memcpy(e.buf, static_cast<const void*>(in.data()), e.size * sizeof(fftw_complex));
        fftw_execute(sign == FFTW_FORWARD ? e.fwd : e.bwd);
        std::memcpy(static_cast<void*>(out.data()), e.buf, e.size * sizeof(fftw_complex));
    }

    Entry& entry(const PeriodicGrid& g) {
        const auto key = std::make_pair(g.dim(), g.n());
        std::lock_guard<std::mutex> lock(map_mtx_);
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            auto e = std::make_unique<Entry>();
            e->size = g.size();
            e->buf = fftw_alloc_complex(e->size);
            if (g.dim() == 1) {
                e->fwd = fftw_plan_dft_1d(g.n(), e->buf, e->buf, FFTW_FORWARD, FFTW_ESTIMATE);
                e->bwd = fftw_plan_dft_1d(g.n(), e->buf, e->buf, FFTW_BACKWARD, FFTW_ESTIMATE);
            } else {
                e->fwd = fftw_plan_dft_2d(g.n(), g.n(), e->buf, e->buf, FFTW_FORWARD, FFTW_ESTIMATE);
                e->bwd = fftw_plan_dft_2d(g.n(), g.n(), e->buf, e->buf, FFTW_BACKWARD, FFTW_ESTIMATE);
            }
            it = entries_.emplace(key, std::move(e)).first;
        }
        return *it->second;
    }

    std::map<std::pair<int, int>, std::unique_ptr<Entry>> entries_;
    std::mutex map_mtx_;
};

}  // namespace detail
}  // namespace fracflow
