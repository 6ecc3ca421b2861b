#pragma once

// Thin RAII layer over FFTW's real-to-complex transforms on 2-D/3-D grids.

#include <fftw3.h>

#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>

#include "vfs/error.hpp"

namespace vfs::fft {

/// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
inline std::size_t good_size(std::size_t n) {
    for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
        std::size_t r = m;
        for (std::size_t p : {2u, 3u, 5u, 7u})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

struct FftwDeleter {
    void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter>;

template <typename T>
FftwBuffer<T> allocate(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (p == nullptr) throw Error(ErrorKind::Numerical, "fftw_malloc failed");
    return FftwBuffer<T>(p);
}

/// Real grid of extent (nx, ny, nz) (nz == 1 for 2-D) with its half spectrum.
/// Forward and backward plans are created once per workspace.
class RealGridTransform {
public:
    RealGridTransform(int ndim, const std::array<std::size_t, 3>& extent) : ndim_(ndim), extent_(extent) {
        real_count_ = extent[0] * extent[1] * extent[2];
        spectrum_count_ = (extent[0] / 2 + 1) * extent[1] * extent[2];
        real_ = allocate<double>(real_count_);
        spectrum_ = allocate<fftw_complex>(spectrum_count_);
        // FFTW is row-major with the last index fastest: pass (z, y, x).
        if (ndim == 3) {
            forward_ = fftw_plan_dft_r2c_3d(int(extent[2]), int(extent[1]), int(extent[0]), real_.get(),
                                            spectrum_.get(), FFTW_ESTIMATE);
            backward_ = fftw_plan_dft_c2r_3d(int(extent[2]), int(extent[1]), int(extent[0]), spectrum_.get(),
                                             real_.get(), FFTW_ESTIMATE);
        } else {
            forward_ = fftw_plan_dft_r2c_2d(int(extent[1]), int(extent[0]), real_.get(), spectrum_.get(),
                                            FFTW_ESTIMATE);
            backward_ = fftw_plan_dft_c2r_2d(int(extent[1]), int(extent[0]), spectrum_.get(), real_.get(),
                                             FFTW_ESTIMATE);
        }
        if (forward_ == nullptr || backward_ == nullptr) throw Error(ErrorKind::Numerical, "fftw planning failed");
    }

    ~RealGridTransform() {
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(backward_);
    }

    RealGridTransform(const RealGridTransform&) = delete;
    RealGridTransform& operator=(const RealGridTransform&) = delete;

    std::span<double> real() { return {real_.get(), real_count_}; }
    std::span<std::complex<double>> spectrum() {
        return {reinterpret_cast<std::complex<double>*>(spectrum_.get()), spectrum_count_};
    }

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + extent_[0] * (j + extent_[1] * k);
    }
    const std::array<std::size_t, 3>& extent() const { return extent_; }
    std::size_t real_count() const { return real_count_; }

    void forward() { fftw_execute(forward_); }
    /// Unnormalised inverse; divide by real_count() for the true inverse.
    void backward() { fftw_execute(backward_); }

private:
    int ndim_;
    std::array<std::size_t, 3> extent_;
    std::size_t real_count_ = 0;
    std::size_t spectrum_count_ = 0;
    FftwBuffer<double> real_;
    FftwBuffer<fftw_complex> spectrum_;
    fftw_plan forward_ = nullptr;
    fftw_plan backward_ = nullptr;
};

}  // namespace vfs::fft
