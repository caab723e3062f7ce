#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <new>
#include <vector>

namespace cmpfill::fft {

// FFTW's planner is not thread-safe; executes on fresh arrays are.
inline std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

/// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
inline int good_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  void* p = fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1));
  if (!p) throw std::bad_alloc();
  return FftwBuffer<T>(static_cast<T*>(p));
}

/// Real 2-D cyclic convolution of size rows x cols against a fixed
/// kernel whose spectrum is precomputed.
class CyclicConvolver {
 public:
  CyclicConvolver(int rows, int cols, const std::vector<double>& kernel)
      : rows_(rows), cols_(cols), half_(cols / 2 + 1) {
    auto real = fftw_alloc<double>(size());
    auto spec = fftw_alloc<fftw_complex>(spec_size());
    {
      std::lock_guard lk(planner_mutex());
      fwd_ = fftw_plan_dft_r2c_2d(rows_, cols_, real.get(), spec.get(), FFTW_ESTIMATE);
      inv_ = fftw_plan_dft_c2r_2d(rows_, cols_, spec.get(), real.get(), FFTW_ESTIMATE);
    }
    std::copy(kernel.begin(), kernel.end(), real.get());
    fftw_execute_dft_r2c(fwd_, real.get(), spec.get());
    kspec_.resize(spec_size());
    for (std::size_t i = 0; i < spec_size(); ++i) {
      kspec_[i] = {spec[i][0], spec[i][1]};
    }
  }
  ~CyclicConvolver() {
    std::lock_guard lk(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  CyclicConvolver(const CyclicConvolver&) = delete;
  CyclicConvolver& operator=(const CyclicConvolver&) = delete;

  std::size_t size() const { return static_cast<std::size_t>(rows_) * cols_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  /// In-place cyclic convolution of a rows x cols buffer with the kernel.
  void convolve(std::vector<double>& data) const {
    auto real = fftw_alloc<double>(size());
    auto spec = fftw_alloc<fftw_complex>(spec_size());
    std::copy(data.begin(), data.end(), real.get());
    fftw_execute_dft_r2c(fwd_, real.get(), spec.get());
    const double scale = 1.0 / static_cast<double>(size());
    for (std::size_t i = 0; i < spec_size(); ++i) {
      const std::complex<double> z =
          std::complex<double>(spec[i][0], spec[i][1]) * kspec_[i] * scale;
      spec[i][0] = z.real();
      spec[i][1] = z.imag();
    }
    fftw_execute_dft_c2r(inv_, spec.get(), real.get());
    std::copy(real.get(), real.get() + size(), data.begin());
  }

 private:
  std::size_t spec_size() const { return static_cast<std::size_t>(rows_) * half_; }

  int rows_, cols_, half_;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
  std::vector<std::complex<double>> kspec_;
};

}  // namespace cmpfill::fft
