#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>

#include "qnoise/error.hpp"

namespace qnoise {

namespace detail {
// FFTW's planner is not thread-safe; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Real-to-complex FFT of a fixed length with owned, planner-aligned buffers.
// Plans are built with FFTW_ESTIMATE so the chosen algorithm, and therefore
// every output bit, depends only on the length.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    require(n >= 1, Errc::config, "FFT length must be >= 1");
    std::lock_guard lock(detail::fftw_planner_mutex());
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    if (plan_ == nullptr) fail(Errc::internal, "fftw planning failed");
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  ~RealFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  std::span<double> input() { return {in_, n_}; }

  void execute() { fftw_execute(plan_); }

  std::complex<double> bin(std::size_t k) const { return {out_[k][0], out_[k][1]}; }
  double power(std::size_t k) const { return out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1]; }

 private:
  std::size_t n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace qnoise
