// SPDX-License-Identifier: Apache-2.0
#include "sepipe/fft.h"

#include <fftw3.h>
#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <mutex>

#include "sepipe/errors.h"

namespace sepipe {
namespace {
// FFTW planning is not thread safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Impl {
  double* time = nullptr;
  fftw_complex* freq = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (inverse) fftw_destroy_plan(inverse);
    fftw_free(time);
    fftw_free(freq);
  }
};

RealFft::RealFft(std::size_t n) : n_(n), impl_(std::make_unique<Impl>()) {
  if (n < 2 || n % 2 != 0) throw ConfigError(fmt::format("FFT length {} must be even", n));
  std::lock_guard lock(planner_mutex());
  impl_->time = fftw_alloc_real(n);
  impl_->freq = fftw_alloc_complex(n / 2 + 1);
  const int len = static_cast<int>(n);
  impl_->forward = fftw_plan_dft_r2c_1d(len, impl_->time, impl_->freq, FFTW_ESTIMATE);
  impl_->inverse = fftw_plan_dft_c2r_1d(len, impl_->freq, impl_->time, FFTW_ESTIMATE);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  if (in.size() != n_ || out.size() != bins()) {
    throw UsageError(fmt::format("forward FFT of length {} given {} in / {} out", n_,
                                 in.size(), out.size()));
  }
  std::copy(in.begin(), in.end(), impl_->time);
  fftw_execute(impl_->forward);
  for (std::size_t k = 0; k < bins(); ++k) {
    out[k] = {impl_->freq[k][0], impl_->freq[k][1]};
  }
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  if (in.size() != bins() || out.size() != n_) {
    throw UsageError(fmt::format("inverse FFT of length {} given {} in / {} out", n_,
                                 in.size(), out.size()));
  }
  for (std::size_t k = 0; k < bins(); ++k) {
    impl_->freq[k][0] = in[k].real();
    impl_->freq[k][1] = in[k].imag();
  }
  // c2r ignores the imaginary parts of DC and Nyquist.
  fftw_execute(impl_->inverse);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = impl_->time[i] * scale;
}

RealFft& thread_fft(std::size_t n) {
  thread_local std::map<std::size_t, RealFft> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, RealFft(n)).first;
  return it->second;
}

}  // namespace sepipe
