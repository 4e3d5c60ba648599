// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace sepipe {

/// Real-input FFT of a fixed even length backed by FFTW. One instance per
/// thread; instances are movable but not copyable.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  /// in: n samples, out: n/2+1 bins. Unnormalized.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  /// in: n/2+1 bins, out: n samples, scaled by 1/n so inverse(forward(x)) == x.
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  struct Impl;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

/// Thread-local cached instance for length n.
RealFft& thread_fft(std::size_t n);

}  // namespace sepipe
