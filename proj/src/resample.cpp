// SPDX-License-Identifier: Apache-2.0
#include "sepipe/resample.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sepipe/errors.h"

namespace sepipe {
namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

ResampleFilter design_resampler(int up, int down, std::size_t length, double beta,
                                std::ptrdiff_t delay) {
  if (up < 1 || down < 1) throw ConfigError("resampling factors must be positive");
  if (length < 2) throw ConfigError("resampling filter needs at least two taps");
  ResampleFilter f{up, down, std::vector<double>(length), delay};
  const double m = std::max(up, down);
  const double centre = (static_cast<double>(length) - 1.0) / 2.0;
  const double i0_beta = std::cyl_bessel_i(0.0, beta);
  for (std::size_t k = 0; k < length; ++k) {
    const double u = (static_cast<double>(k) - centre) / centre;
    const double window = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
    f.taps[k] = sinc((static_cast<double>(k) - centre) / m) / m * window;
  }
  return f;
}

std::vector<double> resample(std::span<const double> x, const ResampleFilter& filter) {
  const auto up = static_cast<std::ptrdiff_t>(filter.up);
  const auto down = static_cast<std::ptrdiff_t>(filter.down);
  const auto n_in = static_cast<std::ptrdiff_t>(x.size());
  const auto n_taps = static_cast<std::ptrdiff_t>(filter.taps.size());
  const std::ptrdiff_t n_out = (n_in * up + down - 1) / down;
  std::vector<double> y(static_cast<std::size_t>(n_out));
  for (std::ptrdiff_t m = 0; m < n_out; ++m) {
    const std::ptrdiff_t j = m * down + filter.delay;  // position in the zero-stuffed signal
    // Taps k with (j - k) divisible by up; first such k >= 0.
    std::ptrdiff_t k = ((j % up) + up) % up;
    double acc = 0.0;
    for (; k < n_taps; k += up) {
      const std::ptrdiff_t src = (j - k) / up;
      if (src < 0) break;
      if (src < n_in) acc += filter.taps[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(src)];
    }
    y[static_cast<std::size_t>(m)] = acc * static_cast<double>(up);
  }
  return y;
}

std::vector<double> resample_rational(std::span<const double> x, int up, int down) {
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return {x.begin(), x.end()};
  constexpr double kRejectionDb = 60.0;
  const double cutoff = 1.0 / (2.0 * std::max(up, down));
  const double transition = cutoff / 10.0;
  const auto half = static_cast<std::size_t>(std::ceil((kRejectionDb - 8.0) / (28.714 * transition)));
  const double beta = 0.1102 * (kRejectionDb - 8.7);
  return resample(x, design_resampler(up, down, 2 * half + 1, beta, static_cast<std::ptrdiff_t>(half)));
}

AudioBuffer resample_2x(const AudioBuffer& x, Direction direction) {
  const bool up = direction == Direction::kUp;
  const int expected = up ? 16000 : 32000;
  if (x.sample_rate != expected) {
    throw UsageError(fmt::format("2x {}sampling expects {} Hz input, got {} Hz", up ? "up" : "down",
                                 expected, x.sample_rate));
  }
  static const ResampleFilter up_filter =
      design_resampler(2, 1, kHalfbandTaps, kHalfbandBeta, kHalfbandTaps / 2);
  static const ResampleFilter down_filter =
      design_resampler(1, 2, kHalfbandTaps, kHalfbandBeta, kHalfbandTaps / 2 - 1);
  AudioBuffer out;
  out.sample_rate = up ? 32000 : 16000;
  out.samples = resample(x.samples, up ? up_filter : down_filter);
  return out;
}

}  // namespace sepipe
