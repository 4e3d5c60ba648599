// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sepipe/audio.h"

namespace sepipe {

/// Kaiser-windowed sinc prototype for rational rate change by up/down.
/// Output sample m is  up * sum_k taps[k] * xup[m*down + delay - k]  where
/// xup is the input zero-stuffed by `up`.
struct ResampleFilter {
  int up = 1;
  int down = 1;
  std::vector<double> taps;
  std::ptrdiff_t delay = 0;
};

/// Cutoff at the lower of the two Nyquist rates.
ResampleFilter design_resampler(int up, int down, std::size_t length, double beta,
                                std::ptrdiff_t delay);

/// Polyphase evaluation; output length ceil(x.size() * up / down).
std::vector<double> resample(std::span<const double> x, const ResampleFilter& filter);

/// General rational resampler, zero-delay aligned. Kaiser design for 60 dB
/// stopband rejection with a transition band one tenth of the cutoff.
std::vector<double> resample_rational(std::span<const double> x, int up, int down);

enum class Direction { kUp, kDown };

inline constexpr std::size_t kHalfbandTaps = 64;
inline constexpr double kHalfbandBeta = 8.0;

/// 16 <-> 32 kHz with a 64-tap Kaiser (beta 8) half-band filter. The even tap
/// count puts the filter centre between samples; up and down compensate by 32
/// and 31 samples, so each direction is within half a high-rate sample of
/// zero delay and an up/down round trip is exactly aligned.
AudioBuffer resample_2x(const AudioBuffer& x, Direction direction);

}  // namespace sepipe
