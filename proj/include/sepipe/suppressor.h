// SPDX-License-Identifier: Apache-2.0
//
// Wiener-filter noise suppressor with recursive noise tracking, a
// minimum-statistics floor and decision-directed a priori SNR.
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sepipe/frames.h"
#include "sepipe/kernels.h"

namespace sepipe {

struct SuppressorConfig {
  double max_atten_db = 12.0;
  double alpha_dd = 0.98;
  double alpha_noise = 0.85;   // noise update when the bin looks like noise
  double alpha_speech = 0.99;  // noise update when the bin looks like speech
  double minstat_window_s = 1.5;
  double frame_rate = 100.0;
  /// Use gamma(t-1) in the first decision-directed term instead of gamma(t).
  bool dd_previous_gamma = false;

  double min_gain() const;
  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

inline constexpr double kPowerFloor = 1e-12;
inline constexpr std::size_t kNoiseInitFrames = 5;
/// Power above this multiple of the noise estimate marks a bin as speech.
inline constexpr double kSpeechPowerRatio = 3.0;
inline constexpr double kMinStatSmoothing = 0.9;
inline constexpr double kMinStatBias = 1.5;

/// Sliding-window minimum of first-order smoothed power, per bin.
class MinStatTracker {
 public:
  MinStatTracker(std::size_t bins, std::size_t window_frames);

  /// Feeds one power frame; returns the bias-compensated minimum per bin.
  std::vector<double> update(std::span<const double> power,
                             ExecPolicy policy = ExecPolicy::kSerial);
  std::size_t window() const { return rows_; }

 private:
  std::size_t bins_;
  std::size_t rows_;
  std::size_t filled_ = 0;
  std::size_t head_ = 0;
  std::vector<double> smoothed_;
  std::vector<double> ring_;
};

struct SuppressorState {
  SuppressorConfig config;
  std::vector<double> noise_psd;
  std::vector<double> prev_gain;
  std::vector<double> prev_gamma;
  MinStatTracker minstat;
  std::size_t frames_seen = 0;

  explicit SuppressorState(const SuppressorConfig& cfg = {}, std::size_t bins = 513);
};

/// |N(t)|^2 = alpha |N(t-1)|^2 + (1 - alpha) |X(t)|^2, elementwise.
void recursive_noise_update(std::span<double> noise, std::span<const double> power,
                            std::span<const double> alpha);

/// Full noise tracker: mean of the first frames as the seed, then the
/// recursion with alpha chosen per bin by the speech-presence rule, floored
/// by the minimum-statistics estimate.
void update_noise_psd(SuppressorState& state, std::span<const double> power);

std::vector<double> a_posteriori_snr(std::span<const double> power,
                                     std::span<const double> noise_psd);

/// xi = alpha G(t-1)^2 gamma + (1 - alpha) max(gamma - 1, 0), with gamma(t-1)
/// in the first term when config.dd_previous_gamma is set.
std::vector<double> decision_directed_xi(const SuppressorState& state,
                                         std::span<const double> gamma);

double wiener_gain(double xi, double min_gain);
std::vector<double> wiener_gain(std::span<const double> xi, double min_gain);

struct SuppressionResult {
  std::vector<double> gains;
  ComplexSpectrum enhanced;
};

SuppressionResult suppress_frame(SuppressorState& state, const ComplexSpectrum& spec);

}  // namespace sepipe
