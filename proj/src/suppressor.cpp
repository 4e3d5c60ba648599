// SPDX-License-Identifier: Apache-2.0
#include "sepipe/suppressor.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "sepipe/errors.h"

namespace sepipe {
namespace {

void require_non_negative(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw UsageError(fmt::format("{} must be finite and non-negative", what));
    }
  }
}

std::size_t window_frames(const SuppressorConfig& cfg) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(
                                      std::lround(cfg.minstat_window_s * cfg.frame_rate)));
}

}  // namespace

double SuppressorConfig::min_gain() const { return std::pow(10.0, -max_atten_db / 20.0); }

void SuppressorConfig::validate() const {
  auto unit_open = [](double a) { return a > 0.0 && a < 1.0; };
  if (!(max_atten_db > 0.0)) throw ConfigError("max attenuation must be positive dB");
  if (!unit_open(alpha_dd)) throw ConfigError("alpha-dd must lie in (0, 1)");
  if (!unit_open(alpha_noise)) throw ConfigError("alpha-noise must lie in (0, 1)");
  if (!unit_open(alpha_speech)) throw ConfigError("alpha-speech must lie in (0, 1)");
  if (!(minstat_window_s > 0.0)) throw ConfigError("minstat window must be positive");
  if (!(frame_rate > 0.0)) throw ConfigError("frame rate must be positive");
}

MinStatTracker::MinStatTracker(std::size_t bins, std::size_t window_frames)
    : bins_(bins), rows_(window_frames), smoothed_(bins, 0.0), ring_(bins * window_frames, 0.0) {}

std::vector<double> MinStatTracker::update(std::span<const double> power, ExecPolicy policy) {
  if (power.size() != bins_) throw UsageError("power frame size does not match tracker");
  for (std::size_t k = 0; k < bins_; ++k) {
    smoothed_[k] = filled_ == 0 ? power[k]
                                : kMinStatSmoothing * smoothed_[k] +
                                      (1.0 - kMinStatSmoothing) * power[k];
  }
  std::copy(smoothed_.begin(), smoothed_.end(),
            ring_.begin() + static_cast<std::ptrdiff_t>(head_ * bins_));
  head_ = (head_ + 1) % rows_;
  filled_ = std::min(filled_ + 1, rows_);

  std::vector<double> floor(bins_);
  kernels::column_min(policy, std::span(ring_).first(filled_ * bins_), filled_, bins_, floor);
  for (double& v : floor) v *= kMinStatBias;
  return floor;
}

SuppressorState::SuppressorState(const SuppressorConfig& cfg, std::size_t bins)
    : config(cfg),
      noise_psd(bins, 0.0),
      prev_gain(bins, 1.0),
      prev_gamma(bins, 1.0),
      minstat(bins, window_frames(cfg)) {
  config.validate();
}

void recursive_noise_update(std::span<double> noise, std::span<const double> power,
                            std::span<const double> alpha) {
  if (power.size() != noise.size() || alpha.size() != noise.size()) {
    throw UsageError("noise recursion operands differ in size");
  }
  require_non_negative(power, "power");
  for (std::size_t k = 0; k < noise.size(); ++k) {
    noise[k] = alpha[k] * noise[k] + (1.0 - alpha[k]) * power[k];
  }
}

void update_noise_psd(SuppressorState& state, std::span<const double> power) {
  const std::size_t bins = state.noise_psd.size();
  if (power.size() != bins) throw UsageError("power frame size does not match suppressor");
  require_non_negative(power, "power");

  const std::vector<double> floor = state.minstat.update(power);
  const std::size_t t = state.frames_seen;
  if (t < kNoiseInitFrames) {
    // Running mean of the first frames seeds the estimate.
    for (std::size_t k = 0; k < bins; ++k) {
      state.noise_psd[k] += (power[k] - state.noise_psd[k]) / static_cast<double>(t + 1);
    }
  } else {
    std::vector<double> alpha(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      alpha[k] = power[k] <= kSpeechPowerRatio * state.noise_psd[k] ? state.config.alpha_noise
                                                                     : state.config.alpha_speech;
    }
    recursive_noise_update(state.noise_psd, power, alpha);
    for (std::size_t k = 0; k < bins; ++k) {
      state.noise_psd[k] = std::max(state.noise_psd[k], floor[k]);
    }
  }
  ++state.frames_seen;
}

std::vector<double> a_posteriori_snr(std::span<const double> power,
                                     std::span<const double> noise_psd) {
  if (power.size() != noise_psd.size()) throw UsageError("power and noise sizes differ");
  std::vector<double> gamma(power.size());
  for (std::size_t k = 0; k < power.size(); ++k) {
    gamma[k] = power[k] / std::max(noise_psd[k], kPowerFloor);
  }
  return gamma;
}

std::vector<double> decision_directed_xi(const SuppressorState& state,
                                         std::span<const double> gamma) {
  const std::size_t bins = state.prev_gain.size();
  if (gamma.size() != bins) throw UsageError("gamma size does not match suppressor");
  const double a = state.config.alpha_dd;
  std::vector<double> xi(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double g = state.prev_gain[k];
    const double recursive_gamma = state.config.dd_previous_gamma ? state.prev_gamma[k] : gamma[k];
    xi[k] = a * g * g * recursive_gamma + (1.0 - a) * std::max(gamma[k] - 1.0, 0.0);
  }
  return xi;
}

double wiener_gain(double xi, double min_gain) {
  if (!(xi >= 0.0)) throw UsageError("a priori SNR must be non-negative");
  return std::max(xi / (xi + 1.0), min_gain);
}

std::vector<double> wiener_gain(std::span<const double> xi, double min_gain) {
  std::vector<double> g(xi.size());
  std::transform(xi.begin(), xi.end(), g.begin(),
                 [min_gain](double v) { return wiener_gain(v, min_gain); });
  return g;
}

SuppressionResult suppress_frame(SuppressorState& state, const ComplexSpectrum& spec) {
  if (spec.size() != state.noise_psd.size()) {
    throw UsageError(fmt::format("spectrum has {} bins, suppressor expects {}", spec.size(),
                                 state.noise_psd.size()));
  }
  const std::vector<double> power = spec.power();
  update_noise_psd(state, power);
  const std::vector<double> gamma = a_posteriori_snr(power, state.noise_psd);
  const std::vector<double> xi = decision_directed_xi(state, gamma);

  SuppressionResult result;
  result.gains = wiener_gain(xi, state.config.min_gain());
  result.enhanced = spec;
  for (std::size_t k = 0; k < spec.size(); ++k) result.enhanced[k] *= result.gains[k];
  state.prev_gain = result.gains;
  state.prev_gamma = gamma;
  return result;
}

}  // namespace sepipe
