// SPDX-License-Identifier: Apache-2.0
#include "sepipe/frames.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sepipe/errors.h"
#include "sepipe/fft.h"

namespace sepipe {
namespace {

constexpr double kColaTolerance = 1e-10;

std::size_t whole_samples(int rate, double ms, const char* what) {
  const double exact = rate * ms / 1000.0;
  const double rounded = std::round(exact);
  if (!(rounded >= 1.0) || std::abs(exact - rounded) > 1e-9) {
    throw ConfigError(fmt::format("{} of {} ms is not a whole number of samples at {} Hz",
                                  what, ms, rate));
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

std::vector<double> ComplexSpectrum::power() const {
  std::vector<double> p(bins.size());
  std::transform(bins.begin(), bins.end(), p.begin(), [](auto c) { return std::norm(c); });
  return p;
}

std::vector<double> ComplexSpectrum::magnitude() const {
  std::vector<double> m(bins.size());
  std::transform(bins.begin(), bins.end(), m.begin(), [](auto c) { return std::abs(c); });
  return m;
}

WindowPair design_windows(const FrameConfig& config) {
  if (config.sample_rate <= 0) throw ConfigError("sample rate must be positive");
  const std::size_t la = whole_samples(config.sample_rate, config.analysis_ms, "analysis window");
  const std::size_t ls =
      whole_samples(config.sample_rate, config.synthesis_ms, "synthesis window");
  const std::size_t hop = whole_samples(config.sample_rate, config.hop_ms, "hop");
  if (la < ls) {
    throw ConfigError(fmt::format("analysis window ({} samples) shorter than synthesis window ({})",
                                  la, ls));
  }
  if (2 * hop != ls) {
    throw ConfigError(fmt::format(
        "hop ({} samples) must split the synthesis window ({}) into two equal halves", hop, ls));
  }
  if (config.fft_len % 2 != 0 || la > config.fft_len) {
    throw ConfigError(fmt::format("FFT length {} must be even and hold the {}-sample analysis window",
                                  config.fft_len, la));
  }

  constexpr double pi = std::numbers::pi;
  WindowPair wp;
  wp.hop = hop;
  wp.fft_len = config.fft_len;
  wp.analysis.resize(la);
  const std::size_t rise = la - hop;
  for (std::size_t n = 0; n < la; ++n) {
    wp.analysis[n] = n < rise ? std::sin(pi * static_cast<double>(n) / (2.0 * rise))
                              : std::sin(pi * static_cast<double>(n - rise + hop) / (2.0 * hop));
  }
  wp.synthesis.resize(ls);
  const std::size_t offset = la - ls;
  for (std::size_t m = 0; m < ls; ++m) {
    const double s = std::sin(pi * static_cast<double>(m) / static_cast<double>(ls));
    const double a = wp.analysis[offset + m];
    wp.synthesis[m] = a > 0.0 ? s * s / a : 0.0;
  }

  const double residual = cola_residual(wp);
  if (!(residual < kColaTolerance)) {
    throw ConfigError(fmt::format("window pair violates COLA (residual {:.3g})", residual));
  }
  return wp;
}

double cola_residual(const WindowPair& wp) {
  const std::size_t ls = wp.synthesis.size();
  const std::size_t offset = wp.analysis.size() - ls;
  double worst = 0.0;
  for (std::size_t n = 0; n < wp.hop; ++n) {
    double sum = 0.0;
    for (std::size_t m = n; m < ls; m += wp.hop) sum += wp.analysis[offset + m] * wp.synthesis[m];
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

ComplexSpectrum analyze(std::span<const double> frame, const WindowPair& wp) {
  if (frame.size() != wp.analysis.size()) {
    throw UsageError(fmt::format("analysis frame has {} samples, expected {}", frame.size(),
                                 wp.analysis.size()));
  }
  std::vector<double> buffer(wp.fft_len, 0.0);
  const std::size_t pad = wp.fft_len - frame.size();
  for (std::size_t i = 0; i < frame.size(); ++i) buffer[pad + i] = frame[i] * wp.analysis[i];
  ComplexSpectrum spec(wp.bins());
  thread_fft(wp.fft_len).forward(buffer, spec.bins);
  spec[0] = {spec[0].real(), 0.0};
  spec[wp.bins() - 1] = {spec[wp.bins() - 1].real(), 0.0};
  return spec;
}

OlaState::OlaState(const WindowPair& wp) : overlap(wp.synthesis.size() - wp.hop, 0.0) {}

std::vector<double> synthesize(const ComplexSpectrum& spec, const WindowPair& wp,
                               OlaState& state) {
  if (spec.size() != wp.bins()) {
    throw UsageError(fmt::format("spectrum has {} bins, expected {}", spec.size(), wp.bins()));
  }
  const std::size_t ls = wp.synthesis.size();
  if (state.overlap.size() != ls - wp.hop) throw UsageError("OLA state does not match windows");

  std::vector<double> frame(wp.fft_len);
  thread_fft(wp.fft_len).inverse(spec.bins, frame);
  const std::size_t start = wp.fft_len - ls;
  std::vector<double> out(wp.hop);
  for (std::size_t m = 0; m < wp.hop; ++m) {
    out[m] = state.overlap[m] + frame[start + m] * wp.synthesis[m];
  }
  for (std::size_t m = 0; m < state.overlap.size(); ++m) {
    const std::size_t j = m + wp.hop;
    state.overlap[m] = frame[start + j] * wp.synthesis[j] +
                       (j < state.overlap.size() ? state.overlap[j] : 0.0);
  }
  ++state.frames_emitted;
  return out;
}

std::size_t latency_samples(const WindowPair& wp) { return wp.synthesis.size(); }

FrameStream::FrameStream(WindowPair wp)
    : wp_(std::move(wp)),
      history_(wp_.analysis.size(), 0.0),
      ola_(wp_),
      playout_(wp_.hop, 0.0) {}

ComplexSpectrum FrameStream::analyze_next(std::span<const double> block) {
  if (block.size() != wp_.hop) {
    throw UsageError(fmt::format("stream block has {} samples, expected {}", block.size(), wp_.hop));
  }
  std::shift_left(history_.begin(), history_.end(), static_cast<std::ptrdiff_t>(wp_.hop));
  std::copy(block.begin(), block.end(), history_.end() - static_cast<std::ptrdiff_t>(wp_.hop));
  return analyze(history_, wp_);
}

std::vector<double> FrameStream::synthesize_next(const ComplexSpectrum& spec) {
  std::vector<double> finished = synthesize(spec, wp_, ola_);
  std::swap(finished, playout_);
  return finished;
}

void FrameStream::reset() {
  std::fill(history_.begin(), history_.end(), 0.0);
  ola_ = OlaState(wp_);
  std::fill(playout_.begin(), playout_.end(), 0.0);
}

}  // namespace sepipe
