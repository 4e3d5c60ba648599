// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "sepipe/errors.h"
#include "sepipe/fft.h"
#include "sepipe/metrics.h"
#include "sepipe/resample.h"

namespace sepipe {
namespace {

using namespace stoi_params;

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Hann of length kFrame + 2 without its zero end points.
const std::vector<double>& frame_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kFrame);
    for (std::size_t i = 0; i < kFrame; ++i) {
      v[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) /
                                  static_cast<double>(kFrame + 1));
    }
    return v;
  }();
  return w;
}

// Frame starts 0, hop, ... strictly below size - kFrame.
std::size_t frame_count(std::size_t size) {
  return size > kFrame ? (size - kFrame + kHop - 1) / kHop : 0;
}

double windowed_norm(std::span<const double> x) {
  const auto& w = frame_window();
  double e = 0.0;
  for (std::size_t i = 0; i < kFrame; ++i) e += (w[i] * x[i]) * (w[i] * x[i]);
  return std::sqrt(e);
}

// Band envelopes, [band][frame].
std::vector<std::vector<double>> band_envelopes(std::span<const double> x,
                                                const ThirdOctaveBands& bands) {
  const auto& w = frame_window();
  const std::size_t frames = frame_count(x.size());
  RealFft& fft = thread_fft(kFft);
  std::vector<double> buf(kFft);
  std::vector<std::complex<double>> spec(fft.bins());
  std::vector<std::vector<double>> env(kBands, std::vector<double>(frames));
  for (std::size_t m = 0; m < frames; ++m) {
    std::fill(buf.begin(), buf.end(), 0.0);
    for (std::size_t i = 0; i < kFrame; ++i) buf[i] = w[i] * x[m * kHop + i];
    fft.forward(buf, spec);
    for (std::size_t j = 0; j < kBands; ++j) {
      double e = 0.0;
      for (std::size_t k = bands.lo[j]; k < bands.hi[j]; ++k) e += std::norm(spec[k]);
      env[j][m] = std::sqrt(e);
    }
  }
  return env;
}

double norm2(std::span<const double> v) {
  double e = 0.0;
  for (double a : v) e += a * a;
  return std::sqrt(e);
}

}  // namespace

ThirdOctaveBands third_octave_bands() {
  const std::size_t bins = kFft / 2 + 1;
  const double df = static_cast<double>(kSampleRate) / kFft;
  // Nearest bin to each edge frequency, first bin on ties.
  auto nearest = [&](double f) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < bins; ++k) {
      const double d = (k * df - f) * (k * df - f);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };
  ThirdOctaveBands b;
  for (std::size_t j = 0; j < kBands; ++j) {
    const double k = static_cast<double>(j);
    b.lo[j] = nearest(kMinFreq * std::pow(2.0, (2.0 * k - 1.0) / 6.0));
    b.hi[j] = nearest(kMinFreq * std::pow(2.0, (2.0 * k + 1.0) / 6.0));
  }
  return b;
}

std::pair<std::vector<double>, std::vector<double>> remove_silent_frames(
    std::span<const double> reference, std::span<const double> estimate) {
  const auto& w = frame_window();
  const std::size_t frames = frame_count(reference.size());
  std::vector<double> energy_db(frames);
  for (std::size_t m = 0; m < frames; ++m) {
    energy_db[m] = 20.0 * std::log10(windowed_norm(reference.subspan(m * kHop, kFrame)) + kEps);
  }
  const double peak = frames ? *std::max_element(energy_db.begin(), energy_db.end()) : 0.0;

  std::vector<std::size_t> keep;
  for (std::size_t m = 0; m < frames; ++m) {
    if (peak - kDynamicRangeDb - energy_db[m] < 0.0) keep.push_back(m);
  }
  const std::size_t out_len = keep.empty() ? 0 : (keep.size() - 1) * kHop + kFrame;
  std::vector<double> x(out_len), y(out_len);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const std::size_t src = keep[i] * kHop;
    for (std::size_t n = 0; n < kFrame; ++n) {
      x[i * kHop + n] += w[n] * reference[src + n];
      y[i * kHop + n] += w[n] * estimate[src + n];
    }
  }
  return {std::move(x), std::move(y)};
}

double stoi(const AudioBuffer& reference, const AudioBuffer& estimate) {
  if (reference.sample_rate != estimate.sample_rate) {
    throw UsageError(fmt::format("STOI inputs differ in rate: {} vs {} Hz", reference.sample_rate,
                                 estimate.sample_rate));
  }
  if (reference.size() != estimate.size()) {
    throw UsageError(fmt::format("STOI inputs differ in length: {} vs {}", reference.size(),
                                 estimate.size()));
  }
  if (reference.duration_s() < 1.0) {
    throw UsageError(fmt::format("STOI needs at least 1 s of audio, got {:.3f} s",
                                 reference.duration_s()));
  }
  require_finite(reference.samples, "STOI reference");
  require_finite(estimate.samples, "STOI estimate");

  const auto x10 = resample_rational(reference.samples, kSampleRate, reference.sample_rate);
  const auto y10 = resample_rational(estimate.samples, kSampleRate, estimate.sample_rate);
  const auto [x, y] = remove_silent_frames(x10, y10);

  const auto bands = third_octave_bands();
  const auto xe = band_envelopes(x, bands);
  const auto ye = band_envelopes(y, bands);
  const std::size_t frames = xe[0].size();
  if (frames < kSegment) {
    throw UsageError(fmt::format("STOI needs {} active frames, found {}", kSegment, frames));
  }

  const double clip = 1.0 + std::pow(10.0, -kClipDb / 20.0);
  const std::size_t segments = frames - kSegment + 1;
  std::vector<double> xs(kSegment), ys(kSegment);
  double total = 0.0;
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t j = 0; j < kBands; ++j) {
      std::copy_n(xe[j].begin() + static_cast<std::ptrdiff_t>(s), kSegment, xs.begin());
      std::copy_n(ye[j].begin() + static_cast<std::ptrdiff_t>(s), kSegment, ys.begin());
      const double scale = norm2(xs) / (norm2(ys) + kEps);
      double mx = 0.0, my = 0.0;
      for (std::size_t n = 0; n < kSegment; ++n) {
        ys[n] = std::min(ys[n] * scale, xs[n] * clip);
        mx += xs[n];
        my += ys[n];
      }
      mx /= kSegment;
      my /= kSegment;
      for (std::size_t n = 0; n < kSegment; ++n) {
        xs[n] -= mx;
        ys[n] -= my;
      }
      const double nx = norm2(xs) + kEps;
      const double ny = norm2(ys) + kEps;
      double corr = 0.0;
      for (std::size_t n = 0; n < kSegment; ++n) corr += (ys[n] / ny) * (xs[n] / nx);
      total += corr;
    }
  }
  return total / static_cast<double>(segments * kBands);
}

}  // namespace sepipe
