// SPDX-License-Identifier: Apache-2.0
#include "sepipe/kernels.h"

#include <omp.h>

#include <algorithm>
#include <limits>

namespace sepipe::kernels {
namespace {

// One output column of a 5x5 correlation over (time, freq) for a single
// (input channel, kernel) pair, accumulated into acc. Frequency is zero
// padded by kFreqPad on both sides; time comes from the causal window.
inline void accumulate_5x5(const TimeWindow& in, std::size_t channel, std::size_t freq,
                           const float* k, float* acc) {
  for (std::size_t dt = 0; dt < kKernel; ++dt) {
    const float* row = in[dt] + channel * freq;
    for (std::size_t f = 0; f < freq; ++f) {
      float sum = acc[f];
      for (std::size_t df = 0; df < kKernel; ++df) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(f + df) -
                                   static_cast<std::ptrdiff_t>(kFreqPad);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(freq)) continue;
        sum += k[dt * kKernel + df] * row[src];
      }
      acc[f] = sum;
    }
  }
}

inline void conv_output_channel(const TimeWindow& in, std::size_t in_ch, std::size_t freq,
                                std::span<const float> w, std::span<const float> bias,
                                std::size_t o, std::span<float> out) {
  float* acc = out.data() + o * freq;
  std::fill(acc, acc + freq, bias[o]);
  for (std::size_t i = 0; i < in_ch; ++i) {
    accumulate_5x5(in, i, freq, w.data() + (o * in_ch + i) * kKernel * kKernel, acc);
  }
}

inline void depthwise_channel(const TimeWindow& in, std::size_t freq, std::span<const float> w,
                              std::span<const float> bias, std::size_t c, std::span<float> out) {
  float* acc = out.data() + c * freq;
  std::fill(acc, acc + freq, bias[c]);
  accumulate_5x5(in, c, freq, w.data() + c * kKernel * kKernel, acc);
}

inline void pointwise_channel(std::span<const float> in, std::size_t in_ch, std::size_t freq,
                              std::span<const float> w, std::span<const float> bias,
                              std::size_t o, std::span<float> out) {
  float* acc = out.data() + o * freq;
  std::fill(acc, acc + freq, bias[o]);
  for (std::size_t i = 0; i < in_ch; ++i) {
    const float wi = w[o * in_ch + i];
    const float* src = in.data() + i * freq;
    for (std::size_t f = 0; f < freq; ++f) acc[f] += wi * src[f];
  }
}

inline double fir_tap_sum(std::span<const double> x, std::span<const double> h, std::size_t n) {
  double acc = 0.0;
  if (h.empty()) return acc;
  const std::size_t kmax = std::min(h.size() - 1, n);
  for (std::size_t k = 0; k <= kmax; ++k) acc += h[k] * x[n - k];
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------
// Serial reference
// ---------------------------------------------------------------------------
namespace serial {

void gemv_acc(std::span<const float> x, std::span<const float> w, std::span<float> y) {
  const std::size_t out = y.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float xi = x[i];
    const float* row = w.data() + i * out;
    for (std::size_t o = 0; o < out; ++o) y[o] += xi * row[o];
  }
}

void conv5x5_column(const TimeWindow& in, std::size_t in_ch, std::size_t freq,
                    std::span<const float> w, std::span<const float> bias, std::size_t out_ch,
                    std::span<float> out) {
  for (std::size_t o = 0; o < out_ch; ++o) conv_output_channel(in, in_ch, freq, w, bias, o, out);
}

void depthwise5x5_column(const TimeWindow& in, std::size_t ch, std::size_t freq,
                         std::span<const float> w, std::span<const float> bias,
                         std::span<float> out) {
  for (std::size_t c = 0; c < ch; ++c) depthwise_channel(in, freq, w, bias, c, out);
}

void pointwise_column(std::span<const float> in, std::size_t in_ch, std::size_t freq,
                      std::span<const float> w, std::span<const float> bias, std::size_t out_ch,
                      std::span<float> out) {
  for (std::size_t o = 0; o < out_ch; ++o) pointwise_channel(in, in_ch, freq, w, bias, o, out);
}

void column_min(std::span<const double> ring, std::size_t rows, std::size_t bins,
                std::span<double> out) {
  for (std::size_t k = 0; k < bins; ++k) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows; ++r) m = std::min(m, ring[r * bins + k]);
    out[k] = m;
  }
}

void fir_filter(std::span<const double> x, std::span<const double> h, std::span<double> out) {
  for (std::size_t n = 0; n < x.size(); ++n) out[n] = fir_tap_sum(x, h, n);
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP
// ---------------------------------------------------------------------------
namespace parallel {

void gemv_acc(std::span<const float> x, std::span<const float> w, std::span<float> y) {
  const auto out = static_cast<std::ptrdiff_t>(y.size());
  const std::size_t in = x.size();
  constexpr std::ptrdiff_t kChunk = 16;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t lo = 0; lo < out; lo += kChunk) {
    const std::ptrdiff_t hi = std::min(out, lo + kChunk);
    for (std::size_t i = 0; i < in; ++i) {
      const float xi = x[i];
      const float* row = w.data() + i * static_cast<std::size_t>(out);
      for (std::ptrdiff_t o = lo; o < hi; ++o) y[o] += xi * row[o];
    }
  }
}

void conv5x5_column(const TimeWindow& in, std::size_t in_ch, std::size_t freq,
                    std::span<const float> w, std::span<const float> bias, std::size_t out_ch,
                    std::span<float> out) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(out_ch); ++o) {
    conv_output_channel(in, in_ch, freq, w, bias, static_cast<std::size_t>(o), out);
  }
}

void depthwise5x5_column(const TimeWindow& in, std::size_t ch, std::size_t freq,
                         std::span<const float> w, std::span<const float> bias,
                         std::span<float> out) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(ch); ++c) {
    depthwise_channel(in, freq, w, bias, static_cast<std::size_t>(c), out);
  }
}

void pointwise_column(std::span<const float> in, std::size_t in_ch, std::size_t freq,
                      std::span<const float> w, std::span<const float> bias, std::size_t out_ch,
                      std::span<float> out) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(out_ch); ++o) {
    pointwise_channel(in, in_ch, freq, w, bias, static_cast<std::size_t>(o), out);
  }
}

void column_min(std::span<const double> ring, std::size_t rows, std::size_t bins,
                std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(bins); ++k) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows; ++r) m = std::min(m, ring[r * bins + k]);
    out[k] = m;
  }
}

void fir_filter(std::span<const double> x, std::span<const double> h, std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(x.size()); ++n) {
    out[n] = fir_tap_sum(x, h, static_cast<std::size_t>(n));
  }
}

}  // namespace parallel
}  // namespace sepipe::kernels
