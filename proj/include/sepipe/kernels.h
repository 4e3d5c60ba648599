// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel inner loops. Every kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::parallel. The parallel
// versions split work over output elements only and keep the per-element
// summation order of the reference, so both produce bit-identical results.
#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace sepipe {

enum class ExecPolicy { kSerial, kParallel };

namespace kernels {

/// Column of a (channels x freq) feature map, five time steps, oldest first.
using TimeWindow = std::array<const float*, 5>;

inline constexpr std::size_t kKernel = 5;
inline constexpr std::size_t kFreqPad = 2;

namespace serial {
// y[o] += sum_i x[i] * w[i * out + o]; w is row-major (in x out).
void gemv_acc(std::span<const float> x, std::span<const float> w, std::span<float> y);
// Full 5x5 conv producing one time column. w: [out][in][5][5]; maps are [ch][freq].
void conv5x5_column(const TimeWindow& in, std::size_t in_ch, std::size_t freq,
                    std::span<const float> w, std::span<const float> bias, std::size_t out_ch,
                    std::span<float> out);
// Depthwise 5x5 conv, one time column. w: [ch][5][5].
void depthwise5x5_column(const TimeWindow& in, std::size_t ch, std::size_t freq,
                         std::span<const float> w, std::span<const float> bias,
                         std::span<float> out);
// 1x1 conv. w: [out][in].
void pointwise_column(std::span<const float> in, std::size_t in_ch, std::size_t freq,
                      std::span<const float> w, std::span<const float> bias,
                      std::size_t out_ch, std::span<float> out);
// out[k] = min over rows of ring[row * bins + k].
void column_min(std::span<const double> ring, std::size_t rows, std::size_t bins,
                std::span<double> out);
// Linear convolution truncated to x.size().
void fir_filter(std::span<const double> x, std::span<const double> h, std::span<double> out);
}  // namespace serial

namespace parallel {
// y[o] += sum_i x[i] * w[i * out + o]; w is row-major (in x out).
void gemv_acc(std::span<const float> x, std::span<const float> w, std::span<float> y);
// Full 5x5 conv producing one time column. w: [out][in][5][5]; maps are [ch][freq].
void conv5x5_column(const TimeWindow& in, std::size_t in_ch, std::size_t freq,
                    std::span<const float> w, std::span<const float> bias, std::size_t out_ch,
                    std::span<float> out);
// Depthwise 5x5 conv, one time column. w: [ch][5][5].
void depthwise5x5_column(const TimeWindow& in, std::size_t ch, std::size_t freq,
                         std::span<const float> w, std::span<const float> bias,
                         std::span<float> out);
// 1x1 conv. w: [out][in].
void pointwise_column(std::span<const float> in, std::size_t in_ch, std::size_t freq,
                      std::span<const float> w, std::span<const float> bias,
                      std::size_t out_ch, std::span<float> out);
// out[k] = min over rows of ring[row * bins + k].
void column_min(std::span<const double> ring, std::size_t rows, std::size_t bins,
                std::span<double> out);
// Linear convolution truncated to x.size().
void fir_filter(std::span<const double> x, std::span<const double> h, std::span<double> out);
}  // namespace parallel

inline void gemv_acc(ExecPolicy p, std::span<const float> x, std::span<const float> w,
                     std::span<float> y) {
  p == ExecPolicy::kParallel ? parallel::gemv_acc(x, w, y) : serial::gemv_acc(x, w, y);
}

inline void conv5x5_column(ExecPolicy p, const TimeWindow& in, std::size_t in_ch,
                           std::size_t freq, std::span<const float> w,
                           std::span<const float> bias, std::size_t out_ch, std::span<float> out) {
  p == ExecPolicy::kParallel ? parallel::conv5x5_column(in, in_ch, freq, w, bias, out_ch, out)
                             : serial::conv5x5_column(in, in_ch, freq, w, bias, out_ch, out);
}

inline void depthwise5x5_column(ExecPolicy p, const TimeWindow& in, std::size_t ch,
                                std::size_t freq, std::span<const float> w,
                                std::span<const float> bias, std::span<float> out) {
  p == ExecPolicy::kParallel ? parallel::depthwise5x5_column(in, ch, freq, w, bias, out)
                             : serial::depthwise5x5_column(in, ch, freq, w, bias, out);
}

inline void pointwise_column(ExecPolicy p, std::span<const float> in, std::size_t in_ch,
                             std::size_t freq, std::span<const float> w,
                             std::span<const float> bias, std::size_t out_ch,
                             std::span<float> out) {
  p == ExecPolicy::kParallel ? parallel::pointwise_column(in, in_ch, freq, w, bias, out_ch, out)
                             : serial::pointwise_column(in, in_ch, freq, w, bias, out_ch, out);
}

inline void column_min(ExecPolicy p, std::span<const double> ring, std::size_t rows,
                       std::size_t bins, std::span<double> out) {
  p == ExecPolicy::kParallel ? parallel::column_min(ring, rows, bins, out)
                             : serial::column_min(ring, rows, bins, out);
}

inline void fir_filter(ExecPolicy p, std::span<const double> x, std::span<const double> h,
                       std::span<double> out) {
  p == ExecPolicy::kParallel ? parallel::fir_filter(x, h, out) : serial::fir_filter(x, h, out);
}

}  // namespace kernels
}  // namespace sepipe
