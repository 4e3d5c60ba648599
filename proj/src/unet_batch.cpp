// SPDX-License-Identifier: Apache-2.0
//
// Sequence-level U-Net evaluation over whole (channel x time x freq) tensors.
// Independent of the streaming column kernels; used to cross-check them and
// for offline throughput.
#include <algorithm>
#include <cmath>

#include "sepipe/errors.h"
#include "sepipe/unet.h"

namespace sepipe {
namespace {

constexpr std::ptrdiff_t kK = static_cast<std::ptrdiff_t>(kernels::kKernel);
constexpr std::ptrdiff_t kPad = static_cast<std::ptrdiff_t>(kernels::kFreqPad);

struct Volume {
  std::size_t ch = 0, time = 0, freq = 0;
  std::vector<float> data;

  Volume(std::size_t c, std::size_t t, std::size_t f) : ch(c), time(t), freq(f), data(c * t * f) {}
  float& at(std::size_t c, std::size_t t, std::size_t f) { return data[(c * time + t) * freq + f]; }
  float at(std::size_t c, std::size_t t, std::size_t f) const {
    return data[(c * time + t) * freq + f];
  }
  // Zero outside the causal/frequency support.
  float padded(std::size_t c, std::ptrdiff_t t, std::ptrdiff_t f) const {
    if (t < 0 || f < 0 || f >= static_cast<std::ptrdiff_t>(freq)) return 0.0f;
    return at(c, static_cast<std::size_t>(t), static_cast<std::size_t>(f));
  }
};

class BatchRunner {
 public:
  BatchRunner(const UnetModel::Weights& w, bool parallel) : w_(w), parallel_(parallel) {}

  // Full conv (depthwise when `depthwise`), causal in time.
  Volume conv(std::size_t layer, const Volume& in, bool depthwise) const {
    const LayerSpec& l = w_.arch.layers[layer];
    const auto& wt = w_.weight[layer];
    Volume out(l.out_ch, in.time, in.freq);
    const auto n_out = static_cast<std::ptrdiff_t>(l.out_ch);
#pragma omp parallel for schedule(static) if (parallel_)
    for (std::ptrdiff_t o = 0; o < n_out; ++o) {
      for (std::size_t t = 0; t < in.time; ++t) {
        for (std::size_t f = 0; f < in.freq; ++f) {
          float acc = 0.0f;
          const std::size_t i_lo = depthwise ? static_cast<std::size_t>(o) : 0;
          const std::size_t i_hi = depthwise ? i_lo + 1 : l.in_ch;
          for (std::size_t i = i_lo; i < i_hi; ++i) {
            const float* k = depthwise ? wt.data() + i * kK * kK
                                       : wt.data() + (static_cast<std::size_t>(o) * l.in_ch + i) * kK * kK;
            for (std::ptrdiff_t dt = 0; dt < kK; ++dt) {
              for (std::ptrdiff_t df = 0; df < kK; ++df) {
                acc += k[dt * kK + df] *
                       in.padded(i, static_cast<std::ptrdiff_t>(t) - (kK - 1) + dt,
                                 static_cast<std::ptrdiff_t>(f) - kPad + df);
              }
            }
          }
          out.at(static_cast<std::size_t>(o), t, f) = acc + w_.bias[layer][o];
        }
      }
    }
    return out;
  }

  Volume pointwise(std::size_t layer, const Volume& in) const {
    const LayerSpec& l = w_.arch.layers[layer];
    const auto& wt = w_.weight[layer];
    Volume out(l.out_ch, in.time, in.freq);
    const auto n_out = static_cast<std::ptrdiff_t>(l.out_ch);
#pragma omp parallel for schedule(static) if (parallel_)
    for (std::ptrdiff_t o = 0; o < n_out; ++o) {
      for (std::size_t t = 0; t < in.time; ++t) {
        for (std::size_t f = 0; f < in.freq; ++f) {
          float acc = 0.0f;
          for (std::size_t i = 0; i < l.in_ch; ++i) acc += wt[o * l.in_ch + i] * in.at(i, t, f);
          out.at(static_cast<std::size_t>(o), t, f) = acc + w_.bias[layer][o];
        }
      }
    }
    return out;
  }

  Volume separable(std::size_t dw_layer, const Volume& in) const {
    return relu(pointwise(dw_layer + 1, conv(dw_layer, in, true)));
  }

  Volume upsample(std::size_t layer, const Volume& in, std::size_t keep) const {
    const LayerSpec& l = w_.arch.layers[layer];
    const auto& wt = w_.weight[layer];
    Volume out(l.out_ch, in.time, keep);
    for (std::size_t o = 0; o < l.out_ch; ++o) {
      for (std::size_t t = 0; t < in.time; ++t) {
        for (std::size_t f = 0; f < keep; ++f) {
          const std::size_t src = f / 2, tap = f % 2;
          float acc = 0.0f;
          for (std::size_t i = 0; i < l.in_ch; ++i) acc += in.at(i, t, src) * wt[(i * l.out_ch + o) * 2 + tap];
          out.at(o, t, f) = acc + w_.bias[layer][o];
        }
      }
    }
    return out;
  }

  static Volume relu(Volume v) {
    for (float& x : v.data) x = x > 0.0f ? x : 0.0f;
    return v;
  }

  static Volume pool(const Volume& in) {
    Volume out(in.ch, in.time, (in.freq + 1) / 2);
    for (std::size_t c = 0; c < in.ch; ++c) {
      for (std::size_t t = 0; t < in.time; ++t) {
        for (std::size_t f = 0; f < out.freq; ++f) {
          float m = in.at(c, t, 2 * f);
          if (2 * f + 1 < in.freq) m = std::max(m, in.at(c, t, 2 * f + 1));
          out.at(c, t, f) = m;
        }
      }
    }
    return out;
  }

  static Volume concat(const Volume& a, const Volume& b) {
    Volume out(a.ch + b.ch, a.time, a.freq);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return out;
  }

 private:
  const UnetModel::Weights& w_;
  bool parallel_;
};

}  // namespace

std::vector<MaskFrame> UnetModel::run_batch(std::span<const FeatureFrame> frames) const {
  const std::size_t n = frames.size();
  Volume x(1, n, kFeatureCount);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      if (!std::isfinite(frames[t].values[f])) {
        throw UsageError("network input contains non-finite features");
      }
      x.at(0, t, f) = static_cast<float>(frames[t].values[f]);
    }
  }

  const BatchRunner run(*w_, policy_ == ExecPolicy::kParallel);
  // Layer order matches UnetArchitecture: 0 conv1, 1-2 down1 sep, 3-6 down2,
  // 7-10 bottleneck, 11 up1 upsample, 12-15 up1, 16 up2 upsample, 17-20 up2, 21 output.
  const Volume skip1 = run.separable(1, BatchRunner::relu(run.conv(0, x, false)));
  const Volume skip2 = run.separable(5, run.separable(3, BatchRunner::pool(skip1)));
  const Volume bottom = run.separable(9, run.separable(7, BatchRunner::pool(skip2)));
  const Volume up1 = run.separable(14, run.separable(12, BatchRunner::concat(
                                                          run.upsample(11, bottom, skip2.freq), skip2)));
  const Volume up2 = run.separable(19, run.separable(17, BatchRunner::concat(
                                                          run.upsample(16, up1, skip1.freq), skip1)));
  const Volume y = run.pointwise(21, up2);

  std::vector<MaskFrame> masks(n);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      masks[t].values[f] = 1.0f / (1.0f + std::exp(-y.at(0, t, f)));
    }
  }
  return masks;
}

}  // namespace sepipe
