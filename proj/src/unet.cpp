// SPDX-License-Identifier: Apache-2.0
#include "sepipe/unet.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "sepipe/errors.h"

namespace sepipe {
namespace {

constexpr std::size_t kTaps = kernels::kKernel * kernels::kKernel;
constexpr std::size_t kUpsampleTaps = 2;

// Layer indices into UnetArchitecture::layers.
enum Layer : std::size_t {
  kDown1Conv1, kDown1Dw, kDown1Pw,
  kDown2Dw1, kDown2Pw1, kDown2Dw2, kDown2Pw2,
  kBottleDw1, kBottlePw1, kBottleDw2, kBottlePw2,
  kUp1Upsample, kUp1Dw1, kUp1Pw1, kUp1Dw2, kUp1Pw2,
  kUp2Upsample, kUp2Dw1, kUp2Pw1, kUp2Dw2, kUp2Pw2,
  kOutput, kLayerCount
};

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

void relu(std::span<float> x) {
  for (float& v : x) v = std::max(v, 0.0f);
}

// Max over frequency pairs; an odd trailing bin pools alone.
std::vector<float> maxpool_freq(std::span<const float> in, std::size_t ch, std::size_t freq) {
  const std::size_t out_f = (freq + 1) / 2;
  std::vector<float> out(ch * out_f);
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t f = 0; f < out_f; ++f) {
      const float a = in[c * freq + 2 * f];
      out[c * out_f + f] = 2 * f + 1 < freq ? std::max(a, in[c * freq + 2 * f + 1]) : a;
    }
  }
  return out;
}

}  // namespace

std::size_t LayerSpec::param_count() const {
  switch (kind) {
    case LayerKind::kFullConv: return out_ch * in_ch * kTaps + out_ch;
    case LayerKind::kDepthwise: return in_ch * kTaps + in_ch;
    case LayerKind::kPointwise: return out_ch * in_ch + out_ch;
    case LayerKind::kUpsample: return in_ch * out_ch * kUpsampleTaps + out_ch;
  }
  return 0;
}

std::size_t LayerSpec::macs_per_frame() const {
  switch (kind) {
    case LayerKind::kFullConv: return kTaps * in_ch * out_ch * freq;
    case LayerKind::kDepthwise: return kTaps * in_ch * freq;
    case LayerKind::kPointwise: return in_ch * out_ch * freq;
    // Each upsampled bin receives exactly one kernel tap per input channel.
    case LayerKind::kUpsample: return in_ch * out_ch * freq;
  }
  return 0;
}

std::vector<std::uint32_t> LayerSpec::weight_dims() const {
  auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
  switch (kind) {
    case LayerKind::kFullConv: return {u(out_ch), u(in_ch), 5, 5};
    case LayerKind::kDepthwise: return {u(in_ch), 5, 5};
    case LayerKind::kPointwise: return {u(out_ch), u(in_ch)};
    case LayerKind::kUpsample: return {u(in_ch), u(out_ch), u(kUpsampleTaps)};
  }
  return {};
}

UnetArchitecture::UnetArchitecture(std::size_t c) : channels(c) {
  const std::size_t f0 = kFeatureCount, f1 = (f0 + 1) / 2, f2 = (f1 + 1) / 2;
  auto sep = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t f) {
    layers.push_back({name + ".dw", LayerKind::kDepthwise, in, in, f});
    layers.push_back({name + ".pw", LayerKind::kPointwise, in, out, f});
  };
  layers.push_back({"down1.conv1", LayerKind::kFullConv, 1, c, f0});
  sep("down1.conv2", c, c, f0);
  sep("down2.conv1", c, 2 * c, f1);
  sep("down2.conv2", 2 * c, 2 * c, f1);
  sep("bottleneck.conv1", 2 * c, 4 * c, f2);
  sep("bottleneck.conv2", 4 * c, 4 * c, f2);
  layers.push_back({"up1.upsample", LayerKind::kUpsample, 4 * c, 2 * c, 2 * f2});
  sep("up1.conv1", 4 * c, 2 * c, f1);
  sep("up1.conv2", 2 * c, 2 * c, f1);
  layers.push_back({"up2.upsample", LayerKind::kUpsample, 2 * c, c, 2 * f1});
  sep("up2.conv1", 2 * c, c, f0);
  sep("up2.conv2", c, c, f0);
  layers.push_back({"output", LayerKind::kPointwise, c, 1, f0});
}

const UnetArchitecture& UnetArchitecture::standard() {
  static const UnetArchitecture arch(16);
  return arch;
}

std::vector<TensorSpec> UnetArchitecture::tensor_schema() const {
  std::vector<TensorSpec> s;
  for (const LayerSpec& l : layers) {
    s.push_back({l.name + ".weight", l.weight_dims()});
    s.push_back({l.name + ".bias", {static_cast<std::uint32_t>(l.out_ch)}});
  }
  return s;
}

std::size_t UnetArchitecture::param_count() const {
  std::size_t n = 0;
  for (const LayerSpec& l : layers) n += l.param_count();
  return n;
}

std::size_t UnetArchitecture::macs_per_frame() const {
  std::size_t n = 0;
  for (const LayerSpec& l : layers) n += l.macs_per_frame();
  return n;
}

UnetModel::ColumnHistory::ColumnHistory(std::size_t width) {
  for (auto& c : cols_) c.assign(width, 0.0f);
}

kernels::TimeWindow UnetModel::ColumnHistory::window(const float* current) const {
  kernels::TimeWindow w{};
  for (std::size_t i = 0; i < cols_.size(); ++i) w[i] = cols_[(head_ + i) % cols_.size()].data();
  w[cols_.size()] = current;
  return w;
}

void UnetModel::ColumnHistory::push(std::span<const float> current) {
  std::copy(current.begin(), current.end(), cols_[head_].begin());
  head_ = (head_ + 1) % cols_.size();
}

void UnetModel::ColumnHistory::clear() {
  for (auto& c : cols_) std::fill(c.begin(), c.end(), 0.0f);
  head_ = 0;
}

UnetModel::UnetModel(std::shared_ptr<const Weights> w) : w_(std::move(w)) {
  for (const LayerSpec& l : w_->arch.layers) {
    const bool timed = l.kind == LayerKind::kFullConv || l.kind == LayerKind::kDepthwise;
    history_.emplace_back(timed ? l.in_ch * l.freq : 0);
  }
}

UnetModel UnetModel::from_weights(const WeightFile& file) {
  if (file.kind != ModelKind::kUnet) throw SchemaError("weight file does not hold a U-Net model");
  validate_schema(file);
  auto w = std::make_shared<Weights>();
  for (const LayerSpec& l : w->arch.layers) {
    w->weight.push_back(file.at(l.name + ".weight").data);
    w->bias.push_back(file.at(l.name + ".bias").data);
  }
  if (w->arch.layers.size() != kLayerCount) throw SchemaError("unexpected U-Net layer count");
  return UnetModel(std::move(w));
}

void UnetModel::reset() {
  for (auto& h : history_) h.clear();
}

std::vector<float> UnetModel::time_conv(std::size_t layer, std::span<const float> in) {
  const LayerSpec& l = w_->arch.layers[layer];
  std::vector<float> out(l.out_ch * l.freq);
  const auto window = history_[layer].window(in.data());
  if (l.kind == LayerKind::kFullConv) {
    kernels::conv5x5_column(policy_, window, l.in_ch, l.freq, w_->weight[layer], w_->bias[layer],
                            l.out_ch, out);
  } else {
    kernels::depthwise5x5_column(policy_, window, l.in_ch, l.freq, w_->weight[layer],
                                 w_->bias[layer], out);
  }
  history_[layer].push(in);
  return out;
}

std::vector<float> UnetModel::separable(std::size_t dw_layer, std::span<const float> in) {
  const std::vector<float> mid = time_conv(dw_layer, in);
  const LayerSpec& pw = w_->arch.layers[dw_layer + 1];
  std::vector<float> out(pw.out_ch * pw.freq);
  kernels::pointwise_column(policy_, mid, pw.in_ch, pw.freq, w_->weight[dw_layer + 1],
                            w_->bias[dw_layer + 1], pw.out_ch, out);
  relu(out);
  return out;
}

std::vector<float> UnetModel::upsample(std::size_t layer, std::span<const float> in) const {
  const LayerSpec& l = w_->arch.layers[layer];
  const std::size_t in_f = l.freq / 2;
  const auto& w = w_->weight[layer];
  std::vector<float> out(l.out_ch * l.freq);
  for (std::size_t o = 0; o < l.out_ch; ++o) {
    for (std::size_t f = 0; f < in_f; ++f) {
      for (std::size_t k = 0; k < kUpsampleTaps; ++k) {
        float acc = w_->bias[layer][o];
        for (std::size_t i = 0; i < l.in_ch; ++i) {
          acc += in[i * in_f + f] * w[(i * l.out_ch + o) * kUpsampleTaps + k];
        }
        out[o * l.freq + 2 * f + k] = acc;
      }
    }
  }
  return out;
}

MaskFrame UnetModel::step(const FeatureFrame& features) {
  const auto& layers = w_->arch.layers;
  std::vector<float> x(kFeatureCount);
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    if (!std::isfinite(features.values[f])) {
      throw UsageError("network input contains non-finite features");
    }
    x[f] = static_cast<float>(features.values[f]);
  }

  // Channel-major [ch][freq] concat: upsampled path first, then the skip.
  auto concat = [](std::vector<float> a, std::span<const float> b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  // Keep the first `freq` bins of every channel.
  auto crop = [](std::span<const float> in, std::size_t ch, std::size_t from, std::size_t to) {
    std::vector<float> out(ch * to);
    for (std::size_t c = 0; c < ch; ++c) {
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(c * from), to,
                  out.begin() + static_cast<std::ptrdiff_t>(c * to));
    }
    return out;
  };

  std::vector<float> a = time_conv(kDown1Conv1, x);
  relu(a);
  const std::vector<float> skip1 = separable(kDown1Dw, a);
  const std::size_t c = w_->arch.channels;
  const std::size_t f0 = layers[kDown1Pw].freq, f1 = layers[kDown2Pw1].freq;

  std::vector<float> b = separable(kDown2Dw1, maxpool_freq(skip1, c, f0));
  const std::vector<float> skip2 = separable(kDown2Dw2, b);

  std::vector<float> d = separable(kBottleDw1, maxpool_freq(skip2, 2 * c, f1));
  d = separable(kBottleDw2, d);

  std::vector<float> u = upsample(kUp1Upsample, d);
  u = crop(u, 2 * c, layers[kUp1Upsample].freq, f1);
  std::vector<float> e = separable(kUp1Dw1, concat(std::move(u), skip2));
  e = separable(kUp1Dw2, e);

  std::vector<float> g = separable(kUp2Dw1, concat(upsample(kUp2Upsample, e), skip1));
  g = separable(kUp2Dw2, g);

  const LayerSpec& out_layer = layers[kOutput];
  std::vector<float> y(out_layer.out_ch * out_layer.freq);
  kernels::pointwise_column(policy_, g, out_layer.in_ch, out_layer.freq, w_->weight[kOutput],
                            w_->bias[kOutput], out_layer.out_ch, y);
  MaskFrame mask;
  for (std::size_t f = 0; f < kFeatureCount; ++f) mask.values[f] = sigmoid(y[f]);
  return mask;
}

}  // namespace sepipe
