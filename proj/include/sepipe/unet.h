// SPDX-License-Identifier: Apache-2.0
//
// Causal U-Net over (time, frequency) feature maps, evaluated one frame at a
// time.
//
//   input  1 x 66
//   down1  conv5x5(1->C), sep(C->C)         @66, skip1, maxpool -> 33
//   down2  sep(C->2C), sep(2C->2C)          @33, skip2, maxpool -> 17
//   bottleneck sep(2C->4C), sep(4C->4C)     @17
//   up1    upsample(4C->2C) 17->34, crop 33, concat skip2, sep(4C->2C), sep(2C->2C)
//   up2    upsample(2C->C) 33->66, concat skip1, sep(2C->C), sep(C->C)
//   output pointwise(C->1), logistic
//
// sep = depthwise 5x5 then pointwise 1x1, ReLU after the pointwise; the first
// full conv is followed by ReLU too. Convolutions pad time causally (4 frames
// of left context) and frequency symmetrically (2 bins). Pooling and
// upsampling act on frequency only, so one input frame yields one output
// frame. Upsamplers are stride-2 transposed convolutions with a kernel of 2
// along frequency and no activation.
#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sepipe/bands.h"
#include "sepipe/kernels.h"
#include "sepipe/weights.h"

namespace sepipe {

enum class LayerKind { kFullConv, kDepthwise, kPointwise, kUpsample };

struct LayerSpec {
  std::string name;  // tensor prefix; weights are name + ".weight" / ".bias"
  LayerKind kind;
  std::size_t in_ch;
  std::size_t out_ch;
  std::size_t freq;  // output frequency extent computed by the layer

  std::size_t param_count() const;
  std::size_t macs_per_frame() const;
  std::vector<std::uint32_t> weight_dims() const;
};

struct UnetArchitecture {
  std::size_t channels = 16;  // C
  std::vector<LayerSpec> layers;

  explicit UnetArchitecture(std::size_t c);
  static const UnetArchitecture& standard();

  std::vector<TensorSpec> tensor_schema() const;
  std::size_t param_count() const;
  std::size_t macs_per_frame() const;
};

class UnetModel {
 public:
  static UnetModel from_weights(const WeightFile& file);

  /// Causal single-frame step; per-layer histories start as zeros.
  MaskFrame step(const FeatureFrame& features);
  void reset();

  /// Whole-sequence evaluation on (channel x time x freq) tensors with zero
  /// left padding. Does not touch this model's stream state.
  std::vector<MaskFrame> run_batch(std::span<const FeatureFrame> frames) const;

  void set_policy(ExecPolicy policy) { policy_ = policy; }
  static std::size_t param_count() { return UnetArchitecture::standard().param_count(); }
  static std::size_t macs_per_frame() { return UnetArchitecture::standard().macs_per_frame(); }

  struct Weights;

 private:
  // Last four input columns of a time-convolution layer, oldest at head_.
  class ColumnHistory {
   public:
    explicit ColumnHistory(std::size_t width);
    kernels::TimeWindow window(const float* current) const;
    void push(std::span<const float> current);
    void clear();

   private:
    std::array<std::vector<float>, kernels::kKernel - 1> cols_;
    std::size_t head_ = 0;
  };

  explicit UnetModel(std::shared_ptr<const Weights> w);

  std::vector<float> time_conv(std::size_t layer, std::span<const float> in);
  std::vector<float> separable(std::size_t dw_layer, std::span<const float> in);
  std::vector<float> upsample(std::size_t layer, std::span<const float> in) const;

  std::shared_ptr<const Weights> w_;
  std::vector<ColumnHistory> history_;  // indexed by layer; unused for stateless layers
  ExecPolicy policy_ = ExecPolicy::kSerial;
};

struct UnetModel::Weights {
  UnetArchitecture arch{16};
  std::vector<std::vector<float>> weight;  // per layer
  std::vector<std::vector<float>> bias;
};

}  // namespace sepipe
