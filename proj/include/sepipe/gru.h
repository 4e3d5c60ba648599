// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>
#include <vector>

#include "sepipe/bands.h"
#include "sepipe/kernels.h"
#include "sepipe/weights.h"

namespace sepipe {

/// One-layer GRU (66 -> 128) followed by a dense 128 -> 66 layer with a
/// logistic output.
///
///   z  = sigmoid(x W_z + bW_z + h U_z + bU_z)
///   r  = sigmoid(x W_r + bW_r + h U_r + bU_r)
///   h~ = tanh(x W_h + bW_h + (r * h) U_h + bU_h)
///   h  = (1 - z) * h + z * h~
///   mask = sigmoid(h W_out + b_out)
///
/// Weights are immutable and shared between copies; each copy carries its own
/// hidden state, so one copy per stream.
class GruModel {
 public:
  static constexpr std::size_t kInput = kFeatureCount;
  static constexpr std::size_t kHidden = 128;

  /// Validates against the GRU schema (SchemaError otherwise).
  static GruModel from_weights(const WeightFile& file);

  MaskFrame step(const FeatureFrame& features);
  void reset();

  /// Runs a whole sequence from a zero state without touching this model's
  /// stream state. Uses a sequence-level matrix product for the input
  /// projections instead of per-frame matrix-vector products.
  std::vector<MaskFrame> run_batch(std::span<const FeatureFrame> frames) const;

  std::span<const float> hidden() const { return hidden_; }
  void set_policy(ExecPolicy policy) { policy_ = policy; }

  static std::size_t param_count();
  static std::size_t macs_per_frame();

 private:
  struct Weights;
  explicit GruModel(std::shared_ptr<const Weights> w);

  std::shared_ptr<const Weights> w_;
  std::vector<float> hidden_;
  ExecPolicy policy_ = ExecPolicy::kSerial;
};

}  // namespace sepipe
