// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "sepipe/frames.h"
#include "sepipe/gru.h"
#include "sepipe/unet.h"

namespace sepipe {

using NeuralModel = std::variant<GruModel, UnetModel>;

inline constexpr double kNeuralMaxAttenDb = 15.0;
inline constexpr double kFrameRate = 100.0;

NeuralModel make_model(const WeightFile& file);
/// Reads, validates and instantiates a model with zeroed stream state.
NeuralModel load_weights(const std::filesystem::path& path);

ModelKind kind_of(const NeuralModel& model);
MaskFrame step(NeuralModel& model, const FeatureFrame& features);
void reset(NeuralModel& model);
void set_policy(NeuralModel& model, ExecPolicy policy);

std::size_t count_params(ModelKind kind);
std::size_t count_macs_per_frame(ModelKind kind);
std::size_t count_macs_per_second(ModelKind kind, double frame_rate = kFrameRate);
inline std::size_t count_params(const NeuralModel& m) { return count_params(kind_of(m)); }
inline std::size_t count_macs_per_second(const NeuralModel& m, double frame_rate = kFrameRate) {
  return count_macs_per_second(kind_of(m), frame_rate);
}

/// Multiplies every bin by max(gain, 10^(-max_atten_db/20)); phase is kept.
/// Gains outside [0, 1] are a UsageError.
ComplexSpectrum apply_mask(const ComplexSpectrum& spec, std::span<const double> gains,
                           double max_atten_db = kNeuralMaxAttenDb);

}  // namespace sepipe
