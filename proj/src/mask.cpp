// SPDX-License-Identifier: Apache-2.0
#include <fmt/format.h>

#include <cmath>

#include "sepipe/errors.h"
#include "sepipe/neural.h"

namespace sepipe {

NeuralModel make_model(const WeightFile& file) {
  if (file.kind == ModelKind::kGru) return GruModel::from_weights(file);
  return UnetModel::from_weights(file);
}

NeuralModel load_weights(const std::filesystem::path& path) {
  return make_model(read_weight_file(path));
}

ModelKind kind_of(const NeuralModel& model) {
  return std::holds_alternative<GruModel>(model) ? ModelKind::kGru : ModelKind::kUnet;
}

MaskFrame step(NeuralModel& model, const FeatureFrame& features) {
  return std::visit([&](auto& m) { return m.step(features); }, model);
}

void reset(NeuralModel& model) {
  std::visit([](auto& m) { m.reset(); }, model);
}

void set_policy(NeuralModel& model, ExecPolicy policy) {
  std::visit([policy](auto& m) { m.set_policy(policy); }, model);
}

std::size_t count_params(ModelKind kind) {
  return kind == ModelKind::kGru ? GruModel::param_count() : UnetModel::param_count();
}

std::size_t count_macs_per_frame(ModelKind kind) {
  return kind == ModelKind::kGru ? GruModel::macs_per_frame() : UnetModel::macs_per_frame();
}

std::size_t count_macs_per_second(ModelKind kind, double frame_rate) {
  return static_cast<std::size_t>(
      std::llround(static_cast<double>(count_macs_per_frame(kind)) * frame_rate));
}

ComplexSpectrum apply_mask(const ComplexSpectrum& spec, std::span<const double> gains,
                           double max_atten_db) {
  if (gains.size() != spec.size()) {
    throw UsageError(fmt::format("{} gains for a {}-bin spectrum", gains.size(), spec.size()));
  }
  const double floor = std::pow(10.0, -max_atten_db / 20.0);
  ComplexSpectrum out = spec;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double g = gains[k];
    if (!(g >= 0.0 && g <= 1.0)) {
      throw UsageError(fmt::format("gain {} at bin {} outside [0, 1]", g, k));
    }
    out[k] *= std::max(g, floor);
  }
  return out;
}

}  // namespace sepipe
