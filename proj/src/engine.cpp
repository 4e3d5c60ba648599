// SPDX-License-Identifier: Apache-2.0
#include "sepipe/engine.h"

#include <fmt/format.h>

#include <algorithm>

#include "sepipe/bands.h"
#include "sepipe/errors.h"
#include "sepipe/resample.h"

namespace sepipe {

EngineKind parse_engine(std::string_view name) {
  if (name == "baseline") return EngineKind::kBaseline;
  if (name == "gru") return EngineKind::kGru;
  if (name == "unet") return EngineKind::kUnet;
  throw UsageError(fmt::format("unknown engine '{}' (expected baseline, gru or unet)", name));
}

std::string_view to_string(EngineKind kind) {
  switch (kind) {
    case EngineKind::kBaseline: return "baseline";
    case EngineKind::kGru: return "gru";
    case EngineKind::kUnet: return "unet";
  }
  return "?";
}

double EngineConfig::effective_max_atten_db() const {
  if (max_atten_db) return *max_atten_db;
  return kind == EngineKind::kBaseline ? suppressor.max_atten_db : kNeuralMaxAttenDb;
}

EnhanceStream::EnhanceStream(const EngineConfig& config, std::optional<NeuralModel> model)
    : config_(config), frames_(design_windows(config.frames)) {
  const double atten = config_.effective_max_atten_db();
  if (!(atten >= 0.0)) throw ConfigError(fmt::format("max attenuation {} dB is negative", atten));
  if (frames_.windows().bins() != kSpectrumBins) {
    throw ConfigError(fmt::format("engine needs {} spectrum bins, frame config gives {}",
                                  kSpectrumBins, frames_.windows().bins()));
  }
  if (config_.kind == EngineKind::kBaseline) {
    SuppressorConfig sc = config_.suppressor;
    sc.max_atten_db = atten;
    sc.validate();
    suppressor_.emplace(sc, kSpectrumBins);
    return;
  }
  if (!model) {
    throw UsageError(fmt::format("engine '{}' needs a weight file", to_string(config_.kind)));
  }
  const ModelKind want = config_.kind == EngineKind::kGru ? ModelKind::kGru : ModelKind::kUnet;
  if (kind_of(*model) != want) {
    throw UsageError(fmt::format("engine '{}' given a {} model", to_string(config_.kind),
                                 to_string(kind_of(*model))));
  }
  model_ = std::move(model);
  set_policy(*model_, config_.policy);
  sepipe::reset(*model_);
}

ComplexSpectrum EnhanceStream::enhance_spectrum(const ComplexSpectrum& spec) {
  if (suppressor_) return suppress_frame(*suppressor_, spec).enhanced;
  const FeatureFrame features = compress(spec.magnitude());
  const MaskFrame mask = clamp_mask(step(*model_, features));
  return apply_mask(spec, expand_mask(mask), config_.effective_max_atten_db());
}

std::vector<double> EnhanceStream::process_block(std::span<const double> block) {
  return frames_.synthesize_next(enhance_spectrum(frames_.analyze_next(block)));
}

void EnhanceStream::reset() {
  frames_.reset();
  if (suppressor_) suppressor_.emplace(suppressor_->config, kSpectrumBins);
  if (model_) sepipe::reset(*model_);
}

AudioBuffer enhance(const AudioBuffer& input, EnhanceStream& stream) {
  if (!is_supported_rate(input.sample_rate)) {
    throw UsageError(fmt::format("unsupported sample rate {} Hz", input.sample_rate));
  }
  require_finite(input.samples, "input audio");
  const bool narrow = input.sample_rate == 16000;
  const AudioBuffer x = narrow ? resample_2x(input, Direction::kUp) : input;

  const std::size_t hop = stream.hop();
  const std::size_t latency = stream.latency();
  const std::size_t needed = x.size() + latency;
  const std::size_t blocks = (needed + hop - 1) / hop;

  std::vector<double> padded(blocks * hop, 0.0);
  std::copy(x.samples.begin(), x.samples.end(), padded.begin());
  std::vector<double> out;
  out.reserve(padded.size());
  stream.reset();
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto chunk = stream.process_block(std::span<const double>(padded).subspan(b * hop, hop));
    out.insert(out.end(), chunk.begin(), chunk.end());
  }

  AudioBuffer y{std::vector<double>(out.begin() + static_cast<std::ptrdiff_t>(latency),
                                    out.begin() + static_cast<std::ptrdiff_t>(latency + x.size())),
                x.sample_rate};
  if (!narrow) return y;
  AudioBuffer down = resample_2x(y, Direction::kDown);
  down.samples.resize(input.size());
  return down;
}

AudioBuffer enhance(const AudioBuffer& input, const EngineConfig& config,
                    std::optional<NeuralModel> model) {
  EnhanceStream stream(config, std::move(model));
  return enhance(input, stream);
}

}  // namespace sepipe
