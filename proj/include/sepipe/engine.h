// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sepipe/audio.h"
#include "sepipe/frames.h"
#include "sepipe/neural.h"
#include "sepipe/suppressor.h"

namespace sepipe {

enum class EngineKind { kBaseline, kGru, kUnet };

/// "baseline", "gru" or "unet"; anything else is a UsageError.
EngineKind parse_engine(std::string_view name);
std::string_view to_string(EngineKind kind);

struct EngineConfig {
  EngineKind kind = EngineKind::kBaseline;
  /// Defaults to 12 dB for the baseline and 15 dB for neural engines.
  std::optional<double> max_atten_db;
  SuppressorConfig suppressor;
  FrameConfig frames;
  ExecPolicy policy = ExecPolicy::kSerial;

  double effective_max_atten_db() const;
};

/// One 32 kHz stream: a hop of input in, a hop of output out, delayed by
/// latency() samples.
class EnhanceStream {
 public:
  /// Neural engines need a model of the matching kind; the baseline ignores it.
  EnhanceStream(const EngineConfig& config, std::optional<NeuralModel> model = std::nullopt);

  std::size_t hop() const { return frames_.hop(); }
  std::size_t latency() const { return frames_.latency(); }
  const EngineConfig& config() const { return config_; }

  std::vector<double> process_block(std::span<const double> block);
  void reset();

 private:
  ComplexSpectrum enhance_spectrum(const ComplexSpectrum& spec);

  EngineConfig config_;
  FrameStream frames_;
  std::optional<SuppressorState> suppressor_;
  std::optional<NeuralModel> model_;
};

/// Whole-buffer enhancement. Output has the input's length and rate and is
/// aligned sample for sample: the stream is flushed with latency() zeros and
/// the leading latency() samples are dropped. 16 kHz input is processed at
/// 32 kHz and converted back.
AudioBuffer enhance(const AudioBuffer& input, EnhanceStream& stream);
AudioBuffer enhance(const AudioBuffer& input, const EngineConfig& config,
                    std::optional<NeuralModel> model = std::nullopt);

}  // namespace sepipe
