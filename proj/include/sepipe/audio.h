// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace sepipe {

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 32000;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class SampleFormat { kPcm16, kFloat32 };

inline bool is_supported_rate(int rate) {
  return rate == 16000 || rate == 32000;
}

/// Throws UsageError naming `what` if any sample is NaN or infinite.
void require_finite(std::span<const double> x, std::string_view what);

/// Mono 16-bit PCM or 32-bit float WAV at 16 or 32 kHz. Anything else is a
/// FormatError with the offending property in the message.
AudioBuffer read_wav(const std::filesystem::path& path);
SampleFormat wav_format(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               SampleFormat format = SampleFormat::kFloat32);

double mean_power(std::span<const double> x);

}  // namespace sepipe
