// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sepipe/audio.h"

namespace sepipe {

inline constexpr double kSdrCapDb = 60.0;

struct SdrResult {
  double db = 0.0;
  bool saturated = false;  // clipped to +-kSdrCapDb
};

/// Scale-invariant SDR: the reference is projected onto the estimate's span
/// by the optimal scalar. Zero reference or length mismatch is a UsageError.
SdrResult sdr_detail(std::span<const double> reference, std::span<const double> estimate);
double sdr(const AudioBuffer& reference, const AudioBuffer& estimate);

namespace stoi_params {
inline constexpr int kSampleRate = 10000;
inline constexpr std::size_t kFrame = 256;
inline constexpr std::size_t kHop = 128;
inline constexpr std::size_t kFft = 512;
inline constexpr std::size_t kBands = 15;
inline constexpr double kMinFreq = 150.0;
inline constexpr std::size_t kSegment = 30;
inline constexpr double kClipDb = -15.0;
inline constexpr double kDynamicRangeDb = 40.0;
}  // namespace stoi_params

/// Half-open FFT bin ranges of the one-third-octave bands at 10 kHz.
struct ThirdOctaveBands {
  std::array<std::size_t, stoi_params::kBands> lo{};
  std::array<std::size_t, stoi_params::kBands> hi{};
};
ThirdOctaveBands third_octave_bands();

/// Drops frames more than 40 dB below the loudest reference frame and
/// overlap-adds the remainder. Both signals are at 10 kHz.
std::pair<std::vector<double>, std::vector<double>> remove_silent_frames(
    std::span<const double> reference, std::span<const double> estimate);

/// Short-time objective intelligibility. Inputs must share rate and length
/// and last at least one second. Fewer than 30 active frames after silence
/// removal is a UsageError.
double stoi(const AudioBuffer& reference, const AudioBuffer& estimate);

struct ItemMetrics {
  std::string id;
  double sdr_db = 0.0;
  bool sdr_saturated = false;
  double stoi = 0.0;
  std::optional<std::string> error;
};

struct MetricReport {
  std::vector<ItemMetrics> items;  // sorted by id
  std::size_t valid = 0;
  std::size_t failed = 0;
  double mean_sdr_db = 0.0;
  double mean_stoi = 0.0;
};

/// References are read from <manifest dir>/references/<id>.wav and estimates
/// from <enhanced_dir>/<id>.wav. Per-item failures are recorded and excluded
/// from the means; a report with no valid item is a UsageError.
MetricReport evaluate_set(const std::filesystem::path& manifest,
                          const std::filesystem::path& enhanced_dir);

void write_report_tsv(const std::filesystem::path& path, const MetricReport& report);
void write_report_json(const std::filesystem::path& path, const MetricReport& report);

}  // namespace sepipe
