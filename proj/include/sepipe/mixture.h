// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sepipe/audio.h"
#include "sepipe/kernels.h"

namespace sepipe {

struct MixSpec {
  double snr_min_db = -5.0;
  double snr_max_db = 5.0;
  double hp_cutoff_hz = 150.0;
  std::uint64_t seed = 0;
  // Speech level jitter relative to the source file, uniform in dB.
  double level_min_db = -6.0;
  double level_max_db = 0.0;

  void validate() const;
};

/// Noise gain that puts `noise` at `snr_db` below `speech`. Both powers are
/// measured over the given spans. Zero power in either is a UsageError.
double noise_gain_for_snr(std::span<const double> speech, std::span<const double> noise,
                          double snr_db);

/// 10*log10(P_speech / P_noise).
double component_snr_db(std::span<const double> speech, std::span<const double> noise);

/// `length` samples of `noise` read circularly from `offset`.
std::vector<double> fit_noise(std::span<const double> noise, std::size_t length,
                              std::size_t offset);

struct MixResult {
  AudioBuffer mixture;
  std::vector<double> scaled_noise;
  double noise_gain = 0.0;
};

/// speech + g * noise, with noise tiled or cropped to the speech length
/// starting at `noise_offset`.
MixResult mix_at_snr(const AudioBuffer& speech, const AudioBuffer& noise, double snr_db,
                     std::size_t noise_offset = 0);

struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;

  std::vector<double> filter(std::span<const double> x) const;
  /// Squared magnitude response at `freq_hz`.
  double power_response(double freq_hz, int sample_rate) const;
};

/// Second-order Butterworth high-pass, bilinear transform with pre-warping.
Biquad butterworth_highpass(double cutoff_hz, int sample_rate);

AudioBuffer highpass(const AudioBuffer& x, double cutoff_hz = 150.0);

/// Linear convolution truncated to the speech length.
AudioBuffer convolve_ir(const AudioBuffer& speech, const AudioBuffer& ir,
                        ExecPolicy policy = ExecPolicy::kSerial);

struct ManifestRow {
  std::string id;
  std::string speech_path;
  std::string noise_path;
  double snr_db = 0.0;
  double noise_gain = 0.0;
  std::size_t offset_samples = 0;
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

/// One mixture as drawn from the seed, before any file is read.
struct PlannedItem {
  std::string id;
  std::filesystem::path speech_path;
  std::filesystem::path noise_path;
  std::optional<std::filesystem::path> ir_path;
  double snr_db = 0.0;
  double level_db = 0.0;
  std::uint64_t offset_draw = 0;  // reduced modulo the noise length when rendered
};

std::vector<PlannedItem> plan_test_set(const std::vector<std::filesystem::path>& speech,
                                       const std::vector<std::filesystem::path>& noise,
                                       const std::vector<std::filesystem::path>& irs,
                                       const MixSpec& spec, std::size_t count);

struct RenderedItem {
  AudioBuffer mixture;
  AudioBuffer reference;
  ManifestRow row;
};

/// Reads the inputs and builds the 32 kHz mixture/reference pair.
RenderedItem render_item(const PlannedItem& item, const MixSpec& spec);

struct ItemError {
  std::string id;
  std::string message;
};

struct TestSetResult {
  std::vector<ManifestRow> rows;
  std::vector<ItemError> errors;
};

/// Sorted *.wav files directly inside `dir`.
std::vector<std::filesystem::path> list_wavs(const std::filesystem::path& dir);

/// Writes out_dir/mixtures/<id>.wav, out_dir/references/<id>.wav and
/// out_dir/manifest.tsv. Items are rendered in parallel; failed items are
/// reported in `errors` and left out of the manifest.
TestSetResult make_test_set(const std::filesystem::path& speech_dir,
                            const std::filesystem::path& noise_dir, const MixSpec& spec,
                            std::size_t count, const std::filesystem::path& out_dir,
                            const std::optional<std::filesystem::path>& ir_dir = std::nullopt);

}  // namespace sepipe
