// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace sepipe {

inline constexpr std::size_t kSpectrumBins = 513;
inline constexpr std::size_t kPassthroughBins = 54;
inline constexpr std::size_t kBandCount = 12;
inline constexpr std::size_t kFeatureCount = kPassthroughBins + kBandCount;  // 66

/// The low 54 bins pass through; bins 54..512 are grouped into 12 bands of
/// non-decreasing width.
struct BandLayout {
  std::size_t passthrough_count = kPassthroughBins;
  /// e_0 = 54 ... e_12 = 513; band i covers bins [e_i, e_{i+1}).
  std::array<std::size_t, kBandCount + 1> band_edges{};

  std::size_t feature_count() const { return passthrough_count + kBandCount; }
  std::size_t bin_count() const { return band_edges.back(); }
  std::size_t band_width(std::size_t band) const {
    return band_edges[band + 1] - band_edges[band];
  }
  /// Half-open bin range [first, second) feeding feature `f`.
  std::pair<std::size_t, std::size_t> bins_of(std::size_t f) const;
};

struct FeatureFrame {
  std::array<double, kFeatureCount> values{};
};

struct MaskFrame {
  std::array<double, kFeatureCount> values{};
};

const BandLayout& make_layout();

/// Bins below 54 verbatim, one arithmetic mean per band above.
FeatureFrame compress(std::span<const double> magnitudes, const BandLayout& layout = make_layout());

/// Piecewise-constant interpolation of a 66-value mask back to 513 gains.
std::vector<double> expand_mask(const MaskFrame& mask, const BandLayout& layout = make_layout());

/// Inverse of expand_mask on piecewise-constant gains (band means).
MaskFrame compress_mask(std::span<const double> gains, const BandLayout& layout = make_layout());

/// NaN becomes 0; everything else is clipped to [0, 1].
MaskFrame clamp_mask(MaskFrame mask);

}  // namespace sepipe
