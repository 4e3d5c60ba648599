// SPDX-License-Identifier: Apache-2.0
#include "sepipe/bands.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "sepipe/errors.h"

namespace sepipe {
namespace {

// Geometric spacing from 54 to 513, rounded, with widths forced non-decreasing.
constexpr std::array<std::size_t, kBandCount + 1> kEdges = {
    54, 62, 72, 85, 102, 124, 152, 187, 231, 286, 355, 430, 513};

// Anchored mean: exact whenever the range is constant, which plain summation
// is not (ten additions of 0.1 do not make 1.0).
double band_mean(std::span<const double> x, std::size_t lo, std::size_t hi) {
  const double anchor = x[lo];
  double dev = 0.0;
  for (std::size_t k = lo + 1; k < hi; ++k) dev += x[k] - anchor;
  return anchor + dev / static_cast<double>(hi - lo);
}

void require_bins(std::span<const double> x, const BandLayout& layout, const char* what) {
  if (x.size() != layout.bin_count()) {
    throw UsageError(fmt::format("{} has {} bins, expected {}", what, x.size(), layout.bin_count()));
  }
}

}  // namespace

std::pair<std::size_t, std::size_t> BandLayout::bins_of(std::size_t f) const {
  if (f < passthrough_count) return {f, f + 1};
  const std::size_t band = f - passthrough_count;
  return {band_edges[band], band_edges[band + 1]};
}

const BandLayout& make_layout() {
  static const BandLayout layout{kPassthroughBins, kEdges};
  return layout;
}

FeatureFrame compress(std::span<const double> magnitudes, const BandLayout& layout) {
  require_bins(magnitudes, layout, "magnitude spectrum");
  for (double m : magnitudes) {
    if (!(m >= 0.0)) throw UsageError("magnitudes must be non-negative");
  }
  FeatureFrame out;
  for (std::size_t f = 0; f < layout.feature_count(); ++f) {
    const auto [lo, hi] = layout.bins_of(f);
    out.values[f] = band_mean(magnitudes, lo, hi);
  }
  return out;
}

std::vector<double> expand_mask(const MaskFrame& mask, const BandLayout& layout) {
  std::vector<double> gains(layout.bin_count());
  for (std::size_t f = 0; f < layout.feature_count(); ++f) {
    const double g = mask.values[f];
    if (!(g >= 0.0 && g <= 1.0)) {
      throw UsageError(fmt::format("mask value {} at feature {} outside [0, 1]", g, f));
    }
    const auto [lo, hi] = layout.bins_of(f);
    std::fill(gains.begin() + static_cast<std::ptrdiff_t>(lo),
              gains.begin() + static_cast<std::ptrdiff_t>(hi), g);
  }
  return gains;
}

MaskFrame compress_mask(std::span<const double> gains, const BandLayout& layout) {
  require_bins(gains, layout, "gain vector");
  MaskFrame out;
  for (std::size_t f = 0; f < layout.feature_count(); ++f) {
    const auto [lo, hi] = layout.bins_of(f);
    out.values[f] = band_mean(gains, lo, hi);
  }
  return out;
}

MaskFrame clamp_mask(MaskFrame mask) {
  for (double& v : mask.values) v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  return mask;
}

}  // namespace sepipe
