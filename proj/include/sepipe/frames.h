// SPDX-License-Identifier: Apache-2.0
//
// Asymmetric-window analysis/synthesis filterbank.
//
// The analysis window is longer than the synthesis window. Each frame holds
// the newest `analysis.size()` input samples, right-aligned in the FFT buffer.
// Only the last `synthesis.size()` samples of the inverse transform are
// windowed and overlap-added, so the algorithmic latency is the synthesis
// length rather than the analysis length.
#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace sepipe {

struct FrameConfig {
  int sample_rate = 32000;
  double analysis_ms = 22.5;
  double synthesis_ms = 20.0;
  double hop_ms = 10.0;
  std::size_t fft_len = 1024;
};

struct WindowPair {
  std::vector<double> analysis;
  std::vector<double> synthesis;
  std::size_t hop = 0;
  std::size_t fft_len = 0;

  std::size_t bins() const { return fft_len / 2 + 1; }
};

/// One-sided spectrum of a real frame (fft_len/2 + 1 bins).
struct ComplexSpectrum {
  std::vector<std::complex<double>> bins;

  ComplexSpectrum() = default;
  explicit ComplexSpectrum(std::size_t n) : bins(n) {}
  std::size_t size() const { return bins.size(); }
  std::complex<double>& operator[](std::size_t k) { return bins[k]; }
  const std::complex<double>& operator[](std::size_t k) const { return bins[k]; }

  std::vector<double> power() const;
  std::vector<double> magnitude() const;
};

/// Analysis window: rising half of a sqrt-Hann of length 2*(La - R) followed
/// by the falling half of a sqrt-Hann of length 2*R. Synthesis window: over
/// the last Ls = 2R analysis samples, Hann(Ls) divided by the aligned
/// analysis weights, so analysis*synthesis is a Hann and sums to one at hop R.
///
/// Throws ConfigError when durations are not whole samples, La < Ls,
/// Ls != 2R, La > fft_len, or the numerical COLA check fails.
WindowPair design_windows(const FrameConfig& config = {});

/// max over one steady-state hop of |sum_k h_a(n + kR) h_s(n + kR) - 1|.
double cola_residual(const WindowPair& wp);

/// FFT of the windowed frame, zero padded on the left to fft_len.
/// `frame` must hold exactly analysis.size() samples, oldest first.
ComplexSpectrum analyze(std::span<const double> frame, const WindowPair& wp);

struct OlaState {
  std::vector<double> overlap;
  std::uint64_t frames_emitted = 0;

  explicit OlaState(const WindowPair& wp);
};

/// Inverse FFT, synthesis windowing of the final Ls samples and overlap-add.
/// Returns the hop-sized chunk that no later frame will touch.
std::vector<double> synthesize(const ComplexSpectrum& spec, const WindowPair& wp,
                               OlaState& state);

/// Algorithmic latency in samples: the synthesis window length.
std::size_t latency_samples(const WindowPair& wp);

/// Block-clocked streaming wrapper around analyze/synthesize.
///
/// Each call to `analyze_next` consumes one hop of input; `synthesize_next`
/// returns one hop of output. Output is aligned to the block clock: the chunk
/// finished after block k is played out during block k+1, which makes the
/// end-to-end delay exactly latency_samples(). Under an all-pass spectrum the
/// stream output is the input delayed by that many samples.
class FrameStream {
 public:
  explicit FrameStream(WindowPair wp);

  const WindowPair& windows() const { return wp_; }
  std::size_t hop() const { return wp_.hop; }
  std::size_t latency() const { return latency_samples(wp_); }

  ComplexSpectrum analyze_next(std::span<const double> block);
  std::vector<double> synthesize_next(const ComplexSpectrum& spec);
  void reset();

 private:
  WindowPair wp_;
  std::vector<double> history_;
  OlaState ola_;
  std::vector<double> playout_;
};

}  // namespace sepipe
