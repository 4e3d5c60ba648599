// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.h"
#include "sepipe/audio.h"
#include "sepipe/bands.h"
#include "sepipe/cli.h"
#include "sepipe/engine.h"
#include "sepipe/frames.h"
#include "sepipe/gru.h"
#include "sepipe/metrics.h"
#include "sepipe/mixture.h"
#include "sepipe/neural.h"
#include "sepipe/suppressor.h"
#include "sepipe/unet.h"
#include "sepipe/weights.h"
#include "signals.h"

using namespace sepipe;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Runs x through analysis and synthesis with a unit mask. Output sample n
// corresponds to input sample n - latency.
std::vector<double> unit_stream(const std::vector<double>& x) {
  FrameStream fs(design_windows());
  const std::size_t hop = fs.hop();
  std::vector<double> out;
  out.reserve(x.size());
  for (std::size_t b = 0; b + hop <= x.size(); b += hop) {
    auto chunk = fs.synthesize_next(fs.analyze_next(std::span(x).subspan(b, hop)));
    out.insert(out.end(), chunk.begin(), chunk.end());
  }
  return out;
}

Outcome cola() {
  const auto x = testsig::white_noise(320000, 1, 0.1);
  const auto t0 = Clock::now();
  const auto y = unit_stream(x);
  const double runtime = seconds_since(t0);
  const std::size_t latency = latency_samples(design_windows());
  const std::size_t warmup = 2 * design_windows().hop;
  double err = 0.0;
  for (std::size_t n = latency + warmup; n < y.size(); ++n) {
    err = std::max(err, std::abs(y[n] - x[n - latency]));
  }
  return {err < 1e-6 && runtime < 1.0,
          fmt::format("max error {:.3g} (< 1e-6), 10 s in {:.3f} s (< 1 s)", err, runtime)};
}

Outcome latency() {
  const std::size_t at = 5000;
  std::vector<double> x(16000, 0.0);
  x[at] = 1.0;
  const auto y = unit_stream(x);
  const std::size_t bound = 640;
  double inside = 0.0, outside = 0.0;
  std::size_t peak = 0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    const double e = y[n] * y[n];
    (n >= at && n <= at + bound ? inside : outside) += e;
    if (std::abs(y[n]) > std::abs(y[peak])) peak = n;
  }
  // Transform rounding leaves ~1e-17 residues elsewhere; anything above
  // 1e-20 of the total would be real leakage.
  const double frac = outside / (inside + outside);
  return {frac < 1e-20 && peak - at <= bound && latency_samples(design_windows()) == bound,
          fmt::format("peak at +{} samples, energy outside [0, {}] = {:.2g} of total", peak - at,
                      bound, frac)};
}

Outcome band_layout() {
  const BandLayout& l = make_layout();
  bool ok = l.passthrough_count == 54 && l.feature_count() == 66 && l.band_edges.front() == 54 &&
            l.band_edges.back() == 513;
  for (std::size_t b = 0; b + 1 < kBandCount; ++b) ok = ok && l.band_width(b + 1) >= l.band_width(b);
  for (std::size_t f = 0; f < 54; ++f) ok = ok && l.bins_of(f) == std::pair<std::size_t, std::size_t>{f, f + 1};

  bool exact = true;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double c : {0.0, 1.0, 0.1, 0.3, 1e-7, 123.456}) {
    const std::vector<double> mags(kSpectrumBins, c);
    for (double v : compress(mags).values) exact = exact && v == c;
  }
  for (int trial = 0; trial < 100; ++trial) {
    MaskFrame m;
    for (double& v : m.values) v = u(rng);
    exact = exact && compress_mask(expand_mask(m)).values == m.values;
  }
  std::string widths;
  for (std::size_t b = 0; b < kBandCount; ++b) widths += fmt::format("{}{}", b ? "," : "", l.band_width(b));
  return {ok && exact, fmt::format("54 passthrough + 12 bands of widths {}; round trips {}", widths,
                                   exact ? "exact" : "inexact")};
}

Outcome gain_law() {
  SuppressorConfig cfg;
  const double gmin = cfg.min_gain();
  const double half = wiener_gain(1.0, gmin);
  const double floor = wiener_gain(0.0, gmin);
  const double floor_err = std::abs(floor - std::pow(10.0, -12.0 / 20.0));
  auto dd = [&](double prev_gain, double gamma) {
    SuppressorState s(cfg, 1);
    s.prev_gain[0] = prev_gain;
    return decision_directed_xi(s, std::vector{gamma})[0];
  };
  const double e1 = std::abs(dd(1.0, 2.0) - 1.98);
  const double e2 = std::abs(dd(0.5, 0.5) - 0.1225);
  return {half == 0.5 && floor_err < 1e-12 && e1 < 1e-12 && e2 < 1e-12,
          fmt::format("G(1) = {}, floor error {:.2g}, dd errors {:.2g} / {:.2g}", half, floor_err,
                      e1, e2)};
}

Outcome baseline_suppression() {
  const double rms = std::pow(10.0, -26.0 / 20.0);
  const auto x = testsig::white_noise(320000, 7, rms);
  const auto t0 = Clock::now();
  const AudioBuffer y = enhance(testsig::buffer(x), EngineConfig{});
  const double runtime = seconds_since(t0);
  const std::size_t skip = 64000;
  const double pin = mean_power(std::span(x).subspan(skip));
  const double pout = mean_power(std::span(y.samples).subspan(skip));
  const double db = 10.0 * std::log10(pout / pin);
  return {db >= -13.5 && db <= -10.0 && runtime < 5.0,
          fmt::format("output/input power {:.2f} dB (in [-13.5, -10]), 10 s in {:.2f} s (< 5 s)",
                      db, runtime)};
}

Outcome complexity() {
  const std::size_t gp = count_params(ModelKind::kGru);
  const std::size_t gm = count_macs_per_second(ModelKind::kGru);
  const std::size_t up = count_params(ModelKind::kUnet);
  const std::size_t um = count_macs_per_second(ModelKind::kUnet);
  // The counts must also describe the tensors the models actually load.
  std::size_t gfile = 0, ufile = 0;
  for (const auto& t : zero_weights(ModelKind::kGru).tensors) gfile += t.element_count();
  for (const auto& t : zero_weights(ModelKind::kUnet).tensors) ufile += t.element_count();
  const bool ok = gp == 83778 && gfile == gp && gm >= 7'500'000 && gm <= 9'500'000 &&
                  up >= 18000 && up <= 30000 && ufile == up && um >= 20'000'000 &&
                  um <= 100'000'000;
  return {ok, fmt::format("GRU {} params, {} MACs/s; U-Net {} params, {} MACs/s", gp, gm, up, um)};
}

std::vector<FeatureFrame> random_features(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::exponential_distribution<double> e(2.0);
  std::vector<FeatureFrame> out(n);
  for (auto& f : out) {
    for (double& v : f.values) v = e(rng);
  }
  return out;
}

template <typename Model>
std::vector<MaskFrame> run_stream(Model& m, const std::vector<FeatureFrame>& frames) {
  m.reset();
  std::vector<MaskFrame> out;
  for (const auto& f : frames) out.push_back(m.step(f));
  return out;
}

double max_diff(const std::vector<MaskFrame>& a, const std::vector<MaskFrame>& b) {
  double d = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) d = std::max(d, std::abs(a[t].values[i] - b[t].values[i]));
  }
  return d;
}

bool same_bits(const MaskFrame& a, const MaskFrame& b) {
  return std::memcmp(a.values.data(), b.values.data(), sizeof(a.values)) == 0;
}

Outcome streaming_batch() {
  const auto frames = random_features(50, 11);
  GruModel gru = GruModel::from_weights(random_weights(ModelKind::kGru, 21));
  const double gd = max_diff(run_stream(gru, frames), gru.run_batch(frames));
  UnetModel unet = UnetModel::from_weights(random_weights(ModelKind::kUnet, 22));
  const double ud = max_diff(run_stream(unet, frames), unet.run_batch(frames));

  // Perturbing frame t + 1 must leave outputs 0..t untouched in both paths.
  bool causal = true;
  const auto base_s = run_stream(unet, frames);
  const auto base_b = unet.run_batch(frames);
  for (std::size_t t : {0u, 7u, 24u, 48u}) {
    auto mod = frames;
    for (double& v : mod[t + 1].values) v += 3.0;
    const auto s = run_stream(unet, mod);
    const auto b = unet.run_batch(mod);
    for (std::size_t i = 0; i <= t; ++i) causal = causal && same_bits(s[i], base_s[i]) && same_bits(b[i], base_b[i]);
    causal = causal && !same_bits(s[t + 1], base_s[t + 1]);
  }
  return {gd < 1e-6 && ud < 1e-5 && causal,
          fmt::format("GRU diff {:.2g} (< 1e-6), U-Net diff {:.2g} (< 1e-5), causality {}", gd, ud,
                      causal ? "bit-exact" : "violated")};
}

Outcome neural_floor() {
  const auto x = testsig::white_noise(720, 5, 0.3);
  const ComplexSpectrum spec = analyze(x, design_windows());
  const std::vector<double> zeros(spec.size(), 0.0);
  const double target = std::pow(10.0, -15.0 / 20.0);
  const ComplexSpectrum y = apply_mask(spec, zeros);
  double worst = 0.0;
  bool exact = true;
  for (std::size_t k = 0; k < spec.size(); ++k) {
    exact = exact && y[k] == spec[k] * target;
    if (std::abs(spec[k]) > 0.0) worst = std::max(worst, std::abs(std::abs(y[k]) / std::abs(spec[k]) - target));
  }
  // End to end: a GRU whose output bias pins the mask at 0 must leave the
  // signal scaled by the floor and nothing else.
  WeightFile w = zero_weights(ModelKind::kGru);
  for (auto& t : w.tensors) {
    if (t.name == "output.bias") std::fill(t.data.begin(), t.data.end(), -100.0f);
  }
  EngineConfig cfg;
  cfg.kind = EngineKind::kGru;
  const auto sig = testsig::white_noise(32000, 6, 0.1);
  const AudioBuffer out = enhance(testsig::buffer(sig), cfg, make_model(w));
  double stream_err = 0.0;
  for (std::size_t n = 0; n < sig.size(); ++n) stream_err = std::max(stream_err, std::abs(out.samples[n] - target * sig[n]));
  return {exact && worst < 1e-15 && stream_err < 1e-12,
          fmt::format("every bin scaled by {:.16f}, max ratio error {:.2g}, engine output error {:.2g}",
                      target, worst, stream_err)};
}

Outcome metrics_oracle() {
  const auto s = testsig::speech_like(64000, 32000, 5);
  auto n = testsig::white_noise(s.size(), 6, 1.0);
  double sn = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    sn += s[i] * n[i];
    ss += s[i] * s[i];
  }
  for (std::size_t i = 0; i < s.size(); ++i) n[i] -= sn / ss * s[i];
  double nn = 0.0;
  for (double v : n) nn += v * v;
  const double g = std::sqrt(ss / 10.0 / nn);
  std::vector<double> est(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) est[i] = s[i] + g * n[i];
  const double sdr_err = std::abs(sdr(testsig::buffer(s), testsig::buffer(est)) - 10.0);

  const double self = stoi(testsig::buffer(s), testsig::buffer(s));
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const int fs = seed % 2 == 0 ? 32000 : 16000;
    const auto ref = testsig::speech_like(static_cast<std::size_t>(fs) * 3, fs, 100 + seed);
    const auto noise = testsig::white_noise(ref.size(), 200 + seed, 1.0);
    const double gain = noise_gain_for_snr(ref, noise, 0.0);
    std::vector<double> deg(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) deg[i] = ref[i] + gain * noise[i];
    const double fast = stoi(testsig::buffer(ref, fs), testsig::buffer(deg, fs));
    worst = std::max(worst, std::abs(fast - oracle::stoi(ref, deg, fs)));
  }
  return {sdr_err < 1e-6 && std::abs(self - 1.0) < 1e-6 && worst < 0.01,
          fmt::format("SDR error {:.2g} dB, STOI(x,x) = {:.9f}, STOI vs oracle max diff {:.2g}",
                      sdr_err, self, worst)};
}

Outcome butterworth() {
  const auto x = testsig::sine(64000, 150.0, 32000);
  const auto y = highpass(testsig::buffer(x)).samples;
  const double at_fc = 20.0 * std::log10(testsig::tone_amplitude(y, 150.0, 32000, 32000));
  const auto d = highpass(testsig::buffer(std::vector<double>(64000, 1.0))).samples;
  double tail = 0.0;
  for (std::size_t i = 32000; i < d.size(); ++i) tail = std::max(tail, std::abs(d[i]));
  const double dc_db = 20.0 * std::log10(std::max(tail, 1e-300));
  return {std::abs(at_fc + 3.01) <= 0.1 && dc_db < -60.0,
          fmt::format("{:.4f} dB at 150 Hz, DC residue {:.1f} dB", at_fc, dc_db)};
}

Outcome mixer() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> snr(-5.0, 5.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto speech = testsig::buffer(testsig::speech_like(16000 + 31 * k, 32000, k));
    const auto noise = testsig::buffer(testsig::white_noise(7000 + 53 * k, 500 + k, 0.05));
    const double target = snr(rng);
    const MixResult r = mix_at_snr(speech, noise, target, static_cast<std::size_t>(17 * k));
    worst = std::max(worst, std::abs(component_snr_db(speech.samples, r.scaled_noise) - target));
  }
  return {worst < 1e-9, fmt::format("max SNR error {:.2g} dB over 100 draws", worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path dir = testsig::temp_dir("acceptance_determinism");
  write_wav(dir / "in.wav", testsig::buffer(testsig::speech_like(64000, 32000, 4)));
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return run_cli(args, sink, sink); };
  if (run({"init-weights", "--kind", "gru", "--seed", "1", "-o", (dir / "gru.nmwf").string()}) != 0 ||
      run({"init-weights", "--kind", "unet", "--seed", "2", "-o", (dir / "unet.nmwf").string()}) != 0) {
    return {false, "could not write weight files"};
  }
  std::string detail;
  bool ok = true;
  for (const std::string engine : {"baseline", "gru", "unet"}) {
    std::string first;
    for (const char* pass : {"a", "b"}) {
      std::vector<std::string> args{"enhance", "--engine", engine, "-o",
                                    (dir / engine / pass).string(), (dir / "in.wav").string()};
      if (engine != "baseline") {
        args.push_back("--weights");
        args.push_back((dir / (engine + ".nmwf")).string());
      }
      if (run(args) != 0) return {false, fmt::format("{} enhance failed", engine)};
      const std::string bytes = slurp(dir / engine / pass / "in.wav");
      if (first.empty()) {
        first = bytes;
      } else {
        const bool same = bytes == first && !bytes.empty();
        ok = ok && same;
        detail += fmt::format("{}{} {}", detail.empty() ? "" : ", ", engine,
                              same ? "identical" : "DIFFERENT");
      }
    }
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"cola-reconstruction", cola},
      {"latency", latency},
      {"band-layout", band_layout},
      {"baseline-gain-law", gain_law},
      {"baseline-suppression", baseline_suppression},
      {"neural-complexity", complexity},
      {"streaming-equals-batch", streaming_batch},
      {"neural-attenuation-floor", neural_floor},
      {"metrics-oracle", metrics_oracle},
      {"butterworth", butterworth},
      {"mixer-snr", mixer},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : checks) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    failed += o.pass ? 0 : 1;
    std::cout << fmt::format("{} {}: {}\n", o.pass ? "PASS" : "FAIL", name, o.detail) << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", checks.size() - failed, checks.size());
  return failed == 0 ? 0 : 1;
}
