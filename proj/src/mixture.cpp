// SPDX-License-Identifier: Apache-2.0
#include "sepipe/mixture.h"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>

#include "sepipe/errors.h"
#include "sepipe/resample.h"

namespace sepipe {
namespace fs = std::filesystem;

namespace {

// Same mapping on every standard library, unlike uniform_real_distribution.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

AudioBuffer to_processing_rate(AudioBuffer x) {
  return x.sample_rate == 16000 ? resample_2x(x, Direction::kUp) : x;
}

}  // namespace

void MixSpec::validate() const {
  if (!std::isfinite(snr_min_db) || !std::isfinite(snr_max_db) || snr_min_db > snr_max_db) {
    throw ConfigError(fmt::format("invalid SNR range [{}, {}]", snr_min_db, snr_max_db));
  }
  if (!std::isfinite(level_min_db) || !std::isfinite(level_max_db) ||
      level_min_db > level_max_db) {
    throw ConfigError(fmt::format("invalid level range [{}, {}]", level_min_db, level_max_db));
  }
  if (!(hp_cutoff_hz > 0.0)) throw ConfigError("high-pass cutoff must be positive");
}

double noise_gain_for_snr(std::span<const double> speech, std::span<const double> noise,
                          double snr_db) {
  const double ps = mean_power(speech);
  const double pn = mean_power(noise);
  if (!(ps > 0.0)) throw UsageError("speech has zero power");
  if (!(pn > 0.0)) throw UsageError("noise has zero power");
  if (!std::isfinite(snr_db)) throw UsageError("SNR must be finite");
  return std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
}

double component_snr_db(std::span<const double> speech, std::span<const double> noise) {
  return 10.0 * std::log10(mean_power(speech) / mean_power(noise));
}

std::vector<double> fit_noise(std::span<const double> noise, std::size_t length,
                              std::size_t offset) {
  if (noise.empty()) throw UsageError("noise is empty");
  std::vector<double> out(length);
  std::size_t src = offset % noise.size();
  for (double& v : out) {
    v = noise[src];
    if (++src == noise.size()) src = 0;
  }
  return out;
}

MixResult mix_at_snr(const AudioBuffer& speech, const AudioBuffer& noise, double snr_db,
                     std::size_t noise_offset) {
  if (speech.sample_rate != noise.sample_rate) {
    throw UsageError(fmt::format("speech is {} Hz but noise is {} Hz", speech.sample_rate,
                                 noise.sample_rate));
  }
  MixResult r;
  r.scaled_noise = fit_noise(noise.samples, speech.size(), noise_offset);
  r.noise_gain = noise_gain_for_snr(speech.samples, r.scaled_noise, snr_db);
  r.mixture.sample_rate = speech.sample_rate;
  r.mixture.samples.resize(speech.size());
  for (std::size_t n = 0; n < speech.size(); ++n) {
    r.scaled_noise[n] *= r.noise_gain;
    r.mixture.samples[n] = speech.samples[n] + r.scaled_noise[n];
  }
  return r;
}

std::vector<double> Biquad::filter(std::span<const double> x) const {
  std::vector<double> y(x.size());
  double z1 = 0.0, z2 = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double out = b0 * x[n] + z1;
    z1 = b1 * x[n] - a1 * out + z2;
    z2 = b2 * x[n] - a2 * out;
    y[n] = out;
  }
  return y;
}

double Biquad::power_response(double freq_hz, int sample_rate) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate;
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = z1 * z1;
  const auto h = (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
  return std::norm(h);
}

Biquad butterworth_highpass(double cutoff_hz, int sample_rate) {
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < sample_rate / 2.0)) {
    throw UsageError(fmt::format("cutoff {} Hz outside (0, {}) Hz", cutoff_hz, sample_rate / 2.0));
  }
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k * k);
  Biquad q;
  q.b0 = norm;
  q.b1 = -2.0 * norm;
  q.b2 = norm;
  q.a1 = 2.0 * (k * k - 1.0) * norm;
  q.a2 = (1.0 - std::numbers::sqrt2 * k + k * k) * norm;
  return q;
}

AudioBuffer highpass(const AudioBuffer& x, double cutoff_hz) {
  return {butterworth_highpass(cutoff_hz, x.sample_rate).filter(x.samples), x.sample_rate};
}

AudioBuffer convolve_ir(const AudioBuffer& speech, const AudioBuffer& ir, ExecPolicy policy) {
  if (ir.samples.empty()) throw UsageError("impulse response is empty");
  if (ir.sample_rate != speech.sample_rate) {
    throw UsageError(fmt::format("impulse response is {} Hz but speech is {} Hz", ir.sample_rate,
                                 speech.sample_rate));
  }
  AudioBuffer out{std::vector<double>(speech.size()), speech.sample_rate};
  kernels::fir_filter(policy, speech.samples, ir.samples, out.samples);
  return out;
}

void write_manifest(const fs::path& path, const std::vector<ManifestRow>& rows) {
  std::string text;
  for (const auto& r : rows) {
    text += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\n", r.id, r.speech_path, r.noise_path, r.snr_db,
                        r.noise_gain, r.offset_samples);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write failed: {}", path.string()));
}

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 6) {
      throw FormatError(fmt::format("{}:{}: expected 6 fields, got {}", path.string(), line_no,
                                    f.size()));
    }
    try {
      rows.push_back({f[0], f[1], f[2], std::stod(f[3]), std::stod(f[4]), std::stoull(f[5])});
    } catch (const std::logic_error&) {
      throw FormatError(fmt::format("{}:{}: malformed number", path.string(), line_no));
    }
  }
  return rows;
}

std::vector<PlannedItem> plan_test_set(const std::vector<fs::path>& speech,
                                       const std::vector<fs::path>& noise,
                                       const std::vector<fs::path>& irs, const MixSpec& spec,
                                       std::size_t count) {
  spec.validate();
  if (speech.empty()) throw UsageError("no speech files");
  if (noise.empty()) throw UsageError("no noise files");
  std::mt19937_64 rng(spec.seed);
  std::vector<PlannedItem> plan(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& p = plan[i];
    p.id = fmt::format("mix{:05}", i);
    p.speech_path = speech[rng() % speech.size()];
    p.noise_path = noise[rng() % noise.size()];
    if (!irs.empty()) p.ir_path = irs[rng() % irs.size()];
    p.snr_db = uniform(rng, spec.snr_min_db, spec.snr_max_db);
    p.level_db = uniform(rng, spec.level_min_db, spec.level_max_db);
    p.offset_draw = rng();
  }
  return plan;
}

RenderedItem render_item(const PlannedItem& item, const MixSpec& spec) {
  AudioBuffer speech = to_processing_rate(read_wav(item.speech_path));
  const AudioBuffer noise = to_processing_rate(read_wav(item.noise_path));
  if (noise.samples.empty()) throw UsageError(fmt::format("{} is empty", item.noise_path.string()));

  const double level = std::pow(10.0, item.level_db / 20.0);
  for (double& v : speech.samples) v *= level;
  if (item.ir_path) speech = convolve_ir(speech, to_processing_rate(read_wav(*item.ir_path)));

  const std::size_t offset = item.offset_draw % noise.size();
  const MixResult mix = mix_at_snr(speech, noise, item.snr_db, offset);

  RenderedItem r;
  r.mixture = highpass(mix.mixture, spec.hp_cutoff_hz);
  r.reference = highpass(speech, spec.hp_cutoff_hz);
  r.row = {item.id,          item.speech_path.string(), item.noise_path.string(),
           item.snr_db,      mix.noise_gain,            offset};
  return r;
}

std::vector<fs::path> list_wavs(const fs::path& dir) {
  std::error_code ec;
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".wav") out.push_back(entry.path());
  }
  if (ec) throw IoError(fmt::format("cannot list {}: {}", dir.string(), ec.message()));
  std::sort(out.begin(), out.end());
  return out;
}

TestSetResult make_test_set(const fs::path& speech_dir, const fs::path& noise_dir,
                            const MixSpec& spec, std::size_t count, const fs::path& out_dir,
                            const std::optional<fs::path>& ir_dir) {
  const auto speech = list_wavs(speech_dir);
  const auto noise = list_wavs(noise_dir);
  const auto irs = ir_dir ? list_wavs(*ir_dir) : std::vector<fs::path>{};
  if (speech.empty()) throw UsageError(fmt::format("no WAV files in {}", speech_dir.string()));
  if (noise.empty()) throw UsageError(fmt::format("no WAV files in {}", noise_dir.string()));
  if (ir_dir && irs.empty()) throw UsageError(fmt::format("no WAV files in {}", ir_dir->string()));

  const auto plan = plan_test_set(speech, noise, irs, spec, count);
  fs::create_directories(out_dir / "mixtures");
  fs::create_directories(out_dir / "references");

  std::vector<std::optional<ManifestRow>> rows(plan.size());
  std::vector<std::string> failures(plan.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(plan.size()); ++i) {
    const auto& item = plan[static_cast<std::size_t>(i)];
    try {
      RenderedItem r = render_item(item, spec);
      write_wav(out_dir / "mixtures" / (item.id + ".wav"), r.mixture);
      write_wav(out_dir / "references" / (item.id + ".wav"), r.reference);
      rows[static_cast<std::size_t>(i)] = std::move(r.row);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(i)] = e.what();
    }
  }

  TestSetResult result;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (rows[i]) {
      result.rows.push_back(std::move(*rows[i]));
    } else {
      result.errors.push_back({plan[i].id, failures[i]});
    }
  }
  write_manifest(out_dir / "manifest.tsv", result.rows);
  return result;
}

}  // namespace sepipe
