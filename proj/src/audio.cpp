// SPDX-License-Identifier: Apache-2.0
#include "sepipe/audio.h"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sepipe/errors.h"

namespace sepipe {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T load_le(const unsigned char* p) {
  std::make_unsigned_t<T> v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::make_unsigned_t<T>>(p[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

template <typename T>
void store_le(std::vector<unsigned char>& out, T value) {
  auto v = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
  }
}

struct ParsedWav {
  AudioBuffer audio;
  SampleFormat format;
};

ParsedWav parse_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const auto where = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(fmt::format("'{}' is not a RIFF/WAVE file", where));
  }

  std::uint16_t tag = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    auto len = static_cast<std::size_t>(load_le<std::uint32_t>(hdr + 4));
    std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      // Truncated final chunk: accept what is there for data, reject otherwise.
      if (std::memcmp(hdr, "data", 4) != 0) break;
      len = bytes.size() - body;
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (len < 16) throw FormatError(fmt::format("'{}': short fmt chunk", where));
      const unsigned char* f = bytes.data() + body;
      tag = load_le<std::uint16_t>(f);
      channels = load_le<std::uint16_t>(f + 2);
      rate = load_le<std::uint32_t>(f + 4);
      bits = load_le<std::uint16_t>(f + 14);
      if (tag == kFormatExtensible && len >= 26) {
        tag = load_le<std::uint16_t>(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt) throw FormatError(fmt::format("'{}': missing fmt chunk", where));
  if (data == nullptr) throw FormatError(fmt::format("'{}': missing data chunk", where));
  if (channels != 1) {
    throw FormatError(fmt::format("'{}': {} channels, only mono is supported", where, channels));
  }
  if (!is_supported_rate(static_cast<int>(rate))) {
    throw FormatError(
        fmt::format("'{}': sample rate {} Hz, expected 16000 or 32000", where, rate));
  }

  ParsedWav out;
  out.audio.sample_rate = static_cast<int>(rate);
  if (tag == kFormatPcm && bits == 16) {
    out.format = SampleFormat::kPcm16;
    const std::size_t n = data_len / 2;
    out.audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.audio.samples[i] = load_le<std::int16_t>(data + 2 * i) / 32768.0;
    }
  } else if (tag == kFormatFloat && bits == 32) {
    out.format = SampleFormat::kFloat32;
    const std::size_t n = data_len / 4;
    out.audio.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.audio.samples[i] = std::bit_cast<float>(load_le<std::uint32_t>(data + 4 * i));
    }
  } else {
    throw FormatError(fmt::format(
        "'{}': encoding tag {} with {} bits, expected 16-bit PCM or 32-bit float", where,
        tag, bits));
  }
  return out;
}

}  // namespace

void require_finite(std::span<const double> x, std::string_view what) {
  for (double v : x) {
    if (!std::isfinite(v)) throw UsageError(fmt::format("{} contains non-finite values", what));
  }
}

double mean_power(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

AudioBuffer read_wav(const std::filesystem::path& path) { return parse_wav(path).audio; }

SampleFormat wav_format(const std::filesystem::path& path) { return parse_wav(path).format; }

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio,
               SampleFormat format) {
  if (!is_supported_rate(audio.sample_rate)) {
    throw UsageError(fmt::format("cannot write sample rate {} Hz", audio.sample_rate));
  }
  require_finite(audio.samples, "audio to write");
  const bool pcm = format == SampleFormat::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t block = bits / 8;
  const auto data_len = static_cast<std::uint32_t>(audio.samples.size() * block);

  std::vector<unsigned char> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  store_le<std::uint32_t>(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  store_le<std::uint32_t>(out, 16);
  store_le<std::uint16_t>(out, pcm ? kFormatPcm : kFormatFloat);
  store_le<std::uint16_t>(out, 1);
  store_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate));
  store_le<std::uint32_t>(out, static_cast<std::uint32_t>(audio.sample_rate) * block);
  store_le<std::uint16_t>(out, static_cast<std::uint16_t>(block));
  store_le<std::uint16_t>(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  store_le<std::uint32_t>(out, data_len);
  for (double s : audio.samples) {
    if (pcm) {
      const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
      store_le<std::int16_t>(out, static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0)));
    } else {
      store_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError(fmt::format("short write to '{}'", path.string()));
}

}  // namespace sepipe
