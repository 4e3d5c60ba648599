// SPDX-License-Identifier: Apache-2.0
#include "sepipe/weights.h"

#include <fmt/format.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include "sepipe/errors.h"
#include "sepipe/unet.h"

namespace sepipe {
namespace {

constexpr char kMagic[4] = {'N', 'M', 'W', 'F'};

class Reader {
 public:
  explicit Reader(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

  template <typename T>
  T read() {
    need(sizeof(T));
    std::make_unsigned_t<T> v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::make_unsigned_t<T>>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string read_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("weight file truncated inside the header");
  }

  const std::vector<unsigned char>& bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void put(std::vector<unsigned char>& out, T value) {
  auto v = static_cast<std::make_unsigned_t<T>>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::size_t product(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string dims_string(const std::vector<std::uint32_t>& dims) {
  return fmt::format("[{}]", fmt::join(dims, ", "));
}

std::vector<TensorSpec> gru_schema() {
  constexpr std::uint32_t in = 66, hidden = 128;
  std::vector<TensorSpec> s;
  for (const char* gate : {"z", "r", "h"}) {
    s.push_back({fmt::format("gru.W_{}", gate), {in, hidden}});
    s.push_back({fmt::format("gru.U_{}", gate), {hidden, hidden}});
    s.push_back({fmt::format("gru.bW_{}", gate), {hidden}});
    s.push_back({fmt::format("gru.bU_{}", gate), {hidden}});
  }
  s.push_back({"output.weight", {hidden, in}});
  s.push_back({"output.bias", {in}});
  return s;
}

// Number of inputs feeding one output of the tensor's layer.
std::size_t fan_in(const TensorSpec& spec) {
  const auto& d = spec.dims;
  if (spec.name.starts_with("gru.") && d.size() == 2) return d[0];
  if (spec.name == "output.weight" && d.size() == 2) return d[0] == 1 ? d[1] : d[0];
  if (d.size() == 4) return static_cast<std::size_t>(d[1]) * d[2] * d[3];  // full conv
  if (d.size() == 3 && spec.name.find(".dw.") != std::string::npos) return d[1] * d[2];
  if (d.size() == 3) return d[0] * d[2];  // transposed conv [in][out][2]
  if (d.size() == 2) return d[1];         // pointwise [out][in]
  return 1;
}

}  // namespace

std::string_view to_string(ModelKind kind) { return kind == ModelKind::kGru ? "gru" : "unet"; }

std::size_t Tensor::element_count() const { return product(dims); }
std::size_t TensorSpec::element_count() const { return product(dims); }

const Tensor& WeightFile::at(std::string_view name) const {
  for (const Tensor& t : tensors) {
    if (t.name == name) return t;
  }
  throw SchemaError(fmt::format("tensor '{}' missing", name));
}

WeightFile parse_weight_file(const std::vector<unsigned char>& bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a weight file (bad magic)");
  }
  r.read_string(4);
  const auto version = r.read<std::uint16_t>();
  if (version != kWeightFileVersion) {
    throw FormatError(fmt::format("unsupported weight file version {}", version));
  }
  const auto kind = r.read<std::uint8_t>();
  if (kind > 1) throw FormatError(fmt::format("unknown model kind {}", kind));
  const auto count = r.read<std::uint32_t>();

  WeightFile file;
  file.kind = static_cast<ModelKind>(kind);
  struct Entry {
    Tensor tensor;
    std::uint64_t offset;
  };
  std::vector<Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const auto name_len = r.read<std::uint16_t>();
    e.tensor.name = r.read_string(name_len);
    const auto rank = r.read<std::uint8_t>();
    for (std::uint8_t d = 0; d < rank; ++d) e.tensor.dims.push_back(r.read<std::uint32_t>());
    e.offset = r.read<std::uint64_t>();
    entries.push_back(std::move(e));
  }
  for (Entry& e : entries) {
    const std::size_t n = e.tensor.element_count();
    if (e.offset < r.position() || e.offset > bytes.size() || n > (bytes.size() - e.offset) / 4) {
      throw SchemaError(fmt::format("tensor '{}' data lies outside the file", e.tensor.name));
    }
    e.tensor.data.resize(n);
    const unsigned char* p = bytes.data() + e.offset;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (std::size_t b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[4 * i + b]) << (8 * b);
      e.tensor.data[i] = std::bit_cast<float>(bits);
    }
    file.tensors.push_back(std::move(e.tensor));
  }
  return file;
}

WeightFile read_weight_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open weight file '{}'", path.string()));
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return parse_weight_file(bytes);
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("'{}': {}", path.string(), e.what()));
  }
}

std::vector<unsigned char> serialize_weight_file(const WeightFile& file) {
  std::vector<unsigned char> out(kMagic, kMagic + 4);
  put<std::uint16_t>(out, kWeightFileVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(file.kind));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(file.tensors.size()));

  std::size_t header = out.size();
  for (const Tensor& t : file.tensors) header += 2 + t.name.size() + 1 + 4 * t.dims.size() + 8;
  std::uint64_t offset = header;
  for (const Tensor& t : file.tensors) {
    if (t.data.size() != t.element_count()) {
      throw SchemaError(fmt::format("tensor '{}' holds {} values for dims {}", t.name,
                                    t.data.size(), dims_string(t.dims)));
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint32_t>(out, d);
    put<std::uint64_t>(out, offset);
    offset += 4 * t.data.size();
  }
  for (const Tensor& t : file.tensors) {
    for (float v : t.data) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

void write_weight_file(const std::filesystem::path& path, const WeightFile& file) {
  const auto bytes = serialize_weight_file(file);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write '{}'", path.string()));
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(fmt::format("short write to '{}'", path.string()));
}

const std::vector<TensorSpec>& schema(ModelKind kind) {
  static const std::vector<TensorSpec> gru = gru_schema();
  static const std::vector<TensorSpec> unet = UnetArchitecture::standard().tensor_schema();
  return kind == ModelKind::kGru ? gru : unet;
}

void validate_schema(const WeightFile& file) {
  const auto& expected = schema(file.kind);
  std::set<std::string> seen;
  for (const Tensor& t : file.tensors) {
    if (!seen.insert(t.name).second) throw SchemaError(fmt::format("tensor '{}' appears twice", t.name));
    const auto it = std::find_if(expected.begin(), expected.end(),
                                 [&](const TensorSpec& s) { return s.name == t.name; });
    if (it == expected.end()) {
      throw SchemaError(fmt::format("unexpected tensor '{}' for a {} model", t.name,
                                    to_string(file.kind)));
    }
    if (t.dims != it->dims) {
      throw SchemaError(fmt::format("tensor '{}' has dims {}, expected {}", t.name,
                                    dims_string(t.dims), dims_string(it->dims)));
    }
    if (t.data.size() != t.element_count()) {
      throw SchemaError(fmt::format("tensor '{}' is truncated", t.name));
    }
    for (float v : t.data) {
      if (!std::isfinite(v)) throw SchemaError(fmt::format("tensor '{}' holds non-finite values", t.name));
    }
  }
  for (const TensorSpec& s : expected) {
    if (!seen.count(s.name)) throw SchemaError(fmt::format("tensor '{}' missing", s.name));
  }
}

WeightFile zero_weights(ModelKind kind) {
  return make_weight_file(kind, [](const std::string&, std::size_t) { return 0.0f; });
}

WeightFile random_weights(ModelKind kind, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  WeightFile file;
  file.kind = kind;
  for (const TensorSpec& spec : schema(kind)) {
    const double bound = scale / std::sqrt(static_cast<double>(fan_in(spec)));
    Tensor t{spec.name, spec.dims, std::vector<float>(spec.element_count())};
    for (float& v : t.data) {
      // Top 53 bits -> [0, 1); std::uniform_real_distribution is not portable.
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = static_cast<float>((2.0 * u - 1.0) * bound);
    }
    file.tensors.push_back(std::move(t));
  }
  return file;
}

}  // namespace sepipe
