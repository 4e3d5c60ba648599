// SPDX-License-Identifier: Apache-2.0
//
// NMWF weight files. All integers and floats are little-endian.
//
//   offset  size  field
//   0       4     magic "NMWF"
//   4       2     u16 version (1)
//   6       1     u8 model kind (0 = GRU, 1 = U-Net)
//   7       4     u32 tensor count
//   11      ...   tensor directory, one entry per tensor:
//                   u16 name length, name bytes (UTF-8),
//                   u8 rank, rank x u32 dims,
//                   u64 byte offset of the data from the start of the file
//   ...           payload: float32 tensors, row-major, at their offsets
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sepipe {

inline constexpr std::uint16_t kWeightFileVersion = 1;

enum class ModelKind : std::uint8_t { kGru = 0, kUnet = 1 };

std::string_view to_string(ModelKind kind);

struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
};

struct TensorSpec {
  std::string name;
  std::vector<std::uint32_t> dims;

  std::size_t element_count() const;
};

struct WeightFile {
  ModelKind kind = ModelKind::kGru;
  std::vector<Tensor> tensors;

  const Tensor& at(std::string_view name) const;
};

/// FormatError for bad magic, version, kind or out-of-bounds offsets.
WeightFile read_weight_file(const std::filesystem::path& path);
WeightFile parse_weight_file(const std::vector<unsigned char>& bytes);

std::vector<unsigned char> serialize_weight_file(const WeightFile& file);
void write_weight_file(const std::filesystem::path& path, const WeightFile& file);

/// The exact tensor list a model of `kind` requires.
const std::vector<TensorSpec>& schema(ModelKind kind);

/// SchemaError naming the first missing, unexpected, duplicate or
/// wrong-shaped tensor, or one holding non-finite values.
void validate_schema(const WeightFile& file);

/// Weight file with every schema tensor filled by `fill(name, index)`.
template <typename Fill>
WeightFile make_weight_file(ModelKind kind, Fill&& fill) {
  WeightFile file;
  file.kind = kind;
  for (const TensorSpec& spec : schema(kind)) {
    Tensor t{spec.name, spec.dims, std::vector<float>(spec.element_count())};
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = fill(spec.name, i);
    file.tensors.push_back(std::move(t));
  }
  return file;
}

WeightFile zero_weights(ModelKind kind);
/// Uniform in [-scale/sqrt(fan_in), scale/sqrt(fan_in)] from a seeded generator.
WeightFile random_weights(ModelKind kind, std::uint64_t seed, double scale = 1.0);

}  // namespace sepipe
