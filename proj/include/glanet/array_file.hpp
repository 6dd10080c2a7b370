#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/types.h>

namespace gla {

// Single-file container of named arrays plus a JSON metadata block.
//
// Layout (all integers little-endian):
//   magic "GLANETAF" | u32 format_version | u64 metadata_bytes | metadata (UTF-8 JSON)
//   u64 array_count | per array:
//     u32 name_bytes | name | u8 dtype | u8 ndim | i64 dims[ndim] | u64 data_bytes | raw C-order data
// dtype codes: 1 float32, 2 float64, 3 int64, 4 uint8.
struct ArrayFile {
  static constexpr std::uint32_t kFormatVersion = 1;

  nlohmann::json metadata = nlohmann::json::object();
  // Sorted by name so writes are byte-reproducible.
  std::map<std::string, torch::Tensor> arrays;
};

// Writes to a temporary sibling and renames it into place.
void write_array_file(const std::filesystem::path& path, const ArrayFile& file);
ArrayFile read_array_file(const std::filesystem::path& path);

}  // namespace gla
