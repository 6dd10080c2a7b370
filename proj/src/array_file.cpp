#include "glanet/array_file.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "glanet/errors.hpp"

namespace gla {

static_assert(std::endian::native == std::endian::little, "array files assume a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'G', 'L', 'A', 'N', 'E', 'T', 'A', 'F'};

std::uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 1;
    case torch::kFloat64: return 2;
    case torch::kInt64: return 3;
    case torch::kUInt8: return 4;
    default: throw ConfigError(std::string("array file: unsupported dtype ") + c10::toString(t));
  }
}

torch::ScalarType dtype_from_code(std::uint8_t code) {
  switch (code) {
    case 1: return torch::kFloat32;
    case 2: return torch::kFloat64;
    case 3: return torch::kInt64;
    case 4: return torch::kUInt8;
    default: throw DataError("array file: unknown dtype code " + std::to_string(code));
  }
}

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("array file: truncated");
  return value;
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("array file: truncated");
  return s;
}

}  // namespace

void write_array_file(const std::filesystem::path& path, const ArrayFile& file) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, ArrayFile::kFormatVersion);
    const std::string meta = file.metadata.dump();
    put<std::uint64_t>(out, meta.size());
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    put<std::uint64_t>(out, file.arrays.size());
    for (const auto& [name, tensor] : file.arrays) {
      const auto t = tensor.detach().cpu().contiguous();
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint8_t>(out, dtype_code(t.scalar_type()));
      put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dim()));
      for (auto d : t.sizes()) put<std::int64_t>(out, d);
      const std::uint64_t nbytes = t.numel() * t.element_size();
      put<std::uint64_t>(out, nbytes);
      out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes));
    }
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ArrayFile read_array_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError(path.string() + " is not a glanet array file");
  const auto version = get<std::uint32_t>(in);
  if (version != ArrayFile::kFormatVersion)
    throw DataError(path.string() + ": unsupported format version " + std::to_string(version));

  ArrayFile file;
  const auto meta_len = get<std::uint64_t>(in);
  try {
    file.metadata = nlohmann::json::parse(get_bytes(in, meta_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": corrupt metadata: " + e.what());
  }
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name = get_bytes(in, get<std::uint32_t>(in));
    const auto dtype = dtype_from_code(get<std::uint8_t>(in));
    const auto ndim = get<std::uint8_t>(in);
    std::vector<std::int64_t> dims(ndim);
    for (auto& d : dims) d = get<std::int64_t>(in);
    const auto nbytes = get<std::uint64_t>(in);
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    if (nbytes != static_cast<std::uint64_t>(t.numel() * t.element_size()))
      throw DataError(path.string() + ": size mismatch for array " + name);
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes));
    if (!in) throw DataError("array file: truncated");
    file.arrays.emplace(name, std::move(t));
  }
  return file;
}

}  // namespace gla
