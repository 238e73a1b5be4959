#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace gwe {

/// One named float64 tensor inside a checkpoint.
struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<double> data;

  bool operator==(const NamedTensor&) const = default;
};

/// Little-endian binary container shared by every checkpoint in the toolkit:
///
///   magic "GWETNSR1" | u32 version | kind string | u32 n_meta | (key, i64)*
///   | u32 n_tensors | (name, u32 rank, u64 dims[rank], f64 data[])*
///
/// Strings are u32 length followed by raw bytes.
struct TensorFile {
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;
  std::vector<std::pair<std::string, std::int64_t>> meta;
  std::vector<NamedTensor> tensors;

  std::int64_t meta_value(const std::string& key) const;
  const NamedTensor& tensor(const std::string& name) const;

  bool operator==(const TensorFile&) const = default;
};

void write_tensor_file(std::ostream& out, const TensorFile& file);
TensorFile read_tensor_file(std::istream& in);

void save_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile load_tensor_file(const std::filesystem::path& path);

}  // namespace gwe
