#pragma once

// Reader and writer for the safetensors container: an 8-byte little-endian
// header length, a JSON header mapping tensor names to dtype, shape and byte
// offsets, then the raw tensor bytes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace strel::safetensors {

struct TensorEntry {
  std::string dtype;  // F32, F64, F16 or BF16 are readable
  std::vector<std::size_t> shape;
  std::size_t begin = 0;  // byte range within the data region
  std::size_t end = 0;

  std::size_t element_count() const;
};

class File {
 public:
  // Throws CheckpointError on any structural problem.
  static File read(const std::filesystem::path& path);
  static File parse(std::vector<std::uint8_t> bytes);

  const std::map<std::string, std::string>& metadata() const noexcept {
    return metadata_;
  }
  const std::map<std::string, TensorEntry>& tensors() const noexcept {
    return tensors_;
  }
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const TensorEntry& entry(const std::string& name) const;

  // Converts to double whatever the stored dtype.
  std::vector<double> values(const std::string& name) const;
  std::span<const std::uint8_t> data() const noexcept;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t data_offset_ = 0;
  std::map<std::string, std::string> metadata_;
  std::map<std::string, TensorEntry> tensors_;
};

struct NamedTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<const float> values;
};

// Tensors are laid out in the given order, stored as F32.
std::vector<std::uint8_t> serialize(std::span<const NamedTensor> tensors,
                                    const std::map<std::string, std::string>& metadata);
void write(const std::filesystem::path& path, std::span<const NamedTensor> tensors,
           const std::map<std::string, std::string>& metadata);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace strel::safetensors
