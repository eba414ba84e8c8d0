#include "strel/safetensors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>
#include <zlib.h>

#include "strel/error.hpp"

namespace strel::safetensors {

static_assert(std::endian::native == std::endian::little,
              "safetensors I/O assumes a little-endian host");

namespace {

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "F64") return 8;
  if (dtype == "F32") return 4;
  if (dtype == "F16" || dtype == "BF16") return 2;
  throw CheckpointError("unsupported tensor dtype " + dtype);
}

float half_to_float(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  std::uint32_t exp = (h >> 10) & 0x1fu;
  std::uint32_t mant = h & 0x3ffu;
  std::uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      // Subnormal half: renormalize.
      exp = 127 - 15 + 1;
      while ((mant & 0x400u) == 0) {
        mant <<= 1;
        --exp;
      }
      mant &= 0x3ffu;
      bits = sign | (exp << 23) | (mant << 13);
    }
  } else if (exp == 0x1f) {
    bits = sign | 0x7f800000u | (mant << 13);
  } else {
    bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

std::size_t TensorEntry::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

File File::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return parse(std::move(bytes));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

File File::parse(std::vector<std::uint8_t> bytes) {
  File f;
  f.bytes_ = std::move(bytes);
  if (f.bytes_.size() < 8) throw CheckpointError("truncated safetensors header");
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, f.bytes_.data(), 8);
  if (header_len > f.bytes_.size() - 8) {
    throw CheckpointError("safetensors header length exceeds file size");
  }
  f.data_offset_ = 8 + static_cast<std::size_t>(header_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(f.bytes_.begin() + 8,
                                   f.bytes_.begin() + static_cast<std::ptrdiff_t>(f.data_offset_));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed safetensors header: ") + e.what());
  }
  if (!header.is_object()) throw CheckpointError("safetensors header is not an object");
  const std::size_t data_size = f.bytes_.size() - f.data_offset_;
  try {
    for (const auto& [name, value] : header.items()) {
      if (name == "__metadata__") {
        for (const auto& [k, v] : value.items()) f.metadata_[k] = v.get<std::string>();
        continue;
      }
      TensorEntry e;
      e.dtype = value.at("dtype").get<std::string>();
      e.shape = value.at("shape").get<std::vector<std::size_t>>();
      const auto offsets = value.at("data_offsets").get<std::vector<std::size_t>>();
      if (offsets.size() != 2) throw CheckpointError("tensor " + name + ": bad data_offsets");
      e.begin = offsets[0];
      e.end = offsets[1];
      if (e.begin > e.end || e.end > data_size) {
        throw CheckpointError("tensor " + name + " lies outside the data region");
      }
      if (e.end - e.begin != e.element_count() * dtype_size(e.dtype)) {
        throw CheckpointError("tensor " + name + ": byte size does not match shape");
      }
      f.tensors_.emplace(name, std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed safetensors header: ") + e.what());
  }
  return f;
}

const TensorEntry& File::entry(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw CheckpointError("missing tensor " + name);
  return it->second;
}

std::span<const std::uint8_t> File::data() const noexcept {
  return std::span<const std::uint8_t>(bytes_).subspan(data_offset_);
}

std::vector<double> File::values(const std::string& name) const {
  const auto& e = entry(name);
  const std::uint8_t* p = bytes_.data() + data_offset_ + e.begin;
  const std::size_t n = e.element_count();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (e.dtype == "F32") {
      float v;
      std::memcpy(&v, p + 4 * i, 4);
      out[i] = v;
    } else if (e.dtype == "F64") {
      std::memcpy(&out[i], p + 8 * i, 8);
    } else {
      std::uint16_t h;
      std::memcpy(&h, p + 2 * i, 2);
      out[i] = e.dtype == "BF16"
                   ? std::bit_cast<float>(static_cast<std::uint32_t>(h) << 16)
                   : half_to_float(h);
    }
  }
  return out;
}

std::vector<std::uint8_t> serialize(std::span<const NamedTensor> tensors,
                                    const std::map<std::string, std::string>& metadata) {
  nlohmann::json header = nlohmann::json::object();
  if (!metadata.empty()) header["__metadata__"] = metadata;
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    const std::size_t bytes = t.values.size() * sizeof(float);
    header[t.name] = {{"dtype", "F32"},
                      {"shape", t.shape},
                      {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  std::string text = header.dump();
  // Pad so the data region starts 8-byte aligned.
  while ((text.size() + 8) % 8 != 0) text.push_back(' ');
  std::vector<std::uint8_t> out(8 + text.size() + offset);
  const std::uint64_t len = text.size();
  std::memcpy(out.data(), &len, 8);
  std::memcpy(out.data() + 8, text.data(), text.size());
  std::uint8_t* data = out.data() + 8 + text.size();
  for (const auto& t : tensors) {
    std::memcpy(data, t.values.data(), t.values.size() * sizeof(float));
    data += t.values.size() * sizeof(float);
  }
  return out;
}

void write(const std::filesystem::path& path, std::span<const NamedTensor> tensors,
           const std::map<std::string, std::string>& metadata) {
  const auto bytes = serialize(tensors, metadata);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes a uInt length; feed large buffers in pieces.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = ::crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace strel::safetensors
