#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "depest/nn/tensor.hpp"

// Tensor File Format: "MFTK", u32 version, u32 rank, u64 dims[rank], then
// float32 values, all little-endian.

namespace depest::io {

inline constexpr std::uint32_t kTensorFormatVersion = 1;

/// Little-endian byte writer/reader shared by the binary formats.
class ByteWriter {
 public:
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_f32(float v);
  void put_bytes(std::span<const char> bytes);
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(std::span<const char> bytes, std::string context) : bytes_(bytes), context_(std::move(context)) {}
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::string string(std::size_t n);
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;
  std::span<const char> bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

/// Appends rank, dims and float32 payload (no magic).
void encode_tensor_body(ByteWriter& out, const nn::Tensor& t);
nn::Tensor decode_tensor_body(ByteReader& in);

std::vector<char> encode_tensor(const nn::Tensor& t);
nn::Tensor decode_tensor(std::span<const char> bytes, const std::string& context = "tensor");

void write_tensor(const std::filesystem::path& path, const nn::Tensor& t);
nn::Tensor read_tensor(const std::filesystem::path& path);

std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const char> bytes);

}  // namespace depest::io
