#include "depest/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "depest/errors.hpp"

namespace depest::io {

void ByteWriter::put_u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::put_u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void ByteWriter::put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::put_bytes(std::span<const char> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

void ByteReader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) throw FormatError(context_ + ": unexpected end of data");
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string ByteReader::string(std::size_t n) {
  need(n);
  std::string s(bytes_.data() + pos_, n);
  pos_ += n;
  return s;
}

void encode_tensor_body(ByteWriter& out, const nn::Tensor& t) {
  out.put_u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) out.put_u64(d);
  for (double v : t.values()) out.put_f32(static_cast<float>(v));
}

nn::Tensor decode_tensor_body(ByteReader& in) {
  const std::uint32_t rank = in.u32();
  if (rank == 0 || rank > 8) throw FormatError("tensor rank " + std::to_string(rank) + " out of range");
  nn::Shape shape;
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint64_t d = in.u64();
    if (d == 0) throw FormatError("tensor dimension of size zero");
    count *= d;
    shape.push_back(static_cast<std::size_t>(d));
  }
  if (count * 4 > in.remaining()) throw FormatError("declared tensor shape exceeds payload size");
  std::vector<double> values(static_cast<std::size_t>(count));
  for (auto& v : values) v = static_cast<double>(in.f32());
  return nn::Tensor(std::move(shape), std::move(values));
}

std::vector<char> encode_tensor(const nn::Tensor& t) {
  ByteWriter w;
  w.put_bytes(std::span<const char>("MFTK", 4));
  w.put_u32(kTensorFormatVersion);
  encode_tensor_body(w, t);
  return w.bytes();
}

nn::Tensor decode_tensor(std::span<const char> bytes, const std::string& context) {
  ByteReader r(bytes, context);
  if (r.string(4) != "MFTK") throw FormatError(context + ": bad magic");
  const auto version = r.u32();
  if (version != kTensorFormatVersion) {
    throw FormatError(context + ": unsupported tensor format version " + std::to_string(version));
  }
  nn::Tensor t = decode_tensor_body(r);
  if (!r.at_end()) throw FormatError(context + ": trailing bytes after tensor payload");
  return t;
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_tensor(const std::filesystem::path& path, const nn::Tensor& t) { write_file(path, encode_tensor(t)); }

nn::Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path), path.string()); }

}  // namespace depest::io
