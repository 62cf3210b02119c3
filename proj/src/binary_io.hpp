#pragma once

// Little-endian primitive encoding shared by the FEMB and FCKP formats.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fitb::detail {

class ByteWriter {
 public:
  void bytes(std::string_view raw) { buffer_.append(raw); }

  template <class UInt>
  void uint(UInt value) {
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      buffer_.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
    }
  }

  void f32(float value) { uint(std::bit_cast<std::uint32_t>(value)); }
  void f64(double value) { uint(std::bit_cast<std::uint64_t>(value)); }

  const std::string& data() const { return buffer_; }

 private:
  std::string buffer_;
};

/// Cursor over an in-memory file image. Reads past the end return false and
/// leave the output untouched so callers can report the failing offset.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return data_.size() - offset_; }

  bool bytes(std::size_t n, std::string_view& out) {
    if (remaining() < n) return false;
    out = data_.substr(offset_, n);
    offset_ += n;
    return true;
  }

  template <class UInt>
  bool uint(UInt& out) {
    if (remaining() < sizeof(UInt)) return false;
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      value |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[offset_ + i])) << (8 * i);
    }
    offset_ += sizeof(UInt);
    out = static_cast<UInt>(value);
    return true;
  }

  bool f32(float& out) {
    std::uint32_t raw = 0;
    if (!uint(raw)) return false;
    out = std::bit_cast<float>(raw);
    return true;
  }

  bool f64(double& out) {
    std::uint64_t raw = 0;
    if (!uint(raw)) return false;
    out = std::bit_cast<double>(raw);
    return true;
  }

 private:
  std::string_view data_;
  std::size_t offset_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace fitb::detail
