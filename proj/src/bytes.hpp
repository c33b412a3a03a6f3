#pragma once

// Little-endian byte packing helpers shared by the binary readers/writers.
// ByteReader tracks its offset so every parse failure can report the exact
// byte position.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "pinit/errors.hpp"

namespace pinit::detail {

class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16le(uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back((v >> (8 * i)) & 0xff);
  }
  void u32le(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back((v >> (8 * i)) & 0xff);
  }
  void u64le(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back((v >> (8 * i)) & 0xff);
  }
  void f64le(double v) { u64le(std::bit_cast<uint64_t>(v)); }
  void raw(const void* data, size_t n) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  size_t size() const { return buf_.size(); }
  const std::vector<uint8_t>& data() const { return buf_; }

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const uint8_t* data, size_t size, std::string source)
      : data_(data), size_(size), source_(std::move(source)) {}
  explicit ByteReader(const std::vector<uint8_t>& bytes,
                      std::string source = "input")
      : ByteReader(bytes.data(), bytes.size(), std::move(source)) {}

  size_t offset() const { return off_; }
  size_t remaining() const { return size_ - off_; }

  uint8_t u8() {
    need(1, "byte");
    return data_[off_++];
  }
  uint16_t u16le() {
    need(2, "16-bit value");
    uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= uint16_t(data_[off_ + i]) << (8 * i);
    off_ += 2;
    return v;
  }
  uint32_t u32le() {
    need(4, "32-bit value");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(data_[off_ + i]) << (8 * i);
    off_ += 4;
    return v;
  }
  uint64_t u64le() {
    need(8, "64-bit value");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(data_[off_ + i]) << (8 * i);
    off_ += 8;
    return v;
  }
  double f64le() { return std::bit_cast<double>(u64le()); }

  uint32_t u32be() {
    need(4, "32-bit value");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[off_ + i];
    off_ += 4;
    return v;
  }

  void raw(void* out, size_t n) {
    need(n, "payload");
    std::memcpy(out, data_ + off_, n);
    off_ += n;
  }

  void expect_magic(const char* magic, size_t len) {
    need(len, "magic");
    if (std::memcmp(data_ + off_, magic, len) != 0) {
      fail("bad magic, expected \"" + std::string(magic, len) + "\"");
    }
    off_ += len;
  }

  void expect_end() {
    if (off_ != size_) {
      fail(std::to_string(size_ - off_) + " trailing bytes");
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(source_ + ": " + msg, off_);
  }

 private:
  void need(size_t n, const char* what) {
    if (size_ - off_ < n) {
      fail(std::string("truncated: expected ") + what);
    }
  }

  const uint8_t* data_;
  size_t size_;
  size_t off_ = 0;
  std::string source_;
};

// Whole-file helpers. Open failures throw pinit::Error naming the path.
std::vector<uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path,
                      const std::vector<uint8_t>& bytes);

}  // namespace pinit::detail
