#pragma once

// Little-endian byte packing shared by the checkpoint and grid containers.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "cdpinn/errors.hpp"

namespace cdpinn::io {

class ByteWriter {
 public:
  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> v) {
    for (double x : v) f64(x);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  /// Appends the CRC-32 of everything written so far.
  void seal() { u32(checksum(buf_)); }

  const std::vector<std::uint8_t>& data() const { return buf_; }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!f) throw Error("write failed for '" + path + "'");
  }

  static std::uint32_t checksum(std::span<const std::uint8_t> b) {
    return static_cast<std::uint32_t>(::crc32(0L, b.data(), static_cast<uInt>(b.size())));
  }

 private:
  std::vector<std::uint8_t> buf_;
};

template <class E>
std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw E("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// Reader over a sealed buffer. Truncation and checksum failures raise `E`.
template <class E>
class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> buf) : buf_(std::move(buf)) {}

  void verify_seal() {
    if (buf_.size() < 4) throw E("corrupt file: too short");
    const size_t body = buf_.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= std::uint32_t(buf_[body + i]) << (8 * i);
    if (stored != ByteWriter::checksum(std::span(buf_.data(), body))) {
      throw E("corrupt file: checksum mismatch");
    }
    end_ = body;
  }

  void expect_magic(const char* magic) {
    need(4);
    if (std::memcmp(buf_.data() + pos_, magic, 4) != 0) throw E("corrupt file: bad magic bytes");
    pos_ += 4;
  }
  std::uint8_t u8() {
    need(1);
    return buf_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void f64s(std::span<double> out) {
    for (double& x : out) x = f64();
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == end_; }

 private:
  void need(size_t n) const {
    if (pos_ + n > end_) throw E("corrupt file: truncated payload");
  }

  std::vector<std::uint8_t> buf_;
  size_t pos_ = 0;
  size_t end_ = static_cast<size_t>(-1);
};

}  // namespace cdpinn::io
