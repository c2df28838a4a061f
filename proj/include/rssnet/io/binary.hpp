// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Little-endian record encoding shared by the sample, library and checkpoint
// files. Host byte order is assumed little-endian (checked at compile time).

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rssnet/errors.hpp"

namespace rssnet::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    buf_.append(b, n);
  }
  void tag(std::string_view magic) { bytes(magic.data(), magic.size()); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  template <typename T>
  void array(std::span<const T> v) {
    bytes(v.data(), v.size() * sizeof(T));
  }
  const std::string& buffer() const noexcept { return buf_; }
  std::string release() { return std::move(buf_); }

 private:
  std::string buf_;
};

// Bounds-checked cursor; truncation raises ParseError naming `what`.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

  void bytes(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  void expect_tag(std::string_view magic) {
    need(magic.size());
    if (data_.substr(pos_, magic.size()) != magic) {
      throw CompatibilityError(what_ + ": bad magic, not a " + std::string(magic.substr(0, 4)) + " file");
    }
    pos_ += magic.size();
  }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  template <typename T>
  void array(std::span<T> out) {
    bytes(out.data(), out.size() * sizeof(T));
  }
  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw ParseError(what_ + ": truncated at byte " + std::to_string(pos_));
  }

  std::string_view data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace rssnet::io
