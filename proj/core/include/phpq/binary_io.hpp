#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include "phpq/error.hpp"
#include "phpq/numerics.hpp"

namespace phpq {

/// Little-endian scalar writer over a std::ostream.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  void write(T value) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(bytes.begin(), bytes.end());
    }
    out_.write(bytes.data(), sizeof(T));
    check();
  }

  void write_bytes(std::span<const char> bytes) {
    out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    check();
  }

  void write_magic(std::string_view magic) { write_bytes({magic.data(), magic.size()}); }

  /// rank (u32), extents (u32 each), f64 payload.
  void write_array(const DenseArray& array);

 private:
  void check() {
    if (!out_) throw FormatError(FormatErrorCode::io, "write failed");
  }
  std::ostream& out_;
};

/// Little-endian scalar reader; throws FormatError(truncated) at end of input.
class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string context) : in_(in), context_(std::move(context)) {}

  template <class T>
    requires std::is_arithmetic_v<T>
  T read() {
    std::array<char, sizeof(T)> bytes;
    read_bytes(bytes);
    if constexpr (std::endian::native == std::endian::big) {
      std::reverse(bytes.begin(), bytes.end());
    }
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }

  void read_bytes(std::span<char> bytes) {
    in_.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (in_.gcount() != static_cast<std::streamsize>(bytes.size())) {
      throw FormatError(FormatErrorCode::truncated, context_ + ": unexpected end of data");
    }
  }

  void expect_magic(std::string_view magic);
  DenseArray read_array();
  const std::string& context() const noexcept { return context_; }

 private:
  std::istream& in_;
  std::string context_;
};

}  // namespace phpq
