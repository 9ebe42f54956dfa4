#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "phpq/quantization.hpp"

namespace phpq {

/// Appends fixed-width fields to a little-endian bit stream: field bits are
/// written least-significant first, filling each byte from bit 0 upward.
class BitWriter {
 public:
  void put(std::uint32_t value, std::size_t bits);
  std::size_t bit_count() const noexcept { return bits_; }
  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t get(std::size_t bits);

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

/// ceil(n * M * ceil(log2 K) / 8).
std::size_t packed_code_bytes(std::size_t count, std::size_t num_books, std::size_t book_size);

std::vector<std::uint8_t> pack_codes(std::span<const QuantCode> codes, std::size_t num_books,
                                     std::size_t book_size);
std::vector<QuantCode> unpack_codes(std::span<const std::uint8_t> bytes, std::size_t count,
                                    std::size_t num_books, std::size_t book_size);

}  // namespace phpq
