#include "phpq/bitpack.hpp"

#include "phpq/error.hpp"

namespace phpq {

void BitWriter::put(std::uint32_t value, std::size_t bits) {
  if (bits > 32) throw ParamError("BitWriter: field wider than 32 bits");
  if (bits < 32 && (value >> bits) != 0) throw ParamError("BitWriter: value exceeds field width");
  for (std::size_t b = 0; b < bits; ++b, ++bits_) {
    if (bits_ % 8 == 0) bytes_.push_back(0);
    if ((value >> b) & 1u) bytes_.back() |= static_cast<std::uint8_t>(1u << (bits_ % 8));
  }
}

std::uint32_t BitReader::get(std::size_t bits) {
  if (pos_ + bits > bytes_.size() * 8) {
    throw FormatError(FormatErrorCode::truncated, "bit stream exhausted");
  }
  std::uint32_t value = 0;
  for (std::size_t b = 0; b < bits; ++b, ++pos_) {
    if ((bytes_[pos_ / 8] >> (pos_ % 8)) & 1u) value |= 1u << b;
  }
  return value;
}

std::size_t packed_code_bytes(std::size_t count, std::size_t num_books, std::size_t book_size) {
  return (count * num_books * code_field_bits(book_size) + 7) / 8;
}

std::vector<std::uint8_t> pack_codes(std::span<const QuantCode> codes, std::size_t num_books,
                                     std::size_t book_size) {
  const std::size_t bits = code_field_bits(book_size);
  BitWriter writer;
  for (const auto& code : codes) {
    if (code.indices.size() != num_books) throw ShapeError("pack_codes: code length != M");
    for (auto idx : code.indices) {
      if (idx >= book_size) throw ParamError("pack_codes: codeword index out of range");
      writer.put(idx, bits);
    }
  }
  return writer.bytes();
}

std::vector<QuantCode> unpack_codes(std::span<const std::uint8_t> bytes, std::size_t count,
                                    std::size_t num_books, std::size_t book_size) {
  const std::size_t bits = code_field_bits(book_size);
  BitReader reader(bytes);
  std::vector<QuantCode> codes(count);
  for (auto& code : codes) {
    code.indices.resize(num_books);
    for (auto& idx : code.indices) {
      idx = reader.get(bits);
      if (idx >= book_size) {
        throw FormatError(FormatErrorCode::malformed, "packed code index out of range");
      }
    }
  }
  return codes;
}

}  // namespace phpq
