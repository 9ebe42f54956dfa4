#include "phpq/binary_io.hpp"

#include <vector>

namespace phpq {

void BinaryWriter::write_array(const DenseArray& array) {
  write<std::uint32_t>(static_cast<std::uint32_t>(array.rank()));
  for (std::size_t e : array.shape()) write<std::uint32_t>(static_cast<std::uint32_t>(e));
  for (double v : array.values()) write<double>(v);
}

void BinaryReader::expect_magic(std::string_view magic) {
  std::string got(magic.size(), '\0');
  read_bytes(got);
  if (got != magic) {
    throw FormatError(FormatErrorCode::bad_magic, context_ + ": expected magic '" +
                                                      std::string(magic) + "'");
  }
}

DenseArray BinaryReader::read_array() {
  const auto rank = read<std::uint32_t>();
  if (rank == 0 || rank > 8) {
    throw FormatError(FormatErrorCode::malformed, context_ + ": bad tensor rank");
  }
  std::vector<std::size_t> shape(rank);
  std::size_t count = 1;
  for (auto& e : shape) {
    e = read<std::uint32_t>();
    if (e == 0) throw FormatError(FormatErrorCode::malformed, context_ + ": zero extent");
    count *= e;
  }
  std::vector<double> data(count);
  for (double& v : data) v = read<double>();
  return DenseArray(std::move(shape), std::move(data));
}

}  // namespace phpq
