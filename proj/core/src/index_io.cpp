#include "phpq/index_io.hpp"

#include <fstream>
#include <string>
#include <vector>

#include "phpq/binary_io.hpp"
#include "phpq/bitpack.hpp"
#include "phpq/error.hpp"

namespace phpq {

std::uint64_t index_code_offset(std::size_t num_books, std::size_t book_size,
                                std::size_t sub_dim) {
  return 8 + 4 * 4 + 8 + 4ull * num_books * book_size * sub_dim;
}

std::uint64_t index_file_size(std::size_t count, std::size_t num_books, std::size_t book_size,
                              std::size_t sub_dim) {
  return index_code_offset(num_books, book_size, sub_dim) +
         packed_code_bytes(count, num_books, book_size) + (4ull + 8ull) * count;
}

void write_index(std::ostream& out, const RetrievalIndex& index) {
  BinaryWriter w(out);
  w.write_magic({kIndexMagic, 8});
  w.write<std::uint32_t>(kIndexVersion);
  w.write<std::uint32_t>(static_cast<std::uint32_t>(index.num_books()));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(index.book_size()));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(index.sub_dim()));
  w.write<std::uint64_t>(index.size());
  for (double v : index.codebook().values()) w.write<float>(static_cast<float>(v));

  const std::size_t bits = code_field_bits(index.book_size());
  BitWriter packer;
  for (auto idx : index.codes()) packer.put(idx, bits);
  const auto& bytes = packer.bytes();
  w.write_bytes({reinterpret_cast<const char*>(bytes.data()), bytes.size()});

  for (Label l : index.labels()) w.write<std::int32_t>(l);
  for (ItemId id : index.ids()) w.write<std::int64_t>(id);
}

RetrievalIndex read_index(std::istream& in) {
  BinaryReader r(in, "index");
  r.expect_magic({kIndexMagic, 8});
  const auto version = r.read<std::uint32_t>();
  if (version != kIndexVersion) {
    throw FormatError(FormatErrorCode::bad_version,
                      "index version " + std::to_string(version) + " is not supported");
  }
  const std::size_t m = r.read<std::uint32_t>();
  const std::size_t k = r.read<std::uint32_t>();
  const std::size_t d = r.read<std::uint32_t>();
  const std::uint64_t n = r.read<std::uint64_t>();
  if (m == 0 || k < 2 || d == 0) throw FormatError(FormatErrorCode::malformed, "index header");

  DenseArray codebook({m, k, d});
  for (double& v : codebook.values()) v = r.read<float>();

  std::vector<std::uint8_t> packed(packed_code_bytes(n, m, k));
  r.read_bytes({reinterpret_cast<char*>(packed.data()), packed.size()});
  const auto codes = unpack_codes(packed, n, m, k);

  std::vector<Label> labels(n);
  for (auto& l : labels) l = r.read<std::int32_t>();
  RetrievalIndex index(std::move(codebook));
  for (std::uint64_t i = 0; i < n; ++i) index.add(codes[i], labels[i], r.read<std::int64_t>());
  return index;
}

void save_index(const std::filesystem::path& path, const RetrievalIndex& index) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorCode::io, "cannot open " + path.string());
  write_index(out, index);
}

RetrievalIndex load_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorCode::io, "cannot open " + path.string());
  return read_index(in);
}

}  // namespace phpq
