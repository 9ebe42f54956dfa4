#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "phpq/retrieval.hpp"

namespace phpq {

inline constexpr char kIndexMagic[] = "PHPQINDX";
inline constexpr std::uint32_t kIndexVersion = 1;

/// Index file layout (little-endian):
///   magic "PHPQINDX", u32 version, u32 M, u32 K, u32 d, u64 N
///   f32 codebook, M x K x d row-major (normalized codewords)
///   packed codes: N*M fields of ceil(log2 K) bits, LSB-first, zero padded
///   to a whole byte
///   i32 labels[N], i64 ids[N]
void write_index(std::ostream& out, const RetrievalIndex& index);
RetrievalIndex read_index(std::istream& in);

void save_index(const std::filesystem::path& path, const RetrievalIndex& index);
RetrievalIndex load_index(const std::filesystem::path& path);

/// Byte offset of the packed code payload.
std::uint64_t index_code_offset(std::size_t num_books, std::size_t book_size,
                                std::size_t sub_dim);
/// Exact file size for an index of `count` items.
std::uint64_t index_file_size(std::size_t count, std::size_t num_books, std::size_t book_size,
                              std::size_t sub_dim);

}  // namespace phpq
