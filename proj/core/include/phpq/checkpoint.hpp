#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "phpq/model.hpp"
#include "phpq/optimizer.hpp"

namespace phpq {

inline constexpr char kCheckpointMagic[] = "PHPQCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::optional<AdamOptimizer> optimizer;
};

/// Layout (little-endian):
///   magic "PHPQCKPT", u32 version
///   hyper: 9 x u32 stage extents (H,W,C per stage), u32 D, M, K, Nc,
///          u8 fusion, 3 x f64 rho, f64 alpha, u32 kappa,
///          f64 tau, m_plus, m_minus, gamma
///   u32 tensor count, then each tensor: u32 rank, u32 extents, f64 data
///   u8 has_optimizer; if set: u64 step, 4 x f64 (lr, beta1, beta2, eps),
///          u32 count, first moments, second moments (tensors as above)
void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace phpq
