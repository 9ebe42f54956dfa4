#include "phpq/checkpoint.hpp"

#include <fstream>
#include <string>

#include "phpq/binary_io.hpp"
#include "phpq/error.hpp"

namespace phpq {
namespace {

void write_stage(BinaryWriter& w, const StageDims& s) {
  w.write<std::uint32_t>(static_cast<std::uint32_t>(s.height));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(s.width));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(s.channels));
}

StageDims read_stage(BinaryReader& r) {
  StageDims s;
  s.height = r.read<std::uint32_t>();
  s.width = r.read<std::uint32_t>();
  s.channels = r.read<std::uint32_t>();
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  const ModelParams& p = checkpoint.params;
  const ModelHyper& h = p.hyper;
  BinaryWriter w(out);
  w.write_magic({kCheckpointMagic, 8});
  w.write<std::uint32_t>(kCheckpointVersion);
  write_stage(w, h.dims.stage2);
  write_stage(w, h.dims.stage3);
  write_stage(w, h.dims.stage4);
  w.write<std::uint32_t>(static_cast<std::uint32_t>(h.embedding_dim));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(h.num_books));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(h.book_size));
  w.write<std::uint32_t>(static_cast<std::uint32_t>(h.num_classes));
  w.write<std::uint8_t>(static_cast<std::uint8_t>(h.fusion));
  w.write<double>(h.rhos.rho_s2);
  w.write<double>(h.rhos.rho_s3);
  w.write<double>(h.rhos.rho_s4);
  w.write<double>(h.alpha);
  w.write<std::uint32_t>(static_cast<std::uint32_t>(h.kappa));
  w.write<double>(h.loss.tau);
  w.write<double>(h.loss.m_plus);
  w.write<double>(h.loss.m_minus);
  w.write<double>(h.loss.gamma);

  const auto tensors = p.tensors();
  w.write<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const DenseArray* t : tensors) w.write_array(*t);

  w.write<std::uint8_t>(checkpoint.optimizer ? 1 : 0);
  if (checkpoint.optimizer) {
    const AdamOptimizer& opt = *checkpoint.optimizer;
    w.write<std::uint64_t>(opt.step_count());
    w.write<double>(opt.config().learning_rate);
    w.write<double>(opt.config().beta1);
    w.write<double>(opt.config().beta2);
    w.write<double>(opt.config().epsilon);
    w.write<std::uint32_t>(static_cast<std::uint32_t>(opt.first_moments().size()));
    for (const auto& m : opt.first_moments()) w.write_array(m);
    for (const auto& v : opt.second_moments()) w.write_array(v);
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  BinaryReader r(in, "checkpoint");
  r.expect_magic({kCheckpointMagic, 8});
  const auto version = r.read<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorCode::bad_version,
                      "checkpoint version " + std::to_string(version) + " is not supported");
  }
  ModelHyper h;
  h.dims.stage2 = read_stage(r);
  h.dims.stage3 = read_stage(r);
  h.dims.stage4 = read_stage(r);
  h.embedding_dim = r.read<std::uint32_t>();
  h.num_books = r.read<std::uint32_t>();
  h.book_size = r.read<std::uint32_t>();
  h.num_classes = r.read<std::uint32_t>();
  const auto fusion = r.read<std::uint8_t>();
  if (fusion > static_cast<std::uint8_t>(FusionMode::last_stage_only)) {
    throw FormatError(FormatErrorCode::malformed, "checkpoint: unknown fusion mode");
  }
  h.fusion = static_cast<FusionMode>(fusion);
  h.rhos.rho_s2 = r.read<double>();
  h.rhos.rho_s3 = r.read<double>();
  h.rhos.rho_s4 = r.read<double>();
  h.alpha = r.read<double>();
  h.kappa = r.read<std::uint32_t>();
  h.loss.tau = r.read<double>();
  h.loss.m_plus = r.read<double>();
  h.loss.m_minus = r.read<double>();
  h.loss.gamma = r.read<double>();
  try {
    h.validate();
  } catch (const Error& e) {
    throw FormatError(FormatErrorCode::malformed, std::string("checkpoint hyperparameters: ") +
                                                      e.what());
  }

  Checkpoint ckpt{ModelParams::init(h, 0), std::nullopt};
  auto tensors = ckpt.params.tensors();
  const auto count = r.read<std::uint32_t>();
  if (count != tensors.size()) {
    throw FormatError(FormatErrorCode::malformed, "checkpoint: unexpected tensor count");
  }
  for (DenseArray* t : tensors) {
    DenseArray loaded = r.read_array();
    if (loaded.shape() != t->shape()) {
      throw FormatError(FormatErrorCode::dim_mismatch,
                        "checkpoint: tensor shape disagrees with hyperparameters");
    }
    *t = std::move(loaded);
  }

  if (r.read<std::uint8_t>() != 0) {
    const auto step = r.read<std::uint64_t>();
    AdamConfig cfg;
    cfg.learning_rate = r.read<double>();
    cfg.beta1 = r.read<double>();
    cfg.beta2 = r.read<double>();
    cfg.epsilon = r.read<double>();
    const auto n = r.read<std::uint32_t>();
    std::vector<DenseArray> first, second;
    for (std::uint32_t i = 0; i < n; ++i) first.push_back(r.read_array());
    for (std::uint32_t i = 0; i < n; ++i) second.push_back(r.read_array());
    AdamOptimizer opt(cfg);
    opt.restore(step, std::move(first), std::move(second));
    ckpt.optimizer = std::move(opt);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatErrorCode::io, "cannot open " + path.string());
  write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorCode::io, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace phpq
