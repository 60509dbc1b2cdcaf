#pragma once

// Binary checkpoint: magic, format version, configuration hash, then every
// parameter as (name, rows, cols, little-endian f64 values).

#include <filesystem>
#include <string>

#include "eign/io.hpp"
#include "eign/nn.hpp"

namespace eign {

class CheckpointError : public Error {
 public:
  using Error::Error;
};

inline constexpr char kCheckpointMagic[8] = {'E', 'I', 'G', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint64_t kCheckpointVersion = 1;

inline void save_checkpoint(std::ostream& os, const ModelConfig& cfg, const ParamStore& ps) {
  os.write(kCheckpointMagic, 8);
  write_u64_le(os, kCheckpointVersion);
  write_u64_le(os, config_hash(cfg));
  const std::string canon = cfg.canonical();
  write_u64_le(os, canon.size());
  os.write(canon.data(), static_cast<std::streamsize>(canon.size()));
  write_u64_le(os, ps.size());
  for (const auto& p : ps.params()) {
    write_u64_le(os, p.name.size());
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u64_le(os, p.value.rows());
    write_u64_le(os, p.value.cols());
    for (double v : p.value.data()) write_f64_le(os, v);
  }
  if (!os) throw CheckpointError("checkpoint write failed");
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ParamStore& ps) {
  auto os = open_out(path, true);
  save_checkpoint(os, cfg, ps);
}

/// Reads parameters for `cfg`; the stored hash, names and shapes must match.
inline ParamStore load_checkpoint(std::istream& is, const ModelConfig& cfg) {
  try {
    char magic[8];
    if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kCheckpointMagic)) throw CheckpointError("not a checkpoint");
    const auto version = read_u64_le(is);
    if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto hash = read_u64_le(is);
    const auto clen = read_u64_le(is);
    if (clen > (1u << 20)) throw CheckpointError("corrupt checkpoint header");
    std::string canon(clen, '\0');
    is.read(canon.data(), static_cast<std::streamsize>(clen));
    if (hash != config_hash(cfg))
      throw CheckpointError("checkpoint was written for a different configuration: " + canon);
    ParamStore ps = init_params(cfg, 0);
    const auto count = read_u64_le(is);
    if (count != ps.size()) throw CheckpointError("parameter count mismatch");
    for (auto& p : ps.params()) {
      const auto len = read_u64_le(is);
      if (len > 4096) throw CheckpointError("corrupt parameter name");
      std::string name(len, '\0');
      is.read(name.data(), static_cast<std::streamsize>(len));
      const auto rows = read_u64_le(is), cols = read_u64_le(is);
      if (name != p.name || rows != p.value.rows() || cols != p.value.cols())
        throw CheckpointError("parameter '" + name + "' does not match the model");
      for (double& v : p.value.data()) v = read_f64_le(is);
    }
    return ps;
  } catch (const IoError& e) {
    throw CheckpointError(std::string("truncated checkpoint: ") + e.what());
  }
}

inline ParamStore load_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg) {
  auto is = open_in(path, true);
  return load_checkpoint(is, cfg);
}

}  // namespace eign
