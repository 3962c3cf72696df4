#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "shad/model.hpp"

namespace shad {

/// Checkpoint layout, all integers little-endian:
///
///   "SHADCKPT"            8-byte magic
///   u32 version           currently 1
///   u32 V, d, L, H, C     architecture fingerprint
///   u32 tensor_count
///   per tensor, in tensor_table() order:
///     u32 name_length, name bytes, u32 rows, u32 cols,
///     rows * cols float32 values, row-major
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_checkpoint(const ModelParams<float>& params);
/// Throws CheckpointError with the byte offset of the first bad field, or
/// naming both fingerprints when `expected` is given and differs.
ModelParams<float> decode_checkpoint(std::string_view bytes, const std::optional<ModelDims>& expected = std::nullopt);

void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path);
ModelParams<float> load_checkpoint(const std::filesystem::path& path,
                                   const std::optional<ModelDims>& expected = std::nullopt);

/// FNV-1a of the encoded checkpoint bytes.
std::string checkpoint_hash(const ModelParams<float>& params);

}  // namespace shad
