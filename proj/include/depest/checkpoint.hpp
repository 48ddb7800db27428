#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "depest/model.hpp"

// Checkpoint format, little-endian:
//   "MFCP", u32 version, u64 model-config hash, u32 epoch,
//   u32 config length, config text,
//   u32 tensor count, then per tensor: u32 name length, name, tensor body
//   (u32 rank, u64 dims, float32 values).

namespace depest::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::uint32_t epoch = 0;
  std::string config_text;
  std::vector<std::pair<std::string, nn::Tensor>> tensors;
};

std::vector<char> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on a bad magic, an unsupported version or a payload
/// that does not match the declared shapes.
Checkpoint decode_checkpoint(std::span<const char> bytes, const std::string& context = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of every parameter (including batch-norm running statistics).
Checkpoint make_checkpoint(const model::Model& model, std::uint32_t epoch, std::string config_text);

/// Copies the checkpoint's tensors into `model`. Throws ConfigError when the
/// model-config hash differs or a parameter is missing or mis-shaped.
void apply_checkpoint(model::Model& model, const Checkpoint& ckpt);

}  // namespace depest::io
