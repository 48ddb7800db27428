#include "depest/checkpoint.hpp"

#include <set>
#include <sstream>

#include "depest/config.hpp"
#include "depest/errors.hpp"
#include "depest/tensor_io.hpp"

namespace depest::io {

namespace {
constexpr char kMagic[4] = {'M', 'F', 'C', 'P'};
}

std::vector<char> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put_u32(kCheckpointVersion);
  w.put_u64(ckpt.config_hash);
  w.put_u32(ckpt.epoch);
  w.put_u32(static_cast<std::uint32_t>(ckpt.config_text.size()));
  w.put_bytes(ckpt.config_text);
  w.put_u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.put_u32(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name);
    encode_tensor_body(w, t);
  }
  return w.bytes();
}

Checkpoint decode_checkpoint(std::span<const char> bytes, const std::string& context) {
  ByteReader r(bytes, context);
  if (r.string(4) != std::string_view(kMagic, 4)) throw FormatError(context + ": not a checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError(context + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.config_hash = r.u64();
  c.epoch = r.u32();
  c.config_text = r.string(r.u32());
  const std::uint32_t count = r.u32();
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string(r.u32());
    if (!seen.insert(name).second) throw FormatError(context + ": duplicate tensor '" + name + "'");
    nn::Tensor t = decode_tensor_body(r);
    c.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.at_end()) throw FormatError(context + ": trailing bytes after the last tensor");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path), path.string());
}

Checkpoint make_checkpoint(const model::Model& model, std::uint32_t epoch, std::string config_text) {
  Checkpoint c;
  c.config_hash = config::model_hash(model.config());
  c.epoch = epoch;
  c.config_text = std::move(config_text);
  for (const auto& p : model.params().entries()) c.tensors.emplace_back(p.name, p.value);
  return c;
}

void apply_checkpoint(model::Model& model, const Checkpoint& ckpt) {
  const std::uint64_t expected = config::model_hash(model.config());
  if (ckpt.config_hash != expected) {
    std::ostringstream msg;
    msg << std::hex << "checkpoint was written for model config hash " << ckpt.config_hash
        << " but the current config hashes to " << expected;
    throw ConfigError(msg.str());
  }
  nn::ParameterStore source;
  for (const auto& [name, t] : ckpt.tensors) source.add(name, t);
  auto& params = model.params();
  if (ckpt.tensors.size() != params.entries().size()) {
    throw ConfigError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model has " +
                      std::to_string(params.entries().size()));
  }
  for (auto& p : params.entries()) {
    if (!source.contains(p.name)) throw ConfigError("checkpoint lacks parameter '" + p.name + "'");
    const auto& t = source.at(p.name).value;
    if (t.shape() != p.value.shape()) {
      throw ConfigError("checkpoint shape mismatch for '" + p.name + "': " + nn::shape_string(t.shape()) + " vs " +
                        nn::shape_string(p.value.shape()));
    }
    p.value = t;
  }
}

}  // namespace depest::io
