#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "depest/feature_prep.hpp"
#include "depest/model.hpp"
#include "depest/trainer.hpp"

// Flat `key = value` configuration files. Lines starting with '#' are
// comments. Keys are grouped by prefix: model.*, train.*, musdl.*, data.*.

namespace depest::config {

class KeyValues {
 public:
  /// Throws FormatError on a line without '=' or a duplicate key.
  static KeyValues parse(std::string_view text, std::string_view origin = "<config>");
  static KeyValues load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  void set(std::string key, std::string value);
  const std::map<std::string, std::string, std::less<>>& entries() const { return values_; }

  std::optional<std::string> get(std::string_view key) const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Everything a run needs, resolved from defaults plus overrides.
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  features::ClipConfig clip;
  std::uint64_t seed = 1;
  /// Include sessions flagged as gender-balancing augmentations.
  bool gender_balance = true;

  void validate() const;
};

/// Applies every key in `kv` on top of the defaults. Throws ConfigError for
/// unknown keys or unparsable values.
RunConfig resolve(const KeyValues& kv);
RunConfig load_run_config(const std::filesystem::path& path);

/// All keys with their effective values, sorted, one `key = value` per line.
std::string to_text(const RunConfig& cfg);

/// Sorted model.* lines of to_text(); the input to model_hash().
std::string model_text(const model::ModelConfig& cfg);
/// FNV-1a 64 over model_text().
std::uint64_t model_hash(const model::ModelConfig& cfg);

}  // namespace depest::config
