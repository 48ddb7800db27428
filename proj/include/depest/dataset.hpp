#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "depest/feature_prep.hpp"

// On-disk dataset layout.
//
// Manifest (tab-separated, header line first):
//   participant_id  gender  subscores  audio  keypoints  embeddings  gb_augmented
// with subscores as "a,b,...,h" and paths relative to the manifest directory.
//
// Clip bundles: <clips_dir>/<participant>_<index>/{audio,visual,text}.mftk plus
// meta.txt, indexed by <clips_dir>/clips.tsv.

namespace depest::data {

struct ManifestEntry {
  std::string participant_id;
  Gender gender = Gender::female;
  Subscores subscores{};
  std::filesystem::path audio;
  std::filesystem::path keypoints;
  std::filesystem::path embeddings;
  /// Session produced by gender-balancing augmentation of another one.
  bool gb_augmented = false;
};

struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Throws FormatError for malformed rows or duplicate ids and IoError when a
/// referenced file does not exist.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Reads the three modality files; keypoints are min-max normalized over the
/// whole session.
features::Session load_session(const DatasetManifest& manifest, const ManifestEntry& entry);

std::string bundle_name(const features::ClipSample& clip);
void write_clip_bundle(const std::filesystem::path& dir, const features::ClipSample& clip);
features::ClipSample read_clip_bundle(const std::filesystem::path& dir);

/// Writes one bundle per clip and clips.tsv. Existing bundles are overwritten.
void write_clips(const std::filesystem::path& clips_dir, std::span<const features::ClipSample> clips);
/// Loads every bundle listed in clips.tsv, in file order.
std::vector<features::ClipSample> read_clips(const std::filesystem::path& clips_dir);

}  // namespace depest::data
