#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "depest/nn/tensor.hpp"
#include "depest/signal_prep.hpp"
#include "depest/types.hpp"

// Visual/text preprocessing and the sliding-window clipper that cuts a
// session into time-aligned multi-modal clips.

namespace depest::features {

inline constexpr std::size_t kFacialKeypoints = 68;
inline constexpr std::size_t kGazeRows = 4;
inline constexpr std::size_t kKeypointRows = kFacialKeypoints + kGazeRows;  // 72
inline constexpr std::size_t kEmbeddingDim = 512;

/// 68 facial keypoints followed by 4 gaze direction rows, each an (x, y, z) triple.
struct KeypointFrame {
  double timestamp_s = 0.0;
  std::array<std::array<double, 3>, kKeypointRows> points{};
};

struct NormalizedKeypoints {
  std::vector<KeypointFrame> frames;
  std::array<double, 3> axis_min{};
  std::array<double, 3> axis_max{};
  /// Axis had max == min; its facial values were set to 0.5.
  std::array<bool, 3> degenerate{};
};

/// Min-max scales the facial keypoints to [0, 1] per coordinate axis, with
/// extrema taken over the whole sequence. Gaze rows pass through unchanged.
NormalizedKeypoints normalize_keypoints(std::span<const KeypointFrame> frames);

/// Inverse of normalize_keypoints on non-degenerate axes.
std::vector<KeypointFrame> denormalize_keypoints(const NormalizedKeypoints& normalized);

struct Interval {
  double start_s = 0.0;
  double stop_s = 0.0;
};

/// Keeps frames whose timestamp lies in some [start, stop). Intervals must be
/// sorted and non-overlapping. Throws EmptyInputError when nothing is kept.
std::vector<KeypointFrame> crop_by_timestamps(std::span<const KeypointFrame> frames,
                                              std::span<const Interval> intervals);

struct SentenceEmbedding {
  double start_s = 0.0;
  double stop_s = 0.0;
  std::vector<double> vector;  // kEmbeddingDim values

  double midpoint_s() const { return 0.5 * (start_s + stop_s); }
};

/// Embedding File Format: one sentence per line, `start_s,stop_s,v0,...,v511`.
/// Throws FormatError on a wrong dimension, start >= stop, or decreasing start.
std::vector<SentenceEmbedding> ingest_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path, std::span<const SentenceEmbedding> sentences);

/// Keypoint file: one frame per line, `timestamp,v0,...,v215` (72 rows x 3).
std::vector<KeypointFrame> read_keypoints(const std::filesystem::path& path);
void write_keypoints(const std::filesystem::path& path, std::span<const KeypointFrame> frames,
                     int significant_digits = 17);

/// A whole interview with all modalities on one clock.
struct Session {
  std::string participant_id;
  Gender gender = Gender::female;
  Subscores subscores{};
  signal::Waveform audio;
  std::vector<KeypointFrame> keypoints;  // already normalized
  std::vector<SentenceEmbedding> sentences;
};

struct ClipConfig {
  double window_s = 60.0;
  double overlap_s = 10.0;
  double video_fps = 30.0;
  std::size_t max_sentences = 32;
  signal::StftConfig stft;
  signal::MelConfig mel;
  /// When set, each clip's audio is reclipped and zero-padded back to the
  /// window length before feature extraction.
  std::optional<signal::ReclipConfig> reclip;

  void validate() const;
  double stride_s() const { return window_s - overlap_s; }
  std::size_t visual_frames() const;
};

struct ClipSample {
  std::string participant_id;
  Gender gender = Gender::female;
  Subscores subscores{};
  std::size_t clip_index = 0;
  double start_s = 0.0;
  nn::Tensor audio;   // [n_mels, frames], standardized log-mel
  nn::Tensor visual;  // [frames, 72, 3]
  nn::Tensor text;    // [max_sentences, 512], zero rows pad
  bool audio_degenerate = false;
  std::size_t sentence_count = 0;
};

/// max(0, floor((D - window) / (window - overlap)) + 1).
std::size_t clip_count(double duration_s, double window_s, double overlap_s);

/// Cuts [k*stride, k*stride + window) clips; a trailing partial window is
/// dropped. Throws EmptyInputError when the session is shorter than one window.
std::vector<ClipSample> sliding_window_clips(const Session& session, const ClipConfig& cfg);

}  // namespace depest::features
