#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "depest/dataset.hpp"
#include "depest/feature_prep.hpp"

// Synthetic stand-in for interview recordings. Every modality carries the
// PHQ-8 subscores, so the labels are learnable by construction:
//   audio      - eight tones whose amplitudes double per item score step,
//                fixed-level reference tones, plus noise
//   keypoints  - a fixed face whose eight point groups move with amplitudes
//                growing with the item scores; gaze tilts with the total
//   embeddings - sum_i s_i u_i over fixed random unit directions u_i, plus noise

namespace depest::synth {

struct SynthConfig {
  std::uint64_t seed = 1;
  std::size_t participants = 20;
  double min_duration_s = 160.0;
  double max_duration_s = 175.0;
  int sample_rate_hz = 16000;
  double video_fps = 30.0;
  double noise = 0.02;

  void validate() const;
};

struct ParticipantPlan {
  std::string participant_id;
  Gender gender = Gender::female;
  Subscores subscores{};
  double duration_s = 0.0;
  std::uint64_t seed = 0;
};

/// Alternates depressed (total >= 12) and non-depressed (total <= 7)
/// participants and assigns genders so both genders occur in both classes
/// once n >= 4. Throws ConfigError for n < 2.
std::vector<ParticipantPlan> plan_participants(const SynthConfig& cfg);

/// Raw (un-normalized) session for one planned participant.
features::Session synthesize_session(const ParticipantPlan& plan, const SynthConfig& cfg);

/// Writes audio (WAV), keypoints and embeddings per participant plus
/// manifest.tsv under `out_dir`. Returns the manifest written.
data::DatasetManifest write_synthetic_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir);

/// In-memory equivalent of write_synthetic_corpus followed by preprocessing,
/// keypoints normalized per session.
std::vector<features::Session> synthesize_sessions(const SynthConfig& cfg);

}  // namespace depest::synth
