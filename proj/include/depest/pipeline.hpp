#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "depest/config.hpp"
#include "depest/dataset.hpp"
#include "depest/trainer.hpp"

// Steps shared by the command-line tool and the tests.

namespace depest::pipeline {

/// Cuts every session into clips (sessions in order, clips in time order).
std::vector<features::ClipSample> clips_from_sessions(std::span<const features::Session> sessions,
                                                      const features::ClipConfig& cfg);

/// Manifest -> clip bundles under `clips_dir`. Sessions flagged gb_augmented
/// are skipped unless cfg.gender_balance is set. Returns the clip count.
std::size_t preprocess(const std::filesystem::path& manifest_path, const config::RunConfig& cfg,
                       const std::filesystem::path& clips_dir);

/// Per-clip predictions as TSV.
void write_predictions_tsv(const std::filesystem::path& path, std::span<const train::ClipPrediction> preds);
std::vector<train::ClipPrediction> read_predictions_tsv(const std::filesystem::path& path);

/// Metrics as a two-column TSV (metric, value).
void write_metrics_tsv(const std::filesystem::path& path, const phq::Metrics& m);

/// Clip-level report: metrics plus the gender split, as JSON text.
std::string metrics_json(const phq::Metrics& m, const phq::GenderSplitReport& split);

/// Participant-level table: id, gender, clips, predicted mean score, predicted
/// binary, true score, true binary.
void write_participants_tsv(const std::filesystem::path& path, std::span<const train::ParticipantPair> pairs);

/// Gender split in the overall / female / male / gap layout.
std::string gender_table(const phq::GenderSplitReport& r);

}  // namespace depest::pipeline
