#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "depest/feature_prep.hpp"
#include "depest/model.hpp"
#include "depest/musdl.hpp"
#include "depest/phq_metrics.hpp"
#include "depest/sam.hpp"
#include "depest/sampling.hpp"

// Training loop (soft-label KL loss + SAM), clip-level evaluation and the
// fusion-method comparison harness.

namespace depest::train {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 100;
  sam::SamConfig sam;
  /// Off: plain SGD with the same base settings.
  bool use_sam = true;
  bool dynamic_weights = true;
  sampling::SamplingMode sampling = sampling::SamplingMode::score;
  musdl::MusdlConfig musdl;
  /// Stop once evaluation-mode clip accuracy on the training clips reaches this.
  std::optional<double> target_accuracy;
  /// Round parameters to float32 after every step so checkpoints are exact.
  bool round_float32 = true;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean over batches of the first-pass loss
  double clip_accuracy = 0.0;
  std::array<double, kNumSubscores> subscore_accuracy{};
  std::optional<double> female_accuracy;
  std::optional<double> male_accuracy;
  std::optional<double> eval_accuracy;
};

/// One line of the epoch log: epoch, loss, clip accuracy, female and male
/// accuracy (tab-separated; "NA" for an absent group).
std::string format_epoch_line(const EpochStats& s);
std::string epoch_log_header();

/// Batch loss (1/N) sum_n sum_i w_{i,n} KL(target_{n,i} || pred_{n,i}).
/// `weights` is [8, N]; pass all ones for the unweighted loss.
nn::Var batch_loss(const std::vector<nn::Var>& heads, std::span<const Subscores> truths, const nn::Tensor& weights,
                   const musdl::MusdlConfig& cfg);

class Trainer {
 public:
  Trainer(model::Model& model, TrainConfig cfg, std::uint64_t seed);

  /// Throws EmptyInputError for an empty dataset and NumericError when the
  /// loss stops being finite.
  EpochStats train_epoch(std::span<const features::ClipSample> clips);

  using EpochCallback = std::function<void(const EpochStats&)>;
  /// Runs up to cfg.epochs epochs, honoring target_accuracy.
  std::vector<EpochStats> fit(std::span<const features::ClipSample> clips, const EpochCallback& on_epoch = {});

  std::size_t epochs_done() const { return epochs_done_; }
  const sam::Sam& optimizer() const { return sam_; }

 private:
  std::vector<std::size_t> epoch_order(std::span<const features::ClipSample> clips);

  model::Model& model_;
  TrainConfig cfg_;
  sam::Sam sam_;
  sam::Sgd sgd_;
  nn::Rng rng_;
  std::size_t epochs_done_ = 0;
};

struct ClipPrediction {
  std::string participant_id;
  Gender gender = Gender::female;
  std::size_t clip_index = 0;
  phq::PhqRecord predicted;
  phq::PhqRecord truth;
};

/// Evaluation-mode predictions, batched.
std::vector<ClipPrediction> predict_clips(model::Model& model, std::span<const features::ClipSample> clips,
                                          std::size_t batch_size = 16);

phq::Metrics clip_metrics(std::span<const ClipPrediction> predictions);
phq::GenderSplitReport clip_gender_report(std::span<const ClipPrediction> predictions);

/// Participant-level predicted and ground-truth aggregates, in first-seen
/// participant order.
struct ParticipantPair {
  phq::ParticipantResult predicted;
  phq::ParticipantResult truth;
};
std::vector<ParticipantPair> aggregate_participants(std::span<const ClipPrediction> predictions);
phq::Metrics participant_metrics(std::span<const ParticipantPair> pairs);
phq::GenderSplitReport participant_gender_report(std::span<const ParticipantPair> pairs);

struct ComparisonRow {
  model::ModalitySet modalities = model::ModalitySet::avt;
  fusion::FusionMethod method = fusion::FusionMethod::subatten;
  std::size_t epochs = 0;
  double final_loss = 0.0;
  phq::Metrics metrics;
};

/// Trains one model per (modality set, fusion method) pair from the same seed
/// and evaluates it on `test`.
std::vector<ComparisonRow> compare_fusions(std::span<const features::ClipSample> train,
                                           std::span<const features::ClipSample> test,
                                           const model::ModelConfig& base, const TrainConfig& cfg,
                                           std::uint64_t seed, std::span<const fusion::FusionMethod> methods,
                                           std::span<const model::ModalitySet> sets,
                                           const std::function<void(const ComparisonRow&)>& on_row = {});

/// Methods as rows, modality sets as column groups (accuracy, F1, MAE).
std::string format_comparison_table(std::span<const ComparisonRow> rows);

}  // namespace depest::train
