#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depest/feature_prep.hpp"
#include "depest/fusion.hpp"
#include "depest/nn/layers.hpp"
#include "depest/phq_metrics.hpp"

// ConvBiLSTM backbones per modality, late fusion, and one softmax classifier
// per PHQ-8 item over the expanded class grid.

namespace depest::model {

enum class Modality { audio, visual, text };

/// Which modalities feed the model: a, v, t, av or avt.
enum class ModalitySet { a, v, t, av, avt };

std::string_view to_string(ModalitySet m);
/// Throws ConfigError for an unknown name.
ModalitySet parse_modality_set(std::string_view name);
std::vector<Modality> modalities_of(ModalitySet m);
std::string_view to_string(Modality m);

/// conv -> BN -> ReLU -> max-pool stages, then a BiLSTM and an FC layer.
struct BranchConfig {
  std::vector<std::size_t> conv_channels;
  std::size_t kernel = 3;
  std::size_t pool = 2;
  std::size_t lstm_hidden = 128;
};

struct ModelConfig {
  ModalitySet modalities = ModalitySet::avt;
  fusion::FusionMethod fusion = fusion::FusionMethod::subatten;
  std::size_t feature_dim = 256;
  std::size_t n_mels = 80;
  std::size_t keypoint_rows = features::kKeypointRows;
  std::size_t text_dim = features::kEmbeddingDim;
  std::size_t classes = 32;
  BranchConfig audio{{32, 64}, 3, 2, 128};
  BranchConfig visual{{64}, 3, 2, 128};
  BranchConfig text{{64}, 3, 2, 128};

  void validate() const;
  const BranchConfig& branch(Modality m) const;
  BranchConfig& branch(Modality m);
};

/// Batched model input. Layouts: audio [N, n_mels, T], visual
/// [N, 3, keypoint_rows, T] (coordinates as channels), text [N, text_dim, S].
struct ModelInput {
  std::optional<nn::Tensor> audio;
  std::optional<nn::Tensor> visual;
  std::optional<nn::Tensor> text;

  std::size_t batch_size() const;
  const std::optional<nn::Tensor>& get(Modality m) const;
};

/// Converts clips to the batched layouts above. Every clip must have the same
/// per-modality shapes.
ModelInput make_input(std::span<const features::ClipSample* const> clips);

struct Branch {
  Modality kind = Modality::audio;
  std::string prefix;
  std::optional<nn::Conv2dLayer> keypoint_conv;  // visual first stage
  std::vector<nn::Conv1dLayer> convs;
  std::vector<nn::BatchNormLayer> norms;
  std::size_t pool = 2;
  nn::BiLstmLayer lstm;
  nn::LinearLayer fc;

  /// Feature vectors [N, d].
  nn::Var operator()(const nn::LayerContext& ctx, nn::Var x) const;
};

/// Per-clip prediction: one distribution per item and the derived PHQ record.
struct ModelOutput {
  nn::Tensor distributions;  // [8, classes]
  phq::PhqRecord record;
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& params() { return params_; }
  const nn::ParameterStore& params() const { return params_; }

  /// Per-modality feature vectors [N, d] in the configured modality order.
  std::vector<nn::Var> features(const nn::LayerContext& ctx, const ModelInput& input) const;
  /// Softmax outputs [N, classes], one per PHQ-8 item. Throws EmptyInputError when
  /// a configured modality is missing from `input`.
  std::vector<nn::Var> forward(const nn::LayerContext& ctx, const ModelInput& input) const;

  /// Evaluation-mode prediction without gradients.
  std::vector<ModelOutput> predict(const ModelInput& input);

  /// Copies every parameter under `prefix` (e.g. "audio.") from `source`.
  /// Throws ConfigError when a name is missing or a shape differs. Returns
  /// the number of tensors copied.
  std::size_t load_prefix(const nn::ParameterStore& source, std::string_view prefix);

  const std::vector<Branch>& branches() const { return branches_; }

 private:
  ModelConfig cfg_;
  nn::ParameterStore params_;
  std::vector<Branch> branches_;
  std::optional<fusion::AttentionalFusion> shared_fusion_;
  std::optional<fusion::SubAttentionalBank> bank_;
  std::vector<nn::LinearLayer> heads_;
};

/// Decodes an [8, classes] distribution into subscores and derives the PHQ
/// record.
phq::PhqRecord record_from_distributions(const nn::Tensor& distributions);

}  // namespace depest::model
