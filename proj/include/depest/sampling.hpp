#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "depest/nn/layers.hpp"
#include "depest/types.hpp"

// Class-imbalance handling: sampler weights and per-batch loss weights.

namespace depest::sampling {

/// Class used to balance sampling: total PHQ-8 score, binary flag, gender,
/// or none (uniform shuffling without replacement).
enum class SamplingMode { none, score, binary, gender };

std::string_view to_string(SamplingMode m);
/// Throws ConfigError for an unknown name.
SamplingMode parse_sampling_mode(std::string_view name);

/// What the sampler needs to know about one clip.
struct ClipLabel {
  Subscores subscores{};
  Gender gender = Gender::female;
};

int class_of(const ClipLabel& label, SamplingMode mode);

/// weight(clip) = 1 / count(class(clip)); uniform for mode none. Throws
/// EmptyInputError on empty input.
std::vector<double> compute_sampler_weights(std::span<const ClipLabel> labels, SamplingMode mode);

/// Draws `count` indices with replacement, proportionally to `weights`.
std::vector<std::size_t> weighted_draw(std::span<const double> weights, std::size_t count, nn::Rng& rng);

/// Per-item class weights for one batch: weight of class c for item i is
/// 1 / max(1, number of batch samples whose item i equals c).
struct ClassWeights {
  /// [8][4]
  std::vector<std::vector<double>> per_class;
  /// [8, N]: weight of each sample's ground-truth class, per item.
  nn::Tensor per_sample;
};

/// Throws EmptyInputError for an empty batch.
ClassWeights dynamic_class_weights(std::span<const Subscores> batch);

}  // namespace depest::sampling
