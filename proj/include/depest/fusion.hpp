#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "depest/nn/layers.hpp"

// Late fusion of per-modality feature vectors. The attention variants work on
// a FeatureMap Var of shape [N, C, H, W] with C = 1, H = number of
// modalities and W = feature dimension.

namespace depest::fusion {

enum class FusionMethod { mult, concat, median, max, sum, mean, atten, subatten };

std::string_view to_string(FusionMethod m);
/// Throws ConfigError for an unknown name.
FusionMethod parse_fusion_method(std::string_view name);
bool is_attention(FusionMethod m);
/// The six operators that reduce n vectors without parameters.
const std::vector<FusionMethod>& baseline_methods();

/// Two-path channel attention: w = sigmoid(G(X) + L(X)) with
///   G = BN(pw2 * ReLU(BN(pw1 * GAP(X))))  broadcast over H x W,
///   L = BN(pw2 * ReLU(BN(pw1 * X)))       per location,
/// where the point-wise maps go C -> C / r_c -> C.
struct ChannelAttention {
  std::string prefix;
  std::size_t channels = 1;
  std::size_t reduced = 1;
  nn::Conv2dLayer global_pw1, global_pw2, local_pw1, local_pw2;
  nn::BatchNormLayer global_bn1, global_bn2, local_bn1, local_bn2;

  static ChannelAttention create(nn::ParameterStore& store, std::string prefix, std::size_t channels,
                                 std::size_t reduction, nn::Rng& rng);
  /// Weights in (0, 1), same shape as x.
  nn::Var operator()(const nn::LayerContext& ctx, nn::Var x) const;
  /// Pre-sigmoid global and local responses, for inspection.
  nn::Var global_path(const nn::LayerContext& ctx, nn::Var x) const;
  nn::Var local_path(const nn::LayerContext& ctx, nn::Var x) const;
};

/// Intermediate values of one attentional fusion pass.
struct FusionTrace {
  nn::Var x;        // first_conv(Y) + Y
  nn::Var w;        // attention on x
  nn::Var x_prime;  // conv_y(Y) * w + Y * (1 - w)
  nn::Var w_prime;  // attention on x_prime
  nn::Var conv_y;   // conv_y(Y), shared by both refinements
  nn::Var out;      // conv_y(Y) * w' + Y * (1 - w')
};

/// Attentional fusion layer. `first_conv` and `conv_y` are 3x3, padding 1,
/// so every intermediate keeps the input shape.
struct AttentionalFusion {
  std::string prefix;
  nn::Conv2dLayer first_conv;
  nn::Conv2dLayer conv_y;
  ChannelAttention stage1;
  ChannelAttention stage2;

  static AttentionalFusion create(nn::ParameterStore& store, std::string prefix, nn::Rng& rng,
                                  std::size_t channels = 1, std::size_t reduction = 1);
  FusionTrace trace(const nn::LayerContext& ctx, nn::Var y) const;
  nn::Var operator()(const nn::LayerContext& ctx, nn::Var y) const { return trace(ctx, y).out; }
};

inline constexpr std::size_t kSubAttentionHeads = 8;

/// One independent fusion layer per PHQ-8 item.
struct SubAttentionalBank {
  std::vector<AttentionalFusion> heads;

  static SubAttentionalBank create(nn::ParameterStore& store, const std::string& prefix, nn::Rng& rng);
  /// Throws ConfigError unless exactly 8 heads are present.
  std::vector<nn::Var> operator()(const nn::LayerContext& ctx, nn::Var y) const;
};

/// Stacks n vectors [N, d] into a FeatureMap [N, 1, n, d] in the given order.
nn::Var stack_feature_map(const std::vector<nn::Var>& vectors);

/// Parameter-free fusion of n >= 2 vectors [N, d]. concat returns [N, n*d]
/// in input order; every other method returns [N, d]. Throws ShapeError on
/// ragged inputs and ConfigError for an attention method.
nn::Var baseline_fuse(FusionMethod method, const std::vector<nn::Var>& vectors);

}  // namespace depest::fusion
