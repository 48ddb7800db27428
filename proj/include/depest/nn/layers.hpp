#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "depest/nn/graph.hpp"
#include "depest/nn/ops.hpp"

// Parameterized layers. Each layer remembers only its parameter-name prefix,
// so models stay copyable and checkpoints map one-to-one onto names.

namespace depest::nn {

using Rng = std::mt19937_64;

/// Uniform(-bound, bound) fill.
Tensor uniform_tensor(Shape shape, double bound, Rng& rng);

/// Per-forward state shared by the layers of one model evaluation.
struct LayerContext {
  Graph& graph;
  ParameterStore& params;
  bool training = true;
  bool update_bn_stats = true;

  Var param(const std::string& name) const { return graph.parameter(params.at(name)); }
};

struct Conv1dLayer {
  std::string prefix;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t padding = 1;
  bool has_bias = false;

  static Conv1dLayer create(ParameterStore& store, std::string prefix, std::size_t in, std::size_t out,
                            std::size_t kernel, std::size_t padding, bool bias, Rng& rng);
  Var operator()(const LayerContext& ctx, Var x) const;
};

struct Conv2dLayer {
  std::string prefix;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  Conv2dOptions options;
  bool has_bias = false;

  static Conv2dLayer create(ParameterStore& store, std::string prefix, std::size_t in, std::size_t out,
                            std::size_t kernel_h, std::size_t kernel_w, Conv2dOptions options, bool bias,
                            Rng& rng);
  Var operator()(const LayerContext& ctx, Var x) const;
};

struct BatchNormLayer {
  std::string prefix;
  std::size_t channels = 0;

  static BatchNormLayer create(ParameterStore& store, std::string prefix, std::size_t channels);
  Var operator()(const LayerContext& ctx, Var x) const;
};

struct LinearLayer {
  std::string prefix;
  std::size_t in_features = 0;
  std::size_t out_features = 0;

  static LinearLayer create(ParameterStore& store, std::string prefix, std::size_t in, std::size_t out, Rng& rng);
  Var operator()(const LayerContext& ctx, Var x) const;
};

/// Forward and backward LSTMs over the same input. Biases start at zero
/// except the forget gate, which starts at one.
struct BiLstmLayer {
  std::string prefix;
  std::size_t input_size = 0;
  std::size_t hidden = 0;

  static BiLstmLayer create(ParameterStore& store, std::string prefix, std::size_t input_size,
                            std::size_t hidden, Rng& rng);
  /// [N, T, D] -> [N, T, 2H], forward half first.
  Var sequence(const LayerContext& ctx, Var x) const;
  /// [N, T, D] -> [N, 2H]: final forward state (t = T-1) followed by the
  /// final backward state (t = 0).
  Var summary(const LayerContext& ctx, Var x) const;
};

}  // namespace depest::nn
