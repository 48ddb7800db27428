#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "depest/nn/graph.hpp"

// Differentiable operations recorded on a Graph. Layouts are batch-first:
// sequences are [N, C, T], images are [N, C, H, W], LSTM I/O is [N, T, D].

namespace depest::nn {

// Elementwise and structural ops.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// 1 - a
Var one_minus(Var a);
Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
/// Numerically shifted softmax along the last axis.
Var softmax(Var x);
Var reshape(Var x, Shape shape);
/// Concatenation along `axis`; all other dimensions must agree.
Var concat(const std::vector<Var>& parts, std::size_t axis);
/// [N, A, B] -> [N, B, A]
Var swap_last_two(Var x);
/// [N, T, D] -> [N, D] at time step t.
Var select_step(Var x, std::size_t t);
/// Adds a per-channel value [N, C] to every location of [N, C, ...].
Var add_channel_broadcast(Var x, Var per_channel);
Var sum(Var x);
/// sum(x * coeffs) for a constant coefficient tensor of the same shape.
Var weighted_sum(Var x, const Tensor& coeffs);

// Reductions across a list of equally shaped tensors.
Var elementwise_product(const std::vector<Var>& xs);
Var elementwise_sum(const std::vector<Var>& xs);
Var elementwise_max(const std::vector<Var>& xs);
/// Lower median for an even number of inputs.
Var elementwise_median(const std::vector<Var>& xs);

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Cross-correlation. x [N, Cin, T], weight [Cout, Cin, K], bias [Cout].
/// Output length: floor((T + 2*padding - K) / stride) + 1.
Var conv1d(Var x, Var weight, std::optional<Var> bias, Conv1dOptions opt = {});

struct Conv2dOptions {
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

/// Cross-correlation. x [N, Cin, H, W], weight [Cout, Cin, KH, KW], bias [Cout].
Var conv2d(Var x, Var weight, std::optional<Var> bias, Conv2dOptions opt = {});

struct BatchNormOptions {
  bool training = true;
  /// Running-stat update in training mode; off for e.g. the second SAM pass.
  bool update_running_stats = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel normalization of x [N, C, ...] over the batch and every
/// trailing axis. Running stats are updated in place in training mode
/// (running_var uses the unbiased batch variance).
Var batch_norm(Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var,
               BatchNormOptions opt = {});

/// Non-overlapping max pooling over the last axis of [N, C, T]; trailing
/// remainder is dropped. Requires T >= pool.
Var max_pool1d(Var x, std::size_t pool);

/// Single-direction LSTM over x [N, T, D] with gate order (input, forget,
/// cell, output): w_ih [4H, D], w_hh [4H, H], bias [4H]. Zero initial state.
/// With `reverse` the sequence is consumed from t = T-1 down to 0 and the
/// output at index t is the state after reading x[t].
Var lstm(Var x, Var w_ih, Var w_hh, Var bias, bool reverse);

/// y = x W^T + b. x [N, In], weight [Out, In], bias [Out].
Var linear(Var x, Var weight, std::optional<Var> bias);

/// Mean over every axis after the channel axis: [N, C, ...] -> [N, C].
Var global_avg_pool(Var x);

/// Row-weighted KL(target || pred) summed over rows:
///   sum_r w_r sum_j t_rj log(t_rj / max(p_rj, eps)), terms with t_rj = 0 skipped.
/// pred, target [R, M]; row_weights [R].
Var kl_divergence(Var pred, const Tensor& target, const Tensor& row_weights, double eps = 1e-12);

}  // namespace depest::nn
