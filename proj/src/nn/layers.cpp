#include "depest/nn/layers.hpp"

#include <cmath>

namespace depest::nn {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

namespace {
double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }
}  // namespace

Conv1dLayer Conv1dLayer::create(ParameterStore& store, std::string prefix, std::size_t in, std::size_t out,
                                std::size_t kernel, std::size_t padding, bool bias, Rng& rng) {
  const double bound = fan_in_bound(in * kernel);
  store.add(prefix + ".weight", uniform_tensor({out, in, kernel}, bound, rng));
  if (bias) store.add(prefix + ".bias", uniform_tensor({out}, bound, rng));
  return Conv1dLayer{std::move(prefix), in, out, kernel, padding, bias};
}

Var Conv1dLayer::operator()(const LayerContext& ctx, Var x) const {
  std::optional<Var> b;
  if (has_bias) b = ctx.param(prefix + ".bias");
  return conv1d(x, ctx.param(prefix + ".weight"), b, Conv1dOptions{1, padding});
}

Conv2dLayer Conv2dLayer::create(ParameterStore& store, std::string prefix, std::size_t in, std::size_t out,
                                std::size_t kernel_h, std::size_t kernel_w, Conv2dOptions options, bool bias,
                                Rng& rng) {
  const double bound = fan_in_bound(in * kernel_h * kernel_w);
  store.add(prefix + ".weight", uniform_tensor({out, in, kernel_h, kernel_w}, bound, rng));
  if (bias) store.add(prefix + ".bias", uniform_tensor({out}, bound, rng));
  return Conv2dLayer{std::move(prefix), in, out, kernel_h, kernel_w, options, bias};
}

Var Conv2dLayer::operator()(const LayerContext& ctx, Var x) const {
  std::optional<Var> b;
  if (has_bias) b = ctx.param(prefix + ".bias");
  return conv2d(x, ctx.param(prefix + ".weight"), b, options);
}

BatchNormLayer BatchNormLayer::create(ParameterStore& store, std::string prefix, std::size_t channels) {
  store.add(prefix + ".gamma", Tensor({channels}, 1.0));
  store.add(prefix + ".beta", Tensor({channels}, 0.0));
  store.add(prefix + ".running_mean", Tensor({channels}, 0.0), false);
  store.add(prefix + ".running_var", Tensor({channels}, 1.0), false);
  return BatchNormLayer{std::move(prefix), channels};
}

Var BatchNormLayer::operator()(const LayerContext& ctx, Var x) const {
  BatchNormOptions opt;
  opt.training = ctx.training;
  opt.update_running_stats = ctx.update_bn_stats;
  return batch_norm(x, ctx.param(prefix + ".gamma"), ctx.param(prefix + ".beta"),
                    ctx.params.at(prefix + ".running_mean").value, ctx.params.at(prefix + ".running_var").value,
                    opt);
}

LinearLayer LinearLayer::create(ParameterStore& store, std::string prefix, std::size_t in, std::size_t out,
                                Rng& rng) {
  const double bound = fan_in_bound(in);
  store.add(prefix + ".weight", uniform_tensor({out, in}, bound, rng));
  store.add(prefix + ".bias", uniform_tensor({out}, bound, rng));
  return LinearLayer{std::move(prefix), in, out};
}

Var LinearLayer::operator()(const LayerContext& ctx, Var x) const {
  return linear(x, ctx.param(prefix + ".weight"), ctx.param(prefix + ".bias"));
}

BiLstmLayer BiLstmLayer::create(ParameterStore& store, std::string prefix, std::size_t input_size,
                                std::size_t hidden, Rng& rng) {
  for (const char* dir : {".fwd", ".bwd"}) {
    const std::string p = prefix + dir;
    store.add(p + ".w_ih", uniform_tensor({4 * hidden, input_size}, fan_in_bound(input_size), rng));
    store.add(p + ".w_hh", uniform_tensor({4 * hidden, hidden}, fan_in_bound(hidden), rng));
    Tensor bias({4 * hidden}, 0.0);
    for (std::size_t k = hidden; k < 2 * hidden; ++k) bias[k] = 1.0;
    store.add(p + ".bias", std::move(bias));
  }
  return BiLstmLayer{std::move(prefix), input_size, hidden};
}

Var BiLstmLayer::sequence(const LayerContext& ctx, Var x) const {
  Var fwd = lstm(x, ctx.param(prefix + ".fwd.w_ih"), ctx.param(prefix + ".fwd.w_hh"), ctx.param(prefix + ".fwd.bias"),
                 false);
  Var bwd = lstm(x, ctx.param(prefix + ".bwd.w_ih"), ctx.param(prefix + ".bwd.w_hh"), ctx.param(prefix + ".bwd.bias"),
                 true);
  return concat({fwd, bwd}, 2);
}

Var BiLstmLayer::summary(const LayerContext& ctx, Var x) const {
  Var fwd = lstm(x, ctx.param(prefix + ".fwd.w_ih"), ctx.param(prefix + ".fwd.w_hh"), ctx.param(prefix + ".fwd.bias"),
                 false);
  Var bwd = lstm(x, ctx.param(prefix + ".bwd.w_ih"), ctx.param(prefix + ".bwd.w_hh"), ctx.param(prefix + ".bwd.bias"),
                 true);
  const std::size_t steps = x.shape()[1];
  return concat({select_step(fwd, steps - 1), select_step(bwd, 0)}, 1);
}

}  // namespace depest::nn
