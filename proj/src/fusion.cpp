#include "depest/fusion.hpp"

#include <array>

#include "depest/errors.hpp"
#include "depest/nn/ops.hpp"

namespace depest::fusion {

namespace {

struct MethodName {
  FusionMethod method;
  std::string_view name;
};

constexpr std::array<MethodName, 8> kMethodNames{{
    {FusionMethod::mult, "mult"},
    {FusionMethod::concat, "concat"},
    {FusionMethod::median, "median"},
    {FusionMethod::max, "max"},
    {FusionMethod::sum, "sum"},
    {FusionMethod::mean, "mean"},
    {FusionMethod::atten, "atten"},
    {FusionMethod::subatten, "subatten"},
}};

nn::Conv2dLayer pointwise(nn::ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                          nn::Rng& rng) {
  return nn::Conv2dLayer::create(store, prefix, in, out, 1, 1, {}, false, rng);
}

}  // namespace

std::string_view to_string(FusionMethod m) {
  for (const auto& e : kMethodNames) {
    if (e.method == m) return e.name;
  }
  return "unknown";
}

FusionMethod parse_fusion_method(std::string_view name) {
  for (const auto& e : kMethodNames) {
    if (e.name == name) return e.method;
  }
  throw ConfigError("unknown fusion method '" + std::string(name) + "'");
}

bool is_attention(FusionMethod m) { return m == FusionMethod::atten || m == FusionMethod::subatten; }

const std::vector<FusionMethod>& baseline_methods() {
  static const std::vector<FusionMethod> methods{FusionMethod::mult, FusionMethod::concat, FusionMethod::median,
                                                 FusionMethod::max,  FusionMethod::sum,    FusionMethod::mean};
  return methods;
}

ChannelAttention ChannelAttention::create(nn::ParameterStore& store, std::string prefix, std::size_t channels,
                                          std::size_t reduction, nn::Rng& rng) {
  if (channels == 0 || reduction == 0 || channels % reduction != 0) {
    throw ConfigError("channel attention: reduction ratio must divide the channel count");
  }
  const std::size_t reduced = channels / reduction;
  ChannelAttention a;
  a.prefix = prefix;
  a.channels = channels;
  a.reduced = reduced;
  a.global_pw1 = pointwise(store, prefix + ".global.pw1", channels, reduced, rng);
  a.global_bn1 = nn::BatchNormLayer::create(store, prefix + ".global.bn1", reduced);
  a.global_pw2 = pointwise(store, prefix + ".global.pw2", reduced, channels, rng);
  a.global_bn2 = nn::BatchNormLayer::create(store, prefix + ".global.bn2", channels);
  a.local_pw1 = pointwise(store, prefix + ".local.pw1", channels, reduced, rng);
  a.local_bn1 = nn::BatchNormLayer::create(store, prefix + ".local.bn1", reduced);
  a.local_pw2 = pointwise(store, prefix + ".local.pw2", reduced, channels, rng);
  a.local_bn2 = nn::BatchNormLayer::create(store, prefix + ".local.bn2", channels);
  return a;
}

nn::Var ChannelAttention::global_path(const nn::LayerContext& ctx, nn::Var x) const {
  const std::size_t n = x.shape()[0];
  nn::Var g = nn::reshape(nn::global_avg_pool(x), {n, channels, 1, 1});
  g = nn::relu(global_bn1(ctx, global_pw1(ctx, g)));
  g = global_bn2(ctx, global_pw2(ctx, g));
  return nn::reshape(g, {n, channels});
}

nn::Var ChannelAttention::local_path(const nn::LayerContext& ctx, nn::Var x) const {
  nn::Var l = nn::relu(local_bn1(ctx, local_pw1(ctx, x)));
  return local_bn2(ctx, local_pw2(ctx, l));
}

nn::Var ChannelAttention::operator()(const nn::LayerContext& ctx, nn::Var x) const {
  if (x.shape().size() != 4 || x.shape()[1] != channels) {
    throw ShapeError("channel attention expects [N, " + std::to_string(channels) + ", H, W], got " +
                     nn::shape_string(x.shape()));
  }
  return nn::sigmoid(nn::add_channel_broadcast(local_path(ctx, x), global_path(ctx, x)));
}

AttentionalFusion AttentionalFusion::create(nn::ParameterStore& store, std::string prefix, nn::Rng& rng,
                                            std::size_t channels, std::size_t reduction) {
  AttentionalFusion f;
  f.prefix = prefix;
  const nn::Conv2dOptions same{1, 1, 1, 1};
  f.first_conv = nn::Conv2dLayer::create(store, prefix + ".first_conv", channels, channels, 3, 3, same, true, rng);
  f.conv_y = nn::Conv2dLayer::create(store, prefix + ".conv_y", channels, channels, 3, 3, same, true, rng);
  f.stage1 = ChannelAttention::create(store, prefix + ".att1", channels, reduction, rng);
  f.stage2 = ChannelAttention::create(store, prefix + ".att2", channels, reduction, rng);
  return f;
}

FusionTrace AttentionalFusion::trace(const nn::LayerContext& ctx, nn::Var y) const {
  if (y.shape().size() != 4) throw ShapeError("attentional fusion expects a [N, C, H, W] map");
  FusionTrace t;
  t.x = nn::add(first_conv(ctx, y), y);
  t.w = stage1(ctx, t.x);
  t.conv_y = conv_y(ctx, y);
  t.x_prime = nn::add(nn::mul(t.conv_y, t.w), nn::mul(y, nn::one_minus(t.w)));
  t.w_prime = stage2(ctx, t.x_prime);
  t.out = nn::add(nn::mul(t.conv_y, t.w_prime), nn::mul(y, nn::one_minus(t.w_prime)));
  return t;
}

SubAttentionalBank SubAttentionalBank::create(nn::ParameterStore& store, const std::string& prefix, nn::Rng& rng) {
  SubAttentionalBank bank;
  for (std::size_t k = 0; k < kSubAttentionHeads; ++k) {
    bank.heads.push_back(AttentionalFusion::create(store, prefix + ".head" + std::to_string(k), rng));
  }
  return bank;
}

std::vector<nn::Var> SubAttentionalBank::operator()(const nn::LayerContext& ctx, nn::Var y) const {
  if (heads.size() != kSubAttentionHeads) {
    throw ConfigError("sub-attentional bank needs exactly 8 fusion layers, has " + std::to_string(heads.size()));
  }
  std::vector<nn::Var> out;
  out.reserve(heads.size());
  for (const auto& h : heads) out.push_back(h(ctx, y));
  return out;
}

namespace {

void check_vectors(const std::vector<nn::Var>& vectors, std::size_t min_count) {
  if (vectors.size() < min_count) {
    throw ShapeError("fusion needs at least " + std::to_string(min_count) + " feature vectors");
  }
  const nn::Shape& s0 = vectors.front().shape();
  if (s0.size() != 2) throw ShapeError("fusion inputs must be [N, d]");
  for (const auto& v : vectors) {
    if (v.shape() != s0) {
      throw ShapeError("ragged fusion inputs: " + nn::shape_string(s0) + " vs " + nn::shape_string(v.shape()));
    }
  }
}

}  // namespace

nn::Var stack_feature_map(const std::vector<nn::Var>& vectors) {
  check_vectors(vectors, 1);
  const std::size_t n = vectors.front().shape()[0];
  const std::size_t d = vectors.front().shape()[1];
  std::vector<nn::Var> rows;
  rows.reserve(vectors.size());
  for (const auto& v : vectors) rows.push_back(nn::reshape(v, {n, 1, 1, d}));
  return nn::concat(rows, 2);
}

nn::Var baseline_fuse(FusionMethod method, const std::vector<nn::Var>& vectors) {
  check_vectors(vectors, 2);
  switch (method) {
    case FusionMethod::mult:
      return nn::elementwise_product(vectors);
    case FusionMethod::concat:
      return nn::concat(vectors, 1);
    case FusionMethod::median:
      return nn::elementwise_median(vectors);
    case FusionMethod::max:
      return nn::elementwise_max(vectors);
    case FusionMethod::sum:
      return nn::elementwise_sum(vectors);
    case FusionMethod::mean:
      return nn::scale(nn::elementwise_sum(vectors), 1.0 / static_cast<double>(vectors.size()));
    case FusionMethod::atten:
    case FusionMethod::subatten:
      break;
  }
  throw ConfigError("baseline_fuse: '" + std::string(to_string(method)) + "' is not a parameter-free method");
}

}  // namespace depest::fusion
