#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "depest/errors.hpp"
#include "depest/fusion.hpp"
#include "support.hpp"

using namespace depest;
using namespace depest::nn;
using namespace depest::fusion;
using depest::testing::random_tensor;

namespace {

void fill(ParameterStore& store, const std::string& name, double v) {
  auto& p = store.at(name);
  p.value = Tensor(p.value.shape(), v);
}

// Pins both attention paths of one stage to a constant pre-sigmoid value.
void pin_stage(ParameterStore& store, const std::string& stage, double beta_each) {
  for (const char* path : {".global", ".local"}) {
    const std::string p = stage + path;
    fill(store, p + ".pw1.weight", 0.0);
    fill(store, p + ".pw2.weight", 0.0);
    fill(store, p + ".bn1.beta", 0.0);
    fill(store, p + ".bn2.gamma", 0.0);
    fill(store, p + ".bn2.beta", beta_each);
  }
}

void copy_prefix(ParameterStore& store, const std::string& from, const std::string& to) {
  for (auto& p : store.entries()) {
    if (p.name.rfind(from, 0) == 0) store.at(to + p.name.substr(from.size())).value = p.value;
  }
}

}  // namespace

TEST_CASE("method names") {
  for (auto m : {FusionMethod::mult, FusionMethod::concat, FusionMethod::median, FusionMethod::max, FusionMethod::sum,
                 FusionMethod::mean, FusionMethod::atten, FusionMethod::subatten}) {
    CHECK(parse_fusion_method(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_fusion_method("average"), ConfigError);
  CHECK(baseline_methods().size() == 6);
  CHECK(is_attention(FusionMethod::subatten));
  CHECK_FALSE(is_attention(FusionMethod::median));
}

TEST_CASE("zeroed attention gives w = 0.5 everywhere") {
  Rng rng(1);
  ParameterStore store;
  auto f = AttentionalFusion::create(store, "f", rng);
  pin_stage(store, "f.att1", 0.0);
  pin_stage(store, "f.att2", 0.0);
  Graph g;
  LayerContext ctx{g, store};
  Var y = g.constant(random_tensor({3, 1, 3, 5}, rng));
  const auto t = f.trace(ctx, y);
  for (double v : t.w.value().values()) CHECK(v == 0.5);
  for (double v : t.w_prime.value().values()) CHECK(v == 0.5);
  const Tensor& c = t.conv_y.value();
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(std::abs(t.out.value()[i] - 0.5 * (c[i] + y.value()[i])) < 1e-12);
  }
}

TEST_CASE("saturated attention selects one branch") {
  Rng rng(2);
  ParameterStore store;
  auto f = AttentionalFusion::create(store, "f", rng);
  Var y;
  Graph g;
  LayerContext ctx{g, store};
  y = g.constant(random_tensor({2, 1, 3, 4}, rng));

  pin_stage(store, "f.att2", -1000.0);
  const auto low = f.trace(ctx, y);
  for (std::size_t i = 0; i < y.value().size(); ++i) CHECK(low.out.value()[i] == y.value()[i]);

  pin_stage(store, "f.att2", 1000.0);
  const auto high = f.trace(ctx, y);
  for (std::size_t i = 0; i < y.value().size(); ++i) CHECK(high.out.value()[i] == high.conv_y.value()[i]);
}

TEST_CASE("global and local paths agree on per-sample constant maps") {
  Rng rng(3);
  ParameterStore store;
  auto a = ChannelAttention::create(store, "a", 1, 1, rng);
  copy_prefix(store, "a.local", "a.global");
  Graph g;
  LayerContext ctx{g, store};
  Tensor x({3, 1, 3, 4});
  const double cs[3] = {-0.7, 0.2, 1.9};
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < 12; ++i) x[n * 12 + i] = cs[n];
  Var xv = g.constant(x);
  const Tensor gl = a.global_path(ctx, xv).value();
  const Tensor lo = a.local_path(ctx, xv).value();
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < 12; ++i) CHECK(std::abs(lo[n * 12 + i] - gl[n]) < 1e-9);
}

TEST_CASE("fusion invariants on random inputs") {
  Rng rng(4);
  ParameterStore store;
  auto f = AttentionalFusion::create(store, "f", rng);
  for (int trial = 0; trial < 10; ++trial) {
    for (auto& p : store.entries())
      if (p.trainable) p.value = random_tensor(p.value.shape(), rng, -2, 2);
    Graph g;
    LayerContext ctx{g, store};
    Var y = g.constant(random_tensor({4, 1, 3, 6}, rng, -3, 3));
    const auto t = f.trace(ctx, y);
    CHECK(t.out.shape() == y.shape());
    CHECK(t.x.shape() == y.shape());
    for (double v : t.w.value().values()) CHECK((v > 0.0 && v < 1.0));
    for (double v : t.w_prime.value().values()) CHECK((v > 0.0 && v < 1.0));
    const Tensor& w = t.w_prime.value();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double expect = w[i] * t.conv_y.value()[i] + (1 - w[i]) * y.value()[i];
      CHECK(std::abs(t.out.value()[i] - expect) < 1e-9);
    }
  }
}

TEST_CASE("gradient check through the fusion stack") {
  Rng rng(5);
  ParameterStore store;
  auto f = AttentionalFusion::create(store, "f", rng);
  for (auto& p : store.entries())
    if (p.trainable) p.value = random_tensor(p.value.shape(), rng, -1, 1);
  const Tensor y = random_tensor({4, 1, 3, 4}, rng, -2, 2);
  const Tensor coeff = random_tensor({4, 1, 3, 4}, rng);
  auto build = [&](Graph& g, Var yv) {
    LayerContext ctx{g, store, true, false};
    return weighted_sum(f(ctx, yv), coeff);
  };
  const auto pr = depest::testing::check_param_gradients(store, [&](Graph& g) { return build(g, g.constant(y)); });
  INFO("params " << pr.max_rel_error << " a=" << pr.worst_analytic << " n=" << pr.worst_numeric);
  CHECK(pr.max_rel_error < 1e-4);
  const auto ir = depest::testing::check_input_gradients(
      [&](Graph& g, const std::vector<Var>& v) { return build(g, v[0]); }, {y});
  INFO("input " << ir.max_rel_error);
  CHECK(ir.max_rel_error < 1e-4);
}

TEST_CASE("sub-attentional heads are independent") {
  Rng rng(6);
  ParameterStore store;
  auto bank = SubAttentionalBank::create(store, "bank", rng);
  REQUIRE(bank.heads.size() == 8);
  for (std::size_t k = 1; k < 8; ++k) copy_prefix(store, "bank.head0.", "bank.head" + std::to_string(k) + ".");
  const Tensor y = random_tensor({3, 1, 3, 5}, rng);
  auto run = [&] {
    Graph g;
    LayerContext ctx{g, store, true, false};
    std::vector<Tensor> out;
    for (const auto& v : bank(ctx, g.constant(y))) out.push_back(v.value());
    return out;
  };
  const auto same = run();
  for (std::size_t k = 1; k < 8; ++k) CHECK(same[k] == same[0]);

  auto& conv = store.at("bank.head3.conv_y.weight").value;
  conv[4] += 0.5;
  const auto after = run();
  for (std::size_t k = 0; k < 8; ++k) {
    if (k == 3)
      CHECK_FALSE(after[k] == same[k]);
    else
      CHECK(after[k] == same[k]);
  }

  store.zero_grad();
  {
    Graph g;
    LayerContext ctx{g, store};
    const auto outs = bank(ctx, g.constant(y));
    g.backward(weighted_sum(outs[5], random_tensor(y.shape(), rng)));
  }
  double own = 0.0;
  for (const auto& p : store.entries()) {
    const bool mine = p.name.rfind("bank.head5.", 0) == 0;
    for (double v : p.grad.values()) {
      if (mine) own += std::abs(v);
      else CHECK(v == 0.0);
    }
  }
  CHECK(own > 0.0);

  bank.heads.pop_back();
  Graph g;
  LayerContext ctx{g, store};
  CHECK_THROWS_AS(bank(ctx, g.constant(y)), ConfigError);
}

TEST_CASE("baseline operators") {
  Graph g;
  auto vec = [&](std::vector<double> v) {
    const std::size_t d = v.size();
    return g.constant(Tensor({1, d}, std::move(v)));
  };
  CHECK(baseline_fuse(FusionMethod::mean, {vec({1, 3}), vec({3, 1})}).value() == Tensor({1, 2}, 2.0));
  CHECK(baseline_fuse(FusionMethod::median, {vec({1}), vec({2}), vec({9})}).value()[0] == 2.0);
  CHECK(baseline_fuse(FusionMethod::median, {vec({5}), vec({1}), vec({9}), vec({3})}).value()[0] == 3.0);
  CHECK(baseline_fuse(FusionMethod::max, {vec({1, 7}), vec({4, 2})}).value() == Tensor({1, 2}, std::vector<double>{4, 7}));
  CHECK(baseline_fuse(FusionMethod::mult, {vec({2, 3}), vec({4, -1})}).value() ==
        Tensor({1, 2}, std::vector<double>{8, -3}));
  CHECK(baseline_fuse(FusionMethod::sum, {vec({2, 3}), vec({4, -1})}).value() ==
        Tensor({1, 2}, std::vector<double>{6, 2}));
  const Tensor cat =
      baseline_fuse(FusionMethod::concat, {vec({1, 2, 3, 4}), vec({5, 6, 7, 8}), vec({9, 10, 11, 12})}).value();
  REQUIRE(cat.shape() == Shape{1, 12});
  for (std::size_t i = 0; i < 12; ++i) CHECK(cat[i] == static_cast<double>(i + 1));

  CHECK_THROWS_AS(baseline_fuse(FusionMethod::sum, {vec({1, 2}), vec({1, 2, 3})}), ShapeError);
  CHECK_THROWS_AS(baseline_fuse(FusionMethod::sum, {vec({1, 2})}), ShapeError);
  CHECK_THROWS_AS(baseline_fuse(FusionMethod::atten, {vec({1}), vec({2})}), ConfigError);

  const Tensor fm = stack_feature_map({vec({1, 2}), vec({3, 4}), vec({5, 6})}).value();
  CHECK(fm.shape() == Shape{1, 1, 3, 2});
  CHECK(fm.at({0, 0, 2, 1}) == 6.0);
}

TEST_CASE("baseline permutation behaviour") {
  Rng rng(8);
  Graph g;
  std::vector<Var> v;
  for (int i = 0; i < 3; ++i) v.push_back(g.constant(random_tensor({2, 5}, rng)));
  std::vector<std::size_t> order{0, 1, 2};
  for (auto m : baseline_methods()) {
    const Tensor ref = baseline_fuse(m, v).value();
    std::size_t differing = 0;
    std::vector<std::size_t> perm = order;
    while (std::next_permutation(perm.begin(), perm.end())) {
      std::vector<Var> p;
      for (auto i : perm) p.push_back(v[i]);
      const Tensor out = baseline_fuse(m, p).value();
      double diff = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) diff = std::max(diff, std::abs(out[i] - ref[i]));
      if (m == FusionMethod::concat) {
        if (diff > 0.0) ++differing;
      } else {
        CHECK(diff < 1e-12);
      }
    }
    if (m == FusionMethod::concat) CHECK(differing == 5);
  }
}
