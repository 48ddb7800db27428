#include <doctest.h>

#include <cmath>

#include "depest/errors.hpp"
#include "support.hpp"

using namespace depest;
using namespace depest::nn;
using depest::testing::check_input_gradients;
using depest::testing::random_tensor;

namespace {

// Brute-force cross-correlation oracle, [Cin, T] single sample.
std::vector<double> conv1d_oracle(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
  const std::size_t cin = x.dim(1), t = x.dim(2), cout = w.dim(0), k = w.dim(2);
  const std::size_t out_len = (t + 2 * pad - k) / stride + 1;
  std::vector<double> out(cout * out_len, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t p = 0; p < out_len; ++p) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t j = 0; j < k; ++j) {
          const long idx = static_cast<long>(p * stride + j) - static_cast<long>(pad);
          if (idx < 0 || idx >= static_cast<long>(t)) continue;
          acc += x[c * t + static_cast<std::size_t>(idx)] * w[(o * cin + c) * k + j];
        }
      }
      out[o * out_len + p] = acc;
    }
  }
  return out;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST_CASE("tensor construction and access") {
  CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(t.at({1, 2}) == 6.0);
  CHECK_THROWS_AS(t.at({2, 0}), ShapeError);
  CHECK(t.reshaped({3, 2}).at({2, 1}) == 6.0);
  CHECK_THROWS_AS(t.reshaped({4}), ShapeError);
  Tensor bad({1}, std::vector<double>{std::nan("")});
  CHECK_THROWS_AS(bad.check_finite("x"), NumericError);
}

TEST_CASE("backward basics") {
  Graph g;
  Var w = g.variable(Tensor::vector({1.5, -2.0, 0.25}));
  Var loss = sum(mul(w, w));
  g.backward(loss);
  const Tensor gw = g.grad(w);
  CHECK(gw[0] == doctest::Approx(3.0));
  CHECK(gw[1] == doctest::Approx(-4.0));
  CHECK(gw[2] == doctest::Approx(0.5));
  CHECK_THROWS_AS(g.backward(loss), GraphError);
  g.reset_grad();
  CHECK_NOTHROW(g.backward(loss));

  Graph h;
  Var v = h.variable(Tensor::vector({1.0, 2.0}));
  CHECK_THROWS_AS(h.backward(mul(v, v)), GraphError);

  Graph d;
  Var a = d.variable(Tensor::vector({2.0}));
  Var cut = d.detach(a);
  Var l2 = add(sum(mul(cut, cut)), sum(a));
  d.backward(l2);
  CHECK(d.grad(a)[0] == doctest::Approx(1.0));
  CHECK(d.grad(cut)[0] == 0.0);
}

TEST_CASE("non-finite forward values are rejected") {
  Graph g;
  Var x = g.variable(Tensor::vector({1e308}));
  CHECK_THROWS_AS(scale(x, 1e10), NumericError);
}

TEST_CASE("elementwise forward values") {
  Graph g;
  Var x = g.constant(Tensor::vector({-2.0, 3.0}));
  CHECK(relu(x).value()[0] == 0.0);
  CHECK(relu(x).value()[1] == 3.0);
  CHECK(sigmoid(g.constant(Tensor::vector({0.0}))).value()[0] == 0.5);
  Var sm = softmax(g.constant(Tensor({1, 4}, 0.0)));
  for (double v : sm.value().values()) CHECK(v == doctest::Approx(0.25));

  Rng rng(3);
  Var big = g.constant(random_tensor({5, 7}, rng, -50, 50));
  const Tensor s = softmax(big).value();
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 7; ++c) total += s[r * 7 + c];
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
  // exp(-x) underflows relative to 1 beyond |x| ~ 37, so keep inputs moderate.
  const Tensor sg = sigmoid(g.constant(random_tensor({5, 7}, rng, -30, 30))).value();
  for (double v : sg.values()) CHECK((v > 0.0 && v < 1.0));
}

TEST_CASE("conv1d examples and brute force") {
  Graph g;
  Var x = g.constant(Tensor({1, 1, 4}, std::vector<double>{1, 2, 3, 4}));
  Var ones = g.constant(Tensor({1, 1, 3}, 1.0));
  const Tensor y = conv1d(x, ones, std::nullopt).value();
  REQUIRE(y.shape() == Shape{1, 1, 2});
  CHECK(y[0] == 6.0);
  CHECK(y[1] == 9.0);

  Var ident = g.constant(Tensor({1, 1, 3}, std::vector<double>{0, 1, 0}));
  const Tensor z = conv1d(x, ident, std::nullopt, {1, 1}).value();
  for (std::size_t i = 0; i < 4; ++i) CHECK(z[i] == x.value()[i]);

  Rng rng(11);
  std::uniform_int_distribution<std::size_t> small(1, 4), len(3, 12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t cin = small(rng), cout = small(rng), t = len(rng), k = small(rng) % 3 + 1;
    const std::size_t stride = small(rng) % 2 + 1, pad = small(rng) % 2;
    if (t + 2 * pad < k) continue;
    Graph h;
    const Tensor xt = random_tensor({1, cin, t}, rng);
    const Tensor wt = random_tensor({cout, cin, k}, rng);
    const Tensor out = conv1d(h.constant(xt), h.constant(wt), std::nullopt, {stride, pad}).value();
    const auto oracle = conv1d_oracle(xt, wt, stride, pad);
    std::size_t brute_len = 0;
    for (std::size_t s = 0; s + k <= t + 2 * pad; s += stride) ++brute_len;
    REQUIRE(out.dim(2) == brute_len);
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(std::abs(out[i] - oracle[i]) < 1e-12);
  }
  CHECK_THROWS_AS(conv1d(x, g.constant(Tensor({1, 2, 3}, 1.0)), std::nullopt), ShapeError);
}

TEST_CASE("conv2d examples and brute force") {
  Rng rng(5);
  Graph g;
  const Tensor xt = random_tensor({1, 1, 6, 5}, rng);
  const Tensor col = conv2d(g.constant(xt), g.constant(Tensor({1, 1, 6, 1}, 1.0)), std::nullopt).value();
  REQUIRE(col.shape() == Shape{1, 1, 1, 5});
  for (std::size_t w = 0; w < 5; ++w) {
    double s = 0.0;
    for (std::size_t h = 0; h < 6; ++h) s += xt[h * 5 + w];
    CHECK(std::abs(col[w] - s) < 1e-12);
  }
  const Tensor wide = conv2d(g.constant(random_tensor({1, 1, 72, 10}, rng)),
                             g.constant(random_tensor({1, 1, 72, 3}, rng)), std::nullopt)
                          .value();
  CHECK(wide.shape() == Shape{1, 1, 1, 8});

  const Tensor x7 = random_tensor({1, 2, 72, 7}, rng);
  const Tensor w7 = random_tensor({3, 2, 72, 3}, rng);
  const Tensor out = conv2d(g.constant(x7), g.constant(w7), std::nullopt).value();
  REQUIRE(out.shape() == Shape{1, 3, 1, 5});
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t p = 0; p < 5; ++p) {
      double acc = 0.0;
      for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t h = 0; h < 72; ++h)
          for (std::size_t k = 0; k < 3; ++k) acc += x7[(c * 72 + h) * 7 + p + k] * w7[((o * 2 + c) * 72 + h) * 3 + k];
      CHECK(std::abs(out[o * 5 + p] - acc) < 1e-10);
    }
  }
  CHECK_THROWS_AS(conv2d(g.constant(random_tensor({1, 1, 5, 5}, rng)), g.constant(Tensor({1, 1, 6, 1}, 1.0)),
                         std::nullopt),
                  ShapeError);
}

TEST_CASE("batch norm statistics") {
  Rng rng(2);
  Graph g;
  const Tensor xt = random_tensor({6, 2, 4}, rng, -3, 5);
  Tensor rm({2}, 0.0), rv({2}, 1.0);
  const Tensor y =
      batch_norm(g.constant(xt), g.constant(Tensor({2}, 1.0)), g.constant(Tensor({2}, 0.0)), rm, rv).value();
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t n = 0; n < 6; ++n)
      for (std::size_t t = 0; t < 4; ++t) mean += y[(n * 2 + c) * 4 + t];
    mean /= 24;
    for (std::size_t n = 0; n < 6; ++n)
      for (std::size_t t = 0; t < 4; ++t) var += std::pow(y[(n * 2 + c) * 4 + t] - mean, 2);
    var /= 24;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
  const Tensor y2 = batch_norm(g.constant(xt), g.constant(Tensor({2}, 2.0)), g.constant(Tensor({2}, 3.0)), rm, rv).value();
  double mean2 = 0.0;
  for (std::size_t n = 0; n < 6; ++n)
    for (std::size_t t = 0; t < 4; ++t) mean2 += y2[(n * 2) * 4 + t];
  CHECK(mean2 / 24 == doctest::Approx(3.0));

  // Eval mode: closed form with stored statistics.
  Tensor m({2}, std::vector<double>{0.5, -1.0}), v({2}, std::vector<double>{4.0, 0.25});
  BatchNormOptions eval;
  eval.training = false;
  const Tensor ye = batch_norm(g.constant(xt), g.constant(Tensor::vector({1.5, 0.5})),
                               g.constant(Tensor::vector({0.1, -0.2})), m, v, eval)
                        .value();
  for (std::size_t i = 0; i < xt.size(); ++i) {
    const std::size_t c = (i / 4) % 2;
    const double gamma = c == 0 ? 1.5 : 0.5, beta = c == 0 ? 0.1 : -0.2;
    CHECK(std::abs(ye[i] - (gamma * (xt[i] - m[c]) / std::sqrt(v[c] + 1e-5) + beta)) < 1e-12);
  }
  CHECK(m[0] == 0.5);  // eval leaves running stats alone
}

TEST_CASE("running statistics update") {
  Graph g;
  Tensor x({2, 1, 2}, std::vector<double>{1, 3, 5, 7});
  Tensor rm({1}, 0.0), rv({1}, 1.0);
  batch_norm(g.constant(x), g.constant(Tensor({1}, 1.0)), g.constant(Tensor({1}, 0.0)), rm, rv);
  CHECK(rm[0] == doctest::Approx(0.1 * 4.0));
  // Unbiased variance of {1,3,5,7} is 20/3.
  CHECK(rv[0] == doctest::Approx(0.9 + 0.1 * 20.0 / 3.0));
  BatchNormOptions frozen;
  frozen.update_running_stats = false;
  batch_norm(g.constant(x), g.constant(Tensor({1}, 1.0)), g.constant(Tensor({1}, 0.0)), rm, rv, frozen);
  CHECK(rm[0] == doctest::Approx(0.4));
}

TEST_CASE("max pool") {
  Graph g;
  const Tensor y = max_pool1d(g.constant(Tensor({1, 1, 4}, std::vector<double>{1, 5, 2, 3})), 2).value();
  CHECK(y[0] == 5.0);
  CHECK(y[1] == 3.0);
  CHECK(max_pool1d(g.constant(Tensor({1, 1, 4}, std::vector<double>{1, 5, 2, 3})), 4).value()[0] == 5.0);
  CHECK_THROWS_AS(max_pool1d(g.constant(Tensor({1, 1, 3}, 1.0)), 4), ShapeError);
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = 2 + trial % 11, p = 1 + trial % 3;
    if (t < p) continue;
    const Tensor x = random_tensor({2, 3, t}, rng);
    const Tensor out = max_pool1d(g.constant(x), p).value();
    REQUIRE(out.dim(2) == t / p);
    for (std::size_t row = 0; row < 6; ++row) {
      for (std::size_t o = 0; o < t / p; ++o) {
        double m = -1e300;
        for (std::size_t j = 0; j < p; ++j) m = std::max(m, x[row * t + o * p + j]);
        CHECK(out[row * (t / p) + o] == m);
      }
    }
  }
}

TEST_CASE("lstm oracles") {
  Graph g;
  const std::size_t h = 3, d = 2;
  Rng rng(21);
  Var x = g.constant(random_tensor({1, 4, d}, rng));
  Var zeros = lstm(x, g.constant(Tensor({4 * h, d}, 0.0)), g.constant(Tensor({4 * h, h}, 0.0)),
                   g.constant(Tensor({4 * h}, 0.0)), false);
  for (double v : zeros.value().values()) CHECK(v == 0.0);

  const Tensor wih = random_tensor({4 * h, d}, rng), whh = random_tensor({4 * h, h}, rng), b = random_tensor({4 * h}, rng);
  Var x1 = g.constant(random_tensor({1, 1, d}, rng));
  const Tensor f1 = lstm(x1, g.constant(wih), g.constant(whh), g.constant(b), false).value();
  const Tensor b1 = lstm(x1, g.constant(wih), g.constant(whh), g.constant(b), true).value();
  for (std::size_t i = 0; i < h; ++i) CHECK(f1[i] == b1[i]);

  // Two steps unrolled by hand.
  const Tensor xs = random_tensor({1, 2, d}, rng);
  std::vector<double> hs(h, 0.0), cs(h, 0.0);
  std::vector<std::vector<double>> expected;
  for (std::size_t t = 0; t < 2; ++t) {
    std::vector<double> z(4 * h);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      z[r] = b[r];
      for (std::size_t j = 0; j < d; ++j) z[r] += wih[r * d + j] * xs[t * d + j];
      for (std::size_t j = 0; j < h; ++j) z[r] += whh[r * h + j] * hs[j];
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = sig(z[j]), fg = sig(z[h + j]), gg = std::tanh(z[2 * h + j]), og = sig(z[3 * h + j]);
      cs[j] = fg * cs[j] + ig * gg;
      hs[j] = og * std::tanh(cs[j]);
    }
    expected.push_back(hs);
  }
  const Tensor out = lstm(g.constant(xs), g.constant(wih), g.constant(whh), g.constant(b), false).value();
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t j = 0; j < h; ++j) CHECK(std::abs(out[t * h + j] - expected[t][j]) < 1e-10);
}

TEST_CASE("linear and global average pooling") {
  Graph g;
  Rng rng(4);
  const Tensor x = random_tensor({2, 3}, rng);
  Tensor eye({3, 3}, 0.0);
  for (std::size_t i = 0; i < 3; ++i) eye[i * 4] = 1.0;
  const Tensor id = linear(g.constant(x), g.constant(eye), g.constant(Tensor({3}, 0.0))).value();
  CHECK(id == x);
  const Tensor c = linear(g.constant(x), g.constant(Tensor({2, 3}, 0.0)), g.constant(Tensor::vector({7, -1}))).value();
  CHECK(c[0] == 7.0);
  CHECK(c[3] == -1.0);
  const Tensor w = random_tensor({4, 3}, rng), b = random_tensor({4}, rng);
  const Tensor y = linear(g.constant(x), g.constant(w), g.constant(b)).value();
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 4; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < 3; ++i) acc += w[o * 3 + i] * x[n * 3 + i];
      CHECK(std::abs(y[n * 4 + o] - acc) < 1e-12);
    }

  CHECK(global_avg_pool(g.constant(Tensor({1, 1, 3, 3}, 2.5))).value()[0] == 2.5);
  CHECK(global_avg_pool(g.constant(Tensor({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}))).value()[0] == 2.5);
  const Tensor r = random_tensor({2, 3, 4, 5}, rng);
  const Tensor gap = global_avg_pool(g.constant(r)).value();
  for (std::size_t i = 0; i < 6; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < 20; ++j) m += r[i * 20 + j];
    CHECK(std::abs(gap[i] - m / 20) < 1e-12);
  }
}

TEST_CASE("forward determinism") {
  auto run = [] {
    Rng rng(99);
    ParameterStore store;
    auto conv = Conv1dLayer::create(store, "c", 3, 4, 3, 1, false, rng);
    auto lstm_layer = BiLstmLayer::create(store, "l", 4, 5, rng);
    Graph g;
    LayerContext ctx{g, store, true, true};
    Var x = g.constant(random_tensor({2, 3, 6}, rng));
    return lstm_layer.summary(ctx, swap_last_two(conv(ctx, x))).value();
  };
  CHECK(run() == run());
}

TEST_CASE("gradient checks: elementwise and structural ops") {
  Rng rng(1234);
  auto check = [&](const char* name, const depest::testing::InputBuilder& b, std::vector<Tensor> in) {
    const auto r = check_input_gradients(b, std::move(in));
    INFO(name);
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.checked > 0);
  };
  const Tensor c23 = random_tensor({2, 3}, rng);
  Rng lr(7);
  const Tensor coeff = random_tensor({2, 3}, lr);
  auto wsum = [&](Var v) { return weighted_sum(v, coeff); };
  check("add", [&](Graph&, const std::vector<Var>& v) { return wsum(add(v[0], v[1])); },
        {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
  check("sub", [&](Graph&, const std::vector<Var>& v) { return wsum(sub(v[0], v[1])); },
        {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
  check("mul", [&](Graph&, const std::vector<Var>& v) { return wsum(mul(v[0], v[1])); },
        {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)});
  check("scale/one_minus", [&](Graph&, const std::vector<Var>& v) { return wsum(one_minus(scale(v[0], -1.7))); },
        {c23});
  check("relu", [&](Graph&, const std::vector<Var>& v) { return wsum(relu(v[0])); }, {c23});
  check("sigmoid", [&](Graph&, const std::vector<Var>& v) { return wsum(sigmoid(v[0])); }, {c23});
  check("tanh", [&](Graph&, const std::vector<Var>& v) { return wsum(tanh(v[0])); }, {c23});
  check("softmax", [&](Graph&, const std::vector<Var>& v) { return wsum(softmax(v[0])); }, {c23});
  check("reshape/swap", [&](Graph&, const std::vector<Var>& v) {
    return wsum(reshape(swap_last_two(reshape(v[0], {1, 2, 3})), {2, 3}));
  }, {c23});
  check("concat", [&](Graph&, const std::vector<Var>& v) {
    Var cat = concat({v[0], v[1]}, 1);
    return weighted_sum(cat, Tensor({2, 5}, std::vector<double>{1, -2, 3, 0.5, 0.1, -1, 2, 0.3, 0.7, -0.9}));
  }, {random_tensor({2, 3}, rng), random_tensor({2, 2}, rng)});
  check("select_step", [&](Graph&, const std::vector<Var>& v) {
    return weighted_sum(select_step(v[0], 1), Tensor({2, 2}, std::vector<double>{1, -2, 3, 0.5}));
  }, {random_tensor({2, 3, 2}, rng)});
  check("add_channel_broadcast", [&](Graph&, const std::vector<Var>& v) {
    Rng cr(3);
    return weighted_sum(add_channel_broadcast(v[0], v[1]), random_tensor({2, 3, 2, 2}, cr));
  }, {random_tensor({2, 3, 2, 2}, rng), random_tensor({2, 3}, rng)});
  const std::vector<Tensor> three{random_tensor({2, 3}, rng), random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
  check("elementwise_product", [&](Graph&, const std::vector<Var>& v) { return wsum(elementwise_product(v)); }, three);
  check("elementwise_sum", [&](Graph&, const std::vector<Var>& v) { return wsum(elementwise_sum(v)); }, three);
  check("elementwise_max", [&](Graph&, const std::vector<Var>& v) { return wsum(elementwise_max(v)); }, three);
  check("elementwise_median", [&](Graph&, const std::vector<Var>& v) { return wsum(elementwise_median(v)); }, three);
}

TEST_CASE("gradient checks: layers") {
  Rng rng(77);
  auto check = [&](const char* name, const depest::testing::InputBuilder& b, std::vector<Tensor> in) {
    const auto r = check_input_gradients(b, std::move(in));
    INFO(name << " max rel error " << r.max_rel_error);
    CHECK(r.max_rel_error < 1e-4);
  };
  auto coeffs = [](const Shape& s) {
    Rng cr(17);
    return random_tensor(s, cr);
  };
  check("conv1d", [&](Graph&, const std::vector<Var>& v) {
    Var y = conv1d(v[0], v[1], v[2], {2, 1});
    return weighted_sum(y, coeffs(y.shape()));
  }, {random_tensor({2, 3, 7}, rng), random_tensor({4, 3, 3}, rng), random_tensor({4}, rng)});
  check("conv2d", [&](Graph&, const std::vector<Var>& v) {
    Var y = conv2d(v[0], v[1], v[2], {1, 1, 1, 1});
    return weighted_sum(y, coeffs(y.shape()));
  }, {random_tensor({2, 2, 4, 5}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)});
  check("batch_norm train", [&](Graph&, const std::vector<Var>& v) {
    Tensor rm({3}, 0.0), rv({3}, 1.0);
    Var y = batch_norm(v[0], v[1], v[2], rm, rv);
    return weighted_sum(y, coeffs(y.shape()));
  }, {random_tensor({4, 3, 5}, rng), random_tensor({3}, rng, 0.5, 1.5), random_tensor({3}, rng)});
  check("batch_norm eval", [&](Graph&, const std::vector<Var>& v) {
    Tensor rm({3}, std::vector<double>{0.1, -0.2, 0.3}), rv({3}, std::vector<double>{1.5, 0.7, 2.0});
    BatchNormOptions opt;
    opt.training = false;
    Var y = batch_norm(v[0], v[1], v[2], rm, rv, opt);
    return weighted_sum(y, coeffs(y.shape()));
  }, {random_tensor({2, 3, 4}, rng), random_tensor({3}, rng), random_tensor({3}, rng)});
  check("max_pool1d", [&](Graph&, const std::vector<Var>& v) {
    Var y = max_pool1d(v[0], 3);
    return weighted_sum(y, coeffs(y.shape()));
  }, {random_tensor({2, 2, 10}, rng)});
  for (bool reverse : {false, true}) {
    check(reverse ? "lstm reverse" : "lstm forward", [&](Graph&, const std::vector<Var>& v) {
      Var y = lstm(v[0], v[1], v[2], v[3], reverse);
      return weighted_sum(y, coeffs(y.shape()));
    }, {random_tensor({2, 4, 3}, rng), random_tensor({8, 3}, rng), random_tensor({8, 2}, rng), random_tensor({8}, rng)});
  }
  check("linear", [&](Graph&, const std::vector<Var>& v) {
    Var y = linear(v[0], v[1], v[2]);
    return weighted_sum(y, coeffs(y.shape()));
  }, {random_tensor({3, 4}, rng), random_tensor({2, 4}, rng), random_tensor({2}, rng)});
  check("global_avg_pool", [&](Graph&, const std::vector<Var>& v) {
    Var y = global_avg_pool(v[0]);
    return weighted_sum(y, coeffs(y.shape()));
  }, {random_tensor({2, 3, 2, 3}, rng)});
  const Tensor target = [] {
    Tensor t({2, 4}, std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.0, 0.5, 0.25, 0.25});
    return t;
  }();
  check("kl_divergence via softmax", [&](Graph&, const std::vector<Var>& v) {
    return kl_divergence(softmax(v[0]), target, Tensor::vector({1.0, 0.5}));
  }, {random_tensor({2, 4}, rng)});
}

TEST_CASE("layers register named parameters") {
  Rng rng(1);
  ParameterStore store;
  Conv1dLayer::create(store, "a", 2, 3, 3, 1, true, rng);
  BatchNormLayer::create(store, "bn", 3);
  LinearLayer::create(store, "fc", 4, 2, rng);
  BiLstmLayer::create(store, "l", 3, 2, rng);
  CHECK(store.contains("a.weight"));
  CHECK(store.contains("a.bias"));
  CHECK_FALSE(store.at("bn.running_mean").trainable);
  CHECK(store.at("l.fwd.bias").value[2] == 1.0);  // forget gate block starts at H = 2
  CHECK(store.at("l.fwd.bias").value[0] == 0.0);
  CHECK_THROWS_AS(store.add("a.weight", Tensor({1})), ConfigError);
  CHECK_THROWS_AS(store.at("missing"), ConfigError);
  for (double v : store.at("fc.weight").value.values()) CHECK(std::abs(v) <= 0.5);
}
