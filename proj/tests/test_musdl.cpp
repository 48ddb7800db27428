#include <doctest.h>

#include <cmath>
#include <random>

#include "depest/errors.hpp"
#include "depest/musdl.hpp"
#include "support.hpp"

using namespace depest;
using namespace depest::musdl;
using nn::Tensor;

TEST_CASE("config") {
  MusdlConfig cfg;
  CHECK(cfg.ratio() == 8);
  CHECK_NOTHROW(cfg.validate());
  MusdlConfig bad = cfg;
  bad.m_expanded = 30;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.sigma = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("soft label rows") {
  MusdlConfig cfg;
  CHECK(class_center(0, cfg) == 3.5);
  CHECK(class_center(3, cfg) == 27.5);
  for (int s = 0; s < 4; ++s) {
    const auto row = soft_label_row(s, cfg);
    REQUIRE(row.size() == 32);
    double total = 0.0;
    for (double v : row) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-6);
    // Oracle: unnormalized Gaussian ratios between neighbours.
    const double mu = (s + 0.5) * 8 - 0.5;
    for (std::size_t j = 1; j < 32; ++j) {
      const double ratio = std::exp(-(std::pow(j - mu, 2) - std::pow(j - 1.0 - mu, 2)) / 50.0);
      CHECK(row[j] / row[j - 1] == doctest::Approx(ratio).epsilon(1e-12));
    }
  }
  const auto r0 = soft_label_row(0, cfg), r3 = soft_label_row(3, cfg);
  for (std::size_t j = 0; j < 32; ++j) CHECK(std::abs(r0[j] - r3[31 - j]) < 1e-9);
  const auto r1 = soft_label_row(1, cfg), r2 = soft_label_row(2, cfg);
  for (std::size_t j = 0; j < 32; ++j) CHECK(std::abs(r1[j] - r2[31 - j]) < 1e-9);
}

TEST_CASE("transform labels") {
  MusdlConfig cfg;
  const std::vector<int> hard{0, 1, 2, 3, 3, 2, 1, 0};
  const Tensor t = transform_labels(hard, cfg);
  CHECK(t.shape() == nn::Shape{8, 32});
  for (std::size_t i = 0; i < 8; ++i) {
    const auto row = soft_label_row(hard[i], cfg);
    for (std::size_t j = 0; j < 32; ++j) CHECK(t[i * 32 + j] == row[j]);
  }
  CHECK(decode_prediction(t, cfg) == hard);
  // Rows do not depend on the other coordinates.
  std::vector<int> other = hard;
  other[0] = 3;
  const Tensor u = transform_labels(other, cfg);
  for (std::size_t j = 32; j < 256; ++j) CHECK(u[j] == t[j]);

  CHECK_THROWS_AS(transform_labels(std::vector<int>{0, 1, 2, 4, 0, 0, 0, 0}, cfg), DomainError);
  CHECK_THROWS_AS(transform_labels(std::vector<int>{0, -1, 2, 3, 0, 0, 0, 0}, cfg), DomainError);
  CHECK_THROWS_AS(transform_labels(std::vector<int>{0, 1, 2}, cfg), ShapeError);
}

TEST_CASE("kl loss") {
  MusdlConfig cfg;
  const Tensor t = transform_labels(std::vector<int>{0, 1, 2, 3, 0, 1, 2, 3}, cfg);
  CHECK(std::abs(kl_loss(t, t)) < 1e-9);
  CHECK(std::abs(kl_loss(Tensor({2, 4}, 0.25), Tensor({2, 4}, 0.25))) < 1e-12);
  CHECK(kl_loss(Tensor({1, 2}, std::vector<double>{1, 0}), Tensor({1, 2}, std::vector<double>{0.5, 0.5})) ==
        doctest::Approx(std::log(2.0)));
  // An exact zero where the target has mass is clamped rather than infinite.
  const double clamped =
      kl_loss(Tensor({1, 2}, std::vector<double>{0.5, 0.5}), Tensor({1, 2}, std::vector<double>{1.0, 0.0}));
  CHECK(std::isfinite(clamped));
  CHECK(clamped == doctest::Approx(0.5 * std::log(0.5) + 0.5 * std::log(0.5 / 1e-12)));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor p({8, 32});
    for (std::size_t i = 0; i < 8; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 32; ++j) s += (p[i * 32 + j] = u(rng));
      for (std::size_t j = 0; j < 32; ++j) p[i * 32 + j] /= s;
    }
    CHECK(kl_loss(t, p) >= 0.0);
  }
}

TEST_CASE("kl gradient wrt logits matches finite differences") {
  MusdlConfig cfg;
  const Tensor t = transform_labels(std::vector<int>{3, 0, 2, 1, 1, 2, 0, 3}, cfg);
  nn::Rng rng(9);
  const Tensor logits = testing::random_tensor({8, 32}, rng, -2, 2);
  const auto r = testing::check_input_gradients(
      [&](nn::Graph&, const std::vector<nn::Var>& v) {
        return nn::kl_divergence(nn::softmax(v[0]), t, Tensor({8}, 1.0));
      },
      {logits});
  CHECK(r.max_rel_error < 1e-4);
  nn::Graph g;
  const double op = nn::kl_divergence(nn::softmax(g.constant(logits)), t, Tensor({8}, 1.0)).value()[0];
  CHECK(op == doctest::Approx(kl_loss(t, nn::softmax(g.constant(logits)).value())).epsilon(1e-12));
}

TEST_CASE("decode") {
  MusdlConfig cfg;
  auto one_hot = [](std::size_t idx) {
    Tensor p({1, 32}, 0.0);
    p[idx] = 1.0;
    return p;
  };
  MusdlConfig one = cfg;
  one.n = 1;
  CHECK(decode_prediction(one_hot(17), one)[0] == 2);
  CHECK(decode_prediction(one_hot(0), one)[0] == 0);
  CHECK(decode_prediction(one_hot(31), one)[0] == 3);
  CHECK(decode_prediction(Tensor({1, 32}, 1.0 / 32), one)[0] == 0);  // tie -> lowest index

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> level(0, 4);
  for (int trial = 0; trial < 500; ++trial) {
    Tensor p({8, 32});
    for (double& v : p.values()) v = level(rng);  // coarse levels force ties
    const auto dec = decode_prediction(p, cfg);
    for (std::size_t i = 0; i < 8; ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < 32; ++j)
        if (p[i * 32 + j] > p[i * 32 + best]) best = j;
      CHECK(dec[i] == static_cast<int>(best / 8));
    }
  }
}
