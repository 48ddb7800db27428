#pragma once

// Finite-difference gradient checks and small fixtures shared by the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "depest/nn/graph.hpp"
#include "depest/nn/layers.hpp"
#include "depest/nn/ops.hpp"

namespace depest::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  double max_abs_analytic = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6), maximized over
/// entries. The floor keeps round-off in central differences (~1e-10 absolute
/// at step 1e-5) from dominating on near-zero gradients.
inline void accumulate(GradCheck& r, double analytic, double numeric) {
  const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  if (rel > r.max_rel_error) {
    r.max_rel_error = rel;
    r.worst_analytic = analytic;
    r.worst_numeric = numeric;
  }
  r.max_abs_analytic = std::max(r.max_abs_analytic, std::abs(analytic));
  ++r.checked;
}

inline nn::Tensor random_tensor(nn::Shape shape, nn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : t.values()) v = d(rng);
  return t;
}

/// Builds a scalar loss from leaf variables.
using InputBuilder = std::function<nn::Var(nn::Graph&, const std::vector<nn::Var>&)>;

/// Central differences on every entry of every input versus backward().
inline GradCheck check_input_gradients(const InputBuilder& build, std::vector<nn::Tensor> inputs,
                                       double step = 1e-5) {
  nn::Graph g;
  std::vector<nn::Var> vars;
  for (const auto& t : inputs) vars.push_back(g.variable(t));
  nn::Var loss = build(g, vars);
  g.backward(loss);
  GradCheck r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const nn::Tensor analytic = g.grad(vars[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k][i];
      auto eval = [&](double v) {
        inputs[k][i] = v;
        nn::Graph h(false);
        std::vector<nn::Var> hv;
        for (const auto& t : inputs) hv.push_back(h.constant(t));
        const double out = build(h, hv).value()[0];
        inputs[k][i] = orig;
        return out;
      };
      const double numeric = (eval(orig + step) - eval(orig - step)) / (2.0 * step);
      accumulate(r, analytic[i], numeric);
    }
  }
  return r;
}

/// Builds a scalar loss using the parameters of `store`.
using ParamBuilder = std::function<nn::Var(nn::Graph&)>;

/// Central differences on every trainable parameter entry (or on a strided
/// subset when `stride` > 1) versus backward().
inline GradCheck check_param_gradients(nn::ParameterStore& store, const ParamBuilder& build, double step = 1e-5,
                                       std::size_t stride = 1) {
  store.zero_grad();
  {
    nn::Graph g;
    g.backward(build(g));
  }
  std::vector<nn::Tensor> analytic;
  for (const auto& p : store.entries()) analytic.push_back(p.grad);
  GradCheck r;
  std::size_t counter = 0;
  for (std::size_t k = 0; k < store.entries().size(); ++k) {
    auto& p = store.entries()[k];
    if (!p.trainable) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i, ++counter) {
      if (counter % stride != 0) continue;
      const double orig = p.value[i];
      auto eval = [&](double v) {
        p.value[i] = v;
        nn::Graph h(false);
        const double out = build(h).value()[0];
        p.value[i] = orig;
        return out;
      };
      const double numeric = (eval(orig + step) - eval(orig - step)) / (2.0 * step);
      accumulate(r, analytic[k][i], numeric);
    }
  }
  return r;
}

}  // namespace depest::testing
