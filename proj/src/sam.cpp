#include "depest/sam.hpp"

#include <cmath>
#include <string>

#include "depest/errors.hpp"

namespace depest::sam {

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
}

void SamConfig::validate() const {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("SAM rho must be non-negative");
  base.validate();
}

Sgd::Sgd(SgdConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void Sgd::step(nn::ParameterStore& store) {
  auto& entries = store.entries();
  if (velocity_.size() != entries.size()) {
    velocity_.clear();
    for (const auto& p : entries) velocity_.emplace_back(p.value.shape());
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& p = entries[i];
    if (!p.trainable) continue;
    double* w = p.value.data();
    const double* g = p.grad.data();
    const std::size_t n = p.value.size();
    if (cfg_.momentum == 0.0) {
      for (std::size_t j = 0; j < n; ++j) w[j] -= cfg_.learning_rate * g[j];
    } else {
      double* v = velocity_[i].data();
      for (std::size_t j = 0; j < n; ++j) {
        v[j] = cfg_.momentum * v[j] + g[j];
        w[j] -= cfg_.learning_rate * v[j];
      }
    }
  }
}

double gradient_norm(const nn::ParameterStore& store) {
  double sq = 0.0;
  for (const auto& p : store.entries()) {
    if (!p.trainable) continue;
    for (double g : p.grad.values()) sq += g * g;
  }
  return std::sqrt(sq);
}

Sam::Sam(SamConfig cfg) : cfg_(cfg), base_(cfg.base) { cfg_.validate(); }

double Sam::evaluate(nn::ParameterStore& store, const LossFn& loss_fn, SamPass pass) {
  store.zero_grad();
  ++evaluations_;
  const double loss = loss_fn(store, pass);
  if (!std::isfinite(loss)) {
    throw NumericError(std::string("non-finite loss during SAM ") +
                       (pass == SamPass::first ? "first" : "perturbed") + " pass");
  }
  return loss;
}

SamStepResult Sam::step(nn::ParameterStore& store, const LossFn& loss_fn) {
  SamStepResult r;
  r.loss = evaluate(store, loss_fn, SamPass::first);
  r.grad_norm = gradient_norm(store);
  r.perturbed_loss = r.loss;
  if (!std::isfinite(r.grad_norm)) throw NumericError("non-finite gradient norm in SAM step");

  if (r.grad_norm > 0.0) {
    auto& entries = store.entries();
    std::vector<nn::Tensor> saved;
    saved.reserve(entries.size());
    const double k = cfg_.rho / r.grad_norm;
    double eps_sq = 0.0;
    for (auto& p : entries) {
      saved.push_back(p.value);
      if (!p.trainable) continue;
      double* w = p.value.data();
      const double* g = p.grad.data();
      for (std::size_t j = 0; j < p.value.size(); ++j) {
        const double e = k * g[j];
        eps_sq += e * e;
        w[j] += e;
      }
    }
    r.epsilon_norm = std::sqrt(eps_sq);
    r.perturbed = true;
    // Running statistics are not trainable but are restored too, so the
    // perturbed pass leaves no trace even if the loss function updates them.
    auto restore = [&] {
      for (std::size_t i = 0; i < entries.size(); ++i) entries[i].value = saved[i];
    };
    try {
      r.perturbed_loss = evaluate(store, loss_fn, SamPass::perturbed);
    } catch (...) {
      restore();
      throw;
    }
    restore();
  }
  base_.step(store);
  return r;
}

}  // namespace depest::sam
