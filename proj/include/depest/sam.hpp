#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "depest/nn/graph.hpp"

// Sharpness-aware minimization around SGD with optional momentum.

namespace depest::sam {

struct SgdConfig {
  double learning_rate = 1e-3;
  double momentum = 0.0;

  void validate() const;
};

struct SamConfig {
  double rho = 0.05;
  SgdConfig base;

  void validate() const;
};

/// Plain SGD: v <- mu v + g; w <- w - eta v, over trainable parameters in
/// store order, using the gradients currently held in the store.
class Sgd {
 public:
  explicit Sgd(SgdConfig cfg);
  void step(nn::ParameterStore& store);
  const SgdConfig& config() const { return cfg_; }

 private:
  SgdConfig cfg_;
  std::vector<nn::Tensor> velocity_;
};

enum class SamPass {
  /// Gradient at the current weights.
  first,
  /// Gradient at the perturbed weights. Batch-norm running statistics should
  /// not be updated during this pass.
  perturbed,
};

/// Evaluates the loss at the store's current values and leaves its gradient in
/// each Parameter::grad (the optimizer zeroes them beforehand). Returns the loss.
using LossFn = std::function<double(nn::ParameterStore&, SamPass)>;

struct SamStepResult {
  double loss = 0.0;            // at w
  double perturbed_loss = 0.0;  // at w + eps (equals loss when not perturbed)
  double grad_norm = 0.0;       // ||g1||
  double epsilon_norm = 0.0;    // ||eps||
  bool perturbed = false;
};

class Sam {
 public:
  explicit Sam(SamConfig cfg);

  /// g1 = grad L(w); eps = rho g1 / ||g1|| over all trainable values;
  /// g2 = grad L(w + eps); w is restored exactly, then the base optimizer
  /// steps with g2. A zero g1 skips the perturbation and steps with g1.
  /// Throws NumericError when a loss is not finite; the weights are then
  /// left as they were before the call.
  SamStepResult step(nn::ParameterStore& store, const LossFn& loss_fn);

  /// Number of loss/gradient evaluations performed so far.
  std::size_t evaluations() const { return evaluations_; }
  const SamConfig& config() const { return cfg_; }

 private:
  double evaluate(nn::ParameterStore& store, const LossFn& loss_fn, SamPass pass);

  SamConfig cfg_;
  Sgd base_;
  std::size_t evaluations_ = 0;
};

/// Euclidean norm of all trainable gradients.
double gradient_norm(const nn::ParameterStore& store);

}  // namespace depest::sam
