#include "depest/nn/graph.hpp"

#include "depest/errors.hpp"

namespace depest::nn {

Parameter& ParameterStore::add(std::string name, Tensor init, bool trainable) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
  index_.emplace(name, params_.size());
  Tensor grad(init.shape(), 0.0);
  params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad), trainable});
  return params_.back();
}

bool ParameterStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

Parameter& ParameterStore::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
  return params_[it->second];
}

const Parameter& ParameterStore::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
  return params_[it->second];
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

std::size_t ParameterStore::trainable_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

void ParameterStore::round_to_float32() {
  for (auto& p : params_) {
    for (double& v : p.value.values()) v = static_cast<double>(static_cast<float>(v));
  }
}

const Tensor& Var::value() const { return graph_->value(*this); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

Var Graph::parameter(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.requires_grad = grad_enabled_ && p.trainable;
  n.param = n.requires_grad ? &p : nullptr;
  return push(std::move(n));
}

Var Graph::detach(Var v) { return constant(value(v)); }

Var Graph::record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(op, std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Graph::record(const char* op, Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  value.check_finite(op);
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Var& in : inputs) {
      if (in.graph_ != this) throw GraphError("op input belongs to a different graph");
      if (nodes_[in.id_].requires_grad) n.requires_grad = true;
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

const Tensor& Graph::value(Var v) const { return nodes_.at(v.id_).get(); }

bool Graph::requires_grad(Var v) const { return nodes_.at(v.id_).requires_grad; }

Tensor* Graph::grad_slot(Var v) {
  Node& n = nodes_.at(v.id_);
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty()) n.grad = Tensor(n.get().shape(), 0.0);
  return &n.grad;
}

Tensor Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id_);
  if (n.grad.empty()) return Tensor(n.get().shape(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph_ != this) throw GraphError("loss belongs to a different graph");
  if (backward_done_) throw GraphError("backward already ran on this graph; call reset_grad() first");
  Node& root = nodes_.at(loss.id_);
  if (root.get().size() != 1) {
    throw GraphError("backward needs a scalar loss, got shape " + shape_string(root.get().shape()));
  }
  if (!root.requires_grad) throw GraphError("loss does not depend on any differentiable input");
  backward_done_ = true;

  grad_slot(loss)->fill(1.0);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) {
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

void Graph::reset_grad() {
  for (auto& n : nodes_) n.grad = Tensor();
  backward_done_ = false;
}

}  // namespace depest::nn
