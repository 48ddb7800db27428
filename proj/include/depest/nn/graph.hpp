#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "depest/nn/tensor.hpp"

namespace depest::nn {

/// A named tensor owned by a model. Buffers (e.g. batch-norm running stats)
/// are stored alongside trainable weights with `trainable == false`.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

/// Insertion-ordered registry of parameters; iteration order is stable and
/// defines the flattened parameter vector used by the optimizers.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor init, bool trainable = true);

  bool contains(std::string_view name) const;
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;

  std::vector<Parameter>& entries() { return params_; }
  const std::vector<Parameter>& entries() const { return params_; }

  void zero_grad();
  /// Total element count over trainable parameters.
  std::size_t trainable_size() const;
  /// Rounds every value to the nearest float32.
  void round_to_float32();

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Graph& graph() const { return *graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape of operations recorded during one forward pass. Nodes are appended in
/// execution order, so reverse insertion order is a valid reverse topological
/// order for the backward sweep.
class Graph {
 public:
  /// Receives the gradient of the loss w.r.t. the node's output.
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf that receives a gradient (readable via grad()).
  Var variable(Tensor value);
  /// Leaf bound to a stored parameter; backward() accumulates into p.grad.
  /// The parameter must outlive the graph and must not change during it.
  Var parameter(Parameter& p);
  /// Copy of `v` that is cut off from the gradient flow.
  Var detach(Var v);

  /// Appends an op node. `fn` is only kept when some input requires a
  /// gradient. Throws NumericError when `value` holds NaN or Inf.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(const char* op, Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  /// Gradient accumulator for `v` during backward; nullptr when `v` does not
  /// require a gradient. Allocated as zeros on first use.
  Tensor* grad_slot(Var v);

  /// Gradient of the last backward() w.r.t. `v`; zeros when none flowed.
  Tensor grad(Var v) const;

  /// Reverse sweep from a scalar loss. Calling it twice without reset_grad()
  /// throws GraphError.
  void backward(Var loss);
  void reset_grad();

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;

    const Tensor& get() const { return external ? *external : value; }
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
  bool backward_done_ = false;
};

}  // namespace depest::nn
