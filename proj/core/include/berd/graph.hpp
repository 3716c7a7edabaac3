#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "berd/parameter_store.hpp"
#include "berd/tensor.hpp"

namespace berd {

// Handle to a node of a Graph.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

enum class GradMode { kEnabled, kDisabled };

// Reverse-mode tape. Nodes are appended in evaluation order, so creation
// order is a topological order and backward() walks it in reverse.
//
// Parameter nodes borrow their value from the ParameterStore; the store must
// outlive the graph and must not be modified while the graph is alive.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, Var self)>;

  explicit Graph(const ParameterStore<T>* store = nullptr, GradMode mode = GradMode::kEnabled);

  Var constant(Tensor<T> value);
  // Differentiable leaf (used by gradient checks).
  Var input(Tensor<T> value);
  // One node per parameter; repeated calls return the cached node.
  Var param(ParamId id);

  const Tensor<T>& value(Var v) const;
  // Null when no gradient reached the node.
  const Tensor<T>* grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool grad_enabled() const { return mode_ == GradMode::kEnabled; }
  std::size_t node_count() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = seed and propagates. root must hold one element.
  void backward(Var root, T seed = T{1});

  // Accumulated gradients of every parameter node that received one.
  GradientList<T> param_gradients() const;

  // Op-construction interface.
  Var add_node(Tensor<T> value, bool requires_grad, BackwardFn fn);
  Tensor<T>& grad_ref(Var v);

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* borrowed = nullptr;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::int64_t param = -1;
    BackwardFn backward;
  };

  const ParameterStore<T>* store_;
  GradMode mode_;
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> param_nodes_;
};

}  // namespace berd
