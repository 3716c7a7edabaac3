#include "berd/graph.hpp"

#include <stdexcept>

namespace berd {

template <typename T>
Graph<T>::Graph(const ParameterStore<T>* store, GradMode mode) : store_(store), mode_(mode) {
  if (store_ != nullptr) param_nodes_.assign(store_->size(), UINT32_MAX);
}

template <typename T>
Var Graph<T>::constant(Tensor<T> value) {
  return add_node(std::move(value), false, nullptr);
}

template <typename T>
Var Graph<T>::input(Tensor<T> value) {
  return add_node(std::move(value), grad_enabled(), nullptr);
}

template <typename T>
Var Graph<T>::param(ParamId id) {
  if (store_ == nullptr) throw std::logic_error("graph has no parameter store");
  auto& slot = param_nodes_.at(id.index);
  if (slot != UINT32_MAX) return Var{slot};
  Node node;
  node.borrowed = &store_->at(id).value;
  node.requires_grad = grad_enabled();
  node.param = id.index;
  slot = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(std::move(node));
  return Var{slot};
}

template <typename T>
const Tensor<T>& Graph<T>::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.borrowed != nullptr ? *n.borrowed : n.owned;
}

template <typename T>
const Tensor<T>* Graph<T>::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.has_grad ? &n.grad : nullptr;
}

template <typename T>
Var Graph<T>::add_node(Tensor<T> value, bool requires_grad, BackwardFn fn) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = requires_grad && grad_enabled();
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Tensor<T>& Graph<T>::grad_ref(Var v) {
  Node& n = nodes_.at(v.id);
  if (!n.has_grad) {
    n.grad = Tensor<T>(value(v).shape());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
void Graph<T>::backward(Var root, T seed) {
  if (!grad_enabled()) throw std::logic_error("backward on a graph with gradients disabled");
  if (value(root).size() != 1) throw std::invalid_argument("backward root must be a scalar");
  if (!requires_grad(root)) return;
  grad_ref(root)[0] += seed;
  for (std::int64_t i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.has_grad || !n.backward) continue;
    // Backward rules never append nodes, so `n` stays valid.
    n.backward(*this, Var{static_cast<std::uint32_t>(i)});
  }
}

template <typename T>
GradientList<T> Graph<T>::param_gradients() const {
  GradientList<T> out;
  for (std::uint32_t slot : param_nodes_) {
    if (slot == UINT32_MAX) continue;
    const Node& n = nodes_[slot];
    if (n.has_grad) out.accumulate(ParamId{static_cast<std::uint32_t>(n.param)}, n.grad);
  }
  return out;
}

template class Graph<float>;
template class Graph<double>;

}  // namespace berd
