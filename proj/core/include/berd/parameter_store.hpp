#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "berd/tensor.hpp"

namespace berd {

struct ParamId {
  std::uint32_t index = UINT32_MAX;
  bool valid() const { return index != UINT32_MAX; }
  bool operator==(const ParamId&) const = default;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m;  // Adam first moment
  Tensor<T> v;  // Adam second moment
  std::uint64_t step = 0;
};

// Named trainable arrays. Insertion order is the canonical iteration order
// (checkpoints, optimizer updates and gradient merges all follow it).
template <typename T>
class ParameterStore {
 public:
  ParamId add(const std::string& name, Tensor<T> init);

  Parameter<T>& at(ParamId id) { return params_.at(id.index); }
  const Parameter<T>& at(ParamId id) const { return params_.at(id.index); }
  std::optional<ParamId> find(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t total_elements() const;
  std::vector<Parameter<T>>& entries() { return params_; }
  const std::vector<Parameter<T>>& entries() const { return params_; }

  void zero_grad();
  double grad_norm() const;

  // Copies values only; gradients and optimizer state start at zero.
  template <typename U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

  // Overwrites values of matching names; throws on a shape mismatch or a
  // missing name.
  void assign_values(const ParameterStore& other);

 private:
  std::vector<Parameter<T>> params_;
  std::map<std::string, std::uint32_t> index_;
};

// Gradients of one computation, keyed by parameter. Kept separate from the
// store so independent graphs can be merged in a fixed order.
template <typename T>
class GradientList {
 public:
  void accumulate(ParamId id, const Tensor<T>& grad);
  const std::vector<std::pair<ParamId, Tensor<T>>>& items() const { return items_; }
  // store.grad += scale * this, parameter by parameter in insertion order
  void merge_into(ParameterStore<T>& store, T scale) const;

 private:
  std::vector<std::pair<ParamId, Tensor<T>>> items_;
};

}  // namespace berd
