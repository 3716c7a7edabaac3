#include "berd/parameter_store.hpp"

#include <cmath>
#include <stdexcept>

namespace berd {

template <typename T>
ParamId ParameterStore<T>::add(const std::string& name, Tensor<T> init) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  const auto id = static_cast<std::uint32_t>(params_.size());
  Parameter<T> p;
  p.name = name;
  p.grad = Tensor<T>(init.shape());
  p.m = Tensor<T>(init.shape());
  p.v = Tensor<T>(init.shape());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  index_.emplace(name, id);
  return ParamId{id};
}

template <typename T>
std::optional<ParamId> ParameterStore<T>::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return ParamId{it->second};
}

template <typename T>
std::size_t ParameterStore<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) p.grad.fill(T{0});
}

template <typename T>
double ParameterStore<T>::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) {
    for (T g : p.grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

template <typename T>
void ParameterStore<T>::assign_values(const ParameterStore& other) {
  for (const auto& src : other.params_) {
    auto id = find(src.name);
    if (!id) throw std::invalid_argument("unknown parameter: " + src.name);
    auto& dst = at(*id);
    if (dst.value.shape() != src.value.shape()) {
      throw std::invalid_argument("shape mismatch for " + src.name + ": " +
                                  shape_to_string(src.value.shape()) + " vs " +
                                  shape_to_string(dst.value.shape()));
    }
    dst.value = src.value;
  }
}

template <typename T>
void GradientList<T>::accumulate(ParamId id, const Tensor<T>& grad) {
  for (auto& [pid, g] : items_) {
    if (pid == id) {
      g.add_scaled(grad);
      return;
    }
  }
  items_.emplace_back(id, grad);
}

template <typename T>
void GradientList<T>::merge_into(ParameterStore<T>& store, T scale) const {
  for (const auto& [id, g] : items_) store.at(id).grad.add_scaled(g, scale);
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class GradientList<float>;
template class GradientList<double>;

}  // namespace berd
