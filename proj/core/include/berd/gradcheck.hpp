#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "berd/graph.hpp"

namespace berd {

struct GradCheckResult {
  // max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|)
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  bool finite = true;
  std::string worst;  // location of the worst coordinate, for reports

  bool passed(double tolerance) const { return finite && max_rel_error < tolerance; }
};

inline constexpr double kGradCheckStep = 1e-5;

using LeafFunction = std::function<Var(Graph<double>&, std::span<const Var>)>;
using ParamFunction = std::function<Var(Graph<double>&)>;

// Compares reverse-mode gradients of a scalar computation against central
// differences with respect to each input tensor.
GradCheckResult grad_check(const LeafFunction& fn, std::vector<Tensor<double>> inputs,
                           double step = kGradCheckStep);

// Same, with respect to every coordinate of every parameter in the store.
// The store is perturbed in place and restored before returning.
GradCheckResult grad_check_params(ParameterStore<double>& store, const ParamFunction& fn,
                                  double step = kGradCheckStep);

}  // namespace berd
