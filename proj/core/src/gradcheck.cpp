#include "berd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace berd {
namespace {

void record(GradCheckResult& result, double analytic, double numeric, const std::string& where) {
  ++result.coordinates;
  if (!std::isfinite(analytic) || !std::isfinite(numeric)) {
    result.finite = false;
    result.worst = where + " (non-finite)";
    return;
  }
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  const double err = std::abs(analytic - numeric) / denom;
  if (err > result.max_rel_error) {
    result.max_rel_error = err;
    result.worst = where;
  }
}

double scalar_of(const Graph<double>& g, Var root) {
  const auto& v = g.value(root);
  if (v.size() != 1) throw std::invalid_argument("grad_check: computation must return a scalar");
  return v[0];
}

}  // namespace

GradCheckResult grad_check(const LeafFunction& fn, std::vector<Tensor<double>> inputs,
                           double step) {
  std::vector<Tensor<double>> analytic;
  {
    Graph<double> g;
    std::vector<Var> leaves;
    for (const auto& t : inputs) leaves.push_back(g.input(t));
    Var root = fn(g, leaves);
    scalar_of(g, root);
    g.backward(root);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto* gr = g.grad(leaves[i]);
      analytic.push_back(gr != nullptr ? *gr : Tensor<double>(inputs[i].shape()));
    }
  }

  auto evaluate = [&]() {
    Graph<double> g(nullptr, GradMode::kDisabled);
    std::vector<Var> leaves;
    for (const auto& t : inputs) leaves.push_back(g.input(t));
    return scalar_of(g, fn(g, leaves));
  };

  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double saved = inputs[i][j];
      inputs[i][j] = saved + step;
      const double plus = evaluate();
      inputs[i][j] = saved - step;
      const double minus = evaluate();
      inputs[i][j] = saved;
      record(result, analytic[i][j], (plus - minus) / (2.0 * step),
             "input " + std::to_string(i) + "[" + std::to_string(j) + "]");
    }
  }
  return result;
}

GradCheckResult grad_check_params(ParameterStore<double>& store, const ParamFunction& fn,
                                  double step) {
  std::vector<Tensor<double>> analytic;
  for (const auto& p : store.entries()) analytic.emplace_back(p.value.shape());
  {
    Graph<double> g(&store);
    Var root = fn(g);
    scalar_of(g, root);
    g.backward(root);
    const GradientList<double> grads = g.param_gradients();
    for (const auto& [id, grad] : grads.items()) analytic[id.index] = grad;
  }

  auto evaluate = [&]() {
    Graph<double> g(&store, GradMode::kDisabled);
    return scalar_of(g, fn(g));
  };

  GradCheckResult result;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& value = store.entries()[i].value;
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double saved = value[j];
      value[j] = saved + step;
      const double plus = evaluate();
      value[j] = saved - step;
      const double minus = evaluate();
      value[j] = saved;
      record(result, analytic[i][j], (plus - minus) / (2.0 * step),
             store.entries()[i].name + "[" + std::to_string(j) + "]");
    }
  }
  return result;
}

}  // namespace berd
