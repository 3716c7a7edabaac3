#include "berd/adam.hpp"

#include <algorithm>
#include <cmath>

namespace berd {

std::uint64_t WarmupSchedule::warmup_steps() const {
  return static_cast<std::uint64_t>(
      std::ceil(warmup_fraction * static_cast<double>(total_steps)));
}

double WarmupSchedule::factor(std::uint64_t step) const {
  const std::uint64_t warm = warmup_steps();
  if (warm == 0 || step >= warm) return 1.0;
  return static_cast<double>(step) / static_cast<double>(warm);
}

template <typename T>
void adam_step(ParameterStore<T>& store, const AdamConfig& config, double lr_scale) {
  const double lr = config.learning_rate * lr_scale;
  for (auto& p : store.entries()) {
    ++p.step;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(p.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(p.step));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double grad = p.grad[i];
      const double m = config.beta1 * p.m[i] + (1.0 - config.beta1) * grad;
      const double v = config.beta2 * p.v[i] + (1.0 - config.beta2) * grad * grad;
      p.m[i] = static_cast<T>(m);
      p.v[i] = static_cast<T>(v);
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      double theta = p.value[i];
      theta -= lr * (m_hat / (std::sqrt(v_hat) + config.epsilon) + config.weight_decay * theta);
      p.value[i] = static_cast<T>(theta);
    }
  }
}

template void adam_step(ParameterStore<float>&, const AdamConfig&, double);
template void adam_step(ParameterStore<double>&, const AdamConfig&, double);

}  // namespace berd
