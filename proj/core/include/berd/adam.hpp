#pragma once

#include <cstddef>
#include <cstdint>

#include "berd/parameter_store.hpp"

namespace berd {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled from the gradient: theta -= lr * weight_decay * theta.
  double weight_decay = 0.01;
  bool operator==(const AdamConfig&) const = default;
};

// Linear warmup over the first `warmup_fraction` of `total_steps`, constant
// afterwards. Steps are 1-based.
struct WarmupSchedule {
  std::uint64_t total_steps = 0;
  double warmup_fraction = 0.0;

  std::uint64_t warmup_steps() const;
  double factor(std::uint64_t step) const;
};

// One bias-corrected Adam update of every parameter in the store, using the
// gradients currently held in the store, with learning rate
// config.learning_rate * lr_scale.
template <typename T>
void adam_step(ParameterStore<T>& store, const AdamConfig& config, double lr_scale = 1.0);

}  // namespace berd
