#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "berd/gradcheck.hpp"

namespace berd {

inline constexpr double kGradCheckTolerance = 1e-4;

struct GradCheckEntry {
  std::string name;
  std::size_t instantiations = 0;
  GradCheckResult worst;  // the instantiation with the largest error
};

struct GradCheckSuite {
  std::vector<GradCheckEntry> entries;
  bool passed(double tolerance = kGradCheckTolerance) const;
  double max_error() const;
};

// Every kernel op at `instantiations` random shapes and values (64-bit).
// Each op output is reduced to a scalar through random fixed weights.
GradCheckSuite kernel_gradchecks(std::size_t instantiations = 100, std::uint64_t seed = 0);

// The weighted training loss of a small two-decoder model on a two-entity
// event, with respect to every parameter.
GradCheckEntry model_gradcheck(std::uint64_t seed = 0);

}  // namespace berd
