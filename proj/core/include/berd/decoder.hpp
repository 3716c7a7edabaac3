#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "berd/recurrent_unit.hpp"

namespace berd {

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_label(std::span<const double> distribution);

// Where a decoder's contextual roles come from.
enum class ContextMode {
  kPredicted,  // its own argmax predictions (inference)
  kGold,       // gold roles (teacher forcing, oracle-role evaluation)
  kNone,       // never fed back (no-recurrence)
};

struct DecodeStep {
  std::size_t entity = 0;
  ArgumentState state;
  std::vector<double> distribution;
  int chosen = 0;
};

struct DecodeTrace {
  Direction direction = Direction::kForward;
  std::vector<DecodeStep> steps;  // in visiting order

  const DecodeStep& for_entity(std::size_t entity) const;
  // Sum of log-probabilities of the chosen labels.
  double log_probability() const;
};

// Scores one entity given its argument state.
using UnitFn = std::function<std::vector<double>(std::size_t entity, const ArgumentState& state)>;

// Greedy entity-level decoding: exactly one unit call per entity, in the
// direction's order.
DecodeTrace greedy_decode(const PreparedEvent& event, Direction direction, ContextMode mode,
                          int to_predict, const UnitFn& unit, std::size_t* conflicts = nullptr);

}  // namespace berd
