#include "berd/recurrent_unit.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "berd/ops.hpp"

namespace berd {

ArgumentState build_argument_state(std::size_t length, std::span<const PreparedEntity> entities,
                                   std::span<const ContextAssignment> assignments,
                                   std::size_t target, int to_predict, std::size_t* conflicts) {
  if (target >= entities.size()) {
    throw std::invalid_argument("build_argument_state: target " + std::to_string(target) +
                                " out of range for " + std::to_string(entities.size()) +
                                " entities");
  }
  ArgumentState state(length, 0);
  auto paint = [&](const PreparedEntity& e, int label, bool count) {
    if (e.end > length) throw std::invalid_argument("build_argument_state: entity beyond sentence");
    for (std::size_t j = e.start; j < e.end; ++j) {
      if (count && conflicts != nullptr && state[j] != 0 && state[j] != label) ++*conflicts;
      state[j] = label;
    }
  };
  for (const auto& a : assignments) {
    if (a.entity >= entities.size()) {
      throw std::invalid_argument("build_argument_state: assignment to unknown entity");
    }
    if (a.entity == target || a.role == 0) continue;
    paint(entities[a.entity], a.role, true);
  }
  paint(entities[target], to_predict, false);
  return state;
}

std::vector<std::size_t> decode_order(std::size_t entity_count, Direction direction) {
  std::vector<std::size_t> order(entity_count);
  for (std::size_t i = 0; i < entity_count; ++i) {
    order[i] = direction == Direction::kForward ? i : entity_count - 1 - i;
  }
  return order;
}

ArgumentState context_state(const PreparedEvent& event, Direction direction, std::size_t target,
                            std::span<const int> roles, bool recurrent, int to_predict,
                            std::size_t* conflicts) {
  std::vector<ContextAssignment> assignments;
  if (recurrent) {
    for (std::size_t e : decode_order(event.entity_count(), direction)) {
      if (e == target) break;
      assignments.push_back({e, roles[e]});
    }
  }
  return build_argument_state(event.length(), event.entities, assignments, target, to_predict,
                              conflicts);
}

std::pair<std::size_t, std::size_t> instance_splits(std::size_t trigger_last,
                                                    std::size_t entity_last) {
  if (trigger_last == entity_last) return {trigger_last + 1, trigger_last + 2};
  return {std::min(trigger_last, entity_last) + 1, std::max(trigger_last, entity_last) + 1};
}

template <typename T>
Var instance_features(Graph<T>& g, Var hidden, std::size_t trigger_last, std::size_t entity_last) {
  const auto [a, b] = instance_splits(trigger_last, entity_last);
  return ops::segment_max(g, hidden, a, b);
}

template Var instance_features<float>(Graph<float>&, Var, std::size_t, std::size_t);
template Var instance_features<double>(Graph<double>&, Var, std::size_t, std::size_t);

}  // namespace berd
