#include "berd/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace berd {

std::size_t argmax_label(std::span<const double> distribution) {
  if (distribution.empty()) throw std::invalid_argument("argmax_label: empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < distribution.size(); ++i) {
    if (distribution[i] > distribution[best]) best = i;
  }
  return best;
}

const DecodeStep& DecodeTrace::for_entity(std::size_t entity) const {
  for (const auto& s : steps) {
    if (s.entity == entity) return s;
  }
  throw std::out_of_range("decode trace has no step for entity " + std::to_string(entity));
}

double DecodeTrace::log_probability() const {
  double total = 0.0;
  for (const auto& s : steps) total += std::log(s.distribution.at(static_cast<std::size_t>(s.chosen)));
  return total;
}

DecodeTrace greedy_decode(const PreparedEvent& event, Direction direction, ContextMode mode,
                          int to_predict, const UnitFn& unit, std::size_t* conflicts) {
  DecodeTrace trace;
  trace.direction = direction;
  const std::size_t k = event.entity_count();
  if (mode == ContextMode::kGold && event.gold_roles.size() != k) {
    throw std::invalid_argument("greedy_decode: gold roles missing for event '" +
                                event.sentence_id + "'");
  }
  std::vector<int> context(k, 0);
  for (std::size_t e : decode_order(k, direction)) {
    DecodeStep step;
    step.entity = e;
    step.state = context_state(event, direction, e,
                               mode == ContextMode::kGold ? std::span<const int>(event.gold_roles)
                                                          : std::span<const int>(context),
                               mode != ContextMode::kNone, to_predict, conflicts);
    step.distribution = unit(e, step.state);
    step.chosen = static_cast<int>(argmax_label(step.distribution));
    context[e] = step.chosen;
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

}  // namespace berd
