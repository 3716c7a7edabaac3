#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "berd/encoder.hpp"
#include "berd/model_config.hpp"

namespace berd {

// Per-token role label ids: role ids of the vocabulary (0 is N/A) plus the
// To-Predict id, which equals the role vocabulary size.
using ArgumentState = std::vector<int>;

struct ContextAssignment {
  std::size_t entity = 0;
  int role = 0;
};

// Writes assignments in the given order (later ones overwrite earlier ones
// on shared tokens; N/A assignments write nothing), then marks the target's
// tokens To-Predict. `conflicts`, when given, is incremented once per token
// whose non-N/A label is overwritten by a different one.
ArgumentState build_argument_state(std::size_t length, std::span<const PreparedEntity> entities,
                                   std::span<const ContextAssignment> assignments,
                                   std::size_t target, int to_predict,
                                   std::size_t* conflicts = nullptr);

// Entity indices in the order a decoder of the given direction visits them.
std::vector<std::size_t> decode_order(std::size_t entity_count, Direction direction);

// The state a decoder sees at `target` when the entities it has already
// visited carry `roles` (indexed by entity). Without recurrence the context
// is always empty.
ArgumentState context_state(const PreparedEvent& event, Direction direction, std::size_t target,
                            std::span<const int> roles, bool recurrent, int to_predict,
                            std::size_t* conflicts = nullptr);

// 1-based segment ends for dynamic multi-pooling around the trigger's and
// the entity's last tokens (0-based positions). Equal positions give
// (p + 1, p + 2).
std::pair<std::size_t, std::size_t> instance_splits(std::size_t trigger_last,
                                                    std::size_t entity_last);

// x = segment_max(H, splits): 3 * d_h.
template <typename T>
Var instance_features(Graph<T>& g, Var hidden, std::size_t trigger_last, std::size_t entity_last);

}  // namespace berd
