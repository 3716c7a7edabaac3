#pragma once

#include <cstdint>
#include <filesystem>

#include "berd/model.hpp"
#include "berd/training.hpp"

namespace berd {

// Binary layout (little-endian):
//   magic "BERDCKPT" | u32 version (1) | u64 seed
//   u32 length | UTF-8 JSON {"config": {...}, "vocabulary": {"words": [...],
//     "event_types": [...], "roles": [...]}}
//   u32 parameter count, then per parameter in store order:
//     u32 name length | name | u8 element type (0 = f32) | u32 rank |
//     u32 dims[rank] | f32 data[product(dims)]
struct Checkpoint {
  RunConfig config;
  ModelVocabulary vocab;
  ParameterStore<float> params;
  std::uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const BerdModel<float>& model,
                     const RunConfig& config);
// Throws ParseError for a damaged or foreign file.
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Throws ValidationError when the parameters do not fit the stored config.
BerdModel<float> model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace berd
