#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "berd/corpus.hpp"
#include "berd/ops.hpp"

namespace berd {

// Decoder layouts compared in the ablation study.
enum class Variant {
  kBerd,          // forward + backward decoders, fused
  kForward,       // forward decoder only
  kBackward,      // backward decoder only
  kForwardX2,     // two independently parameterized forward decoders
  kBackwardX2,    // two independently parameterized backward decoders
  kNoRecurrence,  // BERD layout, contextual roles never fed back
};

enum class Direction { kForward, kBackward };

Variant parse_variant(std::string_view name);  // throws std::invalid_argument
std::string_view variant_name(Variant variant);
std::vector<Variant> all_variants();

// Directions of the decoders a variant instantiates, in parameter order.
std::vector<Direction> variant_directions(Variant variant);
bool variant_is_recurrent(Variant variant);

enum class EncoderKind { kReference, kPrecomputed };

struct ModelConfig {
  std::size_t word_dim = 100;
  std::size_t position_dim = 5;
  std::size_t event_type_dim = 5;
  std::size_t role_dim = 10;
  std::size_t hidden_dim = 64;  // d_h of the encoder output
  std::size_t encoder_layers = 2;
  std::size_t conv_channels = 300;
  int position_clip = 30;
  ops::Activation activation = ops::Activation::kTanh;
  Variant variant = Variant::kBerd;
  // Both decoders use one argument extractor and unit classifier.
  bool share_argument_extractor = false;
  EncoderKind encoder = EncoderKind::kReference;

  bool operator==(const ModelConfig&) const = default;
};

void validate(const ModelConfig& config);  // throws ValidationError

inline constexpr std::string_view kUnknownWord = "<unk>";
inline constexpr std::string_view kUnknownEventType = "UNK_EVENT";
inline constexpr std::string_view kMarkerToken = "#";
inline constexpr std::size_t kMarkerLength = 3;

// Label spaces of a trained model. words[0] is <unk>, event_types[0] is
// UNK_EVENT, roles[0] is N/A; the To-Predict state label is roles.size().
struct ModelVocabulary {
  LabelVocabulary words;
  LabelVocabulary event_types;
  LabelVocabulary roles;

  static ModelVocabulary from_corpus(const Corpus& corpus);
  int word_id(std::string_view token) const;
  int event_type_id(std::string_view type) const;
  int to_predict_id() const { return static_cast<int>(roles.size()); }
  bool operator==(const ModelVocabulary&) const = default;
};

// Appends the three-token event-type phrase "# <TYPE> #". An empty type, or
// one absent from `known` when given, becomes UNK_EVENT with a warning.
std::vector<std::string> append_event_marker(std::vector<std::string> tokens,
                                             std::string_view event_type,
                                             const LabelVocabulary* known = nullptr);

}  // namespace berd
