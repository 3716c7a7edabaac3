#include "berd/model_config.hpp"

#include <set>
#include <stdexcept>

#include "berd/errors.hpp"
#include "berd/log.hpp"

namespace berd {
namespace {

struct VariantName {
  Variant variant;
  std::string_view name;
};

constexpr VariantName kVariantNames[] = {
    {Variant::kBerd, "berd"},
    {Variant::kForward, "forward"},
    {Variant::kBackward, "backward"},
    {Variant::kForwardX2, "forward-x2"},
    {Variant::kBackwardX2, "backward-x2"},
    {Variant::kNoRecurrence, "no-recurrence"},
};

}  // namespace

Variant parse_variant(std::string_view name) {
  for (const auto& v : kVariantNames) {
    if (v.name == name) return v.variant;
  }
  throw std::invalid_argument("unknown variant '" + std::string(name) +
                              "' (expected berd, forward, backward, forward-x2, backward-x2 "
                              "or no-recurrence)");
}

std::string_view variant_name(Variant variant) {
  for (const auto& v : kVariantNames) {
    if (v.variant == variant) return v.name;
  }
  return "?";
}

std::vector<Variant> all_variants() {
  std::vector<Variant> out;
  for (const auto& v : kVariantNames) out.push_back(v.variant);
  return out;
}

std::vector<Direction> variant_directions(Variant variant) {
  switch (variant) {
    case Variant::kBerd:
    case Variant::kNoRecurrence:
      return {Direction::kForward, Direction::kBackward};
    case Variant::kForward:
      return {Direction::kForward};
    case Variant::kBackward:
      return {Direction::kBackward};
    case Variant::kForwardX2:
      return {Direction::kForward, Direction::kForward};
    case Variant::kBackwardX2:
      return {Direction::kBackward, Direction::kBackward};
  }
  return {};
}

bool variant_is_recurrent(Variant variant) { return variant != Variant::kNoRecurrence; }

void validate(const ModelConfig& c) {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ValidationError(std::string("model config: ") + what + " must be positive");
  };
  positive(c.word_dim, "word_dim");
  positive(c.position_dim, "position_dim");
  positive(c.event_type_dim, "event_type_dim");
  positive(c.role_dim, "role_dim");
  positive(c.hidden_dim, "hidden_dim");
  positive(c.encoder_layers, "encoder_layers");
  positive(c.conv_channels, "conv_channels");
  if (c.position_clip <= 0) throw ValidationError("model config: position_clip must be positive");
  if (c.share_argument_extractor && variant_directions(c.variant).size() < 2) {
    throw ValidationError("model config: share_argument_extractor needs a two-decoder variant");
  }
}

ModelVocabulary ModelVocabulary::from_corpus(const Corpus& corpus) {
  ModelVocabulary v;
  v.words.add(std::string(kUnknownWord));
  std::set<std::string> words{std::string(kMarkerToken), std::string(kUnknownEventType)};
  for (const auto& r : corpus.records()) words.insert(r.sentence.tokens.begin(), r.sentence.tokens.end());
  for (const auto& t : corpus.event_types().labels()) words.insert(t);
  words.erase(std::string(kUnknownWord));
  for (const auto& w : words) v.words.add(w);

  v.event_types.add(std::string(kUnknownEventType));
  for (const auto& t : corpus.event_types().labels()) v.event_types.add(t);
  v.roles = corpus.roles();
  return v;
}

int ModelVocabulary::word_id(std::string_view token) const {
  return words.find(token).value_or(0);
}

int ModelVocabulary::event_type_id(std::string_view type) const {
  return event_types.find(type).value_or(0);
}

std::vector<std::string> append_event_marker(std::vector<std::string> tokens,
                                             std::string_view event_type,
                                             const LabelVocabulary* known) {
  std::string type(event_type);
  if (type.empty() || (known != nullptr && !known->find(type))) {
    log::warn("event type '" + type + "' unknown; using " + std::string(kUnknownEventType));
    type = std::string(kUnknownEventType);
  }
  tokens.emplace_back(kMarkerToken);
  tokens.push_back(std::move(type));
  tokens.emplace_back(kMarkerToken);
  return tokens;
}

}  // namespace berd
