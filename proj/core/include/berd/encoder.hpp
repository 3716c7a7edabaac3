#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "berd/corpus.hpp"
#include "berd/graph.hpp"
#include "berd/model_config.hpp"

namespace berd {

struct PreparedEntity {
  std::string id;
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t last_token() const { return end - 1; }
};

// One event in model coordinates: token ids with the event-type marker
// appended, entities in canonical order, gold role ids aligned with them.
struct PreparedEvent {
  EventRef ref;
  std::string sentence_id;
  std::size_t event_index = 0;
  std::size_t sentence_length = 0;  // n, without the marker
  std::vector<int> token_ids;       // n + 3
  int event_type = 0;
  std::size_t trigger_start = 0;
  std::size_t trigger_end = 0;
  std::vector<PreparedEntity> entities;
  std::vector<int> gold_roles;

  std::size_t length() const { return token_ids.size(); }
  std::size_t trigger_last_token() const { return trigger_end - 1; }
  std::size_t entity_count() const { return entities.size(); }
};

// Gold labels missing from the vocabulary map to N/A with a warning.
PreparedEvent prepare_event(const SentenceRecord& record, std::size_t event_index,
                            const ModelVocabulary& vocab, EventRef ref = {});
std::vector<PreparedEvent> prepare_corpus(const Corpus& corpus, const ModelVocabulary& vocab);

// Embedding-table row of each token's offset from the span [start, end):
// 0 inside the span, signed distance to the nearest span edge outside,
// clipped to [-clip, clip] and shifted by +clip.
std::vector<int> relative_position_ids(std::size_t length, std::size_t start, std::size_t end,
                                       int clip);

// Maps a prepared event to its per-token hidden matrix H: (n + 3) x d_h.
template <typename T>
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual Var encode(Graph<T>& graph, const PreparedEvent& event) const = 0;
  virtual std::size_t hidden_dim() const = 0;
};

struct TokenEmbeddingIds {
  ParamId word;
  ParamId position_trigger;
  ParamId position_focus;
  ParamId event_type;
};

struct ConvLayerIds {
  ParamId kernel;
  ParamId bias;
};

// Word, two relative-position and event-type embeddings per token, then
// stacked width-3 tanh convolutions. Layers after the first (and the first,
// when the input width already equals d_h) add a residual connection.
template <typename T>
class ReferenceEncoder final : public Encoder<T> {
 public:
  ReferenceEncoder(TokenEmbeddingIds embeddings, std::vector<ConvLayerIds> layers,
                   std::size_t hidden_dim, int position_clip)
      : embeddings_(embeddings),
        layers_(std::move(layers)),
        hidden_dim_(hidden_dim),
        position_clip_(position_clip) {}

  Var encode(Graph<T>& graph, const PreparedEvent& event) const override;
  std::size_t hidden_dim() const override { return hidden_dim_; }

 private:
  TokenEmbeddingIds embeddings_;
  std::vector<ConvLayerIds> layers_;
  std::size_t hidden_dim_;
  int position_clip_;
};

// Stored hidden matrices keyed by "<sentence id>#<event index>" or, for
// single-event sentences, by the plain sentence id.
//
// Binary layout (little-endian):
//   magic "BERDHID1" | u32 version (1) | u32 record count
//   per record: u32 key length | key bytes | u32 rows | u32 cols | f32[rows*cols]
class HiddenStateTable {
 public:
  void insert(const std::string& key, Tensor<float> hidden);
  // Looks up "<id>#<event>" then "<id>"; null when neither is present.
  const Tensor<float>* find(const std::string& sentence_id, std::size_t event_index) const;
  std::size_t size() const { return records_.size(); }
  std::size_t hidden_dim() const { return hidden_dim_; }

  static HiddenStateTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  static std::string key(const std::string& sentence_id, std::size_t event_index);

 private:
  std::map<std::string, Tensor<float>> records_;
  std::size_t hidden_dim_ = 0;
};

template <typename T>
class PrecomputedEncoder final : public Encoder<T> {
 public:
  // Throws ValidationError when the table's width differs from hidden_dim.
  PrecomputedEncoder(std::shared_ptr<const HiddenStateTable> table, std::size_t hidden_dim);

  // Throws std::out_of_range naming the sentence id when it is missing.
  Var encode(Graph<T>& graph, const PreparedEvent& event) const override;
  std::size_t hidden_dim() const override { return hidden_dim_; }

 private:
  std::shared_ptr<const HiddenStateTable> table_;
  std::size_t hidden_dim_;
};

template <typename T>
std::shared_ptr<PrecomputedEncoder<T>> load_precomputed(const std::filesystem::path& path,
                                                        std::size_t hidden_dim) {
  auto table = std::make_shared<HiddenStateTable>(HiddenStateTable::load(path));
  return std::make_shared<PrecomputedEncoder<T>>(std::move(table), hidden_dim);
}

}  // namespace berd
