#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "berd/decoder.hpp"
#include "berd/encoder.hpp"
#include "berd/model_config.hpp"
#include "berd/parameter_store.hpp"

namespace berd {

struct DecoderParamIds {
  ParamId role_embed;      // (R + 1) x role_dim, row R is To-Predict
  ParamId static_kernel;   // 3 x (word + position + event type) x C
  ParamId static_bias;     // C
  ParamId dynamic_kernel;  // 3 x (position + role) x C
  ParamId unit_weight;     // R x (3 d_h + C)
  ParamId unit_bias;       // R
};

struct LossWeights {
  double alpha = 1.0;  // final classifier
  double beta = 0.5;   // first decoder (the only one for a forward variant)
  double gamma = 0.5;  // second decoder (the only one for a backward variant)
  bool operator==(const LossWeights&) const = default;
};

// Graph-side values of one event shared by all decoding steps.
struct EventFeatures {
  const PreparedEvent* event = nullptr;
  Var hidden;                     // (n + 3) x d_h
  std::vector<Var> static_conv;   // per decoder: (n + 3) x C
  std::vector<Var> instance;      // per entity, filled on first use
};

struct TeacherForcedStep {
  std::size_t entity = 0;
  Var instance;
  std::vector<ArgumentState> states;  // per decoder
  std::vector<Var> argument;          // per decoder
  std::vector<Var> unit_probs;        // per decoder
  Var final_probs;
};

struct EntityPrediction {
  std::string entity_id;
  std::vector<double> instance;                         // x
  std::vector<std::vector<double>> argument;            // x_a per decoder
  std::vector<std::vector<double>> unit_distributions;  // per decoder
  std::vector<double> final_distribution;
  int role = 0;
};

struct PredictionRecord {
  EventRef ref;
  std::string sentence_id;
  std::size_t event_index = 0;
  std::vector<EntityPrediction> entities;  // canonical entity order
  std::vector<DecodeTrace> traces;         // per decoder
  std::size_t state_conflicts = 0;

  std::vector<int> roles() const;
};

// The full extractor: shared token embeddings and encoder, one argument
// extractor plus unit classifier per decoder, and the fusing final
// classifier. Parameters live in one store, in construction order.
template <typename T>
class BerdModel {
 public:
  // Fresh parameters drawn from `seed`.
  BerdModel(ModelConfig config, ModelVocabulary vocab, std::uint64_t seed);
  // Restores parameter values; names and shapes must match the layout
  // implied by config and vocab.
  BerdModel(ModelConfig config, ModelVocabulary vocab, const ParameterStore<T>& values);

  const ModelConfig& config() const { return config_; }
  const ModelVocabulary& vocab() const { return vocab_; }
  ParameterStore<T>& store() { return store_; }
  const ParameterStore<T>& store() const { return store_; }
  std::size_t parameter_count() const { return store_.total_elements(); }

  std::size_t decoder_count() const { return directions_.size(); }
  Direction direction(std::size_t decoder) const { return directions_.at(decoder); }
  const DecoderParamIds& decoder_params(std::size_t decoder) const { return decoders_.at(decoder); }
  const TokenEmbeddingIds& embeddings() const { return embeddings_; }
  ParamId final_weight() const { return final_weight_; }
  ParamId final_bias() const { return final_bias_; }
  bool recurrent() const { return variant_is_recurrent(config_.variant); }
  int to_predict() const { return vocab_.to_predict_id(); }
  std::size_t role_count() const { return vocab_.roles.size(); }
  std::vector<double> decoder_loss_weights(const LossWeights& weights) const;

  // Swaps the token encoder (e.g. for stored hidden states).
  void set_encoder(std::shared_ptr<const Encoder<T>> encoder);
  const Encoder<T>& encoder() const { return *encoder_; }

  EventFeatures begin_event(Graph<T>& g, const PreparedEvent& event) const;
  Var instance_feature(Graph<T>& g, EventFeatures& features, std::size_t entity) const;
  Var argument_feature(Graph<T>& g, const EventFeatures& features, std::size_t decoder,
                       std::size_t entity, const ArgumentState& state) const;
  // softmax(f(W [x; x_a] + b)), with dropout on the concatenation when rng
  // is given.
  Var unit_probabilities(Graph<T>& g, std::size_t decoder, Var x, Var argument, double dropout,
                         std::mt19937_64* rng) const;
  Var final_probabilities(Graph<T>& g, Var x, std::span<const Var> arguments, double dropout,
                          std::mt19937_64* rng) const;

  // Every decoder step conditioned on gold context roles.
  std::vector<TeacherForcedStep> teacher_forced(Graph<T>& g, const PreparedEvent& event,
                                                double dropout, std::mt19937_64* rng) const;
  // Sum over entities of the weighted cross-entropy terms; one term per
  // entity. Invalid Var for an event without entities.
  Var event_loss(Graph<T>& g, const PreparedEvent& event, const LossWeights& weights,
                 double dropout, std::mt19937_64* rng) const;

  // Greedy inference without dropout. A model without recurrence always
  // decodes with kNone.
  PredictionRecord predict(const PreparedEvent& event,
                           ContextMode mode = ContextMode::kPredicted) const;
  // Same, taking `mode` literally.
  PredictionRecord decode(const PreparedEvent& event, ContextMode mode) const;

 private:
  void build_parameters(std::mt19937_64* rng);

  ModelConfig config_;
  ModelVocabulary vocab_;
  std::vector<Direction> directions_;
  ParameterStore<T> store_;
  TokenEmbeddingIds embeddings_;
  std::vector<ConvLayerIds> encoder_layers_;
  std::vector<DecoderParamIds> decoders_;
  ParamId final_weight_;
  ParamId final_bias_;
  std::shared_ptr<const Encoder<T>> encoder_;
};

// Runs `variant` with the model's parameters. The decoder layout must match
// the model's; berd and no-recurrence are interchangeable.
template <typename T>
PredictionRecord predict_variant(const BerdModel<T>& model, const PreparedEvent& event,
                                 Variant variant);

// Parameter total a configuration would allocate.
std::size_t parameter_count(const ModelConfig& config, const ModelVocabulary& vocab);

}  // namespace berd
