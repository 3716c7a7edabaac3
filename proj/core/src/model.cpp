#include "berd/model.hpp"

#include <cmath>
#include <stdexcept>

#include "berd/errors.hpp"
#include "berd/log.hpp"
#include "berd/ops.hpp"

namespace berd {
namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
Tensor<T> uniform(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>((2.0 * unit_uniform(rng) - 1.0) * bound);
  return t;
}

double glorot(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

constexpr double kEmbeddingBound = 0.1;
constexpr double kWordBound = 0.01;

template <typename T>
std::vector<double> to_doubles(const Tensor<T>& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

}  // namespace

std::vector<int> PredictionRecord::roles() const {
  std::vector<int> out;
  out.reserve(entities.size());
  for (const auto& e : entities) out.push_back(e.role);
  return out;
}

template <typename T>
BerdModel<T>::BerdModel(ModelConfig config, ModelVocabulary vocab, std::uint64_t seed)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  validate(config_);
  std::mt19937_64 rng(seed);
  build_parameters(&rng);
}

template <typename T>
BerdModel<T>::BerdModel(ModelConfig config, ModelVocabulary vocab, const ParameterStore<T>& values)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  validate(config_);
  std::mt19937_64 rng(0);
  build_parameters(&rng);
  if (values.size() != store_.size()) {
    throw ValidationError("parameter set has " + std::to_string(values.size()) +
                          " arrays, the configuration needs " + std::to_string(store_.size()));
  }
  try {
    store_.assign_values(values);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("parameters do not fit the configuration: ") + e.what());
  }
}

template <typename T>
void BerdModel<T>::build_parameters(std::mt19937_64* rng) {
  if (vocab_.roles.size() == 0 || vocab_.words.size() == 0 || vocab_.event_types.size() == 0) {
    throw ValidationError("model vocabulary is empty");
  }
  directions_ = variant_directions(config_.variant);
  const auto& c = config_;
  const std::size_t positions = static_cast<std::size_t>(2 * c.position_clip + 1);
  const std::size_t roles = vocab_.roles.size();

  embeddings_.word = store_.add("embed.word", uniform<T>({vocab_.words.size(), c.word_dim}, kWordBound, *rng));
  embeddings_.position_trigger =
      store_.add("embed.position_trigger", uniform<T>({positions, c.position_dim}, kEmbeddingBound, *rng));
  embeddings_.position_focus =
      store_.add("embed.position_focus", uniform<T>({positions, c.position_dim}, kEmbeddingBound, *rng));
  embeddings_.event_type = store_.add(
      "embed.event_type", uniform<T>({vocab_.event_types.size(), c.event_type_dim}, kEmbeddingBound, *rng));

  if (c.encoder == EncoderKind::kReference) {
    std::size_t in = c.word_dim + 2 * c.position_dim + c.event_type_dim;
    for (std::size_t l = 0; l < c.encoder_layers; ++l) {
      const std::string prefix = "encoder.layer" + std::to_string(l);
      ConvLayerIds ids;
      ids.kernel = store_.add(prefix + ".kernel",
                              uniform<T>({3, in, c.hidden_dim}, glorot(3 * in, c.hidden_dim), *rng));
      ids.bias = store_.add(prefix + ".bias", Tensor<T>({c.hidden_dim}));
      encoder_layers_.push_back(ids);
      in = c.hidden_dim;
    }
    encoder_ = std::make_shared<ReferenceEncoder<T>>(embeddings_, encoder_layers_, c.hidden_dim,
                                                     c.position_clip);
  }

  const std::size_t static_in = c.word_dim + c.position_dim + c.event_type_dim;
  const std::size_t dynamic_in = c.position_dim + c.role_dim;
  const double conv_bound = glorot(3 * (static_in + dynamic_in), c.conv_channels);
  const std::size_t unit_in = 3 * c.hidden_dim + c.conv_channels;
  for (std::size_t d = 0; d < directions_.size(); ++d) {
    if (d > 0 && c.share_argument_extractor) {
      decoders_.push_back(decoders_.front());
      continue;
    }
    const std::string prefix = "decoder" + std::to_string(d);
    DecoderParamIds ids;
    ids.role_embed = store_.add(prefix + ".role_embed",
                                uniform<T>({roles + 1, c.role_dim}, kEmbeddingBound, *rng));
    ids.static_kernel = store_.add(prefix + ".conv_static.kernel",
                                   uniform<T>({3, static_in, c.conv_channels}, conv_bound, *rng));
    ids.static_bias = store_.add(prefix + ".conv_static.bias", Tensor<T>({c.conv_channels}));
    ids.dynamic_kernel = store_.add(prefix + ".conv_dynamic.kernel",
                                    uniform<T>({3, dynamic_in, c.conv_channels}, conv_bound, *rng));
    ids.unit_weight = store_.add(prefix + ".unit.weight",
                                 uniform<T>({roles, unit_in}, glorot(unit_in, roles), *rng));
    ids.unit_bias = store_.add(prefix + ".unit.bias", Tensor<T>({roles}));
    decoders_.push_back(ids);
  }

  const std::size_t final_in = 3 * c.hidden_dim + directions_.size() * c.conv_channels;
  final_weight_ = store_.add("final.weight", uniform<T>({roles, final_in}, glorot(final_in, roles), *rng));
  final_bias_ = store_.add("final.bias", Tensor<T>({roles}));
}

template <typename T>
std::vector<double> BerdModel<T>::decoder_loss_weights(const LossWeights& w) const {
  if (directions_.size() == 1) {
    return {directions_.front() == Direction::kForward ? w.beta : w.gamma};
  }
  return {w.beta, w.gamma};
}

template <typename T>
void BerdModel<T>::set_encoder(std::shared_ptr<const Encoder<T>> encoder) {
  if (!encoder) throw std::invalid_argument("set_encoder: null encoder");
  if (encoder->hidden_dim() != config_.hidden_dim) {
    throw ValidationError("encoder width " + std::to_string(encoder->hidden_dim()) +
                          " does not match hidden_dim " + std::to_string(config_.hidden_dim));
  }
  encoder_ = std::move(encoder);
}

template <typename T>
EventFeatures BerdModel<T>::begin_event(Graph<T>& g, const PreparedEvent& event) const {
  if (!encoder_) throw std::logic_error("model has no encoder; call set_encoder first");
  EventFeatures f;
  f.event = &event;
  f.hidden = encoder_->encode(g, event);
  const Tensor<T>& h = g.value(f.hidden);
  if (h.rows() != event.length() || h.cols() != config_.hidden_dim) {
    throw ValidationError("encoder produced " + shape_to_string(h.shape()) + " for an event of " +
                          std::to_string(event.length()) + " tokens");
  }
  const std::size_t n = event.length();
  const auto trig = relative_position_ids(n, event.trigger_start, event.trigger_end, config_.position_clip);
  const std::vector<int> types(n, event.event_type);
  const Var parts[] = {
      ops::gather_rows(g, g.param(embeddings_.word), event.token_ids),
      ops::gather_rows(g, g.param(embeddings_.position_trigger), trig),
      ops::gather_rows(g, g.param(embeddings_.event_type), types),
  };
  const Var tokens = ops::concat<T>(g, parts);
  for (std::size_t d = 0; d < decoders_.size(); ++d) {
    if (d > 0 && config_.share_argument_extractor) {
      f.static_conv.push_back(f.static_conv.front());
      continue;
    }
    f.static_conv.push_back(ops::conv1d_same(g, tokens, g.param(decoders_[d].static_kernel),
                                             g.param(decoders_[d].static_bias)));
  }
  f.instance.assign(event.entity_count(), Var{});
  return f;
}

template <typename T>
Var BerdModel<T>::instance_feature(Graph<T>& g, EventFeatures& f, std::size_t entity) const {
  Var& x = f.instance.at(entity);
  if (!x.valid()) {
    x = instance_features(g, f.hidden, f.event->trigger_last_token(),
                          f.event->entities[entity].last_token());
  }
  return x;
}

template <typename T>
Var BerdModel<T>::argument_feature(Graph<T>& g, const EventFeatures& f, std::size_t decoder,
                                   std::size_t entity, const ArgumentState& state) const {
  const PreparedEvent& ev = *f.event;
  if (state.size() != ev.length()) {
    throw std::invalid_argument("argument state length " + std::to_string(state.size()) +
                                " does not match " + std::to_string(ev.length()) + " tokens");
  }
  const PreparedEntity& e = ev.entities.at(entity);
  const auto focus = relative_position_ids(ev.length(), e.start, e.end, config_.position_clip);
  const DecoderParamIds& p = decoders_.at(decoder);
  const Var parts[] = {
      ops::gather_rows(g, g.param(embeddings_.position_focus), focus),
      ops::gather_rows(g, g.param(p.role_embed), state),
  };
  const Var dynamic = ops::conv1d_same(g, ops::concat<T>(g, parts), g.param(p.dynamic_kernel), Var{});
  return ops::max_over_time(g, ops::tanh(g, ops::add(g, f.static_conv.at(decoder), dynamic)));
}

template <typename T>
Var BerdModel<T>::unit_probabilities(Graph<T>& g, std::size_t decoder, Var x, Var argument,
                                     double dropout, std::mt19937_64* rng) const {
  const Var parts[] = {x, argument};
  Var z = ops::concat<T>(g, parts);
  if (rng != nullptr) z = ops::dropout(g, z, dropout, *rng);
  const DecoderParamIds& p = decoders_.at(decoder);
  return ops::softmax(g, ops::dense(g, z, g.param(p.unit_weight), g.param(p.unit_bias), config_.activation));
}

template <typename T>
Var BerdModel<T>::final_probabilities(Graph<T>& g, Var x, std::span<const Var> arguments,
                                      double dropout, std::mt19937_64* rng) const {
  std::vector<Var> parts{x};
  parts.insert(parts.end(), arguments.begin(), arguments.end());
  Var z = ops::concat<T>(g, parts);
  if (rng != nullptr) z = ops::dropout(g, z, dropout, *rng);
  return ops::softmax(g, ops::dense(g, z, g.param(final_weight_), g.param(final_bias_), config_.activation));
}

template <typename T>
std::vector<TeacherForcedStep> BerdModel<T>::teacher_forced(Graph<T>& g, const PreparedEvent& event,
                                                            double dropout,
                                                            std::mt19937_64* rng) const {
  if (event.gold_roles.size() != event.entity_count()) {
    throw std::invalid_argument("teacher_forced: gold roles missing for '" + event.sentence_id + "'");
  }
  EventFeatures f = begin_event(g, event);
  std::vector<TeacherForcedStep> steps;
  steps.reserve(event.entity_count());
  for (std::size_t e = 0; e < event.entity_count(); ++e) {
    TeacherForcedStep s;
    s.entity = e;
    s.instance = instance_feature(g, f, e);
    for (std::size_t d = 0; d < decoders_.size(); ++d) {
      s.states.push_back(
          context_state(event, directions_[d], e, event.gold_roles, recurrent(), to_predict()));
      s.argument.push_back(argument_feature(g, f, d, e, s.states.back()));
      s.unit_probs.push_back(unit_probabilities(g, d, s.instance, s.argument.back(), dropout, rng));
    }
    s.final_probs = final_probabilities(g, s.instance, s.argument, dropout, rng);
    steps.push_back(std::move(s));
  }
  return steps;
}

template <typename T>
Var BerdModel<T>::event_loss(Graph<T>& g, const PreparedEvent& event, const LossWeights& weights,
                             double dropout, std::mt19937_64* rng) const {
  if (event.entity_count() == 0) return Var{};
  const auto decoder_weights = decoder_loss_weights(weights);
  std::vector<Var> terms;
  std::vector<T> coefficients;
  for (const auto& s : teacher_forced(g, event, dropout, rng)) {
    const auto gold = static_cast<std::size_t>(event.gold_roles[s.entity]);
    terms.push_back(ops::cross_entropy(g, s.final_probs, gold));
    coefficients.push_back(static_cast<T>(weights.alpha));
    for (std::size_t d = 0; d < s.unit_probs.size(); ++d) {
      terms.push_back(ops::cross_entropy(g, s.unit_probs[d], gold));
      coefficients.push_back(static_cast<T>(decoder_weights[d]));
    }
  }
  return ops::weighted_sum<T>(g, terms, coefficients);
}

template <typename T>
PredictionRecord BerdModel<T>::predict(const PreparedEvent& event, ContextMode mode) const {
  if (!recurrent()) mode = ContextMode::kNone;
  return decode(event, mode);
}

template <typename T>
PredictionRecord BerdModel<T>::decode(const PreparedEvent& event, ContextMode mode) const {
  PredictionRecord rec;
  rec.ref = event.ref;
  rec.sentence_id = event.sentence_id;
  rec.event_index = event.event_index;
  const std::size_t k = event.entity_count();
  if (k == 0) {
    log::warn("event " + std::to_string(event.event_index) + " of '" + event.sentence_id +
              "' has no entities; nothing to decode");
    return rec;
  }
  Graph<T> g(&store_, GradMode::kDisabled);
  EventFeatures f = begin_event(g, event);
  std::vector<std::vector<Var>> arguments(decoders_.size(), std::vector<Var>(k));
  for (std::size_t d = 0; d < decoders_.size(); ++d) {
    UnitFn unit = [&](std::size_t e, const ArgumentState& state) {
      const Var x = instance_feature(g, f, e);
      arguments[d][e] = argument_feature(g, f, d, e, state);
      return to_doubles(g.value(unit_probabilities(g, d, x, arguments[d][e], 0.0, nullptr)));
    };
    rec.traces.push_back(greedy_decode(event, directions_[d], mode, to_predict(), unit, &rec.state_conflicts));
  }
  for (std::size_t e = 0; e < k; ++e) {
    EntityPrediction p;
    p.entity_id = event.entities[e].id;
    const Var x = instance_feature(g, f, e);
    p.instance = to_doubles(g.value(x));
    std::vector<Var> xa;
    for (std::size_t d = 0; d < decoders_.size(); ++d) {
      xa.push_back(arguments[d][e]);
      p.argument.push_back(to_doubles(g.value(arguments[d][e])));
      p.unit_distributions.push_back(rec.traces[d].for_entity(e).distribution);
    }
    p.final_distribution = to_doubles(g.value(final_probabilities(g, x, xa, 0.0, nullptr)));
    p.role = static_cast<int>(argmax_label(p.final_distribution));
    rec.entities.push_back(std::move(p));
  }
  return rec;
}

template <typename T>
PredictionRecord predict_variant(const BerdModel<T>& model, const PreparedEvent& event,
                                 Variant variant) {
  if (variant_directions(variant) != variant_directions(model.config().variant)) {
    throw std::invalid_argument("variant '" + std::string(variant_name(variant)) +
                                "' does not match the model's decoder layout ('" +
                                std::string(variant_name(model.config().variant)) + "')");
  }
  return model.decode(event, variant_is_recurrent(variant) ? ContextMode::kPredicted : ContextMode::kNone);
}

std::size_t parameter_count(const ModelConfig& config, const ModelVocabulary& vocab) {
  return BerdModel<float>(config, vocab, 0).parameter_count();
}

template class BerdModel<float>;
template class BerdModel<double>;
template PredictionRecord predict_variant(const BerdModel<float>&, const PreparedEvent&, Variant);
template PredictionRecord predict_variant(const BerdModel<double>&, const PreparedEvent&, Variant);

}  // namespace berd
