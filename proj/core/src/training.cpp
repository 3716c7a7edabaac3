#include "berd/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "berd/errors.hpp"
#include "berd/log.hpp"
#include "berd/ops.hpp"
#include "parallel.hpp"

namespace berd {

void validate(const TrainingConfig& c) {
  auto fail = [](const std::string& what) { throw ValidationError("training config: " + what); };
  if (c.loss.alpha < 0 || c.loss.beta < 0 || c.loss.gamma < 0) fail("loss weights must be >= 0");
  if (c.epochs == 0) fail("epochs must be positive");
  if (c.batch_size == 0) fail("batch_size must be positive");
  if (!(c.adam.learning_rate >= 0)) fail("learning_rate must be >= 0");
  if (!(c.adam.beta1 >= 0 && c.adam.beta1 < 1) || !(c.adam.beta2 >= 0 && c.adam.beta2 < 1)) {
    fail("adam betas must lie in [0, 1)");
  }
  if (!(c.adam.epsilon > 0)) fail("adam_epsilon must be positive");
  if (!(c.adam.weight_decay >= 0)) fail("weight_decay must be >= 0");
  if (!(c.warmup_fraction >= 0 && c.warmup_fraction <= 1)) fail("warmup must lie in [0, 1]");
  if (!(c.dropout >= 0 && c.dropout < 1)) fail("dropout must lie in [0, 1)");
  if (c.threads == 0) fail("threads must be positive");
}

namespace {

const char* activation_name(ops::Activation a) { return a == ops::Activation::kTanh ? "tanh" : "none"; }

nlohmann::ordered_json config_json(const RunConfig& rc) {
  const auto& m = rc.model;
  const auto& t = rc.training;
  return {{"word_dim", m.word_dim},
          {"position_dim", m.position_dim},
          {"event_type_dim", m.event_type_dim},
          {"role_dim", m.role_dim},
          {"hidden_dim", m.hidden_dim},
          {"encoder_layers", m.encoder_layers},
          {"conv_channels", m.conv_channels},
          {"position_clip", m.position_clip},
          {"activation", activation_name(m.activation)},
          {"variant", std::string(variant_name(m.variant))},
          {"share_argument_extractor", m.share_argument_extractor},
          {"encoder", m.encoder == EncoderKind::kReference ? "reference" : "precomputed"},
          {"alpha", t.loss.alpha},
          {"beta", t.loss.beta},
          {"gamma", t.loss.gamma},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"learning_rate", t.adam.learning_rate},
          {"adam_beta1", t.adam.beta1},
          {"adam_beta2", t.adam.beta2},
          {"adam_epsilon", t.adam.epsilon},
          {"weight_decay", t.adam.weight_decay},
          {"warmup", t.warmup_fraction},
          {"dropout", t.dropout},
          {"seed", t.seed},
          {"threads", t.threads}};
}

}  // namespace

RunConfig run_config_from_json(const std::string& text, const RunConfig& base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  const auto known = config_json(base);
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ValidationError("config: unknown key '" + key + "'");
  }
  RunConfig rc = base;
  auto& m = rc.model;
  auto& t = rc.training;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("word_dim", m.word_dim);
    get("position_dim", m.position_dim);
    get("event_type_dim", m.event_type_dim);
    get("role_dim", m.role_dim);
    get("hidden_dim", m.hidden_dim);
    get("encoder_layers", m.encoder_layers);
    get("conv_channels", m.conv_channels);
    get("position_clip", m.position_clip);
    get("share_argument_extractor", m.share_argument_extractor);
    if (j.contains("activation")) {
      const auto a = j.at("activation").get<std::string>();
      if (a == "tanh") {
        m.activation = ops::Activation::kTanh;
      } else if (a == "none") {
        m.activation = ops::Activation::kNone;
      } else {
        throw ValidationError("config: activation must be \"tanh\" or \"none\"");
      }
    }
    if (j.contains("variant")) m.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("encoder")) {
      const auto e = j.at("encoder").get<std::string>();
      if (e == "reference") {
        m.encoder = EncoderKind::kReference;
      } else if (e == "precomputed") {
        m.encoder = EncoderKind::kPrecomputed;
      } else {
        throw ValidationError("config: encoder must be \"reference\" or \"precomputed\"");
      }
    }
    get("alpha", t.loss.alpha);
    get("beta", t.loss.beta);
    get("gamma", t.loss.gamma);
    get("epochs", t.epochs);
    get("batch_size", t.batch_size);
    get("learning_rate", t.adam.learning_rate);
    get("adam_beta1", t.adam.beta1);
    get("adam_beta2", t.adam.beta2);
    get("adam_epsilon", t.adam.epsilon);
    get("weight_decay", t.adam.weight_decay);
    get("warmup", t.warmup_fraction);
    get("dropout", t.dropout);
    get("seed", t.seed);
    get("threads", t.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  validate(rc.model);
  validate(rc.training);
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str(), base);
}

std::string run_config_to_json(const RunConfig& config) { return config_json(config).dump(2); }

template <typename T>
Var batch_loss(Graph<T>& g, const BerdModel<T>& model, std::span<const PreparedEvent> events,
               const LossWeights& weights) {
  std::vector<Var> sums;
  std::size_t terms = 0;
  for (const auto& ev : events) {
    Var v = model.event_loss(g, ev, weights, 0.0, nullptr);
    if (!v.valid()) continue;
    sums.push_back(v);
    terms += ev.entity_count();
  }
  if (terms == 0) return g.constant(Tensor<T>::scalar(T{0}));
  const std::vector<T> scale(sums.size(), static_cast<T>(1.0 / static_cast<double>(terms)));
  return ops::weighted_sum<T>(g, sums, scale);
}

template <typename T>
double compute_loss(const BerdModel<T>& model, std::span<const PreparedEvent> events,
                    const LossWeights& weights) {
  Graph<T> g(&model.store(), GradMode::kDisabled);
  return static_cast<double>(g.value(batch_loss(g, model, events, weights))[0]);
}

template Var batch_loss(Graph<float>&, const BerdModel<float>&, std::span<const PreparedEvent>,
                        const LossWeights&);
template Var batch_loss(Graph<double>&, const BerdModel<double>&, std::span<const PreparedEvent>,
                        const LossWeights&);
template double compute_loss(const BerdModel<float>&, std::span<const PreparedEvent>, const LossWeights&);
template double compute_loss(const BerdModel<double>&, std::span<const PreparedEvent>, const LossWeights&);

std::string history_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,train_loss,dev_P,dev_R,dev_F1\n";
  char buf[160];
  for (const auto& e : history) {
    if (e.dev) {
      std::snprintf(buf, sizeof buf, "%zu,%.9g,%.6f,%.6f,%.6f\n", e.epoch, e.train_loss,
                    e.dev->precision(), e.dev->recall(), e.dev->f1());
    } else {
      std::snprintf(buf, sizeof buf, "%zu,%.9g,,,\n", e.epoch, e.train_loss);
    }
    out += buf;
  }
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct EventGradient {
  GradientList<float> grads;
  double loss = 0.0;
};

}  // namespace

TrainingResult train(BerdModel<float>& model, const Corpus& train_corpus, const Corpus* dev_corpus,
                     const TrainingConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  TrainingResult result;
  std::vector<PreparedEvent> events;
  for (auto& ev : prepare_corpus(train_corpus, model.vocab())) {
    if (ev.entity_count() == 0) {
      ++result.skipped_events;
    } else {
      events.push_back(std::move(ev));
    }
  }
  if (result.skipped_events > 0) {
    log::info("training: skipped " + std::to_string(result.skipped_events) + " events without entities");
  }
  if (events.empty()) throw ValidationError("training corpus has no events with entities");

  const std::size_t batches = (events.size() + config.batch_size - 1) / config.batch_size;
  const WarmupSchedule schedule{config.epochs * batches, config.warmup_fraction};
  std::mt19937_64 shuffle_rng(config.seed);
  std::vector<std::size_t> order(events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ParameterStore<float>& store = model.store();
  ParameterStore<float> best;
  double best_f1 = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng() % i]);
    }
    double epoch_loss = 0.0;
    std::size_t epoch_terms = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<EventGradient> parts(end - begin);
      detail::parallel_for(parts.size(), config.threads, [&](std::size_t i) {
        const std::size_t pos = begin + i;
        std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(epoch * 0x100000001ULL + pos)));
        Graph<float> g(&store);
        const Var loss = model.event_loss(g, events[order[pos]], config.loss, config.dropout, &rng);
        g.backward(loss);
        parts[i].loss = static_cast<double>(g.value(loss)[0]);
        parts[i].grads = g.param_gradients();
      });
      std::size_t terms = 0;
      double loss = 0.0;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        terms += events[order[begin + i]].entity_count();
        loss += parts[i].loss;
      }
      store.zero_grad();
      for (const auto& p : parts) p.grads.merge_into(store, 1.0f / static_cast<float>(terms));
      const double norm = store.grad_norm();
      if (!std::isfinite(loss) || !std::isfinite(norm)) {
        std::string ids;
        for (std::size_t i = begin; i < end; ++i) {
          if (!ids.empty()) ids += ", ";
          ids += events[order[i]].sentence_id + "#" + std::to_string(events[order[i]].event_index);
        }
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1) + " (loss " + std::to_string(loss / terms) +
                           ", gradient norm " + std::to_string(norm) + "); events: " + ids);
      }
      ++result.steps;
      adam_step(store, config.adam, schedule.factor(result.steps));
      epoch_loss += loss;
      epoch_terms += terms;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(epoch_terms);
    if (dev_corpus != nullptr) {
      rec.dev = score(predict_labels(model, *dev_corpus, ContextMode::kPredicted, config.threads),
                      *dev_corpus);
      if (rec.dev->f1() > best_f1) {
        best_f1 = rec.dev->f1();
        best = store.cast<float>();
        result.best_epoch = epoch;
      }
    } else {
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (dev_corpus != nullptr && result.best_epoch != config.epochs) store.assign_values(best);
  return result;
}

}  // namespace berd
