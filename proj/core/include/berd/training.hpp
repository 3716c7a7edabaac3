#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "berd/adam.hpp"
#include "berd/corpus.hpp"
#include "berd/evaluation.hpp"
#include "berd/model.hpp"

namespace berd {

struct TrainingConfig {
  LossWeights loss;
  std::size_t epochs = 40;
  std::size_t batch_size = 30;
  AdamConfig adam;
  double warmup_fraction = 0.1;
  double dropout = 0.5;  // on the concatenated classifier inputs
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  bool operator==(const TrainingConfig&) const = default;
};

void validate(const TrainingConfig& config);  // throws ValidationError

// Model and training settings as one flat JSON object. Keys:
//   word_dim position_dim event_type_dim role_dim hidden_dim encoder_layers
//   conv_channels position_clip activation ("tanh" | "none") variant
//   share_argument_extractor encoder ("reference" | "precomputed")
//   alpha beta gamma epochs batch_size learning_rate adam_beta1 adam_beta2
//   adam_epsilon weight_decay warmup dropout seed threads
struct RunConfig {
  ModelConfig model;
  TrainingConfig training;
  bool operator==(const RunConfig&) const = default;
};

// Keys absent from the text keep their value in `base`; unknown keys and
// invalid values throw ValidationError.
RunConfig run_config_from_json(const std::string& text, const RunConfig& base = {});
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base = {});
std::string run_config_to_json(const RunConfig& config);

// Mean over entity terms of the weighted cross-entropies, built in one
// graph (no dropout).
template <typename T>
Var batch_loss(Graph<T>& g, const BerdModel<T>& model, std::span<const PreparedEvent> events,
               const LossWeights& weights);

// Value of batch_loss.
template <typename T>
double compute_loss(const BerdModel<T>& model, std::span<const PreparedEvent> events,
                    const LossWeights& weights);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<ScoreReport> dev;
};

struct TrainingResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // the epoch whose parameters the model holds
  std::size_t steps = 0;
  std::size_t skipped_events = 0;  // events without entities
};

// CSV with header epoch,train_loss,dev_P,dev_R,dev_F1 (dev columns empty
// without a dev corpus).
std::string history_csv(std::span<const EpochRecord> history);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Teacher-forced training with seeded shuffling and dropout. After every
// epoch the dev corpus (when given) is scored with the final classifier and
// the best-scoring parameters are restored at the end; without a dev corpus
// the last epoch's parameters stay. Throws NumericError on a non-finite
// loss or gradient.
TrainingResult train(BerdModel<float>& model, const Corpus& train_corpus, const Corpus* dev_corpus,
                     const TrainingConfig& config, const EpochCallback& on_epoch = {});

}  // namespace berd
