#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "berd/corpus.hpp"
#include "berd/model.hpp"

namespace berd {

class ScoringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument-classification counts. A prediction is correct when its
// (event, span, role) triple appears in gold; N/A is never counted.
struct ScoreReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t events = 0;

  double precision() const;  // 0 when nothing was predicted
  double recall() const;     // 0 when gold is empty
  double f1() const;         // 0 when precision + recall is 0
  ScoreReport& operator+=(const ScoreReport& other);
  bool operator==(const ScoreReport&) const = default;
};

struct EventPrediction {
  EventRef ref;
  RoleSequence roles;
};

// Counts for one event. Throws ScoringError for an entity id the record
// does not declare.
ScoreReport score_event(const SentenceRecord& record, const EventInstance& event,
                        const RoleSequence& predicted);

// Every event of `gold` that has entities must be predicted exactly once.
ScoreReport score(std::span<const EventPrediction> predictions, const Corpus& gold);

struct SlicedReport {
  ScoreReport overall;
  std::array<ScoreReport, kBucketCount> buckets;
  ScoreReport overlapping;      // Subset-O
  ScoreReport non_overlapping;  // Subset-N
  std::size_t zero_entity_events = 0;
};

SlicedReport sliced_eval(std::span<const EventPrediction> predictions, const Corpus& gold);

struct UniqueRoleConstraint {
  std::string event_type;
  std::vector<std::string> unique_roles;
};

// JSON list of {"event_type": str, "unique_roles": [str]}.
std::vector<UniqueRoleConstraint> parse_constraints(const std::string& json_text);
std::vector<UniqueRoleConstraint> load_constraints(const std::filesystem::path& path);

// Fraction of predicted events (with at least one entity) in which some
// unique role is predicted more than once. 0 for an empty constraint set.
double constraint_violation_rate(std::span<const EventPrediction> predictions, const Corpus& corpus,
                                 std::span<const UniqueRoleConstraint> constraints);

EventPrediction to_event_prediction(const PredictionRecord& record, const ModelVocabulary& vocab);

// Predictions for every event of the corpus, in corpus order.
template <typename T>
std::vector<PredictionRecord> predict_corpus(const BerdModel<T>& model, const Corpus& corpus,
                                             ContextMode mode = ContextMode::kPredicted,
                                             std::size_t threads = 1);
template <typename T>
std::vector<EventPrediction> predict_labels(const BerdModel<T>& model, const Corpus& corpus,
                                            ContextMode mode = ContextMode::kPredicted,
                                            std::size_t threads = 1);

struct OracleRoleReport {
  ScoreReport predicted_context;
  ScoreReport gold_context;
};

// Inference twice: with the model's own contextual predictions, then with
// gold contextual roles at every step.
template <typename T>
OracleRoleReport oracle_role_eval(const BerdModel<T>& model, const Corpus& corpus,
                                  std::size_t threads = 1);

struct EvaluationReport {
  std::string variant;
  SlicedReport sliced;
  std::optional<double> violation_rate;
  std::optional<OracleRoleReport> oracle;
};

std::string report_to_json(const EvaluationReport& report);
// One row per slice: name, events, TP, FP, FN, P, R, F1.
std::string report_to_table(const EvaluationReport& report, bool buckets = true);

// One JSON object per line:
// {"sentence_id", "event_index", "roles": [{"entity_id", "role",
//  "p_forward", "p_backward", "p_final"}]}, probabilities of the chosen role,
// null for a direction the model lacks.
std::string prediction_to_json(const PredictionRecord& record, const ModelVocabulary& vocab,
                               std::span<const Direction> directions);

}  // namespace berd
