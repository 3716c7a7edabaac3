#include "berd/evaluation.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "berd/errors.hpp"
#include "parallel.hpp"

namespace berd {

double ScoreReport::precision() const {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double ScoreReport::recall() const {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double ScoreReport::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

ScoreReport& ScoreReport::operator+=(const ScoreReport& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  events += o.events;
  return *this;
}

namespace {

using SpanRole = std::tuple<std::size_t, std::size_t, std::string>;

const EntityMention* find_entity(const SentenceRecord& record, const std::string& id) {
  for (const auto& e : record.entities) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::string event_label(const SentenceRecord& record, const EventRef& ref) {
  return "'" + record.sentence.id + "' event " + std::to_string(ref.event);
}

}  // namespace

ScoreReport score_event(const SentenceRecord& record, const EventInstance& event,
                        const RoleSequence& predicted) {
  std::map<SpanRole, std::size_t> gold;
  for (const auto& [entity_id, role] : event.roles) {
    if (role == "N/A") continue;
    const EntityMention* e = find_entity(record, entity_id);
    if (e == nullptr) throw ScoringError("gold role for unknown entity '" + entity_id + "'");
    ++gold[{e->start, e->end, role}];
  }
  ScoreReport r;
  r.events = 1;
  for (const auto& a : predicted) {
    const EntityMention* e = find_entity(record, a.entity_id);
    if (e == nullptr) {
      throw ScoringError("prediction for unknown entity '" + a.entity_id + "' in sentence '" +
                         record.sentence.id + "'");
    }
    if (a.role == "N/A") continue;
    auto it = gold.find({e->start, e->end, a.role});
    if (it != gold.end() && it->second > 0) {
      --it->second;
      ++r.tp;
    } else {
      ++r.fp;
    }
  }
  for (const auto& [_, left] : gold) r.fn += left;
  return r;
}

namespace {

// Per-event reports for every gold event with entities, in corpus order.
std::vector<std::pair<EventRef, ScoreReport>> per_event(std::span<const EventPrediction> predictions,
                                                        const Corpus& gold) {
  std::map<EventRef, const EventPrediction*> by_ref;
  for (const auto& p : predictions) {
    if (p.ref.record >= gold.records().size() ||
        p.ref.event >= gold.records()[p.ref.record].events.size()) {
      throw ScoringError("prediction for an event the corpus does not contain");
    }
    if (!by_ref.emplace(p.ref, &p).second) {
      throw ScoringError("event " + event_label(gold.record(p.ref), p.ref) + " predicted twice");
    }
  }
  std::vector<std::pair<EventRef, ScoreReport>> out;
  for (const auto& ref : gold.events()) {
    const SentenceRecord& rec = gold.record(ref);
    if (rec.entities.empty()) continue;
    auto it = by_ref.find(ref);
    if (it == by_ref.end()) throw ScoringError("no prediction for " + event_label(rec, ref));
    out.emplace_back(ref, score_event(rec, gold.event(ref), it->second->roles));
  }
  return out;
}

}  // namespace

ScoreReport score(std::span<const EventPrediction> predictions, const Corpus& gold) {
  ScoreReport total;
  for (const auto& [_, r] : per_event(predictions, gold)) total += r;
  return total;
}

SlicedReport sliced_eval(std::span<const EventPrediction> predictions, const Corpus& gold) {
  SlicedReport out;
  for (const auto& [ref, r] : per_event(predictions, gold)) {
    const SentenceRecord& rec = gold.record(ref);
    out.overall += r;
    out.buckets[*entity_count_bucket(rec.entities.size())] += r;
    (has_overlapping_entities(rec.entities) ? out.overlapping : out.non_overlapping) += r;
  }
  for (const auto& rec : gold.records()) {
    if (rec.entities.empty()) out.zero_entity_events += rec.events.size();
  }
  return out;
}

std::vector<UniqueRoleConstraint> parse_constraints(const std::string& json_text) {
  std::vector<UniqueRoleConstraint> out;
  try {
    const auto j = nlohmann::json::parse(json_text);
    if (!j.is_array()) throw ParseError("constraints: expected a JSON list");
    for (const auto& item : j) {
      if (!item.is_object()) throw ParseError("constraints: entries must be objects");
      for (const auto& [key, _] : item.items()) {
        if (key != "event_type" && key != "unique_roles") {
          throw ParseError("constraints: unknown key '" + key + "'");
        }
      }
      out.push_back({item.at("event_type").get<std::string>(),
                     item.at("unique_roles").get<std::vector<std::string>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("constraints: ") + e.what());
  }
  return out;
}

std::vector<UniqueRoleConstraint> load_constraints(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open constraint file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_constraints(buf.str());
}

double constraint_violation_rate(std::span<const EventPrediction> predictions, const Corpus& corpus,
                                 std::span<const UniqueRoleConstraint> constraints) {
  if (constraints.empty()) return 0.0;
  std::size_t events = 0;
  std::size_t violated = 0;
  for (const auto& p : predictions) {
    if (p.roles.empty()) continue;
    ++events;
    const std::string& type = corpus.event(p.ref).event_type;
    std::map<std::string, std::size_t> counts;
    for (const auto& a : p.roles) ++counts[a.role];
    bool bad = false;
    for (const auto& c : constraints) {
      if (c.event_type != type) continue;
      for (const auto& role : c.unique_roles) {
        auto it = counts.find(role);
        bad = bad || (it != counts.end() && it->second > 1);
      }
    }
    violated += bad ? 1 : 0;
  }
  return events == 0 ? 0.0 : static_cast<double>(violated) / static_cast<double>(events);
}

EventPrediction to_event_prediction(const PredictionRecord& record, const ModelVocabulary& vocab) {
  EventPrediction p;
  p.ref = record.ref;
  for (const auto& e : record.entities) p.roles.push_back({e.entity_id, vocab.roles.label(e.role)});
  return p;
}

template <typename T>
std::vector<PredictionRecord> predict_corpus(const BerdModel<T>& model, const Corpus& corpus,
                                             ContextMode mode, std::size_t threads) {
  const auto refs = corpus.events();
  std::vector<PredictionRecord> out(refs.size());
  detail::parallel_for(refs.size(), threads, [&](std::size_t i) {
    const PreparedEvent ev = prepare_event(corpus.record(refs[i]), refs[i].event, model.vocab(), refs[i]);
    out[i] = model.predict(ev, mode);
  });
  return out;
}

template <typename T>
std::vector<EventPrediction> predict_labels(const BerdModel<T>& model, const Corpus& corpus,
                                            ContextMode mode, std::size_t threads) {
  std::vector<EventPrediction> out;
  for (const auto& r : predict_corpus(model, corpus, mode, threads)) {
    out.push_back(to_event_prediction(r, model.vocab()));
  }
  return out;
}

template <typename T>
OracleRoleReport oracle_role_eval(const BerdModel<T>& model, const Corpus& corpus,
                                  std::size_t threads) {
  OracleRoleReport r;
  r.predicted_context = score(predict_labels(model, corpus, ContextMode::kPredicted, threads), corpus);
  r.gold_context = score(predict_labels(model, corpus, ContextMode::kGold, threads), corpus);
  return r;
}

namespace {

nlohmann::ordered_json report_json(const ScoreReport& r) {
  return {{"events", r.events}, {"tp", r.tp},           {"fp", r.fp}, {"fn", r.fn},
          {"precision", r.precision()}, {"recall", r.recall()}, {"f1", r.f1()}};
}

std::string row(const std::string& name, const ScoreReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-22s %7zu %6zu %6zu %6zu %7.2f %7.2f %7.2f\n", name.c_str(),
                r.events, r.tp, r.fp, r.fn, 100.0 * r.precision(), 100.0 * r.recall(),
                100.0 * r.f1());
  return buf;
}

}  // namespace

std::string report_to_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["variant"] = report.variant;
  j["overall"] = report_json(report.sliced.overall);
  auto buckets = nlohmann::ordered_json::array();
  for (std::size_t b = 0; b < kBucketCount; ++b) {
    auto entry = report_json(report.sliced.buckets[b]);
    entry["bucket"] = bucket_label(b);
    buckets.push_back(entry);
  }
  j["buckets"] = buckets;
  j["subset_O"] = report_json(report.sliced.overlapping);
  j["subset_N"] = report_json(report.sliced.non_overlapping);
  j["zero_entity_events"] = report.sliced.zero_entity_events;
  if (report.violation_rate) j["constraint_violation_rate"] = *report.violation_rate;
  if (report.oracle) {
    j["oracle_roles"] = {{"predicted_context", report_json(report.oracle->predicted_context)},
                         {"gold_context", report_json(report.oracle->gold_context)}};
  }
  return j.dump(2);
}

std::string report_to_table(const EvaluationReport& report, bool buckets) {
  std::string out;
  char head[160];
  std::snprintf(head, sizeof head, "%-22s %7s %6s %6s %6s %7s %7s %7s\n", "slice", "events", "TP",
                "FP", "FN", "P", "R", "F1");
  out += head;
  out += row("overall", report.sliced.overall);
  if (buckets) {
    for (std::size_t b = 0; b < kBucketCount; ++b) {
      out += row("entities " + bucket_label(b), report.sliced.buckets[b]);
    }
  }
  out += row("subset-O", report.sliced.overlapping);
  out += row("subset-N", report.sliced.non_overlapping);
  if (report.oracle) {
    out += row("predicted-context", report.oracle->predicted_context);
    out += row("gold-context", report.oracle->gold_context);
  }
  if (report.violation_rate) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "constraint violation rate: %.4f\n", *report.violation_rate);
    out += buf;
  }
  return out;
}

std::string prediction_to_json(const PredictionRecord& record, const ModelVocabulary& vocab,
                               std::span<const Direction> directions) {
  auto first = [&](Direction d) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < directions.size(); ++i) {
      if (directions[i] == d) return i;
    }
    return std::nullopt;
  };
  const auto fwd = first(Direction::kForward);
  const auto bwd = first(Direction::kBackward);
  nlohmann::ordered_json j;
  j["sentence_id"] = record.sentence_id;
  j["event_index"] = record.event_index;
  auto roles = nlohmann::ordered_json::array();
  for (const auto& e : record.entities) {
    const auto role = static_cast<std::size_t>(e.role);
    nlohmann::ordered_json r;
    r["entity_id"] = e.entity_id;
    r["role"] = vocab.roles.label(e.role);
    r["p_forward"] = fwd ? nlohmann::ordered_json(e.unit_distributions[*fwd][role]) : nlohmann::ordered_json(nullptr);
    r["p_backward"] = bwd ? nlohmann::ordered_json(e.unit_distributions[*bwd][role]) : nlohmann::ordered_json(nullptr);
    r["p_final"] = e.final_distribution[role];
    roles.push_back(r);
  }
  j["roles"] = roles;
  return j.dump();
}

template std::vector<PredictionRecord> predict_corpus(const BerdModel<float>&, const Corpus&,
                                                      ContextMode, std::size_t);
template std::vector<PredictionRecord> predict_corpus(const BerdModel<double>&, const Corpus&,
                                                      ContextMode, std::size_t);
template std::vector<EventPrediction> predict_labels(const BerdModel<float>&, const Corpus&,
                                                     ContextMode, std::size_t);
template std::vector<EventPrediction> predict_labels(const BerdModel<double>&, const Corpus&,
                                                     ContextMode, std::size_t);
template OracleRoleReport oracle_role_eval(const BerdModel<float>&, const Corpus&, std::size_t);
template OracleRoleReport oracle_role_eval(const BerdModel<double>&, const Corpus&, std::size_t);

}  // namespace berd
