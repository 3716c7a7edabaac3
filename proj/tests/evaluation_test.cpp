#include <algorithm>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "berd/errors.hpp"
#include "berd/evaluation.hpp"
#include "berd/synthetic.hpp"
#include "test_support.hpp"

namespace berd {
namespace {

SentenceRecord three_entities() {
  return testing::make_record("s", {"a", "b", "c", "d", "e"},
                              {{"e1", 0, 1, "LOC"}, {"e2", 2, 3, "PER"}, {"e3", 3, 5, "PER"}},
                              {testing::make_event(1, "Attack", {{"e1", "Place"}, {"e2", "Target"}, {"e3", "N/A"}})});
}

TEST(Score, SwappedRoleExample) {
  const SentenceRecord r = three_entities();
  const ScoreReport s = score_event(r, r.events[0], {{"e1", "Place"}, {"e2", "N/A"}, {"e3", "Target"}});
  EXPECT_EQ(s.tp, 1u);
  EXPECT_EQ(s.fp, 1u);
  EXPECT_EQ(s.fn, 1u);
  EXPECT_DOUBLE_EQ(s.precision(), 0.5);
  EXPECT_DOUBLE_EQ(s.recall(), 0.5);
  EXPECT_DOUBLE_EQ(s.f1(), 0.5);
}

TEST(Score, ExactMatchAndAllNoRole) {
  const SentenceRecord r = three_entities();
  EXPECT_DOUBLE_EQ(score_event(r, r.events[0], {{"e1", "Place"}, {"e2", "Target"}, {"e3", "N/A"}}).f1(), 1.0);
  const ScoreReport none = score_event(r, r.events[0], {{"e1", "N/A"}, {"e2", "N/A"}, {"e3", "N/A"}});
  EXPECT_EQ(none.tp + none.fp, 0u);
  EXPECT_EQ(none.fn, 2u);
  EXPECT_EQ(none.precision(), 0.0);
  EXPECT_EQ(none.f1(), 0.0);
}

TEST(Score, MatchesBySpan) {
  // a second mention id over the same span counts as the same argument
  SentenceRecord r = three_entities();
  r.entities.push_back({"e1b", 0, 1, "LOC"});
  const ScoreReport s = score_event(r, r.events[0], {{"e1b", "Place"}, {"e2", "Target"}});
  EXPECT_EQ(s.tp, 2u);
  EXPECT_EQ(s.fp, 0u);
}

TEST(Score, Errors) {
  const SentenceRecord r = three_entities();
  EXPECT_THROW(score_event(r, r.events[0], {{"ghost", "Place"}}), ScoringError);
  const Corpus c({r});
  EXPECT_THROW(score({}, c), ScoringError);
  const std::vector<EventPrediction> twice{{{0, 0}, {}}, {{0, 0}, {}}};
  EXPECT_THROW(score(twice, c), ScoringError);
  const std::vector<EventPrediction> foreign{{{0, 3}, {}}};
  EXPECT_THROW(score(foreign, c), ScoringError);
}

std::vector<EventPrediction> random_predictions(const Corpus& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<EventPrediction> out;
  for (const auto& ref : c.events()) {
    EventPrediction p{ref, {}};
    for (const auto& e : c.record(ref).entities) {
      p.roles.push_back({e.id, c.roles().label(static_cast<int>(rng() % c.roles().size()))});
    }
    out.push_back(std::move(p));
  }
  return out;
}

TEST(Score, OrderOfEventsDoesNotMatter) {
  const Corpus c = generate_synthetic(builtin_profile("toy"), 3);
  auto preds = random_predictions(c, 1);
  const ScoreReport a = score(preds, c);
  std::mt19937_64 rng(2);
  std::shuffle(preds.begin(), preds.end(), rng);
  EXPECT_EQ(score(preds, c), a);
  const double p = a.precision(), r = a.recall();
  EXPECT_NEAR(a.f1(), 2 * p * r / (p + r), 1e-12);
}

TEST(Score, GoldScoresOne) {
  const Corpus c = generate_synthetic(builtin_profile("toy"), 4);
  std::vector<EventPrediction> preds;
  for (const auto& ref : c.events()) preds.push_back({ref, gold_role_sequence(c.record(ref), c.event(ref))});
  EXPECT_DOUBLE_EQ(score(preds, c).f1(), 1.0);
}

TEST(SlicedEval, SlicesPartitionOverall) {
  SyntheticProfile p = builtin_profile("toy");
  p.event_count = 120;
  p.entity_min = 1;
  p.entity_max = 12;
  const Corpus c = generate_synthetic(p, 8);
  const auto preds = random_predictions(c, 5);
  const SlicedReport s = sliced_eval(preds, c);
  EXPECT_EQ(s.overall, score(preds, c));
  ScoreReport buckets;
  for (const auto& b : s.buckets) buckets += b;
  EXPECT_EQ(buckets, s.overall);
  ScoreReport subsets = s.overlapping;
  subsets += s.non_overlapping;
  EXPECT_EQ(subsets, s.overall);
}

TEST(SlicedEval, NoOverlapMeansEmptySubsetO) {
  const Corpus c = generate_synthetic(builtin_profile("unique-role"), 6);
  const SlicedReport s = sliced_eval(random_predictions(c, 7), c);
  EXPECT_EQ(s.overlapping, ScoreReport{});
  EXPECT_EQ(s.non_overlapping, s.overall);
}

TEST(SlicedEval, ZeroEntityEventsAreCountedApart) {
  const Corpus c({three_entities(), testing::make_record("empty", {"x", "y"}, {}, {testing::make_event(0, "Attack", {})})});
  const std::vector<EventPrediction> preds{{{0, 0}, {{"e1", "Place"}}}};
  const SlicedReport s = sliced_eval(preds, c);
  EXPECT_EQ(s.zero_entity_events, 1u);
  EXPECT_EQ(s.overall.events, 1u);
}

TEST(Constraints, ParseAndRate) {
  const auto cs = parse_constraints(R"([{"event_type": "Attack", "unique_roles": ["Place", "Target"]}])");
  ASSERT_EQ(cs.size(), 1u);
  EXPECT_EQ(cs[0].unique_roles, (std::vector<std::string>{"Place", "Target"}));
  EXPECT_THROW(parse_constraints("{}"), ParseError);
  EXPECT_THROW(parse_constraints(R"([{"event_type": "A", "roles": []}])"), ParseError);

  const Corpus c({three_entities()});
  const std::vector<EventPrediction> twice{{{0, 0}, {{"e1", "Place"}, {"e2", "Place"}, {"e3", "N/A"}}}};
  const std::vector<EventPrediction> once{{{0, 0}, {{"e1", "Place"}, {"e2", "Target"}, {"e3", "N/A"}}}};
  EXPECT_EQ(constraint_violation_rate(twice, c, cs), 1.0);
  EXPECT_EQ(constraint_violation_rate(once, c, cs), 0.0);
  EXPECT_EQ(constraint_violation_rate(twice, c, {}), 0.0);
  const std::vector<UniqueRoleConstraint> other{{"Marry", {"Place"}}};
  EXPECT_EQ(constraint_violation_rate(twice, c, other), 0.0);
}

TEST(OracleRoles, NoRecurrenceIgnoresContext) {
  SyntheticProfile p = builtin_profile("toy");
  p.event_count = 15;
  const Corpus c = generate_synthetic(p, 9);
  const ModelVocabulary v = ModelVocabulary::from_corpus(c);
  const BerdModel<float> model(testing::tiny_config(Variant::kNoRecurrence), v, 4);
  const OracleRoleReport r = oracle_role_eval(model, c);
  EXPECT_EQ(r.predicted_context, r.gold_context);
}

TEST(OracleRoles, GoldContextChangesRecurrentModel) {
  SyntheticProfile p = builtin_profile("toy");
  p.event_count = 15;
  const Corpus c = generate_synthetic(p, 9);
  const ModelVocabulary v = ModelVocabulary::from_corpus(c);
  const BerdModel<float> model(testing::tiny_config(), v, 4);
  const auto pred = predict_corpus(model, c, ContextMode::kPredicted);
  const auto gold = predict_corpus(model, c, ContextMode::kGold);
  bool differs = false;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t e = 0; e < pred[i].entities.size(); ++e) {
      differs = differs || pred[i].entities[e].final_distribution != gold[i].entities[e].final_distribution;
    }
  }
  EXPECT_TRUE(differs);
}

TEST(Report, JsonAndTable) {
  EvaluationReport rep;
  rep.variant = "berd";
  rep.sliced.overall = {3, 1, 2, 4};
  rep.sliced.buckets[1] = {3, 1, 2, 4};
  rep.violation_rate = 0.25;
  rep.oracle = OracleRoleReport{{3, 1, 2, 4}, {4, 0, 1, 4}};
  const auto j = nlohmann::json::parse(report_to_json(rep));
  EXPECT_EQ(j["variant"], "berd");
  EXPECT_EQ(j["overall"]["tp"], 3);
  EXPECT_DOUBLE_EQ(j["overall"]["precision"].get<double>(), 0.75);
  EXPECT_EQ(j["buckets"].size(), kBucketCount);
  EXPECT_EQ(j["buckets"][1]["events"], 4);
  EXPECT_DOUBLE_EQ(j["constraint_violation_rate"].get<double>(), 0.25);
  EXPECT_DOUBLE_EQ(j["oracle_roles"]["gold_context"]["f1"].get<double>(), 2 * 1.0 * 0.8 / 1.8);
  EXPECT_TRUE(j.contains("subset_O"));
  EXPECT_TRUE(j.contains("subset_N"));

  const std::string table = report_to_table(rep);
  EXPECT_NE(table.find("overall"), std::string::npos);
  EXPECT_NE(table.find("gold-context"), std::string::npos);
  EXPECT_NE(table.find("0.2500"), std::string::npos);
  std::size_t rows = 0;
  for (std::size_t pos = table.find("entities "); pos != std::string::npos; pos = table.find("entities ", pos + 1)) ++rows;
  EXPECT_EQ(rows, kBucketCount);
  EXPECT_EQ(report_to_table(rep, false).find("entities "), std::string::npos);
}

TEST(Report, PredictionJson) {
  const Corpus c({testing::attack_record()});
  const ModelVocabulary v = ModelVocabulary::from_corpus(c);
  const BerdModel<float> model(testing::tiny_config(Variant::kForward), v, 2);
  const PredictionRecord rec = model.predict(prepare_corpus(c, v).front());
  const auto dirs = variant_directions(Variant::kForward);
  const auto j = nlohmann::json::parse(prediction_to_json(rec, v, dirs));
  EXPECT_EQ(j["sentence_id"], "attack");
  ASSERT_EQ(j["roles"].size(), 3u);
  EXPECT_EQ(j["roles"][0]["entity_id"], "e1");
  EXPECT_TRUE(j["roles"][0]["p_backward"].is_null());
  EXPECT_GT(j["roles"][0]["p_forward"].get<double>(), 0.0);
  EXPECT_DOUBLE_EQ(j["roles"][0]["p_final"].get<double>(), rec.entities[0].final_distribution[rec.entities[0].role]);
}

}  // namespace
}  // namespace berd
