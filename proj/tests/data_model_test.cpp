#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "berd/corpus.hpp"
#include "berd/errors.hpp"
#include "berd/evaluation.hpp"
#include "berd/synthetic.hpp"
#include "test_support.hpp"

namespace berd {
namespace {

using testing::make_event;
using testing::make_record;

Corpus parse(const std::string& text, SchemaMode mode = SchemaMode::kLenient) {
  std::istringstream in(text);
  return read_corpus(in, mode);
}

TEST(Corpus, SentenceWithoutEvents) {
  const Corpus c = parse(R"({"id":"s1","tokens":["a","b"],"entities":[],"events":[]})");
  ASSERT_EQ(c.records().size(), 1u);
  EXPECT_TRUE(c.records()[0].events.empty());
  EXPECT_EQ(c.event_count(), 0u);
  EXPECT_EQ(c.roles().label(0), kNoRole);
}

TEST(Corpus, EntityBeyondSentenceIsRejected) {
  try {
    parse(R"({"id":"bad-rec","tokens":["a","b"],"entities":[{"id":"e1","start":1,"end":3,"type":"X"}]})");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("bad-rec"), std::string::npos);
  }
}

TEST(Corpus, MalformedLineCarriesLineNumber) {
  try {
    parse("{\"id\":\"s1\",\"tokens\":[\"a\"]}\n\n{not json\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(Corpus, UnknownFieldsStrictVersusLenient) {
  const std::string line = R"({"id":"s1","tokens":["a"],"extra":1})";
  EXPECT_THROW(parse(line, SchemaMode::kStrict), ParseError);
  EXPECT_NO_THROW(parse(line, SchemaMode::kLenient));
}

TEST(Corpus, RoleForUndeclaredEntityIsRejected) {
  EXPECT_THROW(Corpus({make_record("s", {"a", "b"}, {{"e1", 0, 1, "X"}},
                                   {make_event(1, "T", {{"e9", "Place"}})})}),
               ValidationError);
}

TEST(Corpus, SyntheticRoundTrip) {
  SyntheticProfile p = builtin_profile("default");
  p.event_count = 3;
  const Corpus c = generate_synthetic(p, 11);
  testing::TempDir dir;
  save_corpus(c, dir / "c.jsonl");
  EXPECT_EQ(load_corpus(dir / "c.jsonl", SchemaMode::kStrict), c);
}

TEST(Corpus, VocabulariesAreClosed) {
  SyntheticProfile p = builtin_profile("default");
  p.event_count = 40;
  const Corpus c = generate_synthetic(p, 3);
  for (const auto& r : c.records()) {
    for (const auto& e : r.entities) EXPECT_TRUE(c.entity_types().find(e.entity_type));
    for (const auto& ev : r.events) {
      EXPECT_TRUE(c.event_types().find(ev.event_type));
      for (const auto& [id, role] : ev.roles) EXPECT_TRUE(c.roles().find(role));
    }
  }
}

TEST(OrderEntities, SingleEntity) {
  const std::vector<EntityMention> one{{"x", 2, 4, "T"}};
  EXPECT_EQ(order_entities(one), one);
}

TEST(OrderEntities, StartThenEnd) {
  const auto out = order_entities({{"a", 3, 5, ""}, {"b", 1, 6, ""}, {"c", 1, 3, ""}});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].id, "c");
  EXPECT_EQ(out[1].id, "b");
  EXPECT_EQ(out[2].id, "a");
}

TEST(OrderEntities, IdentitySpansBreakTiesById) {
  const auto out = order_entities({{"b", 1, 2, ""}, {"a", 1, 2, ""}});
  EXPECT_EQ(out[0].id, "a");
  EXPECT_EQ(out[1].id, "b");
}

TEST(OrderEntities, InputOrderNeverMatters) {
  std::vector<EntityMention> es{{"a", 0, 2, ""}, {"b", 0, 2, ""}, {"c", 1, 2, ""},
                                {"d", 0, 1, ""}, {"e", 3, 4, ""}, {"f", 1, 4, ""}};
  const auto reference = order_entities(es);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    std::shuffle(es.begin(), es.end(), rng);
    EXPECT_EQ(order_entities(es), reference);
  }
}

TEST(Buckets, Boundaries) {
  EXPECT_EQ(entity_count_bucket(0), std::nullopt);
  EXPECT_EQ(entity_count_bucket(1), 0u);
  EXPECT_EQ(entity_count_bucket(3), 0u);
  EXPECT_EQ(entity_count_bucket(5), 1u);
  EXPECT_EQ(entity_count_bucket(7), 2u);
  EXPECT_EQ(entity_count_bucket(9), 2u);
  EXPECT_EQ(entity_count_bucket(10), 3u);
  EXPECT_EQ(entity_count_bucket(25), 3u);
}

TEST(Buckets, EmptyCorpus) {
  const auto b = bucket_by_entity_count(Corpus{});
  for (const auto& bucket : b.buckets) EXPECT_TRUE(bucket.empty());
  EXPECT_EQ(b.zero_entity_events, 0u);
}

TEST(Buckets, PartitionEventsWithEntities) {
  SyntheticProfile p = builtin_profile("default");
  p.event_count = 120;
  p.entity_min = 1;
  p.entity_max = 12;
  std::vector<SentenceRecord> records = generate_synthetic(p, 4).records();
  records.push_back(make_record("empty", {"a", "b"}, {}, {make_event(0, "Attack", {})}));
  const Corpus c(records);
  const auto b = bucket_by_entity_count(c);
  std::set<EventRef> seen;
  std::size_t total = 0;
  for (std::size_t i = 0; i < kBucketCount; ++i) {
    for (const auto& ref : b.buckets[i]) {
      EXPECT_EQ(entity_count_bucket(c.record(ref).entities.size()), i);
      seen.insert(ref);
      ++total;
    }
  }
  EXPECT_EQ(seen.size(), total);
  EXPECT_EQ(total + b.zero_entity_events, c.event_count());
  EXPECT_EQ(b.zero_entity_events, 1u);
}

Corpus two_span_corpus(std::size_t s1, std::size_t e1, std::size_t s2, std::size_t e2) {
  return Corpus({make_record("s", {"a", "b", "c", "d", "e", "f"}, {{"x", s1, e1, ""}, {"y", s2, e2, ""}},
                             {make_event(0, "T", {})})});
}

TEST(OverlapSplit, IntersectingSpans) {
  const auto split = split_by_overlap(two_span_corpus(1, 3, 2, 4));
  EXPECT_EQ(split.overlapping.size(), 1u);
  EXPECT_TRUE(split.non_overlapping.empty());
}

TEST(OverlapSplit, TouchingSpansDoNotOverlap) {
  const auto split = split_by_overlap(two_span_corpus(1, 3, 3, 5));
  EXPECT_TRUE(split.overlapping.empty());
  EXPECT_EQ(split.non_overlapping.size(), 1u);
}

TEST(OverlapSplit, SingleEntity) {
  const Corpus c({make_record("s", {"a", "b"}, {{"x", 0, 2, ""}}, {make_event(0, "T", {})})});
  EXPECT_EQ(split_by_overlap(c).non_overlapping.size(), 1u);
}

TEST(OverlapSplit, PartitionsAllEvents) {
  const Corpus c = generate_synthetic(builtin_profile("default"), 9);
  const auto split = split_by_overlap(c);
  std::set<EventRef> o(split.overlapping.begin(), split.overlapping.end());
  for (const auto& ref : split.non_overlapping) EXPECT_FALSE(o.contains(ref));
  EXPECT_EQ(split.overlapping.size() + split.non_overlapping.size(), c.event_count());
  EXPECT_FALSE(split.overlapping.empty());
}

TEST(Synthetic, SameSeedGivesIdenticalBytes) {
  const SyntheticProfile p = builtin_profile("unique-role");
  std::ostringstream a, b;
  write_corpus(generate_synthetic(p, 7), a);
  write_corpus(generate_synthetic(p, 7), b);
  EXPECT_EQ(a.str(), b.str());
  std::ostringstream c;
  write_corpus(generate_synthetic(p, 8), c);
  EXPECT_NE(a.str(), c.str());
}

TEST(Synthetic, UniqueRolesNeverRepeat) {
  for (const char* name : {"default", "unique-role", "overlap", "acceptance"}) {
    SyntheticProfile p = builtin_profile(name);
    p.event_count = 300;
    const Corpus c = generate_synthetic(p, 1);
    for (const auto& r : c.records()) {
      for (const auto& ev : r.events) {
        std::map<std::string, int> counts;
        for (const auto& [id, role] : ev.roles) ++counts[role];
        for (const auto& u : synthetic_unique_roles()) EXPECT_LE(counts[u], 1) << name << " " << r.sentence.id;
      }
    }
  }
}

TEST(Synthetic, GoldLabelsSatisfyConstraints) {
  const Corpus c = generate_synthetic(builtin_profile("default"), 2);
  std::vector<UniqueRoleConstraint> cons;
  for (const auto& t : c.event_types().labels()) cons.push_back({t, synthetic_unique_roles()});
  std::vector<EventPrediction> gold;
  for (const auto& ref : c.events()) gold.push_back({ref, gold_role_sequence(c.record(ref), c.event(ref))});
  EXPECT_EQ(constraint_violation_rate(gold, c, cons), 0.0);
}

TEST(Synthetic, OverlapClustersHaveOneBearer) {
  const Corpus c = generate_synthetic(builtin_profile("overlap"), 5);
  std::size_t clusters = 0;
  for (const auto& r : c.records()) {
    const auto& ev = r.events.front();
    for (std::size_t i = 0; i < r.entities.size(); ++i) {
      for (std::size_t j = i + 1; j < r.entities.size(); ++j) {
        if (!r.entities[i].overlaps(r.entities[j])) continue;
        ++clusters;
        const bool a = ev.role_of(r.entities[i].id) != kNoRole;
        const bool b = ev.role_of(r.entities[j].id) != kNoRole;
        EXPECT_NE(a, b) << r.sentence.id;
      }
    }
  }
  EXPECT_GT(clusters, 0u);
}

TEST(Synthetic, EntityCountsWithinProfile) {
  SyntheticProfile p = builtin_profile("acceptance");
  p.event_count = 200;
  const Corpus c = generate_synthetic(p, 3);
  for (const auto& r : c.records()) {
    EXPECT_GE(r.entities.size(), p.entity_min);
    EXPECT_LE(r.entities.size(), p.entity_max);
  }
}

TEST(Synthetic, HundredSeedValidationSweep) {
  SyntheticProfile p = builtin_profile("default");
  p.event_count = 30;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::ostringstream out;
    write_corpus(generate_synthetic(p, seed), out);
    std::istringstream in(out.str());
    EXPECT_NO_THROW(read_corpus(in, SchemaMode::kStrict)) << "seed " << seed;
  }
}

TEST(Synthetic, UnsatisfiableProfile) {
  SyntheticProfile p = builtin_profile("default");
  p.entity_min = 1;
  p.entity_max = 2;
  p.mandatory_roles = {"Place", "Victim", "Instrument"};
  EXPECT_THROW(check_profile(p), GenerationError);
  EXPECT_THROW(generate_synthetic(p, 0), GenerationError);
}

TEST(Synthetic, ProfileJsonRoundTrip) {
  SyntheticProfile p = builtin_profile("overlap");
  p.mandatory_roles = {"Place"};
  EXPECT_EQ(profile_from_json(profile_to_json(p)), p);
}

// Empirical Bayes classifiers over a sample: the accuracy of predicting each
// entity's gold role from its features by the majority label of that feature
// value, counted over the sample itself.
double majority_accuracy(const std::map<std::string, std::map<std::string, int>>& table) {
  long best = 0, total = 0;
  for (const auto& [key, counts] : table) {
    int m = 0;
    for (const auto& [role, n] : counts) {
      m = std::max(m, n);
      total += n;
    }
    best += m;
  }
  return total == 0 ? 0.0 : static_cast<double>(best) / static_cast<double>(total);
}

TEST(Synthetic, ContextualRolesBeatLexicalCues) {
  SyntheticProfile p = builtin_profile("default");
  p.event_count = 100;
  p.overlap = false;
  p.cue_strength = 0.0;
  const Corpus c = generate_synthetic(p, 21);
  const std::vector<std::string> chain{"Destination", "Origin", "Place", "Attacker", "Target", "Victim"};
  std::map<std::string, std::map<std::string, int>> lexical, contextual;
  for (const auto& r : c.records()) {
    const auto& ev = r.events.front();
    const auto ordered = order_entities(r.entities);
    for (std::size_t i = 0; i < ordered.size(); ++i) {
      const auto& e = ordered[i];
      const std::string role(ev.role_of(e.id));
      if (std::find(chain.begin(), chain.end(), role) == chain.end()) continue;
      // lexical view: head word and entity type
      const std::string lex = r.sentence.tokens[e.last_token()] + "|" + e.entity_type;
      ++lexical[lex][role];
      // contextual view: the lexical view plus the gold roles of the other
      // same-type mentions, split by side
      std::string before, after;
      for (std::size_t j = 0; j < ordered.size(); ++j) {
        if (j == i || ordered[j].entity_type != e.entity_type) continue;
        (j < i ? before : after) += std::string(ev.role_of(ordered[j].id)) + ",";
      }
      ++contextual[lex + "|" + before + "|" + after][role];
    }
  }
  const double lex = majority_accuracy(lexical);
  const double ctx = majority_accuracy(contextual);
  EXPECT_GE(ctx - lex, 0.15) << "lexical " << lex << " contextual " << ctx;
}

}  // namespace
}  // namespace berd
