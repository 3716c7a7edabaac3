#include <gtest/gtest.h>

#include "berd/errors.hpp"
#include "berd/log.hpp"
#include "berd/model.hpp"
#include "berd/synthetic.hpp"
#include "test_support.hpp"

namespace berd {
namespace {

using testing::attack_record;
using testing::tiny_config;

TEST(EventMarker, AppendsThreeTokens) {
  EXPECT_EQ(append_event_marker({"a", "b"}, "ATTACK"),
            (std::vector<std::string>{"a", "b", "#", "ATTACK", "#"}));
}

TEST(EventMarker, EmptyTypeFallsBackWithWarning) {
  log::reset_warning_count();
  EXPECT_EQ(append_event_marker({"a", "b"}, ""),
            (std::vector<std::string>{"a", "b", "#", "UNK_EVENT", "#"}));
  EXPECT_EQ(log::warning_count(), 1u);
}

TEST(EventMarker, UnknownTypeWithVocabulary) {
  const LabelVocabulary known({"Attack"});
  EXPECT_EQ(append_event_marker({"x"}, "Marry", &known)[2], "UNK_EVENT");
  EXPECT_EQ(append_event_marker({"x"}, "Attack", &known)[2], "Attack");
}

TEST(EventMarker, LengthRule) {
  for (std::size_t n = 1; n < 20; ++n) {
    EXPECT_EQ(append_event_marker(std::vector<std::string>(n, "w"), "T").size(), n + kMarkerLength);
  }
}

TEST(RelativePosition, SignedDistanceToSpan) {
  // span [3, 5) in 8 tokens, clip 2
  EXPECT_EQ(relative_position_ids(8, 3, 5, 2), (std::vector<int>{0, 0, 1, 2, 2, 3, 4, 4}));
}

TEST(PrepareEvent, OrdersEntitiesAndMapsRoles) {
  const SentenceRecord r = testing::make_record(
      "s", {"a", "b", "c", "d"}, {{"z", 2, 3, "X"}, {"y", 0, 1, "X"}},
      {testing::make_event(1, "Meet", {{"z", "Place"}})});
  const Corpus c({r});
  const ModelVocabulary v = ModelVocabulary::from_corpus(c);
  const PreparedEvent ev = prepare_event(r, 0, v);
  ASSERT_EQ(ev.entities.size(), 2u);
  EXPECT_EQ(ev.entities[0].id, "y");
  EXPECT_EQ(ev.entities[1].id, "z");
  EXPECT_EQ(ev.gold_roles[0], 0);
  EXPECT_EQ(v.roles.label(ev.gold_roles[1]), "Place");
  EXPECT_EQ(ev.length(), 7u);
  EXPECT_EQ(ev.sentence_length, 4u);
  EXPECT_EQ(ev.token_ids[5], v.word_id("Meet"));
}

class EncoderTest : public ::testing::Test {
 protected:
  EncoderTest()
      : corpus_({attack_record(), testing::make_record("other", {"x", "y", "z"}, {{"a", 0, 1, "PER"}},
                                                       {testing::make_event(1, "Meet", {})})}),
        vocab_(ModelVocabulary::from_corpus(corpus_)),
        events_(prepare_corpus(corpus_, vocab_)),
        model_(tiny_config(), vocab_, 3) {}

  Tensor<double> encode(const PreparedEvent& ev) const {
    Graph<double> g(&model_.store(), GradMode::kDisabled);
    return g.value(model_.encoder().encode(g, ev));
  }

  Corpus corpus_;
  ModelVocabulary vocab_;
  std::vector<PreparedEvent> events_;
  BerdModel<double> model_;
};

TEST_F(EncoderTest, OutputShape) {
  for (const auto& ev : events_) {
    const Tensor<double> h = encode(ev);
    EXPECT_EQ(h.shape(), (Shape{ev.sentence_length + 3, model_.config().hidden_dim}));
    EXPECT_TRUE(all_finite(h));
  }
}

TEST_F(EncoderTest, ZeroParametersGiveZeroStates) {
  for (auto& p : model_.store().entries()) p.value.fill(0.0);
  for (const auto& ev : events_) {
    const Tensor<double> h = encode(ev);
    for (double v : h.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST_F(EncoderTest, SentencesAreIndependent) {
  const Tensor<double> alone = encode(events_[0]);
  Graph<double> g(&model_.store(), GradMode::kDisabled);
  model_.encoder().encode(g, events_[1]);
  const Var second = model_.encoder().encode(g, events_[0]);
  EXPECT_EQ(g.value(second), alone);
  EXPECT_EQ(encode(events_[0]), alone);
}

TEST_F(EncoderTest, LossReachesEncoderWeights) {
  Graph<double> g(&model_.store());
  g.backward(model_.event_loss(g, events_[0], LossWeights{}, 0.0, nullptr));
  const auto grads = g.param_gradients();
  const ParamId kernel = *model_.store().find("encoder.layer0.kernel");
  bool found = false;
  for (const auto& [id, grad] : grads.items()) {
    if (id == kernel) {
      found = true;
      double norm = 0;
      for (double v : grad.values()) norm += v * v;
      EXPECT_GT(norm, 0.0);
    }
  }
  EXPECT_TRUE(found);
}

TEST(HiddenStateTable, LookupAndFallback) {
  HiddenStateTable t;
  t.insert("s1", Tensor<float>::matrix(2, 2, {1, 2, 3, 4}));
  t.insert("s2#1", Tensor<float>::matrix(1, 2, {5, 6}));
  ASSERT_NE(t.find("s1", 3), nullptr);
  EXPECT_EQ(*t.find("s1", 3), Tensor<float>::matrix(2, 2, {1, 2, 3, 4}));
  EXPECT_NE(t.find("s2", 1), nullptr);
  EXPECT_EQ(t.find("s2", 0), nullptr);
  EXPECT_THROW(t.insert("bad", Tensor<float>({1, 3})), ValidationError);
}

TEST(HiddenStateTable, FileRoundTrip) {
  HiddenStateTable t;
  t.insert("a", Tensor<float>::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  t.insert("b#0", Tensor<float>::matrix(1, 3, {-1, 0.5f, 9}));
  testing::TempDir dir;
  t.save(dir / "h.bin");
  const HiddenStateTable back = HiddenStateTable::load(dir / "h.bin");
  EXPECT_EQ(back.size(), 2u);
  EXPECT_EQ(back.hidden_dim(), 3u);
  EXPECT_EQ(*back.find("a", 0), *t.find("a", 0));
  EXPECT_EQ(*back.find("b", 0), *t.find("b", 0));
}

TEST(HiddenStateTable, DamagedFile) {
  testing::TempDir dir;
  testing::write_file(dir / "bad.bin", "BERDHID1\x01");
  EXPECT_THROW(HiddenStateTable::load(dir / "bad.bin"), ParseError);
  testing::write_file(dir / "foreign.bin", "NOTMAGIC12345678");
  EXPECT_THROW(HiddenStateTable::load(dir / "foreign.bin"), ParseError);
}

TEST(PrecomputedEncoder, WidthMismatch) {
  auto t = std::make_shared<HiddenStateTable>();
  t->insert("a", Tensor<float>({4, 3}));
  EXPECT_THROW(PrecomputedEncoder<float>(t, 5), ValidationError);
}

TEST(PrecomputedEncoder, MissingIdIsNamed) {
  auto t = std::make_shared<HiddenStateTable>();
  t->insert("known", Tensor<float>({4, 2}));
  PrecomputedEncoder<float> enc(t, 2);
  PreparedEvent ev;
  ev.sentence_id = "mystery-sentence";
  ev.token_ids.assign(4, 0);
  Graph<float> g;
  try {
    enc.encode(g, ev);
    FAIL() << "expected out_of_range";
  } catch (const std::out_of_range& e) {
    EXPECT_NE(std::string(e.what()).find("mystery-sentence"), std::string::npos);
  }
  ev.sentence_id = "known";
  ev.token_ids.assign(5, 0);
  EXPECT_THROW(enc.encode(g, ev), ValidationError);
}

TEST(PrecomputedEncoder, InterchangeableWithReference) {
  SyntheticProfile p = builtin_profile("toy");
  p.event_count = 12;
  const Corpus c = generate_synthetic(p, 5);
  const ModelVocabulary v = ModelVocabulary::from_corpus(c);
  const auto events = prepare_corpus(c, v);
  BerdModel<float> model(tiny_config(), v, 8);

  auto table = std::make_shared<HiddenStateTable>();
  std::vector<PredictionRecord> reference;
  for (const auto& ev : events) {
    Graph<float> g(&model.store(), GradMode::kDisabled);
    table->insert(HiddenStateTable::key(ev.sentence_id, ev.event_index),
                  g.value(model.encoder().encode(g, ev)));
    reference.push_back(model.predict(ev));
  }
  model.set_encoder(std::make_shared<PrecomputedEncoder<float>>(table, model.config().hidden_dim));
  for (std::size_t i = 0; i < events.size(); ++i) {
    const PredictionRecord stored = model.predict(events[i]);
    ASSERT_EQ(stored.entities.size(), reference[i].entities.size());
    for (std::size_t e = 0; e < stored.entities.size(); ++e) {
      EXPECT_EQ(stored.entities[e].final_distribution, reference[i].entities[e].final_distribution);
      EXPECT_EQ(stored.entities[e].role, reference[i].entities[e].role);
    }
  }
  EXPECT_THROW(model.set_encoder(std::make_shared<PrecomputedEncoder<float>>(
                   std::make_shared<HiddenStateTable>(), 99)),
               ValidationError);
}

}  // namespace
}  // namespace berd
