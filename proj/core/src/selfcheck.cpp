#include "berd/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "berd/model.hpp"
#include "berd/ops.hpp"
#include "berd/training.hpp"

namespace berd {

bool GradCheckSuite::passed(double tolerance) const {
  return std::all_of(entries.begin(), entries.end(),
                     [&](const GradCheckEntry& e) { return e.worst.passed(tolerance); });
}

double GradCheckSuite::max_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.worst.finite ? e.worst.max_rel_error : INFINITY);
  return m;
}

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return lo + static_cast<std::size_t>(rng_() % (hi - lo + 1));
  }
  Tensor<double> tensor(Shape shape, double bound = 1.0) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.values()) v = uniform(-bound, bound);
    return t;
  }
  // Matrix whose columns have pairwise gaps of at least `gap`, so max
  // selections are stable under the finite-difference step.
  Tensor<double> separated(std::size_t rows, std::size_t cols, double gap = 1e-3) {
    for (;;) {
      Tensor<double> t = tensor({rows, cols});
      bool ok = true;
      for (std::size_t c = 0; c < cols && ok; ++c) {
        for (std::size_t i = 0; i < rows && ok; ++i) {
          for (std::size_t j = i + 1; j < rows && ok; ++j) {
            ok = std::abs(t.at(i, c) - t.at(j, c)) >= gap;
          }
        }
      }
      if (ok) return t;
    }
  }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Scalar <w, out> with w fixed for the instantiation.
Var reduce(Graph<double>& g, Var out, const Tensor<double>& w) {
  const std::size_t n = g.value(out).size();
  return ops::dense(g, out, g.constant(Tensor<double>({1, n}, std::vector<double>(w.values().begin(), w.values().end()))),
                    g.constant(Tensor<double>({1})), ops::Activation::kNone);
}

struct Case {
  std::vector<Tensor<double>> inputs;
  std::function<Var(Graph<double>&, std::span<const Var>)> op;
};

using CaseFactory = std::function<Case(Sampler&)>;

std::vector<std::pair<std::string, CaseFactory>> kernel_cases() {
  std::vector<std::pair<std::string, CaseFactory>> cases;
  cases.emplace_back("gather_rows", [](Sampler& s) {
    const std::size_t v = s.index(1, 6), d = s.index(1, 4), n = s.index(1, 6);
    std::vector<int> ids(n);
    for (auto& id : ids) id = static_cast<int>(s.index(0, v - 1));
    return Case{{s.tensor({v, d})}, [ids](Graph<double>& g, std::span<const Var> in) {
                  return ops::gather_rows(g, in[0], ids);
                }};
  });
  cases.emplace_back("concat", [](Sampler& s) {
    const std::size_t n = s.index(1, 5);
    return Case{{s.tensor({n, s.index(1, 4)}), s.tensor({n, s.index(1, 4)}), s.tensor({n, s.index(1, 3)})},
                [](Graph<double>& g, std::span<const Var> in) { return ops::concat(g, in); }};
  });
  cases.emplace_back("add", [](Sampler& s) {
    const Shape shape{s.index(1, 5), s.index(1, 4)};
    return Case{{s.tensor(shape), s.tensor(shape)},
                [](Graph<double>& g, std::span<const Var> in) { return ops::add(g, in[0], in[1]); }};
  });
  cases.emplace_back("tanh", [](Sampler& s) {
    return Case{{s.tensor({s.index(1, 5), s.index(1, 4)}, 2.0)},
                [](Graph<double>& g, std::span<const Var> in) { return ops::tanh(g, in[0]); }};
  });
  cases.emplace_back("scale", [](Sampler& s) {
    const double factor = s.uniform(-2.0, 2.0);
    return Case{{s.tensor({s.index(1, 8)})}, [factor](Graph<double>& g, std::span<const Var> in) {
                  return ops::scale(g, in[0], factor);
                }};
  });
  cases.emplace_back("weighted_sum", [](Sampler& s) {
    const std::size_t m = s.index(1, 5);
    std::vector<Tensor<double>> inputs;
    std::vector<double> weights;
    for (std::size_t i = 0; i < m; ++i) {
      inputs.push_back(s.tensor({1}));
      weights.push_back(s.uniform(-1.0, 1.0));
    }
    return Case{inputs, [weights](Graph<double>& g, std::span<const Var> in) {
                  return ops::weighted_sum<double>(g, in, weights);
                }};
  });
  cases.emplace_back("conv1d_same", [](Sampler& s) {
    const std::size_t n = s.index(1, 6), cin = s.index(1, 4), cout = s.index(1, 4);
    return Case{{s.tensor({n, cin}), s.tensor({3, cin, cout}), s.tensor({cout})},
                [](Graph<double>& g, std::span<const Var> in) {
                  return ops::conv1d_same(g, in[0], in[1], in[2]);
                }};
  });
  cases.emplace_back("segment_max", [](Sampler& s) {
    const std::size_t n = s.index(2, 7), d = s.index(1, 4);
    const std::size_t a = s.index(1, n - 1);
    const std::size_t b = s.index(a + 1, n);
    return Case{{s.separated(n, d)}, [a, b](Graph<double>& g, std::span<const Var> in) {
                  return ops::segment_max(g, in[0], a, b);
                }};
  });
  cases.emplace_back("max_over_time", [](Sampler& s) {
    return Case{{s.separated(s.index(1, 6), s.index(1, 4))},
                [](Graph<double>& g, std::span<const Var> in) { return ops::max_over_time(g, in[0]); }};
  });
  for (const auto act : {ops::Activation::kNone, ops::Activation::kTanh}) {
    cases.emplace_back(act == ops::Activation::kTanh ? "dense_tanh" : "dense", [act](Sampler& s) {
      const std::size_t in = s.index(1, 6), out = s.index(1, 5);
      return Case{{s.tensor({in}), s.tensor({out, in}), s.tensor({out})},
                  [act](Graph<double>& g, std::span<const Var> v) {
                    return ops::dense(g, v[0], v[1], v[2], act);
                  }};
    });
  }
  cases.emplace_back("softmax", [](Sampler& s) {
    return Case{{s.tensor({s.index(1, 8)}, 3.0)},
                [](Graph<double>& g, std::span<const Var> in) { return ops::softmax(g, in[0]); }};
  });
  cases.emplace_back("cross_entropy", [](Sampler& s) {
    const std::size_t n = s.index(1, 8);
    const std::size_t gold = s.index(0, n - 1);
    return Case{{s.tensor({n}, 3.0)}, [gold](Graph<double>& g, std::span<const Var> in) {
                  return ops::cross_entropy(g, ops::softmax(g, in[0]), gold);
                }};
  });
  cases.emplace_back("dropout", [](Sampler& s) {
    const std::uint64_t seed = s.rng()();
    return Case{{s.tensor({s.index(1, 5), s.index(1, 4)})},
                [seed](Graph<double>& g, std::span<const Var> in) {
                  std::mt19937_64 rng(seed);
                  return ops::dropout(g, in[0], 0.3, rng);
                }};
  });
  return cases;
}

}  // namespace

GradCheckSuite kernel_gradchecks(std::size_t instantiations, std::uint64_t seed) {
  GradCheckSuite suite;
  std::uint64_t stream = 0;
  for (const auto& [name, factory] : kernel_cases()) {
    GradCheckEntry entry;
    entry.name = name;
    Sampler s(seed * 1000003ULL + ++stream);
    for (std::size_t i = 0; i < instantiations; ++i) {
      Case c = factory(s);
      Graph<double> probe;
      std::vector<Var> leaves;
      for (const auto& t : c.inputs) leaves.push_back(probe.constant(t));
      const Tensor<double> w = s.tensor({probe.value(c.op(probe, leaves)).size()});
      auto fn = [&](Graph<double>& g, std::span<const Var> in) { return reduce(g, c.op(g, in), w); };
      const GradCheckResult r = grad_check(fn, c.inputs);
      ++entry.instantiations;
      if (i == 0 || !r.finite || r.max_rel_error > entry.worst.max_rel_error) entry.worst = r;
    }
    suite.entries.push_back(entry);
  }
  return suite;
}

GradCheckEntry model_gradcheck(std::uint64_t seed) {
  SentenceRecord rec;
  rec.sentence.id = "toy";
  rec.sentence.tokens = {"the", "rebels", "fired", "at", "the", "town"};
  rec.entities = {{"e1", 0, 2, "PER"}, {"e2", 4, 6, "LOC"}};
  EventInstance ev;
  ev.trigger_start = 2;
  ev.trigger_end = 3;
  ev.event_type = "Attack";
  ev.roles = {{"e1", "Attacker"}, {"e2", "Place"}};
  rec.events = {ev};
  const Corpus corpus({rec});

  ModelConfig cfg;
  cfg.word_dim = 4;
  cfg.position_dim = 2;
  cfg.event_type_dim = 2;
  cfg.role_dim = 3;
  cfg.hidden_dim = 4;
  cfg.encoder_layers = 2;
  cfg.conv_channels = 5;
  cfg.position_clip = 4;
  const ModelVocabulary vocab = ModelVocabulary::from_corpus(corpus);
  BerdModel<double> model(cfg, vocab, seed);
  // Spread the small initial embeddings so every path carries signal.
  Sampler s(seed + 17);
  for (auto& p : model.store().entries()) {
    for (auto& v : p.value.values()) v = s.uniform(-0.5, 0.5);
  }
  const std::vector<PreparedEvent> events = prepare_corpus(corpus, vocab);
  const LossWeights weights;
  GradCheckEntry entry;
  entry.name = "training_loss";
  entry.instantiations = 1;
  entry.worst = grad_check_params(model.store(), [&](Graph<double>& g) {
    return batch_loss(g, model, events, weights);
  });
  return entry;
}

}  // namespace berd
