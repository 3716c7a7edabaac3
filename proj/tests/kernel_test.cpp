#include <cstdint>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "berd/adam.hpp"
#include "berd/gradcheck.hpp"
#include "berd/ops.hpp"
#include "berd/selfcheck.hpp"

namespace berd {
namespace {

using T2 = Tensor<double>;

std::vector<double> values(const Graph<double>& g, Var v) {
  const auto s = g.value(v).values();
  return {s.begin(), s.end()};
}

// Backpropagates sum(out) and returns the gradient of `x`.
T2 sum_gradient(Graph<double>& g, Var out, Var x) {
  const std::size_t n = g.value(out).size();
  const Var w = g.constant(T2({1, n}, std::vector<double>(n, 1.0)));
  g.backward(ops::dense(g, out, w, g.constant(T2({1})), ops::Activation::kNone));
  return *g.grad(x);
}

TEST(SegmentMax, ThreeSegments) {
  Graph<double> g;
  const Var h = g.constant(T2::matrix(5, 2, {1, 0, 2, 3, 0, 5, 4, 1, 2, 2}));
  EXPECT_EQ(values(g, ops::segment_max(g, h, 2, 4)), (std::vector<double>{2, 3, 4, 5, 2, 2}));
}

TEST(SegmentMax, OnesStayOnes) {
  Graph<double> g;
  const Var h = g.constant(T2({6, 3}, 1.0));
  EXPECT_EQ(values(g, ops::segment_max(g, h, 2, 5)), std::vector<double>(9, 1.0));
}

TEST(SegmentMax, SingleColumn) {
  Graph<double> g;
  const Var h = g.constant(T2::matrix(4, 1, {5, 1, 3, 2}));
  EXPECT_EQ(values(g, ops::segment_max(g, h, 1, 3)), (std::vector<double>{5, 3, 2}));
}

TEST(SegmentMax, EmptyLastSegmentIsZero) {
  Graph<double> g;
  const Var h = g.constant(T2::matrix(3, 1, {-1, -2, -3}));
  EXPECT_EQ(values(g, ops::segment_max(g, h, 1, 3)), (std::vector<double>{-1, -2, 0}));
}

TEST(SegmentMax, InvalidSplits) {
  Graph<double> g;
  const Var h = g.constant(T2({4, 1}, 1.0));
  EXPECT_THROW(ops::segment_max(g, h, 2, 2), std::invalid_argument);
  EXPECT_THROW(ops::segment_max(g, h, 3, 2), std::invalid_argument);
  EXPECT_THROW(ops::segment_max(g, h, 0, 2), std::invalid_argument);
  EXPECT_THROW(ops::segment_max(g, h, 1, 5), std::invalid_argument);
}

TEST(SegmentMax, SegmentsCoverRowsDisjointly) {
  // Each row in its own column pattern: row r is the only positive entry of
  // column r, so the output reveals which segment claimed every row.
  const std::size_t n = 7;
  T2 eye({n, n});
  for (std::size_t r = 0; r < n; ++r) eye.at(r, r) = 1.0;
  for (std::size_t a = 1; a < n; ++a) {
    for (std::size_t b = a + 1; b <= n; ++b) {
      Graph<double> g;
      const auto out = values(g, ops::segment_max(g, g.constant(eye), a, b));
      for (std::size_t r = 0; r < n; ++r) {
        int claims = 0;
        for (std::size_t s = 0; s < 3; ++s) claims += out[s * n + r] == 1.0 ? 1 : 0;
        EXPECT_EQ(claims, 1) << a << "," << b << " row " << r;
        const std::size_t expected = r < a ? 0 : (r < b ? 1 : 2);
        EXPECT_EQ(out[expected * n + r], 1.0);
      }
    }
  }
}

TEST(SegmentMax, GradientGoesToLowestArgmax) {
  Graph<double> g;
  const Var h = g.input(T2::matrix(4, 1, {2, 2, 1, 1}));
  const T2 grad = sum_gradient(g, ops::segment_max(g, h, 2, 4), h);
  EXPECT_EQ(std::vector<double>(grad.values().begin(), grad.values().end()),
            (std::vector<double>{1, 0, 1, 0}));
}

TEST(Conv1d, SumKernel) {
  Graph<double> g;
  const Var x = g.constant(T2::matrix(3, 1, {1, 2, 3}));
  const Var k = g.constant(T2({3, 1, 1}, std::vector<double>{1, 1, 1}));
  const Var b = g.constant(T2({1}));
  EXPECT_EQ(values(g, ops::conv1d_same(g, x, k, b)), (std::vector<double>{3, 6, 5}));
}

TEST(Conv1d, ZeroKernel) {
  Graph<double> g;
  const Var x = g.constant(T2::matrix(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}));
  const Var k = g.constant(T2({3, 2, 3}));
  const Var b = g.constant(T2({3}));
  EXPECT_EQ(values(g, ops::conv1d_same(g, x, k, b)), std::vector<double>(12, 0.0));
}

TEST(Conv1d, IdentityKernel) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  T2 input({6, 1});
  for (auto& v : input.values()) v = u(rng);
  Graph<double> g;
  const Var k = g.constant(T2({3, 1, 1}, std::vector<double>{0, 1, 0}));
  EXPECT_EQ(values(g, ops::conv1d_same(g, g.constant(input), k, Var{})),
            std::vector<double>(input.values().begin(), input.values().end()));
}

TEST(Conv1d, MatchesDirectLoop) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  const std::size_t n = 5, cin = 3, cout = 4;
  T2 x({n, cin}), k({3, cin, cout}), b({cout});
  for (auto* t : {&x, &k, &b}) {
    for (auto& v : t->values()) v = u(rng);
  }
  Graph<double> g;
  const auto out = values(g, ops::conv1d_same(g, g.constant(x), g.constant(k), g.constant(b)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < cout; ++o) {
      double acc = b[o];
      for (int tap = 0; tap < 3; ++tap) {
        const long row = static_cast<long>(i) + tap - 1;
        if (row < 0 || row >= static_cast<long>(n)) continue;
        for (std::size_t c = 0; c < cin; ++c) {
          acc += x.at(static_cast<std::size_t>(row), c) * k[(static_cast<std::size_t>(tap) * cin + c) * cout + o];
        }
      }
      EXPECT_NEAR(out[i * cout + o], acc, 1e-12);
    }
  }
}

TEST(MaxOverTime, ColumnMax) {
  Graph<double> g;
  EXPECT_EQ(values(g, ops::max_over_time(g, g.constant(T2::matrix(2, 2, {1, 4, 3, 2})))),
            (std::vector<double>{3, 4}));
}

TEST(MaxOverTime, SingleRow) {
  Graph<double> g;
  EXPECT_EQ(values(g, ops::max_over_time(g, g.constant(T2::matrix(1, 3, {-1, 0, 7})))),
            (std::vector<double>{-1, 0, 7}));
}

TEST(MaxOverTime, TiesConcentrateOnRowZero) {
  Graph<double> g;
  const Var x = g.input(T2({3, 2}, 1.5));
  const Var m = ops::max_over_time(g, x);
  EXPECT_EQ(values(g, m), (std::vector<double>{1.5, 1.5}));
  const T2 grad = sum_gradient(g, m, x);
  EXPECT_EQ(std::vector<double>(grad.values().begin(), grad.values().end()),
            (std::vector<double>{1, 1, 0, 0, 0, 0}));
}

TEST(MaxOverTime, EmptyInput) {
  Graph<double> g;
  EXPECT_THROW(ops::max_over_time(g, g.constant(T2({0, 2}))), std::invalid_argument);
}

TEST(Dense, IdentityWeight) {
  Graph<double> g;
  const Var x = g.constant(T2::vector({0.3, -2, 5}));
  const Var w = g.constant(T2::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  EXPECT_EQ(values(g, ops::dense(g, x, w, g.constant(T2({3})), ops::Activation::kNone)),
            (std::vector<double>{0.3, -2, 5}));
}

TEST(Dense, TanhOfBias) {
  Graph<double> g;
  const auto out = values(g, ops::dense(g, g.constant(T2::vector({4, 5})), g.constant(T2({2, 2})),
                                        g.constant(T2::vector({1, -1})), ops::Activation::kTanh));
  EXPECT_NEAR(out[0], 0.7616, 1e-4);
  EXPECT_NEAR(out[1], -0.7616, 1e-4);
  EXPECT_DOUBLE_EQ(out[0], std::tanh(1.0));
}

TEST(Dense, OnesMatrix) {
  Graph<double> g;
  EXPECT_EQ(values(g, ops::dense(g, g.constant(T2::vector({1, 1, 1})), g.constant(T2({2, 3}, 1.0)),
                                 g.constant(T2({2})), ops::Activation::kNone)),
            (std::vector<double>{3, 3}));
}

TEST(Dense, ShapeMismatch) {
  Graph<double> g;
  EXPECT_THROW(ops::dense(g, g.constant(T2::vector({1, 1})), g.constant(T2({2, 3}, 1.0)),
                          g.constant(T2({2})), ops::Activation::kNone),
               std::invalid_argument);
}

TEST(Softmax, Examples) {
  Graph<double> g;
  auto at = [&](std::initializer_list<double> p) {
    return values(g, ops::softmax(g, g.constant(T2::vector(p))));
  };
  EXPECT_EQ(at({0, 0}), (std::vector<double>{0.5, 0.5}));
  const auto two = at({std::log(2.0), 0});
  EXPECT_NEAR(two[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(two[1], 1.0 / 3.0, 1e-12);
  EXPECT_EQ(at({1000, 1000}), (std::vector<double>{0.5, 0.5}));
}

TEST(Softmax, NormalizedAndShiftInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 12);
    T2 p({n});
    for (auto& v : p.values()) v = u(rng);
    T2 shifted = p;
    const double c = u(rng);
    for (auto& v : shifted.values()) v += c;
    Graph<double> g;
    const auto a = values(g, ops::softmax(g, g.constant(p)));
    const auto b = values(g, ops::softmax(g, g.constant(shifted)));
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GT(a[i], 0.0);
      EXPECT_NEAR(a[i], b[i], 1e-9);
      sum += a[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
}

TEST(Softmax, FloatNormalization) {
  Graph<float> g;
  const auto out = g.value(ops::softmax(g, g.constant(Tensor<float>::vector({3.f, -7.f, 0.25f, 80.f}))));
  float sum = 0;
  for (float v : out.values()) sum += v;
  EXPECT_NEAR(sum, 1.0f, 1e-6f);
}

TEST(CrossEntropy, Examples) {
  Graph<double> g;
  auto ce = [&](std::initializer_list<double> o, std::size_t gold) {
    return g.value(ops::cross_entropy(g, g.constant(T2::vector(o)), gold))[0];
  };
  EXPECT_NEAR(ce({0.5, 0.5}, 0), 0.6931, 1e-4);
  EXPECT_DOUBLE_EQ(ce({0.5, 0.5}, 0), std::log(2.0));
  EXPECT_EQ(ce({0, 1, 0}, 1), 0.0);
  EXPECT_NEAR(ce({1, 0}, 1), 27.631, 1e-3);
  EXPECT_THROW(ce({0.5, 0.5}, 2), std::out_of_range);
}

TEST(Dropout, ZeroRateIsIdentity) {
  std::mt19937_64 rng(4);
  Graph<double> g;
  const Var x = g.constant(T2::vector({1, 2, 3}));
  EXPECT_EQ(values(g, ops::dropout(g, x, 0.0, rng)), (std::vector<double>{1, 2, 3}));
}

TEST(Dropout, InvertedScaling) {
  std::mt19937_64 rng(4);
  Graph<double> g;
  const auto out = values(g, ops::dropout(g, g.constant(T2({20000}, 1.0)), 0.5, rng));
  double sum = 0;
  for (double v : out) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    sum += v;
  }
  EXPECT_NEAR(sum / 20000.0, 1.0, 0.03);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParameterStore<double> s;
  const ParamId id = s.add("p", T2::vector({0.5, -1.0}));
  AdamConfig c;
  c.weight_decay = 0.0;
  adam_step(s, c);
  EXPECT_EQ(s.at(id).value, T2::vector({0.5, -1.0}));
}

TEST(Adam, SingleStep) {
  ParameterStore<double> s;
  const ParamId id = s.add("p", T2::scalar(1.0));
  s.at(id).grad = T2::scalar(1.0);
  AdamConfig c;
  c.learning_rate = 0.1;
  c.weight_decay = 0.0;
  adam_step(s, c);
  // m_hat = 1, v_hat = 1 after bias correction
  EXPECT_NEAR(s.at(id).value[0], 1.0 - 0.1 * 1.0 / (1.0 + 1e-8), 1e-12);
  EXPECT_NEAR(s.at(id).value[0], 0.9, 1e-6);
}

TEST(Adam, DecoupledWeightDecay) {
  ParameterStore<double> s;
  const ParamId id = s.add("p", T2::scalar(2.0));
  AdamConfig c;
  c.learning_rate = 0.1;
  c.weight_decay = 0.5;
  adam_step(s, c);
  EXPECT_NEAR(s.at(id).value[0], 2.0 - 0.1 * 0.5 * 2.0, 1e-12);
}

TEST(Adam, IdenticalParametersMoveIdentically) {
  ParameterStore<double> s;
  const ParamId a = s.add("a", T2::vector({0.3, 0.7}));
  const ParamId b = s.add("b", T2::vector({0.3, 0.7}));
  for (int step = 0; step < 5; ++step) {
    s.at(a).grad = T2::vector({0.1 * step, -0.2});
    s.at(b).grad = T2::vector({0.1 * step, -0.2});
    adam_step(s, AdamConfig{});
  }
  EXPECT_EQ(s.at(a).value, s.at(b).value);
}

TEST(Warmup, LinearThenConstant) {
  const WarmupSchedule w{100, 0.1};
  EXPECT_EQ(w.warmup_steps(), 10u);
  EXPECT_NEAR(w.factor(1), 0.1, 1e-12);
  EXPECT_NEAR(w.factor(5), 0.5, 1e-12);
  EXPECT_NEAR(w.factor(10), 1.0, 1e-12);
  EXPECT_NEAR(w.factor(60), 1.0, 1e-12);
  EXPECT_NEAR((WarmupSchedule{100, 0.0}).factor(1), 1.0, 1e-12);
}

TEST(GradCheck, Quadratic) {
  const auto r = grad_check(
      [](Graph<double>& g, std::span<const Var> in) {
        // x^2 as a 1x1 dense layer whose weight is x itself
        return ops::dense(g, in[0], in[0], g.constant(T2({1})), ops::Activation::kNone);
      },
      {T2({1, 1}, std::vector<double>{3.0})});
  EXPECT_LT(r.max_rel_error, 1e-8);
  EXPECT_TRUE(r.finite);
}

TEST(GradCheck, ConstantFunction) {
  const auto r = grad_check([](Graph<double>& g, std::span<const Var>) { return g.constant(T2::scalar(4.0)); },
                            {T2::vector({1.0, 2.0})});
  EXPECT_EQ(r.max_rel_error, 0.0);
  EXPECT_EQ(r.coordinates, 2u);
}

TEST(GradCheck, DetectsWrongGradient) {
  // A node whose registered backward is deliberately wrong.
  const auto r = grad_check(
      [](Graph<double>& g, std::span<const Var> in) {
        const Var x = in[0];
        return g.add_node(T2::scalar(2.0 * g.value(x)[0]), true, [x](Graph<double>& gr, Var self) {
          gr.grad_ref(x)[0] += gr.grad_ref(self)[0];
        });
      },
      {T2::vector({1.0})});
  EXPECT_GT(r.max_rel_error, 0.3);
}

TEST(GradCheck, EveryKernelOp) {
  const GradCheckSuite suite = kernel_gradchecks(100, 0);
  EXPECT_EQ(suite.entries.size(), 14u);
  for (const auto& e : suite.entries) {
    EXPECT_EQ(e.instantiations, 100u);
    EXPECT_TRUE(e.worst.passed(kGradCheckTolerance)) << e.name << " " << e.worst.max_rel_error;
  }
}

TEST(GradCheck, FullLossOnToyEvent) {
  const GradCheckEntry e = model_gradcheck(0);
  EXPECT_GT(e.worst.coordinates, 100u);
  EXPECT_TRUE(e.worst.passed(kGradCheckTolerance)) << e.worst.max_rel_error << " at " << e.worst.worst;
}

TEST(Graph, GradientsAccumulateAcrossUses) {
  Graph<double> g;
  const Var x = g.input(T2::vector({1.0, 2.0}));
  const Var y = ops::add(g, x, x);
  const T2 grad = sum_gradient(g, y, x);
  EXPECT_EQ(grad, T2::vector({2.0, 2.0}));
}

TEST(Graph, DisabledModeRecordsNoGradients) {
  ParameterStore<double> s;
  const ParamId id = s.add("w", T2::vector({1.0, 2.0}));
  Graph<double> g(&s, GradMode::kDisabled);
  const Var w = g.param(id);
  EXPECT_EQ(g.param(id).id, w.id);
  EXPECT_FALSE(g.requires_grad(w));
}

TEST(Tensor, StorageIsAligned) {
  for (std::size_t n = 1; n < 40; n += 3) {
    const Tensor<float> f({n, 3});
    const Tensor<double> d = f.cast<double>();
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(f.data()) % 64, 0u);
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(d.data()) % 64, 0u);
  }
}

TEST(Tensor, ShapeMismatchThrows) {
  EXPECT_THROW(T2({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  T2 a({3}), b({2});
  EXPECT_THROW(a.add_scaled(b), std::invalid_argument);
}

TEST(ParameterStore, AssignValuesChecksShapes) {
  ParameterStore<float> a, b;
  a.add("w", Tensor<float>({2, 2}));
  b.add("w", Tensor<float>({2, 3}));
  EXPECT_THROW(a.assign_values(b), std::invalid_argument);
  EXPECT_THROW(a.add("w", Tensor<float>({1})), std::invalid_argument);
}

}  // namespace
}  // namespace berd
