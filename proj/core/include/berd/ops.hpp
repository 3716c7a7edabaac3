#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "berd/graph.hpp"

// Differentiable kernel operations. Each op evaluates eagerly, appends one
// node to the graph and registers its backward rule. Max-type reductions
// route gradient to the lowest-index argmax on ties.
namespace berd::ops {

enum class Activation { kNone, kTanh };

// Rows of `table` selected by `ids`: (ids.size() x d).
template <typename T>
Var gather_rows(Graph<T>& g, Var table, std::span<const int> ids);

// Concatenation along the last axis. Inputs must have equal row counts.
template <typename T>
Var concat(Graph<T>& g, std::span<const Var> parts);

template <typename T>
Var add(Graph<T>& g, Var a, Var b);

template <typename T>
Var tanh(Graph<T>& g, Var x);

template <typename T>
Var scale(Graph<T>& g, Var x, T factor);

// Weighted sum of scalar nodes.
template <typename T>
Var weighted_sum(Graph<T>& g, std::span<const Var> terms, std::span<const T> weights);

// Width-3 cross-correlation with one zero-padded token on each side.
// x: n x c_in, kernel: 3 x c_in x c_out (tap 0 reads row i-1), bias: c_out or
// an invalid Var for no bias. Returns n x c_out.
template <typename T>
Var conv1d_same(Graph<T>& g, Var x, Var kernel, Var bias);

// Dynamic multi-pooling. split_a/split_b are 1-based inclusive ends of the
// first two segments: rows [0, a), [a, b), [b, n). An empty segment
// contributes zeros. Requires 1 <= a < b <= n.
template <typename T>
Var segment_max(Graph<T>& g, Var h, std::size_t split_a, std::size_t split_b);

// Column-wise max over rows; n must be >= 1.
template <typename T>
Var max_over_time(Graph<T>& g, Var x);

// act(W x + b) with W: out x in.
template <typename T>
Var dense(Graph<T>& g, Var x, Var weight, Var bias, Activation act);

template <typename T>
Var softmax(Graph<T>& g, Var logits);

inline constexpr double kProbabilityFloor = 1e-12;

// -log(max(o[gold], floor)). Returns a 1-element tensor.
template <typename T>
Var cross_entropy(Graph<T>& g, Var probs, std::size_t gold);

// Inverted dropout; identity when rate == 0.
template <typename T>
Var dropout(Graph<T>& g, Var x, double rate, std::mt19937_64& rng);

}  // namespace berd::ops
