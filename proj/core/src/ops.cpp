#include "berd/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace berd::ops {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
ConstMatMap<T> as_matrix(const Tensor<T>& t) {
  return ConstMatMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
MatMap<T> as_matrix(Tensor<T>& t) {
  return MatMap<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + shape_to_string(a) + " and " +
                              shape_to_string(b));
}

template <typename T>
bool any_requires_grad(const Graph<T>& g, std::initializer_list<Var> vars) {
  return std::any_of(vars.begin(), vars.end(),
                     [&](Var v) { return v.valid() && g.requires_grad(v); });
}

}  // namespace

template <typename T>
Var gather_rows(Graph<T>& g, Var table, std::span<const int> ids) {
  const Tensor<T>& tab = g.value(table);
  const std::size_t d = tab.cols();
  const std::size_t vocab = tab.rows();
  Tensor<T> out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= vocab) {
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[r]) + " outside table of " +
                              std::to_string(vocab) + " rows");
    }
    std::copy_n(tab.row(static_cast<std::size_t>(ids[r])).data(), d, out.row(r).data());
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return g.add_node(std::move(out), g.requires_grad(table),
                    [table, saved = std::move(saved), d](Graph<T>& gr, Var self) {
                      const Tensor<T>& gy = *gr.grad(self);
                      Tensor<T>& gt = gr.grad_ref(table);
                      for (std::size_t r = 0; r < saved.size(); ++r) {
                        T* dst = gt.row(static_cast<std::size_t>(saved[r])).data();
                        const T* src = gy.row(r).data();
                        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
                      }
                    });
}

template <typename T>
Var concat(Graph<T>& g, std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const std::size_t rows = g.value(parts[0]).rows();
  bool all_rank1 = true;
  bool needs_grad = false;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor<T>& v = g.value(p);
    if (v.rows() != rows) shape_error("concat", g.value(parts[0]).shape(), v.shape());
    all_rank1 = all_rank1 && v.rank() == 1;
    needs_grad = needs_grad || g.requires_grad(p);
    total += v.cols();
  }
  Tensor<T> out(all_rank1 ? Shape{total} : Shape{rows, total});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (Var p : parts) {
    const Tensor<T>& v = g.value(p);
    offsets.push_back(off);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.row(r).data(), v.cols(), out.row(r).data() + off);
    }
    off += v.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return g.add_node(std::move(out), needs_grad,
                    [saved = std::move(saved), offsets = std::move(offsets), rows](Graph<T>& gr,
                                                                                   Var self) {
                      const Tensor<T>& gy = *gr.grad(self);
                      for (std::size_t i = 0; i < saved.size(); ++i) {
                        if (!gr.requires_grad(saved[i])) continue;
                        Tensor<T>& gp = gr.grad_ref(saved[i]);
                        const std::size_t w = gp.cols();
                        for (std::size_t r = 0; r < rows; ++r) {
                          const T* src = gy.row(r).data() + offsets[i];
                          T* dst = gp.row(r).data();
                          for (std::size_t c = 0; c < w; ++c) dst[c] += src[c];
                        }
                      }
                    });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& va = g.value(a);
  const Tensor<T>& vb = g.value(b);
  if (va.shape() != vb.shape()) shape_error("add", va.shape(), vb.shape());
  Tensor<T> out = va;
  out.add_scaled(vb);
  return g.add_node(std::move(out), any_requires_grad(g, {a, b}), [a, b](Graph<T>& gr, Var self) {
    const Tensor<T>& gy = *gr.grad(self);
    if (gr.requires_grad(a)) gr.grad_ref(a).add_scaled(gy);
    if (gr.requires_grad(b)) gr.grad_ref(b).add_scaled(gy);
  });
}

template <typename T>
Var tanh(Graph<T>& g, Var x) {
  Tensor<T> out = g.value(x);
  for (T& v : out.values()) v = std::tanh(v);
  return g.add_node(std::move(out), g.requires_grad(x), [x](Graph<T>& gr, Var self) {
    const Tensor<T>& y = gr.value(self);
    const Tensor<T>& gy = *gr.grad(self);
    Tensor<T>& gx = gr.grad_ref(x);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += gy[i] * (T{1} - y[i] * y[i]);
  });
}

template <typename T>
Var scale(Graph<T>& g, Var x, T factor) {
  Tensor<T> out = g.value(x);
  for (T& v : out.values()) v *= factor;
  return g.add_node(std::move(out), g.requires_grad(x), [x, factor](Graph<T>& gr, Var self) {
    gr.grad_ref(x).add_scaled(*gr.grad(self), factor);
  });
}

template <typename T>
Var weighted_sum(Graph<T>& g, std::span<const Var> terms, std::span<const T> weights) {
  if (terms.size() != weights.size()) {
    throw std::invalid_argument("weighted_sum: terms/weights length mismatch");
  }
  T total{0};
  bool needs_grad = false;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const Tensor<T>& v = g.value(terms[i]);
    if (v.size() != 1) throw std::invalid_argument("weighted_sum: terms must be scalars");
    total += weights[i] * v[0];
    needs_grad = needs_grad || g.requires_grad(terms[i]);
  }
  std::vector<Var> saved_terms(terms.begin(), terms.end());
  std::vector<T> saved_weights(weights.begin(), weights.end());
  return g.add_node(Tensor<T>::scalar(total), needs_grad,
                    [saved_terms = std::move(saved_terms),
                     saved_weights = std::move(saved_weights)](Graph<T>& gr, Var self) {
                      const T gy = (*gr.grad(self))[0];
                      for (std::size_t i = 0; i < saved_terms.size(); ++i) {
                        if (gr.requires_grad(saved_terms[i])) {
                          gr.grad_ref(saved_terms[i])[0] += saved_weights[i] * gy;
                        }
                      }
                    });
}

template <typename T>
Var conv1d_same(Graph<T>& g, Var x, Var kernel, Var bias) {
  const Tensor<T>& vx = g.value(x);
  const Tensor<T>& vk = g.value(kernel);
  if (vx.rank() != 2 || vx.rows() == 0) {
    throw std::invalid_argument("conv1d_same: input must be n x c_in with n >= 1, got " +
                                shape_to_string(vx.shape()));
  }
  const auto n = static_cast<Eigen::Index>(vx.rows());
  const auto c_in = static_cast<Eigen::Index>(vx.cols());
  if (vk.rank() != 3 || vk.shape()[0] != 3 || vk.shape()[1] != vx.cols()) {
    shape_error("conv1d_same", vx.shape(), vk.shape());
  }
  const auto c_out = static_cast<Eigen::Index>(vk.shape()[2]);
  if (bias.valid() && g.value(bias).size() != vk.shape()[2]) {
    shape_error("conv1d_same bias", vk.shape(), g.value(bias).shape());
  }

  Tensor<T> out({vx.rows(), vk.shape()[2]});
  auto X = as_matrix(vx);
  ConstMatMap<T> K(vk.data(), 3 * c_in, c_out);
  auto Y = as_matrix(out);
  Y.noalias() = X * K.middleRows(c_in, c_in);
  if (n > 1) {
    Y.bottomRows(n - 1).noalias() += X.topRows(n - 1) * K.topRows(c_in);
    Y.topRows(n - 1).noalias() += X.bottomRows(n - 1) * K.bottomRows(c_in);
  }
  if (bias.valid()) {
    ConstVecMap<T> b(g.value(bias).data(), c_out);
    Y.rowwise() += b.transpose();
  }

  return g.add_node(
      std::move(out), any_requires_grad(g, {x, kernel, bias}),
      [x, kernel, bias, n, c_in, c_out](Graph<T>& gr, Var self) {
        const Tensor<T>& gy_t = *gr.grad(self);
        auto dY = as_matrix(gy_t);
        auto Xm = as_matrix(gr.value(x));
        if (gr.requires_grad(kernel)) {
          MatMap<T> dK(gr.grad_ref(kernel).data(), 3 * c_in, c_out);
          dK.middleRows(c_in, c_in).noalias() += Xm.transpose() * dY;
          if (n > 1) {
            dK.topRows(c_in).noalias() += Xm.topRows(n - 1).transpose() * dY.bottomRows(n - 1);
            dK.bottomRows(c_in).noalias() += Xm.bottomRows(n - 1).transpose() * dY.topRows(n - 1);
          }
        }
        if (bias.valid() && gr.requires_grad(bias)) {
          VecMap<T> db(gr.grad_ref(bias).data(), c_out);
          db += dY.colwise().sum().transpose();
        }
        if (gr.requires_grad(x)) {
          ConstMatMap<T> Km(gr.value(kernel).data(), 3 * c_in, c_out);
          auto dX = as_matrix(gr.grad_ref(x));
          dX.noalias() += dY * Km.middleRows(c_in, c_in).transpose();
          if (n > 1) {
            dX.topRows(n - 1).noalias() += dY.bottomRows(n - 1) * Km.topRows(c_in).transpose();
            dX.bottomRows(n - 1).noalias() += dY.topRows(n - 1) * Km.bottomRows(c_in).transpose();
          }
        }
      });
}

template <typename T>
Var segment_max(Graph<T>& g, Var h, std::size_t split_a, std::size_t split_b) {
  const Tensor<T>& vh = g.value(h);
  const std::size_t n = vh.rows();
  const std::size_t d = vh.cols();
  if (vh.rank() != 2 || n == 0) {
    throw std::invalid_argument("segment_max: expected non-empty n x d input, got " +
                                shape_to_string(vh.shape()));
  }
  if (split_a < 1 || split_a >= split_b || split_b > n) {
    throw std::invalid_argument("segment_max: need 1 <= split_a < split_b <= n, got split_a=" +
                                std::to_string(split_a) + " split_b=" + std::to_string(split_b) +
                                " n=" + std::to_string(n));
  }
  const std::size_t bounds[4] = {0, split_a, split_b, n};
  Tensor<T> out({3 * d});
  std::vector<std::int64_t> argmax(3 * d, -1);
  for (std::size_t s = 0; s < 3; ++s) {
    if (bounds[s] == bounds[s + 1]) continue;
    for (std::size_t c = 0; c < d; ++c) {
      std::size_t best = bounds[s];
      for (std::size_t r = bounds[s] + 1; r < bounds[s + 1]; ++r) {
        if (vh.at(r, c) > vh.at(best, c)) best = r;
      }
      out[s * d + c] = vh.at(best, c);
      argmax[s * d + c] = static_cast<std::int64_t>(best);
    }
  }
  return g.add_node(std::move(out), g.requires_grad(h),
                    [h, d, argmax = std::move(argmax)](Graph<T>& gr, Var self) {
                      const Tensor<T>& gy = *gr.grad(self);
                      Tensor<T>& gh = gr.grad_ref(h);
                      for (std::size_t i = 0; i < argmax.size(); ++i) {
                        if (argmax[i] >= 0) {
                          gh.at(static_cast<std::size_t>(argmax[i]), i % d) += gy[i];
                        }
                      }
                    });
}

template <typename T>
Var max_over_time(Graph<T>& g, Var x) {
  const Tensor<T>& vx = g.value(x);
  if (vx.size() == 0 || vx.rows() == 0) {
    throw std::invalid_argument("max_over_time: input has no rows");
  }
  const std::size_t n = vx.rows();
  const std::size_t c = vx.cols();
  Tensor<T> out({c});
  std::vector<std::size_t> argmax(c, 0);
  for (std::size_t j = 0; j < c; ++j) out[j] = vx.at(0, j);
  for (std::size_t r = 1; r < n; ++r) {
    const T* row = vx.row(r).data();
    for (std::size_t j = 0; j < c; ++j) {
      if (row[j] > out[j]) {
        out[j] = row[j];
        argmax[j] = r;
      }
    }
  }
  return g.add_node(std::move(out), g.requires_grad(x),
                    [x, argmax = std::move(argmax)](Graph<T>& gr, Var self) {
                      const Tensor<T>& gy = *gr.grad(self);
                      Tensor<T>& gx = gr.grad_ref(x);
                      for (std::size_t j = 0; j < argmax.size(); ++j) gx.at(argmax[j], j) += gy[j];
                    });
}

template <typename T>
Var dense(Graph<T>& g, Var x, Var weight, Var bias, Activation act) {
  const Tensor<T>& vx = g.value(x);
  const Tensor<T>& vw = g.value(weight);
  const Tensor<T>& vb = g.value(bias);
  if (vw.rank() != 2 || vw.cols() != vx.size() || vb.size() != vw.rows()) {
    throw std::invalid_argument("dense: x " + shape_to_string(vx.shape()) + ", W " +
                                shape_to_string(vw.shape()) + ", b " + shape_to_string(vb.shape()));
  }
  const auto out_dim = static_cast<Eigen::Index>(vw.rows());
  const auto in_dim = static_cast<Eigen::Index>(vw.cols());
  Tensor<T> out({vw.rows()});
  VecMap<T> y(out.data(), out_dim);
  y.noalias() = as_matrix(vw) * ConstVecMap<T>(vx.data(), in_dim);
  y += ConstVecMap<T>(vb.data(), out_dim);
  if (act == Activation::kTanh) y = y.array().tanh();

  return g.add_node(
      std::move(out), any_requires_grad(g, {x, weight, bias}),
      [x, weight, bias, act, out_dim, in_dim](Graph<T>& gr, Var self) {
        Eigen::Matrix<T, Eigen::Dynamic, 1> dz = ConstVecMap<T>(gr.grad(self)->data(), out_dim);
        if (act == Activation::kTanh) {
          ConstVecMap<T> y(gr.value(self).data(), out_dim);
          dz.array() *= (T{1} - y.array().square());
        }
        if (gr.requires_grad(weight)) {
          ConstVecMap<T> xv(gr.value(x).data(), in_dim);
          as_matrix(gr.grad_ref(weight)).noalias() += dz * xv.transpose();
        }
        if (gr.requires_grad(bias)) VecMap<T>(gr.grad_ref(bias).data(), out_dim) += dz;
        if (gr.requires_grad(x)) {
          VecMap<T>(gr.grad_ref(x).data(), in_dim).noalias() +=
              as_matrix(gr.value(weight)).transpose() * dz;
        }
      });
}

template <typename T>
Var softmax(Graph<T>& g, Var logits) {
  const Tensor<T>& vp = g.value(logits);
  if (vp.size() == 0) throw std::invalid_argument("softmax: empty input");
  Tensor<T> out(vp.shape());
  const T shift = *std::max_element(vp.values().begin(), vp.values().end());
  T total{0};
  for (std::size_t i = 0; i < vp.size(); ++i) {
    out[i] = std::exp(vp[i] - shift);
    total += out[i];
  }
  for (T& v : out.values()) v /= total;
  return g.add_node(std::move(out), g.requires_grad(logits), [logits](Graph<T>& gr, Var self) {
    const Tensor<T>& y = gr.value(self);
    const Tensor<T>& gy = *gr.grad(self);
    T dot{0};
    for (std::size_t i = 0; i < y.size(); ++i) dot += gy[i] * y[i];
    Tensor<T>& gx = gr.grad_ref(logits);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (gy[i] - dot);
  });
}

template <typename T>
Var cross_entropy(Graph<T>& g, Var probs, std::size_t gold) {
  const Tensor<T>& vo = g.value(probs);
  if (gold >= vo.size()) {
    throw std::out_of_range("cross_entropy: gold index " + std::to_string(gold) +
                            " outside distribution of size " + std::to_string(vo.size()));
  }
  const T floor = static_cast<T>(kProbabilityFloor);
  const T p = vo[gold];
  const bool clamped = p < floor;  // NaN passes through
  const T loss = -std::log(clamped ? floor : p);
  return g.add_node(Tensor<T>::scalar(loss), g.requires_grad(probs),
                    [probs, gold, clamped](Graph<T>& gr, Var self) {
                      if (clamped) return;
                      const T gy = (*gr.grad(self))[0];
                      Tensor<T>& go = gr.grad_ref(probs);
                      go[gold] -= gy / gr.value(probs)[gold];
                    });
}

template <typename T>
Var dropout(Graph<T>& g, Var x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  const Tensor<T>& vx = g.value(x);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> mask(vx.shape());
  Tensor<T> out(vx.shape());
  for (std::size_t i = 0; i < vx.size(); ++i) {
    // 53 random bits -> uniform double in [0, 1)
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mask[i] = u < rate ? T{0} : keep_scale;
    out[i] = vx[i] * mask[i];
  }
  return g.add_node(std::move(out), g.requires_grad(x),
                    [x, mask = std::move(mask)](Graph<T>& gr, Var self) {
                      const Tensor<T>& gy = *gr.grad(self);
                      Tensor<T>& gx = gr.grad_ref(x);
                      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * mask[i];
                    });
}

#define BERD_INSTANTIATE_OPS(T)                                                    \
  template Var gather_rows(Graph<T>&, Var, std::span<const int>);                  \
  template Var concat(Graph<T>&, std::span<const Var>);                            \
  template Var add(Graph<T>&, Var, Var);                                           \
  template Var tanh(Graph<T>&, Var);                                               \
  template Var scale(Graph<T>&, Var, T);                                           \
  template Var weighted_sum(Graph<T>&, std::span<const Var>, std::span<const T>);  \
  template Var conv1d_same(Graph<T>&, Var, Var, Var);                              \
  template Var segment_max(Graph<T>&, Var, std::size_t, std::size_t);              \
  template Var max_over_time(Graph<T>&, Var);                                      \
  template Var dense(Graph<T>&, Var, Var, Var, Activation);                        \
  template Var softmax(Graph<T>&, Var);                                            \
  template Var cross_entropy(Graph<T>&, Var, std::size_t);                         \
  template Var dropout(Graph<T>&, Var, double, std::mt19937_64&);

BERD_INSTANTIATE_OPS(float)
BERD_INSTANTIATE_OPS(double)

#undef BERD_INSTANTIATE_OPS

}  // namespace berd::ops
