#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtdlab/core/rng.hpp"
#include "rtdlab/core/tensor.hpp"

// Differentiable free functions over Tensor<S>. Every op validates shapes up
// front, computes the forward value, and attaches a backprop closure when any
// input requires gradients. Closures capture raw node pointers; the output
// node's parent list keeps them alive.

namespace rtdlab {

namespace detail {

template <class S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using CMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

[[noreturn]] inline void shape_fail(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

template <class S>
void attach(Tensor<S>& out, const char* op, std::initializer_list<Tensor<S>> parents,
            std::function<void()> backprop) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (!needs) return;
  TensorNode<S>* n = out.raw();
  n->op = op;
  n->requires_grad = true;
  for (const auto& p : parents) n->parents.push_back(p.node());
  n->backprop = std::move(backprop);
}

template <class S>
void accumulate(TensorNode<S>* node, std::size_t i, S v) {
  node->ensure_grad();
  node->grad[i] += v;
}

inline std::size_t row_count(const Shape& shape) {
  return shape.empty() ? 1 : numel(shape) / shape.back();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

// add: identical shapes, or b's shape a suffix of a's (bias broadcast).
template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  const bool same = a.shape() == b.shape();
  bool suffix = !same && a.rank() > b.rank();
  if (suffix) {
    const std::size_t off = a.rank() - b.rank();
    for (std::size_t i = 0; i < b.rank(); ++i) suffix = suffix && a.dim(off + i) == b.dim(i);
  }
  if (!same && !suffix) {
    detail::shape_fail("add", "incompatible shapes " + shape_str(a.shape()) + " and " +
                                  shape_str(b.shape()));
  }
  const std::size_t n = a.size(), nb = b.size();
  std::vector<S> out(n);
  const S* pa = a.data();
  const S* pb = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] + pb[i % nb];
  Tensor<S> y = Tensor<S>::from(a.shape(), std::move(out));
  detail::attach(y, "add", {a, b}, [an = a.raw(), bn = b.raw(), yn = y.raw(), n, nb] {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) an->grad[i] += yn->grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) bn->grad[i % nb] += yn->grad[i];
    }
  });
  return y;
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) {
    detail::shape_fail("mul", "shapes differ: " + shape_str(a.shape()) + " vs " +
                                  shape_str(b.shape()));
  }
  const std::size_t n = a.size();
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i] * b.data()[i];
  Tensor<S> y = Tensor<S>::from(a.shape(), std::move(out));
  detail::attach(y, "mul", {a, b}, [an = a.raw(), bn = b.raw(), yn = y.raw(), n] {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) an->grad[i] += yn->grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) bn->grad[i] += yn->grad[i] * an->value[i];
    }
  });
  return y;
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S c) {
  const std::size_t n = a.size();
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i] * c;
  Tensor<S> y = Tensor<S>::from(a.shape(), std::move(out));
  detail::attach(y, "scale", {a}, [an = a.raw(), yn = y.raw(), n, c] {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) an->grad[i] += yn->grad[i] * c;
  });
  return y;
}

// Exact erf form: 0.5 x (1 + erf(x / sqrt(2))).
template <class S>
Tensor<S> gelu(const Tensor<S>& a) {
  static const S inv_sqrt2 = S(0.7071067811865475244);
  static const S inv_sqrt2pi = S(0.3989422804014326779);
  const std::size_t n = a.size();
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const S x = a.data()[i];
    out[i] = S(0.5) * x * (S(1) + std::erf(x * inv_sqrt2));
  }
  Tensor<S> y = Tensor<S>::from(a.shape(), std::move(out));
  detail::attach(y, "gelu", {a}, [an = a.raw(), yn = y.raw(), n] {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      const S x = an->value[i];
      const S cdf = S(0.5) * (S(1) + std::erf(x * inv_sqrt2));
      const S pdf = inv_sqrt2pi * std::exp(S(-0.5) * x * x);
      an->grad[i] += yn->grad[i] * (cdf + x * pdf);
    }
  });
  return y;
}

template <class S>
S sigmoid_scalar(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <class S>
Tensor<S> sigmoid(const Tensor<S>& a) {
  const std::size_t n = a.size();
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_scalar(a.data()[i]);
  Tensor<S> y = Tensor<S>::from(a.shape(), std::move(out));
  detail::attach(y, "sigmoid", {a}, [an = a.raw(), yn = y.raw(), n] {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      const S s = yn->value[i];
      an->grad[i] += yn->grad[i] * s * (S(1) - s);
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

// a [..., m, k] times b, where b is either [k, n] (shared weight) or has
// a's leading dimensions exactly [..., k, n] (batched, e.g. attention).
template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    detail::shape_fail("matmul", "inputs must have rank >= 2, got " + shape_str(a.shape()) +
                                     " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2);
  const std::size_t n = b.dim(b.rank() - 1);
  if (k != kb) {
    detail::shape_fail("matmul", "inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                                     shape_str(b.shape()));
  }
  const bool batched_b = b.rank() > 2;
  const std::size_t batches = numel(a.shape()) / (m * k);
  if (batched_b) {
    Shape lead_a(a.shape().begin(), a.shape().end() - 2);
    Shape lead_b(b.shape().begin(), b.shape().end() - 2);
    if (lead_a != lead_b) {
      detail::shape_fail("matmul", "batch dimensions disagree: " + shape_str(a.shape()) + " x " +
                                       shape_str(b.shape()));
    }
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  std::vector<S> out(batches * m * n);
  for (std::size_t i = 0; i < batches; ++i) {
    detail::CMatMap<S> A(a.data() + i * m * k, m, k);
    detail::CMatMap<S> B(b.data() + (batched_b ? i * k * n : 0), k, n);
    detail::MatMap<S> C(out.data() + i * m * n, m, n);
    C.noalias() = A * B;
  }
  Tensor<S> y = Tensor<S>::from(std::move(out_shape), std::move(out));
  detail::attach(y, "matmul", {a, b},
                 [an = a.raw(), bn = b.raw(), yn = y.raw(), m, k, n, batches, batched_b] {
                   for (std::size_t i = 0; i < batches; ++i) {
                     detail::CMatMap<S> A(an->value.data() + i * m * k, m, k);
                     detail::CMatMap<S> B(bn->value.data() + (batched_b ? i * k * n : 0), k, n);
                     detail::CMatMap<S> dY(yn->grad.data() + i * m * n, m, n);
                     if (an->requires_grad) {
                       an->ensure_grad();
                       detail::MatMap<S> dA(an->grad.data() + i * m * k, m, k);
                       dA.noalias() += dY * B.transpose();
                     }
                     if (bn->requires_grad) {
                       bn->ensure_grad();
                       detail::MatMap<S> dB(bn->grad.data() + (batched_b ? i * k * n : 0), k, n);
                       dB.noalias() += A.transpose() * dY;
                     }
                   }
                 });
  return y;
}

// ---------------------------------------------------------------------------
// normalization / softmax family (all reduce over the last axis)
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> softmax(const Tensor<S>& a) {
  if (a.rank() < 1) detail::shape_fail("softmax", "rank-0 input");
  const std::size_t cols = a.shape().back();
  const std::size_t rows = detail::row_count(a.shape());
  std::vector<S> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const S* x = a.data() + r * cols;
    S* y = out.data() + r * cols;
    S mx = x[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    S sum = S(0);
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
  }
  Tensor<S> y = Tensor<S>::from(a.shape(), std::move(out));
  detail::attach(y, "softmax", {a}, [an = a.raw(), yn = y.raw(), rows, cols] {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const S* p = yn->value.data() + r * cols;
      const S* dy = yn->grad.data() + r * cols;
      S dot = S(0);
      for (std::size_t j = 0; j < cols; ++j) dot += p[j] * dy[j];
      S* dx = an->grad.data() + r * cols;
      for (std::size_t j = 0; j < cols; ++j) dx[j] += p[j] * (dy[j] - dot);
    }
  });
  return y;
}

template <class S>
Tensor<S> log_softmax(const Tensor<S>& a) {
  if (a.rank() < 1) detail::shape_fail("log_softmax", "rank-0 input");
  const std::size_t cols = a.shape().back();
  const std::size_t rows = detail::row_count(a.shape());
  std::vector<S> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const S* x = a.data() + r * cols;
    S* y = out.data() + r * cols;
    S mx = x[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    S sum = S(0);
    for (std::size_t j = 0; j < cols; ++j) sum += std::exp(x[j] - mx);
    const S lse = mx + std::log(sum);
    for (std::size_t j = 0; j < cols; ++j) y[j] = x[j] - lse;
  }
  Tensor<S> y = Tensor<S>::from(a.shape(), std::move(out));
  detail::attach(y, "log_softmax", {a}, [an = a.raw(), yn = y.raw(), rows, cols] {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const S* ly = yn->value.data() + r * cols;
      const S* dy = yn->grad.data() + r * cols;
      S total = S(0);
      for (std::size_t j = 0; j < cols; ++j) total += dy[j];
      S* dx = an->grad.data() + r * cols;
      for (std::size_t j = 0; j < cols; ++j) dx[j] += dy[j] - std::exp(ly[j]) * total;
    }
  });
  return y;
}

// Softmax over the last axis restricted to keys the mask allows. `key_mask`
// has shape [batch, cols] flattened, where batch is the first dimension of
// `a`; masked entries get probability exactly zero, so masked keys can never
// leak into attended outputs. A fully-masked row yields all zeros.
template <class S>
Tensor<S> masked_softmax(const Tensor<S>& a, const std::vector<std::uint8_t>& key_mask) {
  if (a.rank() < 2) detail::shape_fail("masked_softmax", "input must have rank >= 2");
  const std::size_t batch = a.dim(0);
  const std::size_t cols = a.shape().back();
  const std::size_t rows = detail::row_count(a.shape());
  if (key_mask.size() != batch * cols) {
    detail::shape_fail("masked_softmax",
                       "mask has " + std::to_string(key_mask.size()) + " entries, want " +
                           std::to_string(batch) + "x" + std::to_string(cols) + " for input " +
                           shape_str(a.shape()));
  }
  const std::size_t rows_per_batch = rows / batch;
  std::vector<S> out(a.size(), S(0));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::uint8_t* allow = key_mask.data() + (r / rows_per_batch) * cols;
    const S* x = a.data() + r * cols;
    S* y = out.data() + r * cols;
    S mx = S(0);
    bool any = false;
    for (std::size_t j = 0; j < cols; ++j) {
      if (!allow[j]) continue;
      mx = any ? std::max(mx, x[j]) : x[j];
      any = true;
    }
    if (!any) continue;
    S sum = S(0);
    for (std::size_t j = 0; j < cols; ++j) {
      if (!allow[j]) continue;
      y[j] = std::exp(x[j] - mx);
      sum += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= sum;
  }
  Tensor<S> y = Tensor<S>::from(a.shape(), std::move(out));
  // Masked entries have p == 0, so the plain softmax backward formula already
  // sends them zero gradient.
  detail::attach(y, "masked_softmax", {a}, [an = a.raw(), yn = y.raw(), rows, cols] {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const S* p = yn->value.data() + r * cols;
      const S* dy = yn->grad.data() + r * cols;
      S dot = S(0);
      for (std::size_t j = 0; j < cols; ++j) dot += p[j] * dy[j];
      S* dx = an->grad.data() + r * cols;
      for (std::size_t j = 0; j < cols; ++j) dx[j] += p[j] * (dy[j] - dot);
    }
  });
  return y;
}

// Per-row normalization over the last axis followed by elementwise affine.
// gain/bias have shape [cols].
template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias, S eps) {
  const std::size_t cols = x.shape().back();
  if (gain.shape() != Shape{cols} || bias.shape() != Shape{cols}) {
    detail::shape_fail("layer_norm", "gain " + shape_str(gain.shape()) + " / bias " +
                                         shape_str(bias.shape()) + " must be [" +
                                         std::to_string(cols) + "] for input " +
                                         shape_str(x.shape()));
  }
  const std::size_t rows = detail::row_count(x.shape());
  std::vector<S> out(x.size());
  std::vector<S> inv_std(rows), mean(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const S* px = x.data() + r * cols;
    S mu = S(0);
    for (std::size_t j = 0; j < cols; ++j) mu += px[j];
    mu /= S(cols);
    S var = S(0);
    for (std::size_t j = 0; j < cols; ++j) {
      const S c = px[j] - mu;
      var += c * c;
    }
    var /= S(cols);
    const S inv = S(1) / std::sqrt(var + eps);
    mean[r] = mu;
    inv_std[r] = inv;
    S* py = out.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      py[j] = (px[j] - mu) * inv * gain.data()[j] + bias.data()[j];
    }
  }
  Tensor<S> y = Tensor<S>::from(x.shape(), std::move(out));
  detail::attach(y, "layer_norm", {x, gain, bias},
                 [xn = x.raw(), gn = gain.raw(), bn = bias.raw(), yn = y.raw(), rows, cols,
                  mean = std::move(mean), inv_std = std::move(inv_std)] {
                   for (std::size_t r = 0; r < rows; ++r) {
                     const S* px = xn->value.data() + r * cols;
                     const S* dy = yn->grad.data() + r * cols;
                     const S mu = mean[r];
                     const S inv = inv_std[r];
                     if (gn->requires_grad) {
                       gn->ensure_grad();
                       for (std::size_t j = 0; j < cols; ++j) {
                         gn->grad[j] += dy[j] * (px[j] - mu) * inv;
                       }
                     }
                     if (bn->requires_grad) {
                       bn->ensure_grad();
                       for (std::size_t j = 0; j < cols; ++j) bn->grad[j] += dy[j];
                     }
                     if (xn->requires_grad) {
                       xn->ensure_grad();
                       S sum_dxhat = S(0), sum_dxhat_xc = S(0);
                       for (std::size_t j = 0; j < cols; ++j) {
                         const S dxhat = dy[j] * gn->value[j];
                         sum_dxhat += dxhat;
                         sum_dxhat_xc += dxhat * (px[j] - mu);
                       }
                       S* dx = xn->grad.data() + r * cols;
                       const S invn = S(1) / S(cols);
                       for (std::size_t j = 0; j < cols; ++j) {
                         const S xc = px[j] - mu;
                         const S dxhat = dy[j] * gn->value[j];
                         dx[j] += inv * (dxhat - invn * sum_dxhat -
                                         xc * inv * inv * invn * sum_dxhat_xc);
                       }
                     }
                   }
                 });
  return y;
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> reshape(const Tensor<S>& a, Shape shape) {
  if (numel(shape) != a.size()) {
    detail::shape_fail("reshape", "cannot view " + shape_str(a.shape()) + " as " +
                                      shape_str(shape));
  }
  Tensor<S> y = Tensor<S>::from(std::move(shape), a.values());
  detail::attach(y, "reshape", {a}, [an = a.raw(), yn = y.raw()] {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += yn->grad[i];
  });
  return y;
}

namespace detail {

inline std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> st(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) st[i - 1] = st[i] * shape[i];
  return st;
}

}  // namespace detail

// Swap two axes (copying).
template <class S>
Tensor<S> transpose(const Tensor<S>& a, std::size_t d0, std::size_t d1) {
  if (d0 >= a.rank() || d1 >= a.rank()) {
    detail::shape_fail("transpose", "axes (" + std::to_string(d0) + ", " + std::to_string(d1) +
                                        ") out of range for " + shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  std::swap(out_shape[d0], out_shape[d1]);
  const auto in_strides = detail::strides_of(a.shape());
  const auto out_strides = detail::strides_of(out_shape);
  auto in_index_strides = in_strides;
  std::swap(in_index_strides[d0], in_index_strides[d1]);  // per out-axis step in input
  const std::size_t n = a.size();
  const std::size_t rank = a.rank();
  std::vector<S> out(n);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t o = 0; o < n; ++o) {
    std::size_t in_off = 0;
    std::size_t rem = o;
    for (std::size_t d = 0; d < rank; ++d) {
      const std::size_t c = rem / out_strides[d];
      rem -= c * out_strides[d];
      in_off += c * in_index_strides[d];
    }
    out[o] = a.data()[in_off];
  }
  Tensor<S> y = Tensor<S>::from(out_shape, std::move(out));
  detail::attach(y, "transpose", {a},
                 [an = a.raw(), yn = y.raw(), out_strides, in_index_strides, n, rank] {
                   if (!an->requires_grad) return;
                   an->ensure_grad();
                   for (std::size_t o = 0; o < n; ++o) {
                     std::size_t in_off = 0;
                     std::size_t rem = o;
                     for (std::size_t d = 0; d < rank; ++d) {
                       const std::size_t c = rem / out_strides[d];
                       rem -= c * out_strides[d];
                       in_off += c * in_index_strides[d];
                     }
                     an->grad[in_off] += yn->grad[o];
                   }
                 });
  return y;
}

// Matrix transpose of a rank-2 tensor.
template <class S>
Tensor<S> transpose(const Tensor<S>& a) {
  if (a.rank() != 2) detail::shape_fail("transpose", "default form wants rank 2");
  return transpose(a, 0, 1);
}

template <class S>
Tensor<S> slice(const Tensor<S>& a, std::size_t axis, std::size_t start, std::size_t len) {
  if (axis >= a.rank() || start + len > a.dim(axis) || len == 0) {
    detail::shape_fail("slice", "range [" + std::to_string(start) + ", " +
                                    std::to_string(start + len) + ") on axis " +
                                    std::to_string(axis) + " invalid for " +
                                    shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = len;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= a.dim(d);
  for (std::size_t d = axis + 1; d < a.rank(); ++d) inner *= a.dim(d);
  const std::size_t in_axis = a.dim(axis);
  std::vector<S> out(outer * len * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    const S* src = a.data() + (o * in_axis + start) * inner;
    S* dst = out.data() + o * len * inner;
    std::copy(src, src + len * inner, dst);
  }
  Tensor<S> y = Tensor<S>::from(std::move(out_shape), std::move(out));
  detail::attach(y, "slice", {a},
                 [an = a.raw(), yn = y.raw(), outer, inner, len, in_axis, start] {
                   if (!an->requires_grad) return;
                   an->ensure_grad();
                   for (std::size_t o = 0; o < outer; ++o) {
                     S* dst = an->grad.data() + (o * in_axis + start) * inner;
                     const S* src = yn->grad.data() + o * len * inner;
                     for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                   }
                 });
  return y;
}

template <class S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, std::size_t axis) {
  if (parts.empty()) detail::shape_fail("concat", "no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) detail::shape_fail("concat", "axis out of range");
  std::size_t axis_total = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) {
      detail::shape_fail("concat", "rank mismatch: " + shape_str(first) + " vs " +
                                       shape_str(p.shape()));
    }
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.dim(d) != first[d]) {
        detail::shape_fail("concat", "shapes differ off-axis: " + shape_str(first) + " vs " +
                                         shape_str(p.shape()));
      }
    }
    axis_total += p.dim(axis);
  }
  Shape out_shape = first;
  out_shape[axis] = axis_total;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  std::vector<S> out(numel(out_shape));
  std::size_t axis_off = 0;
  for (const auto& p : parts) {
    const std::size_t alen = p.dim(axis);
    for (std::size_t o = 0; o < outer; ++o) {
      const S* src = p.data() + o * alen * inner;
      S* dst = out.data() + (o * axis_total + axis_off) * inner;
      std::copy(src, src + alen * inner, dst);
    }
    axis_off += alen;
  }
  Tensor<S> y = Tensor<S>::from(std::move(out_shape), std::move(out));
  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  if (needs) {
    TensorNode<S>* yn = y.raw();
    yn->op = "concat";
    yn->requires_grad = true;
    std::vector<TensorNode<S>*> raws;
    for (const auto& p : parts) {
      yn->parents.push_back(p.node());
      raws.push_back(p.raw());
    }
    yn->backprop = [yn, raws, outer, inner, axis_total] {
      std::size_t axis_off = 0;
      for (TensorNode<S>* pn : raws) {
        const std::size_t palen = pn->value.size() / (outer * inner);
        if (pn->requires_grad) {
          pn->ensure_grad();
          for (std::size_t o = 0; o < outer; ++o) {
            const S* src = yn->grad.data() + (o * axis_total + axis_off) * inner;
            S* dst = pn->grad.data() + o * palen * inner;
            for (std::size_t i = 0; i < palen * inner; ++i) dst[i] += src[i];
          }
        }
        axis_off += palen;
      }
    };
  }
  return y;
}

template <class S>
Tensor<S> concat(std::initializer_list<Tensor<S>> parts, std::size_t axis) {
  return concat(std::vector<Tensor<S>>(parts), axis);
}

// ---------------------------------------------------------------------------
// gather / reductions
// ---------------------------------------------------------------------------

// Rows of a [N, D] matrix selected by index; grad scatter-adds back.
template <class S>
Tensor<S> gather_rows(const Tensor<S>& a, const std::vector<std::int32_t>& rows) {
  if (a.rank() != 2) detail::shape_fail("gather_rows", "input must be rank 2");
  const std::size_t n = a.dim(0), d = a.dim(1);
  for (std::int32_t r : rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= n) {
      detail::shape_fail("gather_rows", "row index " + std::to_string(r) +
                                            " out of range for " + shape_str(a.shape()));
    }
  }
  std::vector<S> out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const S* src = a.data() + static_cast<std::size_t>(rows[i]) * d;
    std::copy(src, src + d, out.data() + i * d);
  }
  Tensor<S> y = Tensor<S>::from({rows.size(), d}, std::move(out));
  detail::attach(y, "gather_rows", {a}, [an = a.raw(), yn = y.raw(), rows, d] {
    if (!an->requires_grad) return;
    an->ensure_grad();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      S* dst = an->grad.data() + static_cast<std::size_t>(rows[i]) * d;
      const S* src = yn->grad.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
  return y;
}

// Embedding lookup is a row gather on the table.
template <class S>
Tensor<S> embedding_lookup(const Tensor<S>& table, const std::vector<std::int32_t>& ids) {
  return gather_rows(table, ids);
}

template <class S>
Tensor<S> reduce_sum(const Tensor<S>& a) {
  S total = S(0);
  for (std::size_t i = 0; i < a.size(); ++i) total += a.data()[i];
  Tensor<S> y = Tensor<S>::scalar(total);
  detail::attach(y, "reduce_sum", {a}, [an = a.raw(), yn = y.raw()] {
    if (!an->requires_grad) return;
    an->ensure_grad();
    const S g = yn->grad[0];
    for (auto& v : an->grad) v += g;
  });
  return y;
}

template <class S>
Tensor<S> reduce_mean(const Tensor<S>& a) {
  if (a.size() == 0) detail::shape_fail("reduce_mean", "empty input");
  S total = S(0);
  for (std::size_t i = 0; i < a.size(); ++i) total += a.data()[i];
  const S inv = S(1) / S(a.size());
  Tensor<S> y = Tensor<S>::scalar(total * inv);
  detail::attach(y, "reduce_mean", {a}, [an = a.raw(), yn = y.raw(), inv] {
    if (!an->requires_grad) return;
    an->ensure_grad();
    const S g = yn->grad[0] * inv;
    for (auto& v : an->grad) v += g;
  });
  return y;
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

// Mean negative log-likelihood over rows whose target is not ignore_index.
// logits: [N, C]; targets: N class ids.
template <class S>
Tensor<S> cross_entropy(const Tensor<S>& logits, const std::vector<std::int32_t>& targets,
                        std::int32_t ignore_index = -1) {
  if (logits.rank() != 2) detail::shape_fail("cross_entropy", "logits must be [N, C]");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (targets.size() != n) {
    detail::shape_fail("cross_entropy", "got " + std::to_string(targets.size()) +
                                            " targets for " + std::to_string(n) + " rows");
  }
  std::vector<S> probs(n * c);
  std::size_t contributing = 0;
  S loss = S(0);
  for (std::size_t r = 0; r < n; ++r) {
    const S* x = logits.data() + r * c;
    S* p = probs.data() + r * c;
    S mx = x[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    S sum = S(0);
    for (std::size_t j = 0; j < c; ++j) {
      p[j] = std::exp(x[j] - mx);
      sum += p[j];
    }
    for (std::size_t j = 0; j < c; ++j) p[j] /= sum;
    const std::int32_t t = targets[r];
    if (t == ignore_index) continue;
    if (t < 0 || static_cast<std::size_t>(t) >= c) {
      detail::shape_fail("cross_entropy", "target " + std::to_string(t) +
                                              " out of range for C=" + std::to_string(c));
    }
    loss += (mx + std::log(sum)) - x[static_cast<std::size_t>(t)];
    ++contributing;
  }
  if (contributing == 0) {
    throw std::invalid_argument("cross_entropy: no contributing rows (all targets ignored)");
  }
  Tensor<S> y = Tensor<S>::scalar(loss / S(contributing));
  detail::attach(y, "cross_entropy", {logits},
                 [ln = logits.raw(), yn = y.raw(), probs = std::move(probs), targets, n, c,
                  contributing, ignore_index] {
                   if (!ln->requires_grad) return;
                   ln->ensure_grad();
                   const S g = yn->grad[0] / S(contributing);
                   for (std::size_t r = 0; r < n; ++r) {
                     const std::int32_t t = targets[r];
                     if (t == ignore_index) continue;
                     const S* p = probs.data() + r * c;
                     S* dx = ln->grad.data() + r * c;
                     for (std::size_t j = 0; j < c; ++j) {
                       const S onehot = (static_cast<std::size_t>(t) == j) ? S(1) : S(0);
                       dx[j] += g * (p[j] - onehot);
                     }
                   }
                 });
  return y;
}

// Elementwise stable BCE on logits: max(x, 0) - x z + log(1 + exp(-|x|)).
template <class S>
Tensor<S> binary_cross_entropy_with_logits(const Tensor<S>& logits, const Tensor<S>& labels) {
  if (logits.shape() != labels.shape()) {
    detail::shape_fail("binary_cross_entropy_with_logits",
                       "shapes differ: " + shape_str(logits.shape()) + " vs " +
                           shape_str(labels.shape()));
  }
  const std::size_t n = logits.size();
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const S x = logits.data()[i];
    const S z = labels.data()[i];
    out[i] = std::max(x, S(0)) - x * z + std::log1p(std::exp(-std::fabs(x)));
  }
  Tensor<S> y = Tensor<S>::from(logits.shape(), std::move(out));
  detail::attach(y, "binary_cross_entropy_with_logits", {logits, labels},
                 [xn = logits.raw(), zn = labels.raw(), yn = y.raw(), n] {
                   if (xn->requires_grad) {
                     xn->ensure_grad();
                     for (std::size_t i = 0; i < n; ++i) {
                       const S s = sigmoid_scalar(xn->value[i]);
                       xn->grad[i] += yn->grad[i] * (s - zn->value[i]);
                     }
                   }
                   if (zn->requires_grad) {
                     zn->ensure_grad();
                     for (std::size_t i = 0; i < n; ++i) {
                       zn->grad[i] += yn->grad[i] * (-xn->value[i]);
                     }
                   }
                 });
  return y;
}

// ---------------------------------------------------------------------------
// composites
// ---------------------------------------------------------------------------

template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias) {
  return add(matmul(x, weight), bias);
}

// Inverted dropout built from mul with a Bernoulli mask; identity when p == 0
// or rng is null.
template <class S>
Tensor<S> dropout(const Tensor<S>& x, double p, Rng* rng) {
  if (p <= 0.0 || rng == nullptr) return x;
  if (p >= 1.0) detail::shape_fail("dropout", "p must be < 1");
  std::vector<S> mask(x.size());
  const S keep = S(1.0 / (1.0 - p));
  for (auto& m : mask) m = (rng->uniform() < p) ? S(0) : keep;
  return mul(x, Tensor<S>::from(x.shape(), std::move(mask)));
}

}  // namespace rtdlab
