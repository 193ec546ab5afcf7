// Copyright 2026 The sketchscene Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Differentiable primitives. Tensors are row-major; "rows" is the product of
// all leading dimensions and "cols" the last dimension.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>
#include <vector>

#include "sketchscene/diff/tape.hpp"

namespace sks::diff {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <class T>
MatMap<T> mat(std::vector<T>& v, int rows, int cols) {
  return MatMap<T>(v.data(), rows, cols);
}
template <class T>
ConstMatMap<T> cmat(const std::vector<T>& v, int rows, int cols) {
  return ConstMatMap<T>(v.data(), rows, cols);
}

template <class T>
Tape<T>& same_tape(std::string_view op, std::initializer_list<Var<T>> vars) {
  Tape<T>* tape = nullptr;
  for (const auto& v : vars) {
    if (!v.valid()) throw Error("op '" + std::string(op) + "': invalid variable");
    if (tape && v.tape() != tape) throw Error("op '" + std::string(op) + "': variables on different tapes");
    tape = v.tape();
  }
  return *tape;
}

template <class T>
bool any_grad(std::initializer_list<Var<T>> vars) {
  for (const auto& v : vars)
    if (v.requires_grad()) return true;
  return false;
}

template <class T>
int rows_of(const Shape& s) {
  if (s.empty()) return 1;
  const int c = s.back();
  return c == 0 ? 0 : static_cast<int>(numel(s) / static_cast<std::size_t>(c));
}

inline int cols_of(const Shape& s) { return s.empty() ? 1 : s.back(); }

template <class T, class Fwd, class Bwd>
Var<T> unary_elementwise(std::string_view, Var<T> a, Fwd fwd, Bwd dfdx) {
  Tape<T>& tape = *a.tape();
  const auto& av = tape.node(a.id()).value;
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  const bool rg = a.requires_grad();
  const int ia = a.id();
  int id = tape.push(a.shape(), std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, id, dfdx] {
      auto& o = tape.node(id);
      auto& in = tape.node(ia);
      for (std::size_t i = 0; i < o.grad.size(); ++i) in.grad[i] += o.grad[i] * dfdx(in.value[i], o.value[i]);
    };
  }
  return Var<T>(&tape, id);
}

}  // namespace detail

// ---------------------------------------------------------------- linear algebra

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::same_tape("matmul", {a, b});
  if (b.shape().size() != 2 || a.cols() != b.shape()[0]) throw ShapeError("matmul", a.shape(), b.shape());
  const int m = a.rows(), k = a.cols(), n = b.shape()[1];
  std::vector<T> out(static_cast<std::size_t>(m) * n);
  detail::mat(out, m, n).noalias() =
      detail::cmat(tape.node(a.id()).value, m, k) * detail::cmat(tape.node(b.id()).value, k, n);
  const bool rg = detail::any_grad({a, b});
  const int ia = a.id(), ib = b.id();
  int id = tape.push({m, n}, std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, ib, id, m, k, n] {
      auto& o = tape.node(id);
      auto& na = tape.node(ia);
      auto& nb = tape.node(ib);
      auto g = detail::cmat(o.grad, m, n);
      if (na.requires_grad) detail::mat(na.grad, m, k).noalias() += g * detail::cmat(nb.value, k, n).transpose();
      if (nb.requires_grad) detail::mat(nb.grad, k, n).noalias() += detail::cmat(na.value, m, k).transpose() * g;
    };
  }
  return Var<T>(&tape, id);
}

// x [m, in] * w [in, out] + b [out]; the affine map every layer uses.
template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  Tape<T>& tape = detail::same_tape("linear", {x, w, b});
  if (w.shape().size() != 2 || x.cols() != w.shape()[0]) throw ShapeError("linear", x.shape(), w.shape());
  const int m = x.rows(), k = x.cols(), n = w.shape()[1];
  if (static_cast<int>(b.numel()) != n) throw ShapeError("linear(bias)", w.shape(), b.shape());
  std::vector<T> out(static_cast<std::size_t>(m) * n);
  auto om = detail::mat(out, m, n);
  om.noalias() = detail::cmat(tape.node(x.id()).value, m, k) * detail::cmat(tape.node(w.id()).value, k, n);
  om.rowwise() += detail::cmat(tape.node(b.id()).value, 1, n).row(0);
  Shape shape = x.shape();
  shape.back() = n;
  const bool rg = detail::any_grad({x, w, b});
  const int ix = x.id(), iw = w.id(), ibias = b.id();
  int id = tape.push(std::move(shape), std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ix, iw, ibias, id, m, k, n] {
      auto& o = tape.node(id);
      auto& nx = tape.node(ix);
      auto& nw = tape.node(iw);
      auto& nb = tape.node(ibias);
      auto g = detail::cmat(o.grad, m, n);
      if (nx.requires_grad) detail::mat(nx.grad, m, k).noalias() += g * detail::cmat(nw.value, k, n).transpose();
      if (nw.requires_grad) detail::mat(nw.grad, k, n).noalias() += detail::cmat(nx.value, m, k).transpose() * g;
      // Plain row loop: Eigen's colwise redux peels by address, which made
      // the summation order depend on where the gradient buffer landed.
      if (nb.requires_grad)
        for (int r = 0; r < m; ++r) {
          const T* gr = o.grad.data() + static_cast<std::size_t>(r) * n;
          for (int c = 0; c < n; ++c) nb.grad[static_cast<std::size_t>(c)] += gr[c];
        }
    };
  }
  return Var<T>(&tape, id);
}

template <class T>
Var<T> transpose(Var<T> a) {
  Tape<T>& tape = *a.tape();
  if (a.shape().size() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(a.shape()));
  const int m = a.rows(), n = a.cols();
  std::vector<T> out(a.numel());
  detail::mat(out, n, m) = detail::cmat(tape.node(a.id()).value, m, n).transpose();
  const bool rg = a.requires_grad();
  const int ia = a.id();
  int id = tape.push({n, m}, std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, id, m, n] {
      detail::mat(tape.node(ia).grad, m, n) += detail::cmat(tape.node(id).grad, n, m).transpose();
    };
  }
  return Var<T>(&tape, id);
}

// ---------------------------------------------------------------- elementwise

// a + b with identical shapes, or b broadcast over rows when b has cols(a)
// elements.
template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::same_tape("add", {a, b});
  const bool same = a.shape() == b.shape();
  const bool bcast = !same && static_cast<int>(b.numel()) == a.cols() && b.rows() == 1;
  if (!same && !bcast) throw ShapeError("add", a.shape(), b.shape());
  const auto& av = tape.node(a.id()).value;
  const auto& bv = tape.node(b.id()).value;
  const std::size_t c = static_cast<std::size_t>(a.cols());
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + (same ? bv[i] : bv[i % c]);
  const bool rg = detail::any_grad({a, b});
  const int ia = a.id(), ib = b.id();
  int id = tape.push(a.shape(), std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, ib, id, same, c] {
      auto& o = tape.node(id);
      auto& na = tape.node(ia);
      auto& nb = tape.node(ib);
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        if (na.requires_grad) na.grad[i] += o.grad[i];
        if (nb.requires_grad) nb.grad[same ? i : i % c] += o.grad[i];
      }
    };
  }
  return Var<T>(&tape, id);
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::same_tape("sub", {a, b});
  if (a.shape() != b.shape()) throw ShapeError("sub", a.shape(), b.shape());
  const auto& av = tape.node(a.id()).value;
  const auto& bv = tape.node(b.id()).value;
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  const bool rg = detail::any_grad({a, b});
  const int ia = a.id(), ib = b.id();
  int id = tape.push(a.shape(), std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, ib, id] {
      auto& o = tape.node(id);
      auto& na = tape.node(ia);
      auto& nb = tape.node(ib);
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        if (na.requires_grad) na.grad[i] += o.grad[i];
        if (nb.requires_grad) nb.grad[i] -= o.grad[i];
      }
    };
  }
  return Var<T>(&tape, id);
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::same_tape("mul", {a, b});
  if (a.shape() != b.shape()) throw ShapeError("mul", a.shape(), b.shape());
  const auto& av = tape.node(a.id()).value;
  const auto& bv = tape.node(b.id()).value;
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const bool rg = detail::any_grad({a, b});
  const int ia = a.id(), ib = b.id();
  int id = tape.push(a.shape(), std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, ib, id] {
      auto& o = tape.node(id);
      auto& na = tape.node(ia);
      auto& nb = tape.node(ib);
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        if (na.requires_grad) na.grad[i] += o.grad[i] * nb.value[i];
        if (nb.requires_grad) nb.grad[i] += o.grad[i] * na.value[i];
      }
    };
  }
  return Var<T>(&tape, id);
}

template <class T>
Var<T> scale(Var<T> a, T s) {
  return detail::unary_elementwise<T>("scale", a, [s](T x) { return x * s; }, [s](T, T) { return s; });
}

template <class T>
Var<T> add_scalar(Var<T> a, T s) {
  return detail::unary_elementwise<T>("add_scalar", a, [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <class T>
Var<T> relu(Var<T> a) {
  return detail::unary_elementwise<T>(
      "relu", a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Var<T> leaky_relu(Var<T> a, T slope = T(0.2)) {
  return detail::unary_elementwise<T>(
      "leaky_relu", a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  return detail::unary_elementwise<T>(
      "sigmoid", a,
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> tanh(Var<T> a) {
  return detail::unary_elementwise<T>(
      "tanh", a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

// Softmax over the last axis.
template <class T>
Var<T> softmax(Var<T> a) {
  Tape<T>& tape = *a.tape();
  const int m = a.rows(), n = a.cols();
  const auto& av = tape.node(a.id()).value;
  std::vector<T> out(av.size());
  for (int r = 0; r < m; ++r) {
    const T* x = av.data() + static_cast<std::size_t>(r) * n;
    T* y = out.data() + static_cast<std::size_t>(r) * n;
    const T mx = *std::max_element(x, x + n);
    T total = 0;
    for (int j = 0; j < n; ++j) total += (y[j] = std::exp(x[j] - mx));
    for (int j = 0; j < n; ++j) y[j] /= total;
  }
  const bool rg = a.requires_grad();
  const int ia = a.id();
  int id = tape.push(a.shape(), std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, id, m, n] {
      auto& o = tape.node(id);
      auto& in = tape.node(ia);
      for (int r = 0; r < m; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * n;
        T dot = 0;
        for (int j = 0; j < n; ++j) dot += o.grad[base + j] * o.value[base + j];
        for (int j = 0; j < n; ++j) in.grad[base + j] += o.value[base + j] * (o.grad[base + j] - dot);
      }
    };
  }
  return Var<T>(&tape, id);
}

// ---------------------------------------------------------------- reductions

template <class T>
Var<T> sum(Var<T> a) {
  Tape<T>& tape = *a.tape();
  const auto& av = tape.node(a.id()).value;
  T total = 0;
  for (T x : av) total += x;
  const bool rg = a.requires_grad();
  const int ia = a.id();
  int id = tape.push({1}, {total}, rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, id] {
      const T g = tape.node(id).grad[0];
      for (auto& x : tape.node(ia).grad) x += g;
    };
  }
  return Var<T>(&tape, id);
}

template <class T>
Var<T> mean(Var<T> a) {
  if (a.numel() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

// Sum of a list of scalars (or same-shape tensors).
template <class T>
Var<T> add_all(const std::vector<Var<T>>& terms) {
  if (terms.empty()) throw Error("add_all: no terms");
  Var<T> acc = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

// ---------------------------------------------------------------- distances and losses

// Row-wise Euclidean distance; result has one element per row.
template <class T>
Var<T> l2_distance(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::same_tape("l2_distance", {a, b});
  if (a.shape() != b.shape()) throw ShapeError("l2_distance", a.shape(), b.shape());
  const int m = a.rows(), n = a.cols();
  const auto& av = tape.node(a.id()).value;
  const auto& bv = tape.node(b.id()).value;
  std::vector<T> out(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    T s = 0;
    for (int j = 0; j < n; ++j) {
      const T d = av[static_cast<std::size_t>(r) * n + j] - bv[static_cast<std::size_t>(r) * n + j];
      s += d * d;
    }
    out[static_cast<std::size_t>(r)] = std::sqrt(s);
  }
  const bool rg = detail::any_grad({a, b});
  const int ia = a.id(), ib = b.id();
  int id = tape.push({m}, std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, ib, id, m, n] {
      auto& o = tape.node(id);
      auto& na = tape.node(ia);
      auto& nb = tape.node(ib);
      for (int r = 0; r < m; ++r) {
        const T dist = o.value[static_cast<std::size_t>(r)];
        if (dist <= T(0)) continue;  // subgradient 0 at coincidence
        const T g = o.grad[static_cast<std::size_t>(r)] / dist;
        for (int j = 0; j < n; ++j) {
          const std::size_t k = static_cast<std::size_t>(r) * n + j;
          const T d = na.value[k] - nb.value[k];
          if (na.requires_grad) na.grad[k] += g * d;
          if (nb.requires_grad) nb.grad[k] -= g * d;
        }
      }
    };
  }
  return Var<T>(&tape, id);
}

// All-pairs Euclidean distances between rows of a [m, d] and b [n, d].
template <class T>
Var<T> pairwise_l2(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::same_tape("pairwise_l2", {a, b});
  if (a.cols() != b.cols()) throw ShapeError("pairwise_l2", a.shape(), b.shape());
  const int m = a.rows(), n = b.rows(), d = a.cols();
  const auto& av = tape.node(a.id()).value;
  const auto& bv = tape.node(b.id()).value;
  std::vector<T> out(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      T s = 0;
      for (int c = 0; c < d; ++c) {
        const T diff = av[static_cast<std::size_t>(i) * d + c] - bv[static_cast<std::size_t>(j) * d + c];
        s += diff * diff;
      }
      out[static_cast<std::size_t>(i) * n + j] = std::sqrt(s);
    }
  const bool rg = detail::any_grad({a, b});
  const int ia = a.id(), ib = b.id();
  int id = tape.push({m, n}, std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, ib, id, m, n, d] {
      auto& o = tape.node(id);
      auto& na = tape.node(ia);
      auto& nb = tape.node(ib);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          const std::size_t k = static_cast<std::size_t>(i) * n + j;
          const T dist = o.value[k];
          if (dist <= T(0) || o.grad[k] == T(0)) continue;
          const T g = o.grad[k] / dist;
          for (int c = 0; c < d; ++c) {
            const T diff = na.value[static_cast<std::size_t>(i) * d + c] - nb.value[static_cast<std::size_t>(j) * d + c];
            if (na.requires_grad) na.grad[static_cast<std::size_t>(i) * d + c] += g * diff;
            if (nb.requires_grad) nb.grad[static_cast<std::size_t>(j) * d + c] -= g * diff;
          }
        }
    };
  }
  return Var<T>(&tape, id);
}

// Row-wise sum of absolute differences.
template <class T>
Var<T> l1_distance(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::same_tape("l1_distance", {a, b});
  if (a.shape() != b.shape()) throw ShapeError("l1_distance", a.shape(), b.shape());
  const int m = a.rows(), n = a.cols();
  const auto& av = tape.node(a.id()).value;
  const auto& bv = tape.node(b.id()).value;
  std::vector<T> out(static_cast<std::size_t>(m), T(0));
  for (int r = 0; r < m; ++r)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(r)] +=
          std::abs(av[static_cast<std::size_t>(r) * n + j] - bv[static_cast<std::size_t>(r) * n + j]);
  const bool rg = detail::any_grad({a, b});
  const int ia = a.id(), ib = b.id();
  int id = tape.push({m}, std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, ib, id, m, n] {
      auto& o = tape.node(id);
      auto& na = tape.node(ia);
      auto& nb = tape.node(ib);
      for (int r = 0; r < m; ++r) {
        const T g = o.grad[static_cast<std::size_t>(r)];
        for (int j = 0; j < n; ++j) {
          const std::size_t k = static_cast<std::size_t>(r) * n + j;
          const T d = na.value[k] - nb.value[k];
          const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
          if (na.requires_grad) na.grad[k] += g * s;
          if (nb.requires_grad) nb.grad[k] -= g * s;
        }
      }
    };
  }
  return Var<T>(&tape, id);
}

// Mean of squared differences over all elements.
template <class T>
Var<T> squared_error(Var<T> a, Var<T> b) {
  Tape<T>& tape = detail::same_tape("squared_error", {a, b});
  if (a.shape() != b.shape()) throw ShapeError("squared_error", a.shape(), b.shape());
  if (a.numel() == 0) throw ShapeError("squared_error: empty tensor");
  const auto& av = tape.node(a.id()).value;
  const auto& bv = tape.node(b.id()).value;
  T s = 0;
  for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
  const T inv = T(1) / static_cast<T>(av.size());
  const bool rg = detail::any_grad({a, b});
  const int ia = a.id(), ib = b.id();
  int id = tape.push({1}, {s * inv}, rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, ib, id, inv] {
      const T g = tape.node(id).grad[0] * T(2) * inv;
      auto& na = tape.node(ia);
      auto& nb = tape.node(ib);
      for (std::size_t i = 0; i < na.value.size(); ++i) {
        const T d = na.value[i] - nb.value[i];
        if (na.requires_grad) na.grad[i] += g * d;
        if (nb.requires_grad) nb.grad[i] -= g * d;
      }
    };
  }
  return Var<T>(&tape, id);
}

// Per-row categorical cross-entropy of logits [m, C] against class ids.
template <class T>
Var<T> cross_entropy_logits(Var<T> logits, const std::vector<int>& labels) {
  Tape<T>& tape = *logits.tape();
  const int m = logits.rows(), c = logits.cols();
  if (static_cast<int>(labels.size()) != m)
    throw ShapeError("op 'cross_entropy_logits': " + std::to_string(labels.size()) + " labels for logits " +
                     shape_str(logits.shape()));
  for (int y : labels)
    if (y < 0 || y >= c)
      throw Error("cross_entropy_logits: label " + std::to_string(y) + " outside [0, " + std::to_string(c) + ")");
  const auto& lv = tape.node(logits.id()).value;
  std::vector<T> probs(lv.size());
  std::vector<T> out(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    const T* x = lv.data() + static_cast<std::size_t>(r) * c;
    T* p = probs.data() + static_cast<std::size_t>(r) * c;
    const T mx = *std::max_element(x, x + c);
    T total = 0;
    for (int j = 0; j < c; ++j) total += (p[j] = std::exp(x[j] - mx));
    for (int j = 0; j < c; ++j) p[j] /= total;
    out[static_cast<std::size_t>(r)] = std::log(total) + mx - x[labels[static_cast<std::size_t>(r)]];
  }
  const bool rg = logits.requires_grad();
  const int il = logits.id();
  int id = tape.push({m}, std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, il, id, m, c, labels, probs = std::move(probs)] {
      auto& o = tape.node(id);
      auto& in = tape.node(il);
      for (int r = 0; r < m; ++r) {
        const T g = o.grad[static_cast<std::size_t>(r)];
        for (int j = 0; j < c; ++j) {
          const std::size_t k = static_cast<std::size_t>(r) * c + j;
          in.grad[k] += g * (probs[k] - (j == labels[static_cast<std::size_t>(r)] ? T(1) : T(0)));
        }
      }
    };
  }
  return Var<T>(&tape, id);
}

// ---------------------------------------------------------------- structural

// Concatenation of rank-2 tensors along rows (axis 0) or columns (axis 1).
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
  if (parts.empty()) throw Error("concat: no inputs");
  if (axis != 0 && axis != 1) throw Error("concat: axis must be 0 or 1");
  Tape<T>& tape = *parts[0].tape();
  int rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (p.tape() != &tape) throw Error("concat: variables on different tapes");
    if (axis == 0) {
      if (cols && p.cols() != cols) throw ShapeError("concat", parts[0].shape(), p.shape());
      cols = p.cols();
      rows += p.rows();
    } else {
      if (rows && p.rows() != rows) throw ShapeError("concat", parts[0].shape(), p.shape());
      rows = p.rows();
      cols += p.cols();
    }
  }
  std::vector<T> out(static_cast<std::size_t>(rows) * cols);
  std::vector<int> ids, offsets;
  bool rg = false;
  int offset = 0;
  for (const auto& p : parts) {
    const auto& v = tape.node(p.id()).value;
    const int pr = p.rows(), pc = p.cols();
    if (axis == 0) {
      std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(offset) * cols);
      offsets.push_back(offset);
      offset += pr;
    } else {
      for (int r = 0; r < pr; ++r)
        std::copy(v.begin() + static_cast<std::ptrdiff_t>(r) * pc, v.begin() + static_cast<std::ptrdiff_t>(r + 1) * pc,
                  out.begin() + static_cast<std::ptrdiff_t>(r) * cols + offset);
      offsets.push_back(offset);
      offset += pc;
    }
    ids.push_back(p.id());
    rg = rg || p.requires_grad();
  }
  int id = tape.push({rows, cols}, std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, id, ids, offsets, axis, cols] {
      auto& o = tape.node(id);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto& in = tape.node(ids[i]);
        if (!in.requires_grad) continue;
        const int pc = detail::cols_of(in.shape);
        const int pr = pc == 0 ? 0 : static_cast<int>(in.value.size() / static_cast<std::size_t>(pc));
        for (int r = 0; r < pr; ++r)
          for (int c = 0; c < pc; ++c) {
            const std::size_t src = axis == 0 ? static_cast<std::size_t>(offsets[i] + r) * cols + c
                                              : static_cast<std::size_t>(r) * cols + offsets[i] + c;
            in.grad[static_cast<std::size_t>(r) * pc + c] += o.grad[src];
          }
      }
    };
  }
  return Var<T>(&tape, id);
}

// Contiguous slice [start, start+len) of rows (axis 0) or columns (axis 1).
template <class T>
Var<T> slice(Var<T> a, int axis, int start, int len) {
  Tape<T>& tape = *a.tape();
  const int m = a.rows(), n = a.cols();
  const int extent = axis == 0 ? m : n;
  if ((axis != 0 && axis != 1) || start < 0 || len < 0 || start + len > extent)
    throw ShapeError("op 'slice': range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") on axis " + std::to_string(axis) + " of " + shape_str(a.shape()));
  const int orows = axis == 0 ? len : m, ocols = axis == 0 ? n : len;
  const auto& av = tape.node(a.id()).value;
  std::vector<T> out(static_cast<std::size_t>(orows) * ocols);
  for (int r = 0; r < orows; ++r)
    for (int c = 0; c < ocols; ++c)
      out[static_cast<std::size_t>(r) * ocols + c] =
          axis == 0 ? av[static_cast<std::size_t>(start + r) * n + c] : av[static_cast<std::size_t>(r) * n + start + c];
  const bool rg = a.requires_grad();
  const int ia = a.id();
  int id = tape.push({orows, ocols}, std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, id, axis, start, n, orows, ocols] {
      auto& o = tape.node(id);
      auto& in = tape.node(ia);
      for (int r = 0; r < orows; ++r)
        for (int c = 0; c < ocols; ++c) {
          const std::size_t dst =
              axis == 0 ? static_cast<std::size_t>(start + r) * n + c : static_cast<std::size_t>(r) * n + start + c;
          in.grad[dst] += o.grad[static_cast<std::size_t>(r) * ocols + c];
        }
    };
  }
  return Var<T>(&tape, id);
}

template <class T>
Var<T> reshape(Var<T> a, Shape shape) {
  Tape<T>& tape = *a.tape();
  if (numel(shape) != a.numel()) throw ShapeError("reshape", a.shape(), shape);
  const bool rg = a.requires_grad();
  const int ia = a.id();
  int id = tape.push(std::move(shape), tape.node(ia).value, rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, id] {
      auto& o = tape.node(id);
      auto& in = tape.node(ia);
      for (std::size_t i = 0; i < o.grad.size(); ++i) in.grad[i] += o.grad[i];
    };
  }
  return Var<T>(&tape, id);
}

// Row gather; with a parameter table this is the embedding lookup.
template <class T>
Var<T> gather_rows(Var<T> table, const std::vector<int>& indices) {
  Tape<T>& tape = *table.tape();
  const int m = table.rows(), n = table.cols();
  for (int i : indices)
    if (i < 0 || i >= m)
      throw ShapeError("op 'gather_rows': index " + std::to_string(i) + " outside table " + shape_str(table.shape()));
  const auto& tv = tape.node(table.id()).value;
  const int k = static_cast<int>(indices.size());
  std::vector<T> out(static_cast<std::size_t>(k) * n);
  for (int r = 0; r < k; ++r)
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(indices[static_cast<std::size_t>(r)]) * n, n,
                out.begin() + static_cast<std::ptrdiff_t>(r) * n);
  const bool rg = table.requires_grad();
  const int it = table.id();
  int id = tape.push({k, n}, std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, it, id, indices, n] {
      auto& o = tape.node(id);
      auto& in = tape.node(it);
      for (std::size_t r = 0; r < indices.size(); ++r)
        for (int c = 0; c < n; ++c)
          in.grad[static_cast<std::size_t>(indices[r]) * n + c] += o.grad[r * n + c];
    };
  }
  return Var<T>(&tape, id);
}

// Output row g is the mean (or sum) of input rows groups[g], accumulated in
// the listed order.
template <class T>
Var<T> segment_reduce(Var<T> a, const std::vector<std::vector<int>>& groups, bool average) {
  Tape<T>& tape = *a.tape();
  const int m = a.rows(), n = a.cols();
  const auto& av = tape.node(a.id()).value;
  const int g = static_cast<int>(groups.size());
  std::vector<T> out(static_cast<std::size_t>(g) * n, T(0));
  for (int s = 0; s < g; ++s) {
    const auto& rows = groups[static_cast<std::size_t>(s)];
    if (rows.empty()) throw Error("segment_reduce: group " + std::to_string(s) + " is empty");
    T* dst = out.data() + static_cast<std::size_t>(s) * n;
    for (int r : rows) {
      if (r < 0 || r >= m) throw ShapeError("op 'segment_reduce': row " + std::to_string(r) + " outside " + shape_str(a.shape()));
      const T* src = av.data() + static_cast<std::size_t>(r) * n;
      for (int c = 0; c < n; ++c) dst[c] += src[c];
    }
    if (average) {
      const T inv = T(1) / static_cast<T>(rows.size());
      for (int c = 0; c < n; ++c) dst[c] *= inv;
    }
  }
  const bool rg = a.requires_grad();
  const int ia = a.id();
  int id = tape.push({g, n}, std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ia, id, groups, n, average] {
      auto& o = tape.node(id);
      auto& in = tape.node(ia);
      for (std::size_t s = 0; s < groups.size(); ++s) {
        const T w = average ? T(1) / static_cast<T>(groups[s].size()) : T(1);
        for (int r : groups[s])
          for (int c = 0; c < n; ++c) in.grad[static_cast<std::size_t>(r) * n + c] += w * o.grad[s * n + c];
      }
    };
  }
  return Var<T>(&tape, id);
}

template <class T>
Var<T> segment_mean(Var<T> a, const std::vector<std::vector<int>>& groups) {
  return segment_reduce(a, groups, true);
}

template <class T>
Var<T> segment_sum(Var<T> a, const std::vector<std::vector<int>>& groups) {
  return segment_reduce(a, groups, false);
}

// ---------------------------------------------------------------- normalization and attention

// Per-row layer normalization with learnable gain and bias of cols(x).
template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = T(1e-5)) {
  Tape<T>& tape = detail::same_tape("layer_norm", {x, gain, bias});
  const int m = x.rows(), n = x.cols();
  if (static_cast<int>(gain.numel()) != n || static_cast<int>(bias.numel()) != n)
    throw ShapeError("layer_norm", x.shape(), gain.shape());
  const auto& xv = tape.node(x.id()).value;
  const auto& gv = tape.node(gain.id()).value;
  const auto& bv = tape.node(bias.id()).value;
  std::vector<T> out(xv.size()), xhat(xv.size()), inv_std(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * n;
    T mu = 0;
    for (int c = 0; c < n; ++c) mu += xv[base + c];
    mu /= static_cast<T>(n);
    T var = 0;
    for (int c = 0; c < n; ++c) var += (xv[base + c] - mu) * (xv[base + c] - mu);
    var /= static_cast<T>(n);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(r)] = is;
    for (int c = 0; c < n; ++c) {
      xhat[base + c] = (xv[base + c] - mu) * is;
      out[base + c] = gv[static_cast<std::size_t>(c)] * xhat[base + c] + bv[static_cast<std::size_t>(c)];
    }
  }
  const bool rg = detail::any_grad({x, gain, bias});
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  int id = tape.push(x.shape(), std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, ix, ig, ib, id, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
      auto& o = tape.node(id);
      auto& nx = tape.node(ix);
      auto& ng = tape.node(ig);
      auto& nb = tape.node(ib);
      std::vector<T> dxhat(static_cast<std::size_t>(n));
      for (int r = 0; r < m; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * n;
        T sum_d = 0, sum_dx = 0;
        for (int c = 0; c < n; ++c) {
          const T dy = o.grad[base + c];
          if (ng.requires_grad) ng.grad[static_cast<std::size_t>(c)] += dy * xhat[base + c];
          if (nb.requires_grad) nb.grad[static_cast<std::size_t>(c)] += dy;
          dxhat[static_cast<std::size_t>(c)] = dy * ng.value[static_cast<std::size_t>(c)];
          sum_d += dxhat[static_cast<std::size_t>(c)];
          sum_dx += dxhat[static_cast<std::size_t>(c)] * xhat[base + c];
        }
        if (!nx.requires_grad) continue;
        const T k = inv_std[static_cast<std::size_t>(r)] / static_cast<T>(n);
        for (int c = 0; c < n; ++c)
          nx.grad[base + c] +=
              k * (static_cast<T>(n) * dxhat[static_cast<std::size_t>(c)] - sum_d - xhat[base + c] * sum_dx);
      }
    };
  }
  return Var<T>(&tape, id);
}

// A contiguous run of rows that attend only to each other.
struct Segment {
  int start = 0;
  int length = 0;
};

// Per-head attention weights, one row-major [length x length] block per
// (segment, head), in segment-major order.
template <class T>
using AttentionWeights = std::vector<std::vector<T>>;

// Multi-head scaled dot-product attention over q, k, v [R, D]. Columns are
// split into `heads` equal groups; rows attend within their segment only.
// Output row r is softmax(q_h k_h^T * scale) v_h for every head h, heads
// concatenated along columns.
template <class T>
Var<T> multi_head_attention(Var<T> q, Var<T> k, Var<T> v, int heads, const std::vector<Segment>& segments, T scale,
                            AttentionWeights<T>* weights_out = nullptr) {
  Tape<T>& tape = detail::same_tape("multi_head_attention", {q, k, v});
  if (q.shape() != k.shape() || q.shape() != v.shape()) throw ShapeError("multi_head_attention", q.shape(), k.shape());
  const int rows = q.rows(), dim = q.cols();
  if (heads <= 0 || dim % heads != 0)
    throw ShapeError("op 'multi_head_attention': " + std::to_string(heads) + " heads do not divide width " +
                     std::to_string(dim));
  int covered = 0;
  for (const auto& s : segments) {
    if (s.start != covered || s.length <= 0) throw Error("multi_head_attention: segments must tile the rows in order");
    covered += s.length;
  }
  if (covered != rows) throw Error("multi_head_attention: segments cover " + std::to_string(covered) + " of " +
                                   std::to_string(rows) + " rows");
  const int hd = dim / heads;
  const auto& qv = tape.node(q.id()).value;
  const auto& kv = tape.node(k.id()).value;
  const auto& vv = tape.node(v.id()).value;
  std::vector<T> out(qv.size(), T(0));
  AttentionWeights<T> weights;
  weights.reserve(segments.size() * static_cast<std::size_t>(heads));
  for (const auto& s : segments) {
    for (int h = 0; h < heads; ++h) {
      const int off = h * hd;
      std::vector<T> a(static_cast<std::size_t>(s.length) * s.length);
      for (int i = 0; i < s.length; ++i) {
        const T* qi = qv.data() + static_cast<std::size_t>(s.start + i) * dim + off;
        T* arow = a.data() + static_cast<std::size_t>(i) * s.length;
        T mx = -std::numeric_limits<T>::infinity();
        for (int j = 0; j < s.length; ++j) {
          const T* kj = kv.data() + static_cast<std::size_t>(s.start + j) * dim + off;
          T dot = 0;
          for (int c = 0; c < hd; ++c) dot += qi[c] * kj[c];
          arow[j] = dot * scale;
          mx = std::max(mx, arow[j]);
        }
        T total = 0;
        for (int j = 0; j < s.length; ++j) total += (arow[j] = std::exp(arow[j] - mx));
        for (int j = 0; j < s.length; ++j) arow[j] /= total;
        T* oi = out.data() + static_cast<std::size_t>(s.start + i) * dim + off;
        for (int j = 0; j < s.length; ++j) {
          const T* vj = vv.data() + static_cast<std::size_t>(s.start + j) * dim + off;
          for (int c = 0; c < hd; ++c) oi[c] += arow[j] * vj[c];
        }
      }
      weights.push_back(std::move(a));
    }
  }
  if (weights_out) *weights_out = weights;
  const bool rg = detail::any_grad({q, k, v});
  const int iq = q.id(), ik = k.id(), iv = v.id();
  int id = tape.push(q.shape(), std::move(out), rg, {});
  if (rg) {
    tape.node(id).backward = [&tape, iq, ik, iv, id, heads, segments, scale, dim, hd, weights = std::move(weights)] {
      auto& o = tape.node(id);
      auto& nq = tape.node(iq);
      auto& nk = tape.node(ik);
      auto& nv = tape.node(iv);
      std::size_t w = 0;
      for (const auto& s : segments) {
        const int len = s.length;
        std::vector<T> da(static_cast<std::size_t>(len) * len), ds(da.size());
        for (int h = 0; h < heads; ++h, ++w) {
          const auto& a = weights[w];
          const int off = h * hd;
          auto at = [&](const std::vector<T>& buf, int row, int c) -> T {
            return buf[static_cast<std::size_t>(s.start + row) * dim + off + c];
          };
          for (int i = 0; i < len; ++i)
            for (int j = 0; j < len; ++j) {
              T dot = 0;
              for (int c = 0; c < hd; ++c) dot += at(o.grad, i, c) * at(nv.value, j, c);
              da[static_cast<std::size_t>(i) * len + j] = dot;
            }
          if (nv.requires_grad)
            for (int j = 0; j < len; ++j)
              for (int i = 0; i < len; ++i) {
                const T aij = a[static_cast<std::size_t>(i) * len + j];
                for (int c = 0; c < hd; ++c)
                  nv.grad[static_cast<std::size_t>(s.start + j) * dim + off + c] += aij * at(o.grad, i, c);
              }
          for (int i = 0; i < len; ++i) {
            T dot = 0;
            for (int j = 0; j < len; ++j)
              dot += da[static_cast<std::size_t>(i) * len + j] * a[static_cast<std::size_t>(i) * len + j];
            for (int j = 0; j < len; ++j) {
              const std::size_t idx = static_cast<std::size_t>(i) * len + j;
              ds[idx] = a[idx] * (da[idx] - dot) * scale;
            }
          }
          for (int i = 0; i < len; ++i)
            for (int j = 0; j < len; ++j) {
              const T g = ds[static_cast<std::size_t>(i) * len + j];
              if (g == T(0)) continue;
              for (int c = 0; c < hd; ++c) {
                if (nq.requires_grad) nq.grad[static_cast<std::size_t>(s.start + i) * dim + off + c] += g * at(nk.value, j, c);
                if (nk.requires_grad) nk.grad[static_cast<std::size_t>(s.start + j) * dim + off + c] += g * at(nq.value, i, c);
              }
            }
        }
      }
    };
  }
  return Var<T>(&tape, id);
}

}  // namespace sks::diff
