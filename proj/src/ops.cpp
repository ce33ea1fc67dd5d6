#include "echo/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <numeric>

namespace echo {

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;
using Strided = Eigen::OuterStride<>;
template <typename T>
using SMapR = Eigen::Map<MatR<T>, 0, Strided>;
template <typename T>
using CSMapR = Eigen::Map<const MatR<T>, 0, Strided>;

// Element strides of `in` laid over the broadcast shape `out` (0 on broadcast axes).
std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::int64_t> s(out.size(), 0);
  std::int64_t stride = 1;
  for (int i = static_cast<int>(in.size()) - 1, j = static_cast<int>(out.size()) - 1; i >= 0; --i, --j) {
    s[static_cast<std::size_t>(j)] = in[static_cast<std::size_t>(i)] == 1 ? 0 : stride;
    stride *= in[static_cast<std::size_t>(i)];
  }
  return s;
}

// Calls f(out_index, a_index, b_index) for every element of `out`.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::int64_t>& sa, const std::vector<std::int64_t>& sb,
                        F&& f) {
  const int rank = static_cast<int>(out.size());
  const std::int64_t n = numel(out);
  if (rank == 0) {
    if (n) f(std::int64_t{0}, std::int64_t{0}, std::int64_t{0});
    return;
  }
  std::vector<std::int64_t> idx(static_cast<std::size_t>(rank), 0);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t o = 0; o < n; ++o) {
    f(o, ia, ib);
    for (int d = rank - 1; d >= 0; --d) {
      const auto du = static_cast<std::size_t>(d);
      ++idx[du];
      ia += sa[du];
      ib += sb[du];
      if (idx[du] < out[du]) break;
      ia -= sa[du] * out[du];
      ib -= sb[du] * out[du];
      idx[du] = 0;
    }
  }
}

enum class BcastKind { Same, ScalarB, ScalarA, SuffixB, General };

BcastKind classify(const Shape& a, const Shape& b, const Shape& out) {
  if (a == b) return BcastKind::Same;
  if (numel(b) == 1 && a == out) return BcastKind::ScalarB;
  if (numel(a) == 1 && b == out) return BcastKind::ScalarA;
  if (a == out && b.size() <= a.size() && std::equal(b.begin(), b.end(), a.end() - static_cast<long>(b.size())))
    return BcastKind::SuffixB;
  return BcastKind::General;
}

// Visits (o, ia, ib) using the cheapest indexing scheme for the shapes.
template <class F>
void visit_binary(const Shape& a, const Shape& b, const Shape& out, F&& f) {
  const std::int64_t n = numel(out);
  switch (classify(a, b, out)) {
    case BcastKind::Same:
      for (std::int64_t o = 0; o < n; ++o) f(o, o, o);
      return;
    case BcastKind::ScalarB:
      for (std::int64_t o = 0; o < n; ++o) f(o, o, std::int64_t{0});
      return;
    case BcastKind::ScalarA:
      for (std::int64_t o = 0; o < n; ++o) f(o, std::int64_t{0}, o);
      return;
    case BcastKind::SuffixB: {
      const std::int64_t nb = numel(b);
      for (std::int64_t o = 0; o < n; ++o) f(o, o, o % nb);
      return;
    }
    case BcastKind::General:
      for_each_broadcast(out, broadcast_strides(a, out), broadcast_strides(b, out), f);
      return;
  }
}

template <typename T>
Tensor<T>& grad_of(Node<T>& self, std::size_t i) {
  return self.parents[i]->grad_buffer();
}

template <typename T>
bool wants(Node<T>& self, std::size_t i) {
  return self.parents[i]->requires_grad;
}

// Generic broadcasting binary op with partial derivatives da(a,b), db(a,b).
template <typename T, class F, class DA, class DB>
Var<T> binary_op(const Var<T>& a, const Var<T>& b, F f, DA da, DB db, const char* name) {
  const Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  Tensor<T> out(out_shape);
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  T* po = out.data();
  visit_binary(a.shape(), b.shape(), out_shape,
               [&](std::int64_t o, std::int64_t ia, std::int64_t ib) { po[o] = f(pa[ia], pb[ib]); });
  return make_result<T>(
      std::move(out), {a, b},
      [da, db, out_shape](Node<T>& self) {
        const Tensor<T>& av = self.parents[0]->value;
        const Tensor<T>& bv = self.parents[1]->value;
        const T* g = self.grad.data();
        const T* xa = av.data();
        const T* xb = bv.data();
        T* ga = wants(self, 0) ? grad_of(self, 0).data() : nullptr;
        T* gb = wants(self, 1) ? grad_of(self, 1).data() : nullptr;
        visit_binary(av.shape(), bv.shape(), out_shape, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
          if (ga) ga[ia] += g[o] * da(xa[ia], xb[ib]);
          if (gb) gb[ib] += g[o] * db(xa[ia], xb[ib]);
        });
      },
      name);
}

// Elementwise unary op; df(x, y) receives input and output values.
template <typename T, class F, class DF>
Var<T> unary_op(const Var<T>& a, F f, DF df, const char* name) {
  Tensor<T> out(a.shape());
  const T* pa = a.value().data();
  T* po = out.data();
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) po[i] = f(pa[i]);
  return make_result<T>(
      std::move(out), {a},
      [df](Node<T>& self) {
        const T* x = self.parents[0]->value.data();
        const T* y = self.value.data();
        const T* g = self.grad.data();
        T* gx = grad_of(self, 0).data();
        const std::int64_t m = self.value.numel();
        for (std::int64_t i = 0; i < m; ++i) gx[i] += g[i] * df(x[i], y[i]);
      },
      name);
}

template <typename T>
T gelu_value(T x) {
  return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2))));
  const T pdf = std::exp(T(-0.5) * x * x) / std::sqrt(T(2) * T(M_PI));
  return cdf + x * pdf;
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return binary_op(
      a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); }, "add");
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return binary_op(
      a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); }, "sub");
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return binary_op(
      a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; }, "mul");
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  return binary_op(
      a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
      [](T x, T y) { return -x / (y * y); }, "div");
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T s) {
  return unary_op(
      a, [s](T x) { return x + s; }, [](T, T) { return T(1); }, "add_scalar");
}

template <typename T>
Var<T> scale(const Var<T>& a, T s) {
  return unary_op(
      a, [s](T x) { return x * s; }, [s](T, T) { return s; }, "scale");
}

template <typename T>
Var<T> neg(const Var<T>& a) {
  return scale(a, T(-1));
}

template <typename T>
Var<T> relu(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); }, "relu");
}

template <typename T>
Var<T> gelu(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return gelu_value(x); }, [](T x, T) { return gelu_grad(x); }, "gelu");
}

template <typename T>
Var<T> silu(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return x * sigmoid(x); },
      [](T x, T) {
        const T s = sigmoid(x);
        return s * (T(1) + x * (T(1) - s));
      },
      "silu");
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; }, "tanh");
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return std::exp(x); }, [](T, T y) { return y; }, "exp");
}

template <typename T>
Var<T> square(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; }, "square");
}

template <typename T>
Var<T> sqrt(const Var<T>& a) {
  return unary_op(
      a, [](T x) { return std::sqrt(x); }, [](T, T y) { return T(0.5) / y; }, "sqrt");
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  T s = T(0);
  for (T v : a.value().values()) s += v;
  return make_result<T>(
      Tensor<T>::scalar(s), {a},
      [](Node<T>& self) {
        const T g = self.grad[0];
        for (T& v : grad_of(self, 0).values()) v += g;
      },
      "sum");
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const auto n = a.numel();
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  return make_result<T>(
      std::move(out), {a},
      [](Node<T>& self) {
        Tensor<T>& g = grad_of(self, 0);
        const T* src = self.grad.data();
        T* dst = g.data();
        for (std::int64_t i = 0; i < g.numel(); ++i) dst[i] += src[i];
      },
      "reshape");
}

namespace {

// Index map: out[i] = in[map[i]].
std::vector<std::int64_t> permute_map(const Shape& in, const std::vector<int>& perm, Shape& out_shape) {
  const int rank = static_cast<int>(in.size());
  if (static_cast<int>(perm.size()) != rank) throw ShapeError("permutation rank mismatch for " + to_string(in));
  std::vector<std::int64_t> in_strides(static_cast<std::size_t>(rank), 1);
  for (int d = rank - 2; d >= 0; --d)
    in_strides[static_cast<std::size_t>(d)] = in_strides[static_cast<std::size_t>(d + 1)] * in[static_cast<std::size_t>(d + 1)];
  out_shape.assign(static_cast<std::size_t>(rank), 0);
  std::vector<std::int64_t> strides(static_cast<std::size_t>(rank));
  std::vector<bool> seen(static_cast<std::size_t>(rank), false);
  for (int d = 0; d < rank; ++d) {
    const int p = normalize_axis(perm[static_cast<std::size_t>(d)], rank);
    if (seen[static_cast<std::size_t>(p)]) throw ShapeError("repeated axis in permutation");
    seen[static_cast<std::size_t>(p)] = true;
    out_shape[static_cast<std::size_t>(d)] = in[static_cast<std::size_t>(p)];
    strides[static_cast<std::size_t>(d)] = in_strides[static_cast<std::size_t>(p)];
  }
  std::vector<std::int64_t> map(static_cast<std::size_t>(numel(in)));
  std::vector<std::int64_t> zero(static_cast<std::size_t>(rank), 0);
  for_each_broadcast(out_shape, strides, zero, [&](std::int64_t o, std::int64_t i, std::int64_t) {
    map[static_cast<std::size_t>(o)] = i;
  });
  return map;
}

}  // namespace

template <typename T>
Var<T> permute(const Var<T>& a, const std::vector<int>& perm) {
  Shape out_shape;
  auto map = std::make_shared<std::vector<std::int64_t>>(permute_map(a.shape(), perm, out_shape));
  Tensor<T> out(out_shape);
  const T* src = a.value().data();
  for (std::size_t i = 0; i < map->size(); ++i) out[static_cast<std::int64_t>(i)] = src[(*map)[i]];
  return make_result<T>(
      std::move(out), {a},
      [map](Node<T>& self) {
        T* g = grad_of(self, 0).data();
        const T* src = self.grad.data();
        for (std::size_t i = 0; i < map->size(); ++i) g[(*map)[i]] += src[i];
      },
      "permute");
}

namespace {

struct AxisSplit {
  std::int64_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, int axis) {
  AxisSplit r;
  for (int d = 0; d < axis; ++d) r.outer *= s[static_cast<std::size_t>(d)];
  r.extent = s[static_cast<std::size_t>(axis)];
  for (std::size_t d = static_cast<std::size_t>(axis) + 1; d < s.size(); ++d) r.inner *= s[d];
  return r;
}

}  // namespace

template <typename T>
Var<T> slice(const Var<T>& a, int axis, std::int64_t start, std::int64_t length) {
  const int ax = normalize_axis(axis, static_cast<int>(a.shape().size()));
  const AxisSplit sp = split_axis(a.shape(), ax);
  if (start < 0 || length < 0 || start + length > sp.extent) {
    throw ShapeError("slice [" + std::to_string(start) + ", +" + std::to_string(length) + ") out of range for " +
                     to_string(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(ax)] = length;
  Tensor<T> out(out_shape);
  const T* src = a.value().data();
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    std::copy_n(src + (o * sp.extent + start) * sp.inner, length * sp.inner, out.data() + o * length * sp.inner);
  }
  return make_result<T>(
      std::move(out), {a},
      [sp, start, length](Node<T>& self) {
        T* g = grad_of(self, 0).data();
        const T* src = self.grad.data();
        for (std::int64_t o = 0; o < sp.outer; ++o) {
          T* dst = g + (o * sp.extent + start) * sp.inner;
          const T* s = src + o * length * sp.inner;
          for (std::int64_t i = 0; i < length * sp.inner; ++i) dst[i] += s[i];
        }
      },
      "slice");
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const int rank = static_cast<int>(parts[0].shape().size());
  const int ax = normalize_axis(axis, rank);
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<std::size_t>(ax)] = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (static_cast<int>(s.size()) != rank) throw ShapeError("concat rank mismatch");
    const std::int64_t e = s[static_cast<std::size_t>(ax)];
    s[static_cast<std::size_t>(ax)] = 0;
    Shape ref = out_shape;
    ref[static_cast<std::size_t>(ax)] = 0;
    if (s != ref) throw ShapeError("concat shape mismatch: " + to_string(p.shape()) + " vs " + to_string(parts[0].shape()));
    out_shape[static_cast<std::size_t>(ax)] += e;
  }
  const AxisSplit sp = split_axis(out_shape, ax);
  Tensor<T> out(out_shape);
  std::vector<std::int64_t> offsets;
  std::int64_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::int64_t e = p.shape()[static_cast<std::size_t>(ax)];
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      std::copy_n(p.value().data() + o * e * sp.inner, e * sp.inner,
                  out.data() + (o * sp.extent + off) * sp.inner);
    }
    off += e;
  }
  return make_result<T>(
      std::move(out), parts,
      [sp, offsets, ax](Node<T>& self) {
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
          if (!self.parents[k]->requires_grad) continue;
          Tensor<T>& g = self.parents[k]->grad_buffer();
          const std::int64_t e = self.parents[k]->value.shape()[static_cast<std::size_t>(ax)];
          for (std::int64_t o = 0; o < sp.outer; ++o) {
            const T* src = self.grad.data() + (o * sp.extent + offsets[k]) * sp.inner;
            T* dst = g.data() + o * e * sp.inner;
            for (std::int64_t i = 0; i < e * sp.inner; ++i) dst[i] += src[i];
          }
        }
      },
      "concat");
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) throw ShapeError("matmul needs rank >= 2, got " + to_string(sa) + " and " + to_string(sb));
  const std::int64_t m = sa[sa.size() - 2], k = sa.back(), k2 = sb[sb.size() - 2], n = sb.back();
  if (k != k2) throw ShapeError("matmul inner dimension mismatch: " + to_string(sa) + " · " + to_string(sb));
  const Shape ba(sa.begin(), sa.end() - 2), bb(sb.begin(), sb.end() - 2);
  const Shape batch = broadcast_shapes(ba, bb);
  struct Pair {
    std::int64_t o, ia, ib;
  };
  auto pairs = std::make_shared<std::vector<Pair>>();
  for_each_broadcast(batch, broadcast_strides(ba, batch), broadcast_strides(bb, batch),
                     [&](std::int64_t o, std::int64_t ia, std::int64_t ib) { pairs->push_back({o, ia, ib}); });
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor<T> out(out_shape);
  for (const auto& p : *pairs) {
    MapR<T> c(out.data() + p.o * m * n, m, n);
    c.noalias() = CMapR<T>(a.value().data() + p.ia * m * k, m, k) * CMapR<T>(b.value().data() + p.ib * k * n, k, n);
  }
  return make_result<T>(
      std::move(out), {a, b},
      [pairs, m, k, n](Node<T>& self) {
        const T* av = self.parents[0]->value.data();
        const T* bv = self.parents[1]->value.data();
        T* ga = wants(self, 0) ? grad_of(self, 0).data() : nullptr;
        T* gb = wants(self, 1) ? grad_of(self, 1).data() : nullptr;
        for (const auto& p : *pairs) {
          CMapR<T> gc(self.grad.data() + p.o * m * n, m, n);
          if (ga) MapR<T>(ga + p.ia * m * k, m, k).noalias() += gc * CMapR<T>(bv + p.ib * k * n, k, n).transpose();
          if (gb) MapR<T>(gb + p.ib * k * n, k, n).noalias() += CMapR<T>(av + p.ia * m * k, m, k).transpose() * gc;
        }
      },
      "matmul");
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
  if (w.shape().size() != 2) throw ShapeError("linear weight must be rank 2, got " + to_string(w.shape()));
  const std::int64_t in = w.shape()[0], outc = w.shape()[1];
  if (x.shape().empty() || x.shape().back() != in) {
    throw ShapeError("linear input " + to_string(x.shape()) + " does not match weight " + to_string(w.shape()));
  }
  if (bias.defined() && (bias.shape().size() != 1 || bias.shape()[0] != outc)) {
    throw ShapeError("linear bias " + to_string(bias.shape()) + " does not match weight " + to_string(w.shape()));
  }
  const std::int64_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = outc;
  Tensor<T> out(out_shape);
  MapR<T> y(out.data(), rows, outc);
  y.noalias() = CMapR<T>(x.value().data(), rows, in) * CMapR<T>(w.value().data(), in, outc);
  if (bias.defined()) y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.value().data(), outc);
  std::vector<Var<T>> parents{x, w};
  if (bias.defined()) parents.push_back(bias);
  return make_result<T>(
      std::move(out), std::move(parents),
      [rows, in, outc](Node<T>& self) {
        CMapR<T> gy(self.grad.data(), rows, outc);
        if (wants(self, 0))
          MapR<T>(grad_of(self, 0).data(), rows, in).noalias() +=
              gy * CMapR<T>(self.parents[1]->value.data(), in, outc).transpose();
        if (wants(self, 1))
          MapR<T>(grad_of(self, 1).data(), in, outc).noalias() +=
              CMapR<T>(self.parents[0]->value.data(), rows, in).transpose() * gy;
        if (self.parents.size() > 2 && wants(self, 2))
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(grad_of(self, 2).data(), outc) += gy.colwise().sum();
      },
      "linear");
}

template <typename T>
Var<T> softmax_lastdim(const Var<T>& x) {
  if (x.shape().empty() || x.shape().back() == 0) throw ShapeError("softmax needs a nonempty last dimension");
  const std::int64_t c = x.shape().back();
  const std::int64_t rows = x.numel() / c;
  Tensor<T> out(x.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const T* in = x.value().data() + r * c;
    T* o = out.data() + r * c;
    const T mx = *std::max_element(in, in + c);
    T s = T(0);
    for (std::int64_t i = 0; i < c; ++i) s += (o[i] = std::exp(in[i] - mx));
    for (std::int64_t i = 0; i < c; ++i) o[i] /= s;
  }
  return make_result<T>(
      std::move(out), {x},
      [rows, c](Node<T>& self) {
        T* gx = grad_of(self, 0).data();
        for (std::int64_t r = 0; r < rows; ++r) {
          const T* y = self.value.data() + r * c;
          const T* g = self.grad.data() + r * c;
          T dot = T(0);
          for (std::int64_t i = 0; i < c; ++i) dot += g[i] * y[i];
          for (std::int64_t i = 0; i < c; ++i) gx[r * c + i] += y[i] * (g[i] - dot);
        }
      },
      "softmax");
}

namespace {

// Shared normalization kernel: `groups_of(row)` statistics over index sets.
// Layout: x viewed as [outer, inner, C]; group g covers channels [g*cg, (g+1)*cg).
template <typename T>
Var<T> grouped_norm(const Var<T>& x, std::int64_t outer, std::int64_t inner, std::int64_t c, std::int64_t groups,
                    const Var<T>& scale_p, const Var<T>& shift_p, T eps, const char* name) {
  if (eps <= T(0)) throw std::invalid_argument("normalization eps must be positive");
  if (groups <= 0 || c % groups != 0) {
    throw ShapeError(std::string(name) + ": channels " + std::to_string(c) + " not divisible by groups " +
                     std::to_string(groups));
  }
  for (const auto* p : {&scale_p, &shift_p}) {
    if (p->defined() && (p->shape().size() != 1 || p->shape()[0] != c)) {
      throw ShapeError(std::string(name) + ": affine parameter " + to_string(p->shape()) + " does not match channels " +
                       std::to_string(c));
    }
  }
  const std::int64_t cg = c / groups;
  const std::int64_t n = inner * cg;
  auto xhat = std::make_shared<Tensor<T>>(x.shape());
  auto rstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(outer * groups));
  const T* xv = x.value().data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t g = 0; g < groups; ++g) {
      T m = T(0);
      for (std::int64_t p = 0; p < inner; ++p)
        for (std::int64_t j = 0; j < cg; ++j) m += xv[(o * inner + p) * c + g * cg + j];
      m /= static_cast<T>(n);
      T v = T(0);
      for (std::int64_t p = 0; p < inner; ++p)
        for (std::int64_t j = 0; j < cg; ++j) {
          const T d = xv[(o * inner + p) * c + g * cg + j] - m;
          v += d * d;
        }
      v /= static_cast<T>(n);
      const T rs = T(1) / std::sqrt(v + eps);
      (*rstd)[static_cast<std::size_t>(o * groups + g)] = rs;
      for (std::int64_t p = 0; p < inner; ++p)
        for (std::int64_t j = 0; j < cg; ++j) {
          const std::int64_t idx = (o * inner + p) * c + g * cg + j;
          (*xhat)[idx] = (xv[idx] - m) * rs;
        }
    }
  }
  Tensor<T> out = *xhat;
  const bool has_scale = scale_p.defined(), has_shift = shift_p.defined();
  if (has_scale || has_shift) {
    const T* sc = has_scale ? scale_p.value().data() : nullptr;
    const T* sh = has_shift ? shift_p.value().data() : nullptr;
    for (std::int64_t r = 0; r < outer * inner; ++r)
      for (std::int64_t j = 0; j < c; ++j) {
        T& y = out[r * c + j];
        if (sc) y *= sc[j];
        if (sh) y += sh[j];
      }
  }
  std::vector<Var<T>> parents{x};
  if (has_scale) parents.push_back(scale_p);
  if (has_shift) parents.push_back(shift_p);
  return make_result<T>(
      std::move(out), std::move(parents),
      [xhat, rstd, outer, inner, c, groups, cg, n, has_scale, has_shift](Node<T>& self) {
        const T* g = self.grad.data();
        const T* sc = has_scale ? self.parents[1]->value.data() : nullptr;
        std::size_t next = 1;
        T* gscale = nullptr;
        T* gshift = nullptr;
        if (has_scale) {
          if (wants(self, next)) gscale = grad_of(self, next).data();
          ++next;
        }
        if (has_shift && wants(self, next)) gshift = grad_of(self, next).data();
        for (std::int64_t r = 0; r < outer * inner; ++r)
          for (std::int64_t j = 0; j < c; ++j) {
            const std::int64_t idx = r * c + j;
            if (gscale) gscale[j] += g[idx] * (*xhat)[idx];
            if (gshift) gshift[j] += g[idx];
          }
        if (!wants(self, 0)) return;
        T* gx = grad_of(self, 0).data();
        for (std::int64_t o = 0; o < outer; ++o)
          for (std::int64_t gi = 0; gi < groups; ++gi) {
            T mean_d = T(0), mean_dx = T(0);
            for (std::int64_t p = 0; p < inner; ++p)
              for (std::int64_t j = 0; j < cg; ++j) {
                const std::int64_t ch = gi * cg + j;
                const std::int64_t idx = (o * inner + p) * c + ch;
                const T d = g[idx] * (sc ? sc[ch] : T(1));
                mean_d += d;
                mean_dx += d * (*xhat)[idx];
              }
            mean_d /= static_cast<T>(n);
            mean_dx /= static_cast<T>(n);
            const T rs = (*rstd)[static_cast<std::size_t>(o * groups + gi)];
            for (std::int64_t p = 0; p < inner; ++p)
              for (std::int64_t j = 0; j < cg; ++j) {
                const std::int64_t ch = gi * cg + j;
                const std::int64_t idx = (o * inner + p) * c + ch;
                const T d = g[idx] * (sc ? sc[ch] : T(1));
                gx[idx] += rs * (d - mean_d - (*xhat)[idx] * mean_dx);
              }
          }
      },
      name);
}

}  // namespace

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& scale_p, const Var<T>& shift_p, T eps) {
  if (x.shape().empty() || x.shape().back() == 0) throw ShapeError("layer_norm needs a nonempty last dimension");
  const std::int64_t c = x.shape().back();
  return grouped_norm(x, x.numel() / c, 1, c, 1, scale_p, shift_p, eps, "layer_norm");
}

template <typename T>
Var<T> group_norm(const Var<T>& x, int groups, const Var<T>& scale_p, const Var<T>& shift_p, T eps) {
  if (x.shape().size() < 2) throw ShapeError("group_norm needs rank >= 2, got " + to_string(x.shape()));
  const std::int64_t outer = x.shape()[0];
  const std::int64_t c = x.shape().back();
  const std::int64_t inner = outer * c == 0 ? 0 : x.numel() / (outer * c);
  return grouped_norm(x, outer, inner, c, groups, scale_p, shift_p, eps, "group_norm");
}

std::int64_t ConvGeometry::output_extent(int axis, std::int64_t input) const {
  const auto a = static_cast<std::size_t>(axis);
  const std::int64_t padded = input + pad_front[a] + pad_back[a];
  if (padded < kernel[a]) return 0;
  return (padded - kernel[a]) / stride[a] + 1;
}

namespace {

struct ConvDims {
  std::array<std::int64_t, 3> in{};
  std::array<std::int64_t, 3> out{};
  std::int64_t channels = 0;  // channels of the spatial (im2col) side
  std::int64_t rows() const { return out[0] * out[1] * out[2]; }
};

// col[rows, kt*kh*kw*C] gathered from x[T,H,W,C] (zero padding).
template <typename T>
void im2col(const T* x, const ConvDims& d, const ConvGeometry& g, T* col) {
  const std::int64_t c = d.channels;
  const std::int64_t kcols = std::int64_t{g.kernel[0]} * g.kernel[1] * g.kernel[2] * c;
  std::int64_t r = 0;
  for (std::int64_t to = 0; to < d.out[0]; ++to)
    for (std::int64_t ho = 0; ho < d.out[1]; ++ho)
      for (std::int64_t wo = 0; wo < d.out[2]; ++wo, ++r) {
        T* dst = col + r * kcols;
        for (int a = 0; a < g.kernel[0]; ++a) {
          const std::int64_t ti = to * g.stride[0] + a - g.pad_front[0];
          for (int b = 0; b < g.kernel[1]; ++b) {
            const std::int64_t hi = ho * g.stride[1] + b - g.pad_front[1];
            for (int e = 0; e < g.kernel[2]; ++e, dst += c) {
              const std::int64_t wi = wo * g.stride[2] + e - g.pad_front[2];
              if (ti < 0 || ti >= d.in[0] || hi < 0 || hi >= d.in[1] || wi < 0 || wi >= d.in[2]) {
                std::fill_n(dst, c, T(0));
              } else {
                std::copy_n(x + ((ti * d.in[1] + hi) * d.in[2] + wi) * c, c, dst);
              }
            }
          }
        }
      }
}

// x[T,H,W,C] += scatter of col (adjoint of im2col).
template <typename T>
void col2im(const T* col, const ConvDims& d, const ConvGeometry& g, T* x) {
  const std::int64_t c = d.channels;
  const std::int64_t kcols = std::int64_t{g.kernel[0]} * g.kernel[1] * g.kernel[2] * c;
  std::int64_t r = 0;
  for (std::int64_t to = 0; to < d.out[0]; ++to)
    for (std::int64_t ho = 0; ho < d.out[1]; ++ho)
      for (std::int64_t wo = 0; wo < d.out[2]; ++wo, ++r) {
        const T* src = col + r * kcols;
        for (int a = 0; a < g.kernel[0]; ++a) {
          const std::int64_t ti = to * g.stride[0] + a - g.pad_front[0];
          for (int b = 0; b < g.kernel[1]; ++b) {
            const std::int64_t hi = ho * g.stride[1] + b - g.pad_front[1];
            for (int e = 0; e < g.kernel[2]; ++e, src += c) {
              const std::int64_t wi = wo * g.stride[2] + e - g.pad_front[2];
              if (ti < 0 || ti >= d.in[0] || hi < 0 || hi >= d.in[1] || wi < 0 || wi >= d.in[2]) continue;
              T* dst = x + ((ti * d.in[1] + hi) * d.in[2] + wi) * c;
              for (std::int64_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
            }
          }
        }
      }
}

void check_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " + to_string(s));
  }
}

}  // namespace

template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, const ConvGeometry& geom) {
  check_rank(x.shape(), 4, "conv3d input");
  check_rank(w.shape(), 5, "conv3d weight");
  const Shape& ws = w.shape();
  const std::int64_t cin = x.shape()[3];
  if (ws[0] != geom.kernel[0] || ws[1] != geom.kernel[1] || ws[2] != geom.kernel[2] || ws[3] != cin) {
    throw ShapeError("conv3d weight " + to_string(ws) + " does not match input " + to_string(x.shape()));
  }
  const std::int64_t cout = ws[4];
  ConvDims d;
  d.channels = cin;
  for (int a = 0; a < 3; ++a) {
    d.in[static_cast<std::size_t>(a)] = x.shape()[static_cast<std::size_t>(a)];
    d.out[static_cast<std::size_t>(a)] = geom.output_extent(a, d.in[static_cast<std::size_t>(a)]);
  }
  const std::int64_t kcols = ws[0] * ws[1] * ws[2] * cin;
  const std::int64_t rows = d.rows();
  auto col = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows * kcols));
  im2col(x.value().data(), d, geom, col->data());
  Tensor<T> out(Shape{d.out[0], d.out[1], d.out[2], cout});
  MapR<T> y(out.data(), rows, cout);
  y.noalias() = CMapR<T>(col->data(), rows, kcols) * CMapR<T>(w.value().data(), kcols, cout);
  if (bias.defined()) y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.value().data(), cout);
  std::vector<Var<T>> parents{x, w};
  if (bias.defined()) parents.push_back(bias);
  return make_result<T>(
      std::move(out), std::move(parents),
      [col, d, geom, rows, kcols, cout](Node<T>& self) {
        CMapR<T> gy(self.grad.data(), rows, cout);
        if (wants(self, 1))
          MapR<T>(grad_of(self, 1).data(), kcols, cout).noalias() += CMapR<T>(col->data(), rows, kcols).transpose() * gy;
        if (self.parents.size() > 2 && wants(self, 2))
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(grad_of(self, 2).data(), cout) += gy.colwise().sum();
        if (wants(self, 0)) {
          MatR<T> gcol = gy * CMapR<T>(self.parents[1]->value.data(), kcols, cout).transpose();
          col2im(gcol.data(), d, geom, grad_of(self, 0).data());
        }
      },
      "conv3d");
}

template <typename T>
Var<T> conv_transpose3d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, const ConvGeometry& geom,
                        const std::array<std::int64_t, 3>& out_extents) {
  check_rank(x.shape(), 4, "conv_transpose3d input");
  check_rank(w.shape(), 5, "conv_transpose3d weight");
  const Shape& ws = w.shape();
  const std::int64_t cin = x.shape()[3];
  if (ws[0] != geom.kernel[0] || ws[1] != geom.kernel[1] || ws[2] != geom.kernel[2] || ws[4] != cin) {
    throw ShapeError("conv_transpose3d weight " + to_string(ws) + " does not match input " + to_string(x.shape()));
  }
  const std::int64_t cout = ws[3];
  ConvDims d;
  d.channels = cout;
  for (int a = 0; a < 3; ++a) {
    const auto au = static_cast<std::size_t>(a);
    d.in[au] = out_extents[au];
    d.out[au] = geom.output_extent(a, out_extents[au]);
    if (d.out[au] != x.shape()[au]) {
      throw ShapeError("conv_transpose3d: output extents do not map onto input " + to_string(x.shape()));
    }
  }
  const std::int64_t kcols = ws[0] * ws[1] * ws[2] * cout;
  const std::int64_t rows = d.rows();
  MatR<T> col = CMapR<T>(x.value().data(), rows, cin) * CMapR<T>(w.value().data(), kcols, cin).transpose();
  Tensor<T> out(Shape{out_extents[0], out_extents[1], out_extents[2], cout});
  col2im(col.data(), d, geom, out.data());
  const std::int64_t positions = out_extents[0] * out_extents[1] * out_extents[2];
  if (bias.defined()) {
    MapR<T>(out.data(), positions, cout).rowwise() +=
        Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias.value().data(), cout);
  }
  std::vector<Var<T>> parents{x, w};
  if (bias.defined()) parents.push_back(bias);
  return make_result<T>(
      std::move(out), std::move(parents),
      [d, geom, rows, kcols, cin, cout, positions](Node<T>& self) {
        MatR<T> gcol(rows, kcols);
        im2col(self.grad.data(), d, geom, gcol.data());
        if (wants(self, 0))
          MapR<T>(grad_of(self, 0).data(), rows, cin).noalias() +=
              gcol * CMapR<T>(self.parents[1]->value.data(), kcols, cin);
        if (wants(self, 1))
          MapR<T>(grad_of(self, 1).data(), kcols, cin).noalias() +=
              gcol.transpose() * CMapR<T>(self.parents[0]->value.data(), rows, cin);
        if (self.parents.size() > 2 && wants(self, 2))
          Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(grad_of(self, 2).data(), cout) +=
              CMapR<T>(self.grad.data(), positions, cout).colwise().sum();
      },
      "conv_transpose3d");
}

template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads) {
  check_rank(q.shape(), 2, "attention query");
  if (k.shape() != q.shape() || v.shape() != q.shape()) {
    throw ShapeError("attention q/k/v shapes differ: " + to_string(q.shape()) + ", " + to_string(k.shape()) + ", " +
                     to_string(v.shape()));
  }
  const std::int64_t n = q.shape()[0], hid = q.shape()[1];
  if (heads <= 0 || hid % heads != 0) throw ShapeError("attention width " + std::to_string(hid) + " not divisible by heads");
  const std::int64_t dh = hid / heads;
  const T inv = T(1) / std::sqrt(static_cast<T>(dh));
  auto probs = std::make_shared<std::vector<MatR<T>>>(static_cast<std::size_t>(heads));
  Tensor<T> out(Shape{n, hid});
  for (int h = 0; h < heads; ++h) {
    CSMapR<T> qh(q.value().data() + h * dh, n, dh, Strided(hid));
    CSMapR<T> kh(k.value().data() + h * dh, n, dh, Strided(hid));
    CSMapR<T> vh(v.value().data() + h * dh, n, dh, Strided(hid));
    MatR<T>& p = (*probs)[static_cast<std::size_t>(h)];
    p.noalias() = (qh * kh.transpose()) * inv;
    for (std::int64_t r = 0; r < n; ++r) {
      auto row = p.row(r);
      const T mx = row.maxCoeff();
      row = (row.array() - mx).exp();
      row /= row.sum();
    }
    SMapR<T>(out.data() + h * dh, n, dh, Strided(hid)).noalias() = p * vh;
  }
  return make_result<T>(
      std::move(out), {q, k, v},
      [probs, n, hid, dh, heads, inv](Node<T>& self) {
        const T* qv = self.parents[0]->value.data();
        const T* kv = self.parents[1]->value.data();
        const T* vv = self.parents[2]->value.data();
        T* gq = wants(self, 0) ? grad_of(self, 0).data() : nullptr;
        T* gk = wants(self, 1) ? grad_of(self, 1).data() : nullptr;
        T* gv = wants(self, 2) ? grad_of(self, 2).data() : nullptr;
        for (int h = 0; h < heads; ++h) {
          const MatR<T>& p = (*probs)[static_cast<std::size_t>(h)];
          CSMapR<T> go(self.grad.data() + h * dh, n, dh, Strided(hid));
          CSMapR<T> qh(qv + h * dh, n, dh, Strided(hid));
          CSMapR<T> kh(kv + h * dh, n, dh, Strided(hid));
          CSMapR<T> vh(vv + h * dh, n, dh, Strided(hid));
          if (gv) SMapR<T>(gv + h * dh, n, dh, Strided(hid)).noalias() += p.transpose() * go;
          if (!gq && !gk) continue;
          MatR<T> dp = go * vh.transpose();
          MatR<T> ds(n, n);
          for (std::int64_t r = 0; r < n; ++r) {
            const T dot = p.row(r).dot(dp.row(r));
            ds.row(r) = p.row(r).array() * (dp.row(r).array() - dot);
          }
          ds *= inv;
          if (gq) SMapR<T>(gq + h * dh, n, dh, Strided(hid)).noalias() += ds * kh;
          if (gk) SMapR<T>(gk + h * dh, n, dh, Strided(hid)).noalias() += ds.transpose() * qh;
        }
      },
      "attention");
}

namespace {

// Kcat[i, u*cout + o] = K[u, i, o], so that F @ Kcat evaluates every kernel at every source.
template <typename T>
MatR<T> concat_kernels(const T* k, std::int64_t n_kernels, std::int64_t cin, std::int64_t cout) {
  MatR<T> kc(cin, n_kernels * cout);
  for (std::int64_t u = 0; u < n_kernels; ++u)
    kc.middleCols(u * cout, cout) = CMapR<T>(k + u * cin * cout, cin, cout);
  return kc;
}

}  // namespace

template <typename T>
Var<T> point_conv(const Var<T>& features, const Var<T>& kernels, std::shared_ptr<const PointConvPlan> shared_plan) {
  const PointConvPlan& plan = *shared_plan;
  check_rank(features.shape(), 2, "point_conv features");
  check_rank(kernels.shape(), 3, "point_conv kernels");
  const std::int64_t cin = features.shape()[1];
  const std::int64_t cout = kernels.shape()[2];
  if (kernels.shape()[1] != cin) {
    throw ShapeError("point_conv channel mismatch: features " + to_string(features.shape()) + ", kernels " +
                     to_string(kernels.shape()));
  }
  if (features.shape()[0] != plan.n_sources) {
    throw ShapeError("point_conv expects " + std::to_string(plan.n_sources) + " source rows, got " +
                     to_string(features.shape()));
  }
  if (static_cast<std::int64_t>(plan.row_ptr.size()) != plan.n_queries + 1) throw ShapeError("point_conv plan is malformed");
  const std::int64_t n_kernels = kernels.shape()[0];
  for (std::int64_t e = 0; e < plan.n_pairs(); ++e) {
    const auto eu = static_cast<std::size_t>(e);
    if (plan.source[eu] < 0 || plan.source[eu] >= plan.n_sources || plan.kernel_id[eu] < 0 ||
        plan.kernel_id[eu] >= n_kernels) {
      throw ShapeError("point_conv plan index out of range");
    }
  }
  // With few distinct kernels (regular layouts) one GEMM over all (source, kernel)
  // combinations beats per-edge products; the edges then only gather.
  const bool dense = plan.n_sources * n_kernels <= 2 * plan.n_pairs();
  Tensor<T> out(Shape{plan.n_queries, cout});
  const T* f = features.value().data();
  const T* kt = kernels.value().data();
  if (dense) {
    const MatR<T> r = CMapR<T>(f, plan.n_sources, cin) * concat_kernels(kt, n_kernels, cin, cout);
    const std::int64_t ld = n_kernels * cout;
    for (std::int64_t qi = 0; qi < plan.n_queries; ++qi) {
      T* o = out.data() + qi * cout;
      for (std::int64_t e = plan.row_ptr[static_cast<std::size_t>(qi)]; e < plan.row_ptr[static_cast<std::size_t>(qi) + 1]; ++e) {
        const auto eu = static_cast<std::size_t>(e);
        const T wgt = static_cast<T>(plan.weight[eu]);
        const T* rr = r.data() + plan.source[eu] * ld + plan.kernel_id[eu] * cout;
        for (std::int64_t oc = 0; oc < cout; ++oc) o[oc] += wgt * rr[oc];
      }
    }
  } else {
    for (std::int64_t qi = 0; qi < plan.n_queries; ++qi) {
      T* o = out.data() + qi * cout;
      for (std::int64_t e = plan.row_ptr[static_cast<std::size_t>(qi)]; e < plan.row_ptr[static_cast<std::size_t>(qi) + 1]; ++e) {
        const auto eu = static_cast<std::size_t>(e);
        const T wgt = static_cast<T>(plan.weight[eu]);
        const T* fs = f + plan.source[eu] * cin;
        const T* km = kt + plan.kernel_id[eu] * cin * cout;
        for (std::int64_t i = 0; i < cin; ++i) {
          const T a = wgt * fs[i];
          const T* kr = km + i * cout;
          for (std::int64_t oc = 0; oc < cout; ++oc) o[oc] += a * kr[oc];
        }
      }
    }
  }
  return make_result<T>(
      std::move(out), {features, kernels},
      [shared_plan, cin, cout, n_kernels, dense](Node<T>& self) {
        const PointConvPlan& pl = *shared_plan;
        const T* f = self.parents[0]->value.data();
        const T* kt = self.parents[1]->value.data();
        T* gf = wants(self, 0) ? grad_of(self, 0).data() : nullptr;
        T* gk = wants(self, 1) ? grad_of(self, 1).data() : nullptr;
        if (dense) {
          const std::int64_t ld = n_kernels * cout;
          MatR<T> gr = MatR<T>::Zero(pl.n_sources, ld);
          for (std::int64_t qi = 0; qi < pl.n_queries; ++qi) {
            const T* go = self.grad.data() + qi * cout;
            for (std::int64_t e = pl.row_ptr[static_cast<std::size_t>(qi)]; e < pl.row_ptr[static_cast<std::size_t>(qi) + 1]; ++e) {
              const auto eu = static_cast<std::size_t>(e);
              const T wgt = static_cast<T>(pl.weight[eu]);
              T* g = gr.data() + pl.source[eu] * ld + pl.kernel_id[eu] * cout;
              for (std::int64_t oc = 0; oc < cout; ++oc) g[oc] += wgt * go[oc];
            }
          }
          if (gf) MapR<T>(gf, pl.n_sources, cin).noalias() += gr * concat_kernels(kt, n_kernels, cin, cout).transpose();
          if (gk) {
            const MatR<T> gkc = CMapR<T>(f, pl.n_sources, cin).transpose() * gr;
            for (std::int64_t u = 0; u < n_kernels; ++u) MapR<T>(gk + u * cin * cout, cin, cout) += gkc.middleCols(u * cout, cout);
          }
          return;
        }
        for (std::int64_t qi = 0; qi < pl.n_queries; ++qi) {
          const T* go = self.grad.data() + qi * cout;
          for (std::int64_t e = pl.row_ptr[static_cast<std::size_t>(qi)]; e < pl.row_ptr[static_cast<std::size_t>(qi) + 1]; ++e) {
            const auto eu = static_cast<std::size_t>(e);
            const T wgt = static_cast<T>(pl.weight[eu]);
            const std::int64_t s = pl.source[eu];
            const std::int64_t u = pl.kernel_id[eu];
            for (std::int64_t i = 0; i < cin; ++i) {
              const T* kr = kt + (u * cin + i) * cout;
              if (gf) {
                T acc = T(0);
                for (std::int64_t oc = 0; oc < cout; ++oc) acc += go[oc] * kr[oc];
                gf[s * cin + i] += wgt * acc;
              }
              if (gk) {
                const T a = wgt * f[s * cin + i];
                T* gr = gk + (u * cin + i) * cout;
                for (std::int64_t oc = 0; oc < cout; ++oc) gr[oc] += a * go[oc];
              }
            }
          }
        }
      },
      "point_conv");
}

template <typename T>
Var<T> point_conv(const Var<T>& features, const Var<T>& kernels, const PointConvPlan& plan) {
  return point_conv(features, kernels, std::make_shared<const PointConvPlan>(plan));
}

#define ECHO_INSTANTIATE_OPS(T)                                                                               \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> div(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> add_scalar(const Var<T>&, T);                                                               \
  template Var<T> scale(const Var<T>&, T);                                                                    \
  template Var<T> neg(const Var<T>&);                                                                         \
  template Var<T> relu(const Var<T>&);                                                                        \
  template Var<T> gelu(const Var<T>&);                                                                        \
  template Var<T> silu(const Var<T>&);                                                                        \
  template Var<T> tanh(const Var<T>&);                                                                        \
  template Var<T> exp(const Var<T>&);                                                                         \
  template Var<T> square(const Var<T>&);                                                                      \
  template Var<T> sqrt(const Var<T>&);                                                                        \
  template Var<T> sum(const Var<T>&);                                                                         \
  template Var<T> mean(const Var<T>&);                                                                        \
  template Var<T> reshape(const Var<T>&, Shape);                                                              \
  template Var<T> permute(const Var<T>&, const std::vector<int>&);                                            \
  template Var<T> slice(const Var<T>&, int, std::int64_t, std::int64_t);                                      \
  template Var<T> concat(const std::vector<Var<T>>&, int);                                                    \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                                       \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                                        \
  template Var<T> softmax_lastdim(const Var<T>&);                                                             \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                                 \
  template Var<T> group_norm(const Var<T>&, int, const Var<T>&, const Var<T>&, T);                            \
  template Var<T> conv3d(const Var<T>&, const Var<T>&, const Var<T>&, const ConvGeometry&);                   \
  template Var<T> conv_transpose3d(const Var<T>&, const Var<T>&, const Var<T>&, const ConvGeometry&,          \
                                   const std::array<std::int64_t, 3>&);                                       \
  template Var<T> attention(const Var<T>&, const Var<T>&, const Var<T>&, int);                                \
  template Var<T> point_conv(const Var<T>&, const Var<T>&, const PointConvPlan&);                              \
  template Var<T> point_conv(const Var<T>&, const Var<T>&, std::shared_ptr<const PointConvPlan>);

ECHO_INSTANTIATE_OPS(float)
ECHO_INSTANTIATE_OPS(double)

#undef ECHO_INSTANTIATE_OPS

}  // namespace echo
