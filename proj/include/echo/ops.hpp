#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "echo/autograd.hpp"

namespace echo {

template <typename T>
Var<T> constant(Tensor<T> value) {
  return Var<T>(std::move(value), false);
}

// Elementwise, broadcasting under trailing-dimension alignment.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> div(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> add_scalar(const Var<T>& a, T s);
template <typename T> Var<T> scale(const Var<T>& a, T s);

template <typename T> Var<T> neg(const Var<T>& a);
template <typename T> Var<T> relu(const Var<T>& a);
/// Exact (erf) GELU.
template <typename T> Var<T> gelu(const Var<T>& a);
template <typename T> Var<T> silu(const Var<T>& a);
template <typename T> Var<T> tanh(const Var<T>& a);
template <typename T> Var<T> exp(const Var<T>& a);
template <typename T> Var<T> square(const Var<T>& a);
template <typename T> Var<T> sqrt(const Var<T>& a);

template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);

template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);
template <typename T> Var<T> permute(const Var<T>& a, const std::vector<int>& perm);
template <typename T> Var<T> slice(const Var<T>& a, int axis, std::int64_t start, std::int64_t length);
template <typename T> Var<T> concat(const std::vector<Var<T>>& parts, int axis);

/// a[..., m, k] · b[..., k, n] with broadcast batch dimensions.
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// x[..., in] · w[in, out] + bias[out]; `bias` may be undefined.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& bias);

template <typename T> Var<T> softmax_lastdim(const Var<T>& x);
/// Normalizes over the last dimension; `scale`/`shift` of shape [C] may be undefined.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& scale, const Var<T>& shift, T eps);
/// x[outer, ..., C]: statistics per (outer index, channel group) over all inner
/// positions. With outer = time this keeps normalization causal.
template <typename T>
Var<T> group_norm(const Var<T>& x, int groups, const Var<T>& scale, const Var<T>& shift, T eps);

/// Geometry of a strided 3D convolution over [T, H, W, C] channels-last tensors.
struct ConvGeometry {
  std::array<int, 3> kernel{1, 1, 1};
  std::array<int, 3> stride{1, 1, 1};
  std::array<int, 3> pad_front{0, 0, 0};
  std::array<int, 3> pad_back{0, 0, 0};

  std::int64_t output_extent(int axis, std::int64_t input) const;
};

/// x[T,H,W,Cin] ⋆ w[kt,kh,kw,Cin,Cout] (+ bias[Cout]) -> [To,Ho,Wo,Cout].
template <typename T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, const ConvGeometry& geom);

/// Adjoint of conv3d: x[To,Ho,Wo,Cin] with w[kt,kh,kw,Cout,Cin] -> [T,H,W,Cout],
/// where `geom` maps the output extents `out_extents` onto the input extents.
template <typename T>
Var<T> conv_transpose3d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, const ConvGeometry& geom,
                        const std::array<std::int64_t, 3>& out_extents);

/// Full multi-head self-attention core: softmax(Q Kᵀ/√d_h) V per head.
/// q, k, v: [N, H]; heads split H into contiguous blocks.
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int heads);

/// Sparse query/source pairing for continuous convolutions. Entries of query q
/// live in [row_ptr[q], row_ptr[q+1]); each names a source row, a kernel row
/// and a scalar weight (normalization folded in).
struct PointConvPlan {
  std::int64_t n_queries = 0;
  std::int64_t n_sources = 0;
  std::vector<std::int64_t> row_ptr{0};
  std::vector<std::int64_t> source;
  std::vector<std::int64_t> kernel_id;
  std::vector<double> weight;

  std::int64_t n_pairs() const { return static_cast<std::int64_t>(source.size()); }
};

/// out[q, o] = Σ_e weight_e Σ_i features[source_e, i] · kernels[kernel_id_e, i, o].
/// features: [n_sources, Cin]; kernels: [U, Cin, Cout].
template <typename T>
Var<T> point_conv(const Var<T>& features, const Var<T>& kernels, const PointConvPlan& plan);
/// Same, sharing the plan with the backward pass instead of copying it.
template <typename T>
Var<T> point_conv(const Var<T>& features, const Var<T>& kernels, std::shared_ptr<const PointConvPlan> plan);

}  // namespace echo
