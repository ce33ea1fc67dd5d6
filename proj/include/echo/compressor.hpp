#pragma once

#include <array>
#include <string>
#include <vector>

#include "echo/nn.hpp"
#include "echo/ops.hpp"

namespace echo {

using Extents3 = std::array<std::int64_t, 3>;  // [T, H, W]

enum class BlockKind { compress_space, compress_time, residual };

struct BlockSpec {
  BlockKind kind;
  std::int64_t in_channels;
  std::int64_t out_channels;
};

struct CompressorConfig {
  std::int64_t base_width = 32;  // channels entering the compressor
  std::int64_t max_width = 128;
  int spatial_levels = 2;
  int temporal_levels = 1;
  std::int64_t token_dim = 32;
  int kernel_size = 3;
  int groups = 8;
  bool channel_mlp = true;  // stands in for a global-context layer

  /// Channel width after `level` compress blocks (doubling, capped).
  std::int64_t width(int level) const;
  /// Encoder block sequence, excluding the final projection to token_dim.
  std::vector<BlockSpec> blocks() const;
};

/// Strided conv over the two spatial axes; odd extents are padded on the low side.
ConvGeometry compress_space_geometry(const Extents3& in, int kernel);
/// Causal conv over time: left padding k−1, stride 2.
ConvGeometry compress_time_geometry(int kernel);
/// Causal 3D conv used inside residual blocks (time: left pad k−1; space: k//2 both sides).
ConvGeometry residual_geometry(int kernel);

/// Extents after the encoder for input extents `in`.
Extents3 latent_extents(const CompressorConfig& cfg, const Extents3& in);

/// (n_points · n_frames · n_channels) / (M' · T' · d) for a contconv grid of
/// extents `grid_hw` feeding the compressor.
double compression_ratio(const CompressorConfig& cfg, std::array<std::int64_t, 2> grid_hw, std::int64_t n_points,
                         std::int64_t n_frames, std::int64_t n_channels);

template <typename T>
struct ConvLayer {
  Var<T> w, b;
  Var<T> operator()(const Var<T>& x, const ConvGeometry& g) const { return conv3d(x, w, b, g); }
  Var<T> transpose(const Var<T>& x, const ConvGeometry& g, const Extents3& out) const {
    return conv_transpose3d(x, w, b, g, out);
  }
};

/// x + F(x), F = GN → GELU → causal conv → GELU → pointwise linear, followed by
/// x + MLP(GN(x)) over channels.
template <typename T>
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(ParamStore<T>& store, const std::string& name, std::int64_t in, std::int64_t out, const CompressorConfig& cfg,
                Rng& rng);
  Var<T> operator()(const Var<T>& x) const;

 private:
  int groups_ = 8;
  int kernel_ = 3;
  Var<T> norm_scale_, norm_shift_;
  ConvLayer<T> conv_;
  Linear<T> point_;
  Linear<T> proj_;
  bool has_proj_ = false;
  bool channel_mlp_ = true;
  Var<T> mlp_scale_, mlp_shift_;
  Linear<T> mlp_in_, mlp_out_;
};

/// Hierarchical causal compressor and its transposed-convolution mirror.
template <typename T>
class Compressor {
 public:
  Compressor() = default;
  Compressor(ParamStore<T>& store, const std::string& name, const CompressorConfig& cfg, Rng& rng);

  const CompressorConfig& config() const { return cfg_; }

  /// [T, H, W, base_width] -> [T', H', W', token_dim].
  Var<T> encode(const Var<T>& x) const;
  /// [T', H', W', token_dim] -> [T, H, W, base_width] for target extents `out`.
  Var<T> decode(const Var<T>& z, const Extents3& out) const;

 private:
  struct Stage {
    BlockKind kind;
    ConvLayer<T> conv;
    ResidualBlock<T> res;
  };
  CompressorConfig cfg_;
  std::vector<Stage> enc_, dec_;
  Var<T> head_scale_, head_shift_;
  Linear<T> head_;
  Linear<T> dec_in_;
  Var<T> out_scale_, out_shift_;
};

}  // namespace echo
