#include "echo/compressor.hpp"

#include <numeric>
#include <stdexcept>

namespace echo {

std::int64_t CompressorConfig::width(int level) const {
  std::int64_t w = base_width;
  for (int l = 0; l < level; ++l) w = std::min(max_width, w * 2);
  return std::max(w, base_width);
}

std::vector<BlockSpec> CompressorConfig::blocks() const {
  std::vector<BlockSpec> out;
  int level = 0;
  for (int s = 0; s < spatial_levels; ++s, ++level) {
    out.push_back({BlockKind::compress_space, width(level), width(level + 1)});
    out.push_back({BlockKind::residual, width(level + 1), width(level + 1)});
  }
  if (spatial_levels == 0) out.push_back({BlockKind::residual, width(0), width(0)});
  for (int t = 0; t < temporal_levels; ++t, ++level) {
    if (t > 0) out.push_back({BlockKind::residual, width(level), width(level)});
    out.push_back({BlockKind::compress_time, width(level), width(level + 1)});
  }
  return out;
}

ConvGeometry compress_space_geometry(const Extents3& in, int kernel) {
  ConvGeometry g;
  g.kernel = {1, kernel, kernel};
  g.stride = {1, 2, 2};
  for (int a = 1; a < 3; ++a) {
    g.pad_front[static_cast<std::size_t>(a)] = kernel / 2 + static_cast<int>(in[static_cast<std::size_t>(a)] % 2);
    g.pad_back[static_cast<std::size_t>(a)] = kernel / 2;
  }
  return g;
}

ConvGeometry compress_time_geometry(int kernel) {
  ConvGeometry g;
  g.kernel = {kernel, 1, 1};
  g.stride = {2, 1, 1};
  g.pad_front = {kernel - 1, 0, 0};
  return g;
}

ConvGeometry residual_geometry(int kernel) {
  ConvGeometry g;
  g.kernel = {kernel, kernel, kernel};
  g.pad_front = {kernel - 1, kernel / 2, kernel / 2};
  g.pad_back = {0, kernel / 2, kernel / 2};
  return g;
}

namespace {

Extents3 apply_extents(const ConvGeometry& g, const Extents3& in) {
  return {g.output_extent(0, in[0]), g.output_extent(1, in[1]), g.output_extent(2, in[2])};
}

ConvGeometry geometry_for(BlockKind kind, const Extents3& in, int kernel) {
  return kind == BlockKind::compress_space ? compress_space_geometry(in, kernel) : compress_time_geometry(kernel);
}

int group_count(int groups, std::int64_t channels) { return std::gcd(groups, static_cast<int>(channels)); }

}  // namespace

Extents3 latent_extents(const CompressorConfig& cfg, const Extents3& in) {
  Extents3 e = in;
  for (const auto& b : cfg.blocks())
    if (b.kind != BlockKind::residual) e = apply_extents(geometry_for(b.kind, e, cfg.kernel_size), e);
  return e;
}

double compression_ratio(const CompressorConfig& cfg, std::array<std::int64_t, 2> grid_hw, std::int64_t n_points,
                         std::int64_t n_frames, std::int64_t n_channels) {
  const auto e = latent_extents(cfg, {n_frames, grid_hw[0], grid_hw[1]});
  return static_cast<double>(n_points * n_frames * n_channels) / static_cast<double>(e[0] * e[1] * e[2] * cfg.token_dim);
}

template <typename T>
ResidualBlock<T>::ResidualBlock(ParamStore<T>& store, const std::string& name, std::int64_t in, std::int64_t out,
                                const CompressorConfig& cfg, Rng& rng)
    : groups_(group_count(cfg.groups, in)), kernel_(cfg.kernel_size), channel_mlp_(cfg.channel_mlp) {
  const int k = cfg.kernel_size;
  norm_scale_ = store.create(name + ".norm.scale", Tensor<T>::ones({in}));
  norm_shift_ = store.create(name + ".norm.shift", Tensor<T>({in}));
  conv_.w = store.create(name + ".conv.w", init_fan_in<T>({k, k, k, in, out}, k * k * k * in, rng));
  conv_.b = store.create(name + ".conv.b", Tensor<T>({out}));
  point_ = Linear<T>(store, name + ".point", out, out, rng, /*zero_init=*/true);
  if (in != out) {
    has_proj_ = true;
    proj_ = Linear<T>(store, name + ".proj", in, out, rng);
  }
  if (channel_mlp_) {
    mlp_scale_ = store.create(name + ".mlp_norm.scale", Tensor<T>::ones({out}));
    mlp_shift_ = store.create(name + ".mlp_norm.shift", Tensor<T>({out}));
    mlp_in_ = Linear<T>(store, name + ".mlp.0", out, out, rng);
    mlp_out_ = Linear<T>(store, name + ".mlp.1", out, out, rng, /*zero_init=*/true);
  }
}

template <typename T>
Var<T> ResidualBlock<T>::operator()(const Var<T>& x) const {
  auto h = gelu(group_norm(x, groups_, norm_scale_, norm_shift_, T(1e-5)));
  h = point_(gelu(conv_(h, residual_geometry(kernel_))));
  auto y = add(has_proj_ ? proj_(x) : x, h);
  if (channel_mlp_) {
    const int g = group_count(groups_, y.shape().back());
    y = add(y, mlp_out_(gelu(mlp_in_(group_norm(y, g, mlp_scale_, mlp_shift_, T(1e-5))))));
  }
  return y;
}

template <typename T>
Compressor<T>::Compressor(ParamStore<T>& store, const std::string& name, const CompressorConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.spatial_levels < 0 || cfg.temporal_levels < 0) throw std::invalid_argument("compressor levels must be >= 0");
  if (cfg.kernel_size < 1 || cfg.kernel_size % 2 == 0) throw std::invalid_argument("compressor kernel size must be odd");
  const int k = cfg.kernel_size;
  const auto blocks = cfg.blocks();
  auto make_stage = [&](const BlockSpec& b, const std::string& prefix, bool decoder) {
    Stage s{b.kind, {}, {}};
    if (b.kind == BlockKind::residual) {
      s.res = ResidualBlock<T>(store, prefix, b.in_channels, b.out_channels, cfg, rng);
    } else {
      const Shape ks = b.kind == BlockKind::compress_space ? Shape{1, k, k} : Shape{k, 1, 1};
      const std::int64_t taps = ks[0] * ks[1] * ks[2];
      // Decoder weights are laid out [.., C_out(enc in), C_in(enc out)] for the transposed conv.
      const std::int64_t fan_in = taps * (decoder ? b.out_channels : b.in_channels);
      s.conv.w = store.create(prefix + ".w", init_fan_in<T>({ks[0], ks[1], ks[2], b.in_channels, b.out_channels}, fan_in, rng));
      s.conv.b = store.create(prefix + ".b", Tensor<T>({decoder ? b.in_channels : b.out_channels}));
    }
    return s;
  };
  for (std::size_t i = 0; i < blocks.size(); ++i) enc_.push_back(make_stage(blocks[i], name + ".enc." + std::to_string(i), false));
  const std::int64_t top = blocks.back().out_channels;
  head_scale_ = store.create(name + ".enc.head_norm.scale", Tensor<T>::ones({top}));
  head_shift_ = store.create(name + ".enc.head_norm.shift", Tensor<T>({top}));
  head_ = Linear<T>(store, name + ".enc.head", top, cfg.token_dim, rng);
  dec_in_ = Linear<T>(store, name + ".dec.in", cfg.token_dim, top, rng);
  for (std::size_t i = blocks.size(); i-- > 0;) dec_.push_back(make_stage(blocks[i], name + ".dec." + std::to_string(i), true));
  out_scale_ = store.create(name + ".dec.out_norm.scale", Tensor<T>::ones({cfg.base_width}));
  out_shift_ = store.create(name + ".dec.out_norm.shift", Tensor<T>({cfg.base_width}));
}

template <typename T>
Var<T> Compressor<T>::encode(const Var<T>& x) const {
  if (x.shape().size() != 4 || x.shape()[3] != cfg_.base_width) {
    throw ShapeError("compressor expects [T,H,W," + std::to_string(cfg_.base_width) + "], got " + to_string(x.shape()));
  }
  Var<T> h = x;
  for (const auto& s : enc_) {
    if (s.kind == BlockKind::residual) {
      h = s.res(h);
    } else {
      const Extents3 e{h.dim(0), h.dim(1), h.dim(2)};
      h = s.conv(h, geometry_for(s.kind, e, cfg_.kernel_size));
    }
  }
  const int g = group_count(cfg_.groups, h.shape().back());
  return head_(gelu(group_norm(h, g, head_scale_, head_shift_, T(1e-5))));
}

template <typename T>
Var<T> Compressor<T>::decode(const Var<T>& z, const Extents3& out) const {
  // Replay encoder extents to know each transposed conv's target.
  std::vector<Extents3> inputs;
  Extents3 e = out;
  for (const auto& s : enc_) {
    inputs.push_back(e);
    if (s.kind != BlockKind::residual) e = apply_extents(geometry_for(s.kind, e, cfg_.kernel_size), e);
  }
  if (z.shape().size() != 4 || z.dim(0) != e[0] || z.dim(1) != e[1] || z.dim(2) != e[2] || z.dim(3) != cfg_.token_dim) {
    throw ShapeError("latent " + to_string(z.shape()) + " does not match target extents [" + std::to_string(out[0]) + "," +
                     std::to_string(out[1]) + "," + std::to_string(out[2]) + "]");
  }
  Var<T> h = dec_in_(z);
  for (std::size_t i = 0; i < dec_.size(); ++i) {
    const auto& s = dec_[i];
    const Extents3& target = inputs[enc_.size() - 1 - i];
    if (s.kind == BlockKind::residual) {
      h = s.res(h);
    } else {
      h = s.conv.transpose(h, geometry_for(s.kind, target, cfg_.kernel_size), target);
    }
  }
  const int g = group_count(cfg_.groups, cfg_.base_width);
  return gelu(group_norm(h, g, out_scale_, out_shift_, T(1e-5)));
}

template class ResidualBlock<float>;
template class ResidualBlock<double>;
template class Compressor<float>;
template class Compressor<double>;

}  // namespace echo
