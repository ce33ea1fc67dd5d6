#include "echo/processor.hpp"

#include <cmath>
#include <stdexcept>

namespace echo {

namespace {

constexpr std::int64_t kRFeatures = 64;

}  // namespace

template <typename T>
Tensor<T> assemble_input(const Tensor<T>& z_obs, const Tensor<T>& z_noised, const LatentMask& mask, bool mask_channel) {
  if (z_obs.shape() != z_noised.shape() || z_obs.rank() != 4) {
    throw ShapeError("assemble_input: latent shapes " + to_string(z_obs.shape()) + " and " + to_string(z_noised.shape()));
  }
  const std::int64_t tp = z_obs.dim(0), d = z_obs.dim(3);
  if (static_cast<std::int64_t>(mask.size()) != tp) {
    throw ShapeError("assemble_input: mask length " + std::to_string(mask.size()) + " != T' = " + std::to_string(tp));
  }
  const std::int64_t per = z_obs.dim(1) * z_obs.dim(2);
  const std::int64_t width = d + (mask_channel ? 1 : 0);
  Tensor<T> out(Shape{tp * per, width});
  for (std::int64_t j = 0; j < tp; ++j) {
    const Tensor<T>& src = mask[static_cast<std::size_t>(j)] ? z_obs : z_noised;
    for (std::int64_t m = 0; m < per; ++m) {
      const std::int64_t row = j * per + m;
      for (std::int64_t c = 0; c < d; ++c) out[row * width + c] = src[row * d + c];
      if (mask_channel) out[row * width + d] = mask[static_cast<std::size_t>(j)] ? T(1) : T(0);
    }
  }
  return out;
}

template <typename T>
Tensor<T> spacetime_embedding(const Extents3& latent, std::int64_t width) {
  const std::int64_t quarter = width / 4;
  const std::int64_t half_t = width - 2 * quarter;
  std::vector<double> hs, ws, ts;
  for (std::int64_t j = 0; j < latent[0]; ++j)
    for (std::int64_t h = 0; h < latent[1]; ++h)
      for (std::int64_t w = 0; w < latent[2]; ++w) {
        ts.push_back(static_cast<double>(j));
        hs.push_back(static_cast<double>(h));
        ws.push_back(static_cast<double>(w));
      }
  const auto eh = sinusoidal_embedding<T>(hs, quarter, 100.0);
  const auto ew = sinusoidal_embedding<T>(ws, quarter, 100.0);
  const auto et = sinusoidal_embedding<T>(ts, half_t, 100.0);
  const auto n = static_cast<std::int64_t>(ts.size());
  Tensor<T> out(Shape{n, width});
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t c = 0; c < quarter; ++c) {
      out[i * width + c] = eh[i * quarter + c];
      out[i * width + quarter + c] = ew[i * quarter + c];
    }
    for (std::int64_t c = 0; c < half_t; ++c) out[i * width + 2 * quarter + c] = et[i * half_t + c];
  }
  return out;
}

template <typename T>
Processor<T>::Processor(ParamStore<T>& store, const std::string& name, const ProcessorConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.hidden % cfg.heads != 0) throw std::invalid_argument("processor hidden width must be divisible by heads");
  if (cfg.gamma_std.size() != cfg.gamma_mean.size()) throw std::invalid_argument("gamma statistics length mismatch");
  const std::int64_t h = cfg.hidden;
  embed_in_ = Linear<T>(store, name + ".embed", cfg.token_dim + (cfg.mask_channel ? 1 : 0), h, rng);
  r_mlp_ = Mlp<T>(store, name + ".r_embed", {kRFeatures, h, h}, rng);
  if (cfg.n_params() > 0) gamma_mlp_ = Mlp<T>(store, name + ".gamma_embed", {cfg.n_params(), h, h}, rng);
  for (int b = 0; b < cfg.depth; ++b) {
    const std::string p = name + ".block" + std::to_string(b);
    Block blk;
    blk.mod = Linear<T>(store, p + ".adaln", h, 6 * h, rng, /*zero_init=*/true);
    blk.qkv = Linear<T>(store, p + ".qkv", h, 3 * h, rng);
    blk.out = Linear<T>(store, p + ".attn_out", h, h, rng);
    blk.fc1 = Linear<T>(store, p + ".mlp.0", h, cfg.mlp_ratio * h, rng);
    blk.fc2 = Linear<T>(store, p + ".mlp.1", cfg.mlp_ratio * h, h, rng);
    blocks_.push_back(std::move(blk));
  }
  final_mod_ = Linear<T>(store, name + ".final_adaln", h, 2 * h, rng, /*zero_init=*/true);
  final_ = Linear<T>(store, name + ".final", h, cfg.token_dim, rng);
}

template <typename T>
Var<T> Processor<T>::condition(double r, const std::vector<double>& gamma) const {
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("denoising index r must lie in [0,1], got " + std::to_string(r));
  auto feats = sinusoidal_embedding<T>({r * 1000.0}, kRFeatures);
  Var<T> c = r_mlp_(constant(feats.reshaped({kRFeatures})));
  if (cfg_.n_params() > 0) {
    if (static_cast<std::int64_t>(gamma.size()) != cfg_.n_params()) {
      throw ShapeError("expected " + std::to_string(cfg_.n_params()) + " PDE parameters, got " + std::to_string(gamma.size()));
    }
    Tensor<T> g(Shape{cfg_.n_params()});
    for (std::int64_t i = 0; i < cfg_.n_params(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      g[i] = static_cast<T>((gamma[k] - cfg_.gamma_mean[k]) / cfg_.gamma_std[k]);
    }
    c = add(c, gamma_mlp_(constant(std::move(g))));
  }
  return c;
}

template <typename T>
std::vector<Var<T>> Processor<T>::modulation(int block, const Var<T>& c) const {
  auto mod = blocks_[static_cast<std::size_t>(block)].mod(silu(c));
  std::vector<Var<T>> parts;
  for (int k = 0; k < 6; ++k) parts.push_back(slice(mod, 0, k * cfg_.hidden, cfg_.hidden));
  return parts;
}

template <typename T>
Var<T> Processor<T>::forward(const Tensor<T>& tokens, const Extents3& latent, double r, const std::vector<double>& gamma) const {
  const std::int64_t n = latent[0] * latent[1] * latent[2];
  const std::int64_t width = cfg_.token_dim + (cfg_.mask_channel ? 1 : 0);
  if (tokens.rank() != 2 || tokens.dim(0) != n || tokens.dim(1) != width) {
    throw ShapeError("processor tokens " + to_string(tokens.shape()) + " do not match [" + std::to_string(n) + "," +
                     std::to_string(width) + "]");
  }
  const T eps = T(1e-6);
  auto c = condition(r, gamma);
  auto x = add(embed_in_(constant(tokens)), constant(spacetime_embedding<T>(latent, cfg_.hidden)));
  auto modulate = [&](const Var<T>& h, const Var<T>& shift, const Var<T>& scale) {
    return add(mul(layer_norm(h, Var<T>(), Var<T>(), eps), add_scalar(scale, T(1))), shift);
  };
  for (int b = 0; b < cfg_.depth; ++b) {
    const auto& blk = blocks_[static_cast<std::size_t>(b)];
    auto m = modulation(b, c);
    auto qkv = blk.qkv(modulate(x, m[0], m[1]));
    auto q = slice(qkv, 1, 0, cfg_.hidden);
    auto k = slice(qkv, 1, cfg_.hidden, cfg_.hidden);
    auto v = slice(qkv, 1, 2 * cfg_.hidden, cfg_.hidden);
    x = add(x, mul(blk.out(attention(q, k, v, cfg_.heads)), m[2]));
    x = add(x, mul(blk.fc2(gelu(blk.fc1(modulate(x, m[3], m[4])))), m[5]));
  }
  auto fm = final_mod_(silu(c));
  return final_(modulate(x, slice(fm, 0, 0, cfg_.hidden), slice(fm, 0, cfg_.hidden, cfg_.hidden)));
}

template <typename T>
Var<T> Processor<T>::velocity(const Tensor<T>& z_obs, const Tensor<T>& z_state, const LatentMask& mask, double r,
                              const std::vector<double>& gamma) const {
  const Extents3 latent{z_state.dim(0), z_state.dim(1), z_state.dim(2)};
  auto v = forward(assemble_input(z_obs, z_state, mask, cfg_.mask_channel), latent, r, gamma);
  return reshape(v, z_state.shape());
}

#define ECHO_INSTANTIATE_PROCESSOR(T)                                                                  \
  template Tensor<T> assemble_input(const Tensor<T>&, const Tensor<T>&, const LatentMask&, bool);    \
  template Tensor<T> spacetime_embedding(const Extents3&, std::int64_t);                              \
  template class Processor<T>;

ECHO_INSTANTIATE_PROCESSOR(float)
ECHO_INSTANTIATE_PROCESSOR(double)

}  // namespace echo
