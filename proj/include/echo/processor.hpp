#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echo/compressor.hpp"
#include "echo/nn.hpp"

namespace echo {

using LatentMask = std::vector<std::uint8_t>;  // one flag per latent time index

struct ProcessorConfig {
  int depth = 8;
  std::int64_t hidden = 256;
  int heads = 8;
  int mlp_ratio = 2;
  std::int64_t token_dim = 32;
  bool mask_channel = true;
  // PDE-parameter conditioning; standardized with these statistics.
  std::vector<double> gamma_mean;
  std::vector<double> gamma_std;

  std::int64_t n_params() const { return static_cast<std::int64_t>(gamma_mean.size()); }
};

/// Per-token processor input: observed time slots carry z_obs, the others
/// z_noised; a trailing mask bit (1 = observed) is appended when requested.
/// z tensors are [T', H', W', d]; result is [T'·H'·W', d (+1)], time-major.
template <typename T>
Tensor<T> assemble_input(const Tensor<T>& z_obs, const Tensor<T>& z_noised, const LatentMask& mask, bool mask_channel);

/// Factorized sinusoidal embedding: the first half of the channels encodes the
/// spatial (row, column) position, the second half the latent time index.
template <typename T>
Tensor<T> spacetime_embedding(const Extents3& latent, std::int64_t width);

/// Single-stream DiT with AdaLN-Zero conditioning on r and γ.
template <typename T>
class Processor {
 public:
  Processor() = default;
  Processor(ParamStore<T>& store, const std::string& name, const ProcessorConfig& cfg, Rng& rng);

  const ProcessorConfig& config() const { return cfg_; }

  /// Conditioning vector c(r, γ) of width `hidden`.
  Var<T> condition(double r, const std::vector<double>& gamma) const;
  /// Per-block modulation (shift₁, scale₁, gate₁, shift₂, scale₂, gate₂), each [hidden].
  std::vector<Var<T>> modulation(int block, const Var<T>& c) const;

  /// Velocity tokens [N, d] for assembled input tokens [N, d (+1)].
  Var<T> forward(const Tensor<T>& tokens, const Extents3& latent, double r, const std::vector<double>& gamma) const;

  /// Velocity [T', H', W', d] at state `z_state` with clean observed slots `z_obs`.
  Var<T> velocity(const Tensor<T>& z_obs, const Tensor<T>& z_state, const LatentMask& mask, double r,
                  const std::vector<double>& gamma) const;

 private:
  struct Block {
    Linear<T> mod, qkv, out, fc1, fc2;
  };
  ProcessorConfig cfg_;
  Linear<T> embed_in_;
  Mlp<T> r_mlp_, gamma_mlp_;
  std::vector<Block> blocks_;
  Linear<T> final_mod_, final_;
};

}  // namespace echo
