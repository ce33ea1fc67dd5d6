#pragma once

#include <cstdint>
#include <vector>

#include "echo/compressor.hpp"
#include "echo/config.hpp"
#include "echo/contconv.hpp"
#include "echo/datagen.hpp"
#include "echo/processor.hpp"

namespace echo {

struct ModelConfig {
  std::int64_t channels = 2;
  std::int64_t grid = 16;            // contconv grid nodes per axis
  double enc_radius_cells = 1.0;     // receptive-field half-widths in grid spacings
  double dec_radius_cells = 1.5;
  std::int64_t kernel_hidden = 64;
  std::int64_t enc_max_neighbors = 64;
  std::int64_t dec_max_neighbors = 16;
  ConvNormalize normalize = ConvNormalize::density;
  CompressorConfig comp;
  ProcessorConfig proc;

  /// Architecture keys of `run`; γ statistics start as (0, 1) per parameter.
  static ModelConfig from_run(const RunConfig& run, std::int64_t channels, std::int64_t n_params);
  int time_stride() const { return 1 << comp.temporal_levels; }
  RegularGrid grid_nodes() const { return RegularGrid({grid, grid}); }
};

/// Per-channel affine maps between physical values and network units.
struct Normalizer {
  std::vector<double> field_mean, field_std;    // physical channels
  std::vector<double> latent_mean, latent_std;  // token channels
};

/// One observed frame: values [N, C] in physical units at `points`.
template <typename T>
struct FrameObs {
  PointSet points;
  Tensor<T> values;
};

/// Frame `frame` of `t` restricted to `ids` (all points when empty).
template <typename T>
FrameObs<T> frame_obs(const Trajectory& t, std::int64_t frame, const std::vector<std::int64_t>& ids = {});

/// Frames [start, start + count) of `t` at every point.
template <typename T>
std::vector<FrameObs<T>> trajectory_frames(const Trajectory& t, std::int64_t start, std::int64_t count);

/// Values [count, n_points, C] of frames [start, start + count), normalized.
template <typename T>
Tensor<T> normalized_frames(const Trajectory& t, std::int64_t start, std::int64_t count, const Normalizer& norm);

/// Encoder contconv + compressor + processor + decoder contconv sharing one
/// parameter store ("ae." and "proc." prefixes).
template <typename T>
class EchoModel {
 public:
  EchoModel(const ModelConfig& cfg, std::uint64_t seed);
  EchoModel(const EchoModel&) = delete;
  EchoModel& operator=(const EchoModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& store() { return store_; }
  const ParamStore<T>& store() const { return store_; }
  Normalizer& normalizer() { return norm_; }
  const Normalizer& normalizer() const { return norm_; }

  std::vector<Var<T>> autoencoder_params() const { return store_.with_prefix("ae."); }
  std::vector<Var<T>> processor_params() const { return store_.with_prefix("proc."); }

  /// Latent [T', H', W', d] (not standardized) of the given frames. Frames
  /// with frame_mask 0 enter as zeros in normalized units (u ⊙ m).
  Var<T> encode(const std::vector<FrameObs<T>>& frames, const std::vector<std::uint8_t>& frame_mask = {}) const;
  /// Normalized values [n_frames, Q, C] at `queries`.
  Var<T> decode(const Var<T>& z, std::int64_t n_frames, const PointSet& queries) const;

  Extents3 latent_shape(std::int64_t n_frames) const;

  Tensor<T> normalize_values(const Tensor<T>& v) const;  // trailing axis = channel
  Tensor<T> denormalize_values(const Tensor<T>& v) const;
  Tensor<T> standardize_latent(const Tensor<T>& z) const;
  Tensor<T> destandardize_latent(const Tensor<T>& z) const;

  /// Processor velocity on standardized latents; γ in physical units.
  Var<T> velocity(const Tensor<T>& z_obs, const Tensor<T>& z_state, const LatentMask& mask, double r,
                  const std::vector<double>& gamma) const {
    return proc_.velocity(z_obs, z_state, mask, r, gamma);
  }

 private:
  ModelConfig cfg_;
  ParamStore<T> store_;
  Normalizer norm_;
  ContConv<T> enc_conv_, dec_conv_;
  Compressor<T> comp_;
  Processor<T> proc_;
};

}  // namespace echo
