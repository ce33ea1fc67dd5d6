#pragma once

#include <functional>

#include "echo/processor.hpp"
#include "echo/rng.hpp"

namespace echo {

/// Physical frame mask and its image at latent temporal resolution.
struct TaskMask {
  std::vector<std::uint8_t> physical;
  LatentMask latent;
};

/// Frame t maps to latent index ⌊t/s_t⌋; a latent index is observed iff every
/// frame mapping to it is observed.
LatentMask latent_mask(const std::vector<std::uint8_t>& physical, int s_t, std::int64_t latent_frames);

/// round(0.2·T') latent indices observed, chosen uniformly without replacement.
LatentMask sample_training_mask(std::int64_t latent_frames, Rng& rng);

/// r·z + (1−r)·ε on unobserved time slots, z on observed ones. Tensors are
/// time-major with the latent time index on axis 0.
template <typename T>
Tensor<T> make_path_point(const Tensor<T>& z_clean, const Tensor<T>& eps, double r, const LatentMask& mask);

/// Mean over the elements of unobserved slots of (pred − (z − ε))².
template <typename T>
Var<T> masked_velocity_loss(const Var<T>& pred, const Tensor<T>& z_clean, const Tensor<T>& eps, const LatentMask& mask);

/// Velocity model: (clean observed latent, current state, mask, r) -> velocity.
template <typename T>
using VelocityModel = std::function<Var<T>(const Tensor<T>& z_obs, const Tensor<T>& z_r, const LatentMask& mask, double r)>;

struct FlowDraw {
  LatentMask mask;
  double r = 0.0;
};

/// Observed-slot tokens for a given latent mask.
template <typename T>
using ConditionFn = std::function<Tensor<T>(const LatentMask& mask)>;

/// Draws mask, ε ~ N(0, I) and r ~ U[0,1] and returns the flow-matching loss.
/// `cond` supplies the observed slots seen by the model (z_clean when empty).
template <typename T>
Var<T> fm_loss(const VelocityModel<T>& model, const Tensor<T>& z_clean, Rng& rng, const ConditionFn<T>& cond = {},
               FlowDraw* draw = nullptr);

}  // namespace echo
