#include "echo/flowmatch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace echo {

LatentMask latent_mask(const std::vector<std::uint8_t>& physical, int s_t, std::int64_t latent_frames) {
  if (s_t < 1) throw std::invalid_argument("temporal stride must be >= 1");
  LatentMask out(static_cast<std::size_t>(latent_frames), 1);
  std::vector<std::uint8_t> hit(static_cast<std::size_t>(latent_frames), 0);
  for (std::size_t t = 0; t < physical.size(); ++t) {
    const auto j = static_cast<std::int64_t>(t) / s_t;
    if (j >= latent_frames) throw std::invalid_argument("frame " + std::to_string(t) + " maps past the latent horizon");
    hit[static_cast<std::size_t>(j)] = 1;
    if (!physical[t]) out[static_cast<std::size_t>(j)] = 0;
  }
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = out[j] && hit[j];
  return out;
}

LatentMask sample_training_mask(std::int64_t latent_frames, Rng& rng) {
  if (latent_frames < 1) throw std::invalid_argument("latent frame count must be >= 1");
  const auto n_obs = static_cast<std::int64_t>(std::llround(0.2 * static_cast<double>(latent_frames)));
  std::vector<std::int64_t> idx(static_cast<std::size_t>(latent_frames));
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first n_obs entries form a uniform subset.
  for (std::int64_t i = 0; i < n_obs; ++i) {
    std::uniform_int_distribution<std::int64_t> pick(i, latent_frames - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  LatentMask mask(static_cast<std::size_t>(latent_frames), 0);
  for (std::int64_t i = 0; i < n_obs; ++i) mask[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 1;
  return mask;
}

namespace {

std::int64_t slot_size(const Shape& s, const LatentMask& mask) {
  if (s.empty() || s[0] != static_cast<std::int64_t>(mask.size())) {
    throw ShapeError("mask length " + std::to_string(mask.size()) + " does not match leading extent of " + to_string(s));
  }
  return numel(s) / s[0];
}

}  // namespace

template <typename T>
Tensor<T> make_path_point(const Tensor<T>& z_clean, const Tensor<T>& eps, double r, const LatentMask& mask) {
  if (z_clean.shape() != eps.shape()) throw ShapeError("path point: shapes " + to_string(z_clean.shape()) + " and " + to_string(eps.shape()));
  const std::int64_t per = slot_size(z_clean.shape(), mask);
  Tensor<T> out = z_clean;
  const T a = static_cast<T>(r), b = static_cast<T>(1.0 - r);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j]) continue;
    for (std::int64_t i = static_cast<std::int64_t>(j) * per; i < static_cast<std::int64_t>(j + 1) * per; ++i)
      out[i] = a * z_clean[i] + b * eps[i];
  }
  return out;
}

template <typename T>
Var<T> masked_velocity_loss(const Var<T>& pred, const Tensor<T>& z_clean, const Tensor<T>& eps, const LatentMask& mask) {
  if (pred.shape() != z_clean.shape()) throw ShapeError("velocity " + to_string(pred.shape()) + " vs latent " + to_string(z_clean.shape()));
  const std::int64_t per = slot_size(z_clean.shape(), mask);
  const auto unobserved = std::count(mask.begin(), mask.end(), std::uint8_t{0});
  Tensor<T> target(z_clean.shape());
  Tensor<T> weight(z_clean.shape());
  const T w = unobserved > 0 ? T(1) / static_cast<T>(unobserved * per) : T(0);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    if (mask[j]) continue;
    for (std::int64_t i = static_cast<std::int64_t>(j) * per; i < static_cast<std::int64_t>(j + 1) * per; ++i) {
      target[i] = z_clean[i] - eps[i];
      weight[i] = w;
    }
  }
  return sum(mul(square(sub(pred, constant(std::move(target)))), constant(std::move(weight))));
}

template <typename T>
Var<T> fm_loss(const VelocityModel<T>& model, const Tensor<T>& z_clean, Rng& rng, const ConditionFn<T>& cond, FlowDraw* draw) {
  const LatentMask mask = sample_training_mask(z_clean.dim(0), rng);
  const Tensor<T> eps = randn<T>(z_clean.shape(), rng);
  const double r = uniform01(rng);
  if (draw) *draw = {mask, r};
  Tensor<T> state = make_path_point(z_clean, eps, r, mask);
  const Tensor<T> obs = cond ? cond(mask) : z_clean;
  if (obs.shape() != z_clean.shape()) throw ShapeError("conditioning latent " + to_string(obs.shape()) + " vs " + to_string(z_clean.shape()));
  const std::int64_t per = z_clean.numel() / z_clean.dim(0);
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j])
      for (std::int64_t i = static_cast<std::int64_t>(j) * per; i < static_cast<std::int64_t>(j + 1) * per; ++i) state[i] = obs[i];
  return masked_velocity_loss(model(obs, state, mask, r), z_clean, eps, mask);
}

#define ECHO_INSTANTIATE_FM(T)                                                                                  \
  template Tensor<T> make_path_point(const Tensor<T>&, const Tensor<T>&, double, const LatentMask&);           \
  template Var<T> masked_velocity_loss(const Var<T>&, const Tensor<T>&, const Tensor<T>&, const LatentMask&); \
  template Var<T> fm_loss(const VelocityModel<T>&, const Tensor<T>&, Rng&, const ConditionFn<T>&, FlowDraw*);

ECHO_INSTANTIATE_FM(float)
ECHO_INSTANTIATE_FM(double)

}  // namespace echo
