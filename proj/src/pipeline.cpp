#include "echo/pipeline.hpp"

#include <algorithm>

namespace echo {

std::vector<std::uint8_t> frames_for_latent_mask(const LatentMask& mask, int s_t, std::int64_t n_frames) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(n_frames), 0);
  for (std::int64_t t = 0; t < n_frames; ++t) {
    const auto j = static_cast<std::size_t>(t / s_t);
    out[static_cast<std::size_t>(t)] = j < mask.size() && mask[j];
  }
  return out;
}

template <typename T>
Trajectory run_task(const EchoModel<T>& model, const Trajectory& observed, const GenerateOptions& opt, const PointSet& queries,
                    Rng& rng, TaskMask* used_mask) {
  const auto n = static_cast<std::int64_t>(observed.n_frames);
  if (static_cast<std::int64_t>(observed.n_channels) != model.config().channels)
    throw ShapeError("trajectory has " + std::to_string(observed.n_channels) + " channels, model expects " +
                     std::to_string(model.config().channels));
  auto spec = opt.task;
  spec.n_frames = n;
  const auto latent = model.latent_shape(n);
  auto mask = build_task_mask(spec, model.config().time_stride(), latent[0]);
  if (spec.kind == TaskKind::ivp && opt.ivp_encode_per_frame) mask.latent[0] = 1;

  NoGradGuard no_grad;
  Tensor<T> z_obs(Shape{latent[0], latent[1], latent[2], model.config().comp.token_dim});
  const bool any_observed = std::find(mask.latent.begin(), mask.latent.end(), 1) != mask.latent.end();
  if (any_observed) {
    std::vector<FrameObs<T>> frames;
    for (std::int64_t t = 0; t < n; ++t) frames.push_back(frame_obs<T>(observed, t));
    // Same frame selection as training (frames mapping to observed latent
    // indices), restricted to what was actually observed.
    auto cond = frames_for_latent_mask(mask.latent, model.config().time_stride(), n);
    for (std::size_t t = 0; t < cond.size(); ++t) cond[t] = cond[t] && mask.physical[t];
    z_obs = model.standardize_latent(model.encode(frames, cond).value());
  }
  auto z0 = randn<T>(z_obs.shape(), rng);
  const std::vector<double> gamma(observed.params.begin(), observed.params.end());
  VelocityField<T> field = [&](const Tensor<T>& z, double r) { return model.velocity(z_obs, z, mask.latent, r, gamma).value(); };
  auto z = integrate(field, z0, z_obs, mask.latent, opt.solver);
  auto u = model.denormalize_values(model.decode(constant(model.destandardize_latent(z)), n, queries).value());

  Trajectory out;
  out.dim = static_cast<std::uint32_t>(queries.dim);
  out.n_points = static_cast<std::uint32_t>(queries.size());
  out.n_frames = static_cast<std::uint32_t>(n);
  out.n_channels = observed.n_channels;
  out.coords.assign(queries.coords.begin(), queries.coords.end());
  out.values.assign(u.values().begin(), u.values().end());
  out.params = observed.params;
  out.param_names = observed.param_names;
  if (used_mask) *used_mask = mask;
  return out;
}

template <typename T>
Trajectory rollout_segments(const EchoModel<T>& model, const Trajectory& init, std::int64_t window, std::int64_t n_segments,
                            const GenerateOptions& opt, Rng& rng) {
  const auto ctx = opt.task.context;
  if (n_segments < 1) throw std::invalid_argument("rollout needs at least one segment");
  if (ctx < 1 || ctx >= window) throw std::invalid_argument("context must lie in [1, window)");
  if (init.n_frames < ctx) throw std::invalid_argument("rollout init has fewer frames than the context");
  auto gen = opt;
  gen.task.kind = TaskKind::forward;
  const auto frame_size = static_cast<std::size_t>(init.n_points) * init.n_channels;

  Trajectory out = init.frames(0, ctx);
  const auto pts = init.points();
  for (std::int64_t s = 0; s < n_segments; ++s) {
    // Window whose first L frames are the latest known ones; the rest is ignored.
    Trajectory win = out.frames(static_cast<std::int64_t>(out.n_frames) - ctx, ctx);
    win.n_frames = static_cast<std::uint32_t>(window);
    win.values.resize(frame_size * static_cast<std::size_t>(window), 0.0f);
    auto seg = run_task(model, win, gen, pts, rng);
    out.values.insert(out.values.end(), seg.values.begin() + static_cast<std::ptrdiff_t>(frame_size * ctx), seg.values.end());
    out.n_frames += static_cast<std::uint32_t>(window - ctx);
  }
  return out;
}

template Trajectory run_task<float>(const EchoModel<float>&, const Trajectory&, const GenerateOptions&, const PointSet&, Rng&,
                                    TaskMask*);
template Trajectory run_task<double>(const EchoModel<double>&, const Trajectory&, const GenerateOptions&, const PointSet&, Rng&,
                                     TaskMask*);
template Trajectory rollout_segments<float>(const EchoModel<float>&, const Trajectory&, std::int64_t, std::int64_t,
                                            const GenerateOptions&, Rng&);
template Trajectory rollout_segments<double>(const EchoModel<double>&, const Trajectory&, std::int64_t, std::int64_t,
                                             const GenerateOptions&, Rng&);

}  // namespace echo
