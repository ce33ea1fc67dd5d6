#include "echo/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace echo {

SolverMethod parse_solver(const std::string& s) {
  if (s == "euler") return SolverMethod::euler;
  if (s == "midpoint") return SolverMethod::midpoint;
  if (s == "rk4") return SolverMethod::rk4;
  throw std::invalid_argument("solver must be euler, midpoint or rk4, got " + s);
}

std::string to_string(SolverMethod m) {
  switch (m) {
    case SolverMethod::euler: return "euler";
    case SolverMethod::midpoint: return "midpoint";
    case SolverMethod::rk4: return "rk4";
  }
  return "?";
}

namespace {

template <typename T>
Tensor<T> axpy(const Tensor<T>& z, double h, const Tensor<T>& k) {
  Tensor<T> out = z;
  const T a = static_cast<T>(h);
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += a * k[i];
  return out;
}

template <typename T>
void clamp(Tensor<T>& z, const Tensor<T>& z_obs, const LatentMask& mask) {
  if (mask.empty()) return;
  const std::int64_t per = z.numel() / static_cast<std::int64_t>(mask.size());
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j])
      for (std::int64_t i = static_cast<std::int64_t>(j) * per; i < static_cast<std::int64_t>(j + 1) * per; ++i) z[i] = z_obs[i];
}

}  // namespace

template <typename T>
Tensor<T> integrate(const VelocityField<T>& v, Tensor<T> z, const Tensor<T>& z_obs, const LatentMask& mask,
                    const SolverConfig& solver) {
  if (solver.steps < 1) throw std::invalid_argument("solver steps must be >= 1");
  if (!mask.empty() && (z.rank() == 0 || z.dim(0) != static_cast<std::int64_t>(mask.size()) || z_obs.shape() != z.shape())) {
    throw ShapeError("integrate: mask/observation shapes do not match state " + to_string(z.shape()));
  }
  const double h = 1.0 / solver.steps;
  if (solver.clamp_observed) clamp(z, z_obs, mask);
  for (int s = 0; s < solver.steps; ++s) {
    const double r = s * h;
    switch (solver.method) {
      case SolverMethod::euler:
        z = axpy(z, h, v(z, r));
        break;
      case SolverMethod::midpoint:
        z = axpy(z, h, v(axpy(z, h / 2, v(z, r)), r + h / 2));
        break;
      case SolverMethod::rk4: {
        const auto k1 = v(z, r);
        const auto k2 = v(axpy(z, h / 2, k1), r + h / 2);
        const auto k3 = v(axpy(z, h / 2, k2), r + h / 2);
        const auto k4 = v(axpy(z, h, k3), r + h);
        Tensor<T> next = z;
        for (std::int64_t i = 0; i < z.numel(); ++i)
          next[i] += static_cast<T>(h) * ((k1[i] + T(2) * k2[i] + T(2) * k3[i] + k4[i]) / T(6));
        z = std::move(next);
        break;
      }
    }
    if (solver.clamp_observed) clamp(z, z_obs, mask);
    for (auto x : z.values())
      if (!std::isfinite(x)) throw NumericalError("non-finite latent state after solver step " + std::to_string(s));
  }
  return z;
}

TaskKind parse_task(const std::string& s) {
  if (s == "forward") return TaskKind::forward;
  if (s == "inverse") return TaskKind::inverse;
  if (s == "interp" || s == "interpolation") return TaskKind::interpolation;
  if (s == "ivp") return TaskKind::ivp;
  if (s == "uncond" || s == "unconditional") return TaskKind::unconditional;
  throw std::invalid_argument("unknown task " + s);
}

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::forward: return "forward";
    case TaskKind::inverse: return "inverse";
    case TaskKind::interpolation: return "interp";
    case TaskKind::ivp: return "ivp";
    case TaskKind::unconditional: return "uncond";
  }
  return "?";
}

std::vector<std::uint8_t> physical_task_mask(const TaskSpec& spec) {
  const std::int64_t n = spec.n_frames, l = spec.context;
  if (n < 1) throw std::invalid_argument("task horizon must contain at least one frame");
  if (spec.kind != TaskKind::ivp && spec.kind != TaskKind::unconditional && (l < 1 || l > n)) {
    throw std::invalid_argument("context frames must lie in [1, " + std::to_string(n) + "]");
  }
  std::vector<std::uint8_t> m(static_cast<std::size_t>(n), 0);
  auto set = [&](std::int64_t t) { m[static_cast<std::size_t>(t)] = 1; };
  switch (spec.kind) {
    case TaskKind::forward:
      for (std::int64_t t = 0; t < l; ++t) set(t);
      break;
    case TaskKind::inverse:
      for (std::int64_t t = n - l; t < n; ++t) set(t);
      break;
    case TaskKind::interpolation:
      for (std::int64_t t = 0; t < (l + 1) / 2; ++t) set(t);
      for (std::int64_t t = n - l / 2; t < n; ++t) set(t);
      break;
    case TaskKind::ivp:
      set(0);
      break;
    case TaskKind::unconditional:
      break;
  }
  return m;
}

TaskMask build_task_mask(const TaskSpec& spec, int s_t, std::int64_t latent_frames) {
  TaskMask tm;
  tm.physical = physical_task_mask(spec);
  tm.latent = latent_mask(tm.physical, s_t, latent_frames);
  return tm;
}

std::int64_t rollout_length(std::int64_t window, std::int64_t segments, std::int64_t context) {
  if (segments < 1) throw std::invalid_argument("segment count must be >= 1");
  return window + (segments - 1) * (window - context);
}

template Tensor<float> integrate(const VelocityField<float>&, Tensor<float>, const Tensor<float>&, const LatentMask&,
                                 const SolverConfig&);
template Tensor<double> integrate(const VelocityField<double>&, Tensor<double>, const Tensor<double>&, const LatentMask&,
                                  const SolverConfig&);

}  // namespace echo
