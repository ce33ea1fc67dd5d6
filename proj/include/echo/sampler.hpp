#pragma once

#include <functional>
#include <string>

#include "echo/flowmatch.hpp"

namespace echo {

enum class SolverMethod { euler, midpoint, rk4 };

SolverMethod parse_solver(const std::string& s);
std::string to_string(SolverMethod m);

struct SolverConfig {
  SolverMethod method = SolverMethod::midpoint;
  int steps = 5;
  bool clamp_observed = true;
};

/// dz/dr at state z.
template <typename T>
using VelocityField = std::function<Tensor<T>(const Tensor<T>& z, double r)>;

/// Integrates dz/dr = v(z, r) from r = 0 to 1 on a uniform grid. With
/// clamping on, time slots flagged in `mask` are reset to `z_obs` after every
/// step (an empty mask clamps nothing). Throws NumericalError naming the step
/// when the state turns non-finite.
template <typename T>
Tensor<T> integrate(const VelocityField<T>& v, Tensor<T> z0, const Tensor<T>& z_obs, const LatentMask& mask,
                    const SolverConfig& solver);

enum class TaskKind { forward, inverse, interpolation, ivp, unconditional };

TaskKind parse_task(const std::string& s);
std::string to_string(TaskKind k);

struct TaskSpec {
  TaskKind kind = TaskKind::forward;
  std::int64_t n_frames = 0;  // T + 1
  std::int64_t context = 4;   // L
};

/// Observed physical frames: forward = first L, inverse = last L, interpolation
/// = first ⌈L/2⌉ and last ⌊L/2⌋, ivp = {0}, unconditional = ∅.
std::vector<std::uint8_t> physical_task_mask(const TaskSpec& spec);
TaskMask build_task_mask(const TaskSpec& spec, int s_t, std::int64_t latent_frames);

/// Frames produced by `segments` chained windows of `window` frames that
/// overlap by `context` frames.
std::int64_t rollout_length(std::int64_t window, std::int64_t segments, std::int64_t context);

}  // namespace echo
