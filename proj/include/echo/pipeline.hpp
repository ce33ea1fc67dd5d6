#pragma once

#include "echo/model.hpp"
#include "echo/sampler.hpp"

namespace echo {

struct GenerateOptions {
  TaskSpec task;
  SolverConfig solver;
  // Latent index 0 depends on frame 0 alone (causal encoder), so an ivp
  // observation can clamp it even though the frame-pair mapping leaves it open.
  bool ivp_encode_per_frame = true;
};

/// Physical frames feeding the observed-slot tokens for a latent mask: frame t
/// is kept iff ⌊t/s_t⌋ is observed.
std::vector<std::uint8_t> frames_for_latent_mask(const LatentMask& mask, int s_t, std::int64_t n_frames);

/// Encode observed frames → mask → integrate → decode at `queries`.
/// `observed` holds the whole window (values of unobserved frames are ignored);
/// the result has the same frame count at `queries`, with γ copied over.
template <typename T>
Trajectory run_task(const EchoModel<T>& model, const Trajectory& observed, const GenerateOptions& opt, const PointSet& queries,
                    Rng& rng, TaskMask* used_mask = nullptr);

/// Chains forward generations: each segment is conditioned on the last L
/// frames of the previous one. `init` supplies frames [0, L) and the points;
/// the result has rollout_length(window, n_segments, L) frames.
template <typename T>
Trajectory rollout_segments(const EchoModel<T>& model, const Trajectory& init, std::int64_t window, std::int64_t n_segments,
                            const GenerateOptions& opt, Rng& rng);

}  // namespace echo
