#pragma once

#include "echo/datagen.hpp"
#include "echo/training.hpp"

namespace echo::testing {

// A model and dataset small enough for unit tests (16² fields, 9-frame windows).
inline RunConfig tiny_run() {
  return RunConfig::parse(
      "grid=8\nbase_width=8\nmax_width=16\nspatial_levels=1\ntoken_dim=8\ngroups=4\nkernel_hidden=16\n"
      "proc_depth=1\nproc_hidden=32\nproc_heads=2\nwindow_frames=9\nwindow_stride=4\nae_window_frames=5\n"
      "ae_window_stride=4\ncontext_frames=2\nstage1_epochs=1\nstage1_batch=2\nstage2_epochs=1\nstage2_batch=2\n"
      "stage3_epochs=1\nstage3_batch=2\nfinetune_epochs=1\nwarmup_steps=2\n");
}

inline DatasetOptions tiny_dataset_options(std::uint64_t seed = 3) {
  DatasetOptions opt;
  opt.seed = seed;
  opt.n_train = 3;
  opt.n_test = 1;
  opt.grayscott.n = 16;
  opt.grayscott.frames = 13;
  return opt;
}

inline std::vector<Trajectory> tiny_train(std::uint64_t seed = 3) {
  const auto opt = tiny_dataset_options(seed);
  std::vector<Trajectory> out;
  for (std::int64_t i = 0; i < opt.n_train; ++i) out.push_back(generate_trajectory(opt, "train", i));
  return out;
}

inline std::vector<float> flat_params(const EchoModel<float>& m, const std::string& prefix) {
  std::vector<float> out;
  for (const auto& v : m.store().with_prefix(prefix)) out.insert(out.end(), v.value().values().begin(), v.value().values().end());
  return out;
}

}  // namespace echo::testing
