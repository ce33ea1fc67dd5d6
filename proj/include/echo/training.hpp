#pragma once

#include <functional>
#include <map>
#include <memory>

#include "echo/flowmatch.hpp"
#include "echo/model.hpp"
#include "echo/optim.hpp"

namespace echo {

/// Per-channel field statistics and PDE-parameter statistics of a dataset.
struct DataStats {
  std::vector<double> field_mean, field_std;
  std::vector<double> gamma_mean, gamma_std;
};

DataStats compute_data_stats(const std::vector<Trajectory>& data);

/// Model configuration from the run config with dataset statistics applied.
ModelConfig model_config_for(const RunConfig& run, const DataStats& stats);
/// Fresh model whose normalizer carries the field statistics.
std::unique_ptr<EchoModel<float>> make_model(const RunConfig& run, const DataStats& stats);

struct StageSchedule {
  int epochs = 1;
  int batch = 1;
  double lr = 1e-3;
  double lr_min = 1e-5;
  std::int64_t warmup = 0;
  double subsample_min = 1.0;
  double subsample_max = 1.0;

  /// Stage 1–3 from the run config; stage 4 is fine-tuning (stage-3 schedule,
  /// lr scaled by finetune_lr_scale, finetune_epochs epochs).
  static StageSchedule from_run(const RunConfig& run, int stage);
};

/// ‖û − u‖/‖u‖ in normalized units (zero-norm truth is rejected).
Var<float> relative_l2_loss(const Var<float>& pred, const Tensor<float>& truth);

/// Reconstruction loss on frames [start, start + count) of `t`, encoding a
/// `fraction` of the points per frame (independent subsets per frame) and
/// decoding at every point.
Var<float> reconstruction_loss(const EchoModel<float>& model, const Trajectory& t, std::int64_t start, std::int64_t count,
                               double fraction, Rng& rng);

/// Sliding windows (trajectory, start) of `length` frames with the given stride.
std::vector<std::pair<std::size_t, std::int64_t>> sliding_windows(const std::vector<Trajectory>& data, std::int64_t length,
                                                                  std::int64_t stride);

/// Per-token-channel mean/std of encoder latents over the training windows;
/// stored in the model's normalizer.
void fit_latent_stats(EchoModel<float>& model, const std::vector<Trajectory>& data, std::int64_t window, std::int64_t stride);

struct TrainProgress {
  int stage = 0;
  int epoch = 0;  // completed epochs
  std::int64_t step = 0;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// One training stage. Stages 1 and 2 update the autoencoder; stages 3 and 4
/// (fine-tuning) update only the processor, with the autoencoder frozen.
class Trainer {
 public:
  Trainer(EchoModel<float>& model, const RunConfig& run, int stage);

  /// Runs the remaining epochs; `on_epoch` fires after each one.
  void run(const std::vector<Trajectory>& train, const EpochCallback& on_epoch = {});

  int stage() const { return stage_; }
  const StageSchedule& schedule() const { return sched_; }
  TrainProgress& progress() { return progress_; }
  const TrainProgress& progress() const { return progress_; }
  AdamW<float>& optimizer() { return *opt_; }
  const AdamW<float>& optimizer() const { return *opt_; }
  /// Names of the optimized parameters, aligned with the optimizer moments.
  const std::vector<std::string>& param_names() const { return names_; }
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }

 private:
  struct LatentWindow {
    std::size_t traj;
    std::int64_t start;
    Tensor<float> z;  // standardized clean latent
    std::map<LatentMask, Tensor<float>> cond;  // E(u ⊙ m) per task mask seen so far
  };

  double run_epoch_autoencoder(const std::vector<Trajectory>& train);
  double run_epoch_processor(const std::vector<Trajectory>& train);
  void step_optimizer(std::int64_t total_steps);

  EchoModel<float>& model_;
  RunConfig run_;
  int stage_;
  StageSchedule sched_;
  TrainProgress progress_;
  std::vector<std::string> names_;
  std::unique_ptr<AdamW<float>> opt_;
  Rng rng_;
  std::vector<LatentWindow> latents_;
};

}  // namespace echo
