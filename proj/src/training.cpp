#include "echo/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "echo/pipeline.hpp"

namespace echo {

namespace {

double safe_std(double var) { return var > 1e-24 ? std::sqrt(var) : 1.0; }

}  // namespace

DataStats compute_data_stats(const std::vector<Trajectory>& data) {
  if (data.empty()) throw DataError("no training trajectories");
  const auto c = data.front().n_channels;
  const auto np = data.front().params.size();
  std::vector<double> sum(c, 0.0), sq(c, 0.0), gsum(np, 0.0), gsq(np, 0.0);
  double count = 0;
  for (const auto& t : data) {
    if (t.n_channels != c || t.params.size() != np) throw DataError("trajectories disagree on channels or parameters");
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      const double v = t.values[i];
      sum[i % c] += v;
      sq[i % c] += v * v;
    }
    count += static_cast<double>(t.values.size() / c);
    for (std::size_t p = 0; p < np; ++p) {
      gsum[p] += t.params[p];
      gsq[p] += t.params[p] * t.params[p];
    }
  }
  DataStats s;
  const double n = static_cast<double>(data.size());
  for (std::uint32_t k = 0; k < c; ++k) {
    const double m = sum[k] / count;
    s.field_mean.push_back(m);
    s.field_std.push_back(safe_std(sq[k] / count - m * m));
  }
  for (std::size_t p = 0; p < np; ++p) {
    const double m = gsum[p] / n;
    s.gamma_mean.push_back(m);
    s.gamma_std.push_back(safe_std(gsq[p] / n - m * m));
  }
  return s;
}

ModelConfig model_config_for(const RunConfig& run, const DataStats& stats) {
  auto cfg = ModelConfig::from_run(run, static_cast<std::int64_t>(stats.field_mean.size()),
                                   static_cast<std::int64_t>(stats.gamma_mean.size()));
  cfg.proc.gamma_mean = stats.gamma_mean;
  cfg.proc.gamma_std = stats.gamma_std;
  return cfg;
}

std::unique_ptr<EchoModel<float>> make_model(const RunConfig& run, const DataStats& stats) {
  auto m = std::make_unique<EchoModel<float>>(model_config_for(run, stats), static_cast<std::uint64_t>(run.integer("seed")));
  m->normalizer().field_mean = stats.field_mean;
  m->normalizer().field_std = stats.field_std;
  return m;
}

StageSchedule StageSchedule::from_run(const RunConfig& run, int stage) {
  if (stage < 1 || stage > 4) throw ConfigError("stage must be 1, 2 or 3 (4 = fine-tune)");
  const std::string p = "stage" + std::to_string(stage == 4 ? 3 : stage) + "_";
  StageSchedule s;
  s.epochs = static_cast<int>(run.integer(p + "epochs"));
  s.batch = static_cast<int>(run.integer(p + "batch"));
  s.lr = run.real(p + "lr");
  s.lr_min = run.real(p + "lr_min");
  s.warmup = run.integer("warmup_steps");
  if (stage <= 2) {
    s.subsample_min = run.real(p + "subsample_min");
    s.subsample_max = run.real(p + "subsample_max");
    const double lo = stage == 1 ? 0.2 : 0.5, hi = stage == 1 ? 0.5 : 1.0;
    if (s.subsample_min < lo || s.subsample_max > hi || s.subsample_min > s.subsample_max)
      throw ConfigError("stage " + std::to_string(stage) + " subsample range must lie inside [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
  }
  if (stage == 4) {
    s.epochs = static_cast<int>(run.integer("finetune_epochs"));
    s.lr *= run.real("finetune_lr_scale");
    s.lr_min *= run.real("finetune_lr_scale");
    s.warmup = 0;
  }
  if (s.epochs < 0 || s.batch < 1 || !(s.lr > 0)) throw ConfigError("stage epochs, batch and lr must be positive");
  return s;
}

Var<float> relative_l2_loss(const Var<float>& pred, const Tensor<float>& truth) {
  double sq = 0;
  for (auto v : truth.values()) sq += static_cast<double>(v) * v;
  if (sq == 0) throw std::invalid_argument("relative loss against a zero-norm target");
  return scale(sqrt(sum(square(sub(pred, constant(truth))))), static_cast<float>(1.0 / std::sqrt(sq)));
}

Var<float> reconstruction_loss(const EchoModel<float>& model, const Trajectory& t, std::int64_t start, std::int64_t count,
                               double fraction, Rng& rng) {
  std::vector<FrameObs<float>> frames;
  for (std::int64_t f = start; f < start + count; ++f)
    frames.push_back(frame_obs<float>(t, f, fraction < 1.0 ? subsample_points(t.n_points, fraction, rng) : std::vector<std::int64_t>{}));
  auto pred = model.decode(model.encode(frames), count, t.points());
  return relative_l2_loss(pred, normalized_frames<float>(t, start, count, model.normalizer()));
}

std::vector<std::pair<std::size_t, std::int64_t>> sliding_windows(const std::vector<Trajectory>& data, std::int64_t length,
                                                                  std::int64_t stride) {
  if (length < 1 || stride < 1) throw std::invalid_argument("window length and stride must be positive");
  std::vector<std::pair<std::size_t, std::int64_t>> out;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::int64_t s = 0; s + length <= static_cast<std::int64_t>(data[i].n_frames); s += stride) out.emplace_back(i, s);
  if (out.empty()) throw DataError("trajectories are shorter than the " + std::to_string(length) + "-frame window");
  return out;
}

void fit_latent_stats(EchoModel<float>& model, const std::vector<Trajectory>& data, std::int64_t window, std::int64_t stride) {
  NoGradGuard no_grad;
  const auto d = static_cast<std::size_t>(model.config().comp.token_dim);
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  double count = 0;
  for (auto [i, s] : sliding_windows(data, window, stride)) {
    const auto z = model.encode(trajectory_frames<float>(data[i], s, window)).value();
    for (std::int64_t k = 0; k < z.numel(); ++k) {
      const double v = z[k];
      sum[static_cast<std::size_t>(k) % d] += v;
      sq[static_cast<std::size_t>(k) % d] += v * v;
    }
    count += static_cast<double>(z.numel()) / static_cast<double>(d);
  }
  auto& n = model.normalizer();
  n.latent_mean.assign(d, 0.0);
  n.latent_std.assign(d, 1.0);
  for (std::size_t k = 0; k < d; ++k) {
    n.latent_mean[k] = sum[k] / count;
    n.latent_std[k] = safe_std(sq[k] / count - n.latent_mean[k] * n.latent_mean[k]);
  }
}

Trainer::Trainer(EchoModel<float>& model, const RunConfig& run, int stage)
    : model_(model), run_(run), stage_(stage), sched_(StageSchedule::from_run(run, stage)) {
  progress_.stage = stage;
  const std::string prefix = stage <= 2 ? "ae." : "proc.";
  std::vector<Var<float>> params;
  for (const auto& [name, v] : model.store().entries())
    if (name.compare(0, prefix.size(), prefix) == 0) {
      names_.push_back(name);
      params.push_back(v);
    }
  AdamWConfig oc;
  oc.beta1 = run.real("beta1");
  oc.beta2 = run.real("beta2");
  oc.weight_decay = run.real("weight_decay");
  oc.clip_norm = run.real("clip_norm");
  opt_ = std::make_unique<AdamW<float>>(std::move(params), oc);
  rng_ = make_rng(static_cast<std::uint64_t>(run.integer("seed")), "train/stage" + std::to_string(stage));
}

void Trainer::step_optimizer(std::int64_t total_steps) {
  opt_->step(lr_schedule(progress_.step, total_steps, sched_.lr, sched_.lr_min, sched_.warmup));
  ++progress_.step;
}

double Trainer::run_epoch_autoencoder(const std::vector<Trajectory>& train) {
  std::vector<std::pair<std::size_t, std::int64_t>> samples;
  std::int64_t count = 1;
  if (stage_ == 1) {
    count = run_.integer("ae_window_frames");
    samples = sliding_windows(train, count, run_.integer("ae_window_stride"));
  } else {
    samples = sliding_windows(train, 1, 1);
  }
  const auto batches = (static_cast<std::int64_t>(samples.size()) + sched_.batch - 1) / sched_.batch;
  const auto total = batches * sched_.epochs;
  std::shuffle(samples.begin(), samples.end(), rng_);
  std::uniform_real_distribution<double> frac(sched_.subsample_min, sched_.subsample_max);
  double acc = 0;
  for (std::int64_t b = 0; b < batches; ++b) {
    model_.store().zero_grad();
    const auto lo = static_cast<std::size_t>(b * sched_.batch);
    const auto hi = std::min(samples.size(), lo + static_cast<std::size_t>(sched_.batch));
    for (auto k = lo; k < hi; ++k) {
      const auto [i, s] = samples[k];
      auto loss = reconstruction_loss(model_, train[i], s, count, frac(rng_), rng_);
      const double v = loss.value().item();
      if (!std::isfinite(v)) throw NumericalError("non-finite reconstruction loss at step " + std::to_string(progress_.step));
      acc += v;
      backward(scale(loss, 1.0f / static_cast<float>(hi - lo)));
    }
    step_optimizer(total);
  }
  return acc / static_cast<double>(samples.size());
}

double Trainer::run_epoch_processor(const std::vector<Trajectory>& train) {
  const auto window = run_.integer("window_frames");
  const int s_t = model_.config().time_stride();
  if (latents_.empty()) {
    NoGradGuard no_grad;
    for (auto [i, s] : sliding_windows(train, window, run_.integer("window_stride")))
      latents_.push_back({i, s, model_.standardize_latent(model_.encode(trajectory_frames<float>(train[i], s, window)).value()), {}});
  }
  std::vector<std::size_t> order(latents_.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);
  const auto batches = (static_cast<std::int64_t>(order.size()) + sched_.batch - 1) / sched_.batch;
  const auto total = batches * sched_.epochs;
  double acc = 0;
  for (std::int64_t b = 0; b < batches; ++b) {
    model_.store().zero_grad();
    const auto lo = static_cast<std::size_t>(b * sched_.batch);
    const auto hi = std::min(order.size(), lo + static_cast<std::size_t>(sched_.batch));
    for (auto k = lo; k < hi; ++k) {
      auto& w = latents_[order[k]];
      const auto& traj = train[w.traj];
      const std::vector<double> gamma(traj.params.begin(), traj.params.end());
      VelocityModel<float> fn = [&](const Tensor<float>& zo, const Tensor<float>& zr, const LatentMask& m, double r) {
        return model_.velocity(zo, zr, m, r, gamma);
      };
      // Observed slots carry E(u ⊙ m), exactly what inference sees for the same
      // mask. The encoder is frozen here, so each (window, mask) is encoded once.
      ConditionFn<float> cond = [&](const LatentMask& m) {
        auto it = w.cond.find(m);
        if (it == w.cond.end()) {
          NoGradGuard no_grad;
          const auto frames = trajectory_frames<float>(traj, w.start, window);
          it = w.cond.emplace(m, model_.standardize_latent(model_.encode(frames, frames_for_latent_mask(m, s_t, window)).value())).first;
        }
        return it->second;
      };
      auto loss = fm_loss(fn, w.z, rng_, cond);
      const double v = loss.value().item();
      if (!std::isfinite(v)) throw NumericalError("non-finite flow-matching loss at step " + std::to_string(progress_.step));
      acc += v;
      backward(scale(loss, 1.0f / static_cast<float>(hi - lo)));
    }
    step_optimizer(total);
  }
  return acc / static_cast<double>(order.size());
}

void Trainer::run(const std::vector<Trajectory>& train, const EpochCallback& on_epoch) {
  while (progress_.epoch < sched_.epochs) {
    const double loss = stage_ <= 2 ? run_epoch_autoencoder(train) : run_epoch_processor(train);
    ++progress_.epoch;
    if (on_epoch) on_epoch(progress_.epoch, loss);
  }
}

}  // namespace echo
