#pragma once

#include <cstdint>
#include <vector>

#include "echo/autograd.hpp"

namespace echo {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

/// AdamW with bias-corrected moments, decoupled weight decay and global
/// gradient-norm clipping. Parameters without a gradient are left untouched.
template <typename T>
class AdamW {
 public:
  AdamW() = default;
  AdamW(std::vector<Var<T>> params, AdamWConfig cfg);

  /// Applies one update at learning rate `lr`; returns the pre-clip gradient norm.
  double step(double lr);

  std::int64_t steps() const { return steps_; }
  std::vector<Tensor<T>>& first_moments() { return m_; }
  std::vector<Tensor<T>>& second_moments() { return v_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }
  void set_steps(std::int64_t s) { steps_ = s; }

 private:
  std::vector<Var<T>> params_;
  AdamWConfig cfg_;
  std::vector<Tensor<T>> m_, v_;
  std::int64_t steps_ = 0;
};

/// Linear warm-up from 0 to lr0 over `warmup` steps, then cosine decay to
/// lr_min at `total` steps (held at lr_min afterwards).
double lr_schedule(std::int64_t step, std::int64_t total, double lr0, double lr_min, std::int64_t warmup);

}  // namespace echo
