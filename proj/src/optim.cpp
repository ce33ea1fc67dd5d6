#include "echo/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace echo {

template <typename T>
AdamW<T>::AdamW(std::vector<Var<T>> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
  }
}

template <typename T>
double AdamW<T>::step(double lr) {
  double sq = 0.0;
  for (const auto& p : params_)
    if (p.has_grad())
      for (auto g : p.grad().values()) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  const double clip = cfg_.clip_norm > 0 && norm > cfg_.clip_norm ? cfg_.clip_norm / norm : 1.0;
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k];
    if (!p.has_grad()) continue;
    auto& w = p.mutable_value();
    const auto& g = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::int64_t i = 0; i < w.numel(); ++i) {
      const double gi = static_cast<double>(g[i]) * clip;
      const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1 - cfg_.beta1) * gi;
      const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1 - cfg_.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
      w[i] = static_cast<T>(static_cast<double>(w[i]) * (1 - lr * cfg_.weight_decay) - lr * update);
    }
  }
  return norm;
}

double lr_schedule(std::int64_t step, std::int64_t total, double lr0, double lr_min, std::int64_t warmup) {
  if (warmup > 0 && step < warmup) return lr0 * static_cast<double>(step) / static_cast<double>(warmup);
  if (total <= warmup) return lr0;
  const double progress = std::clamp(static_cast<double>(step - warmup) / static_cast<double>(total - warmup), 0.0, 1.0);
  return lr_min + 0.5 * (lr0 - lr_min) * (1 + std::cos(std::numbers::pi * progress));
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace echo
