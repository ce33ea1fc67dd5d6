#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "echo/ops.hpp"
#include "echo/rng.hpp"

namespace echo {

/// Named trainable parameters in insertion order. Names are hierarchical,
/// dot-separated ("ae.enc.block0.conv.w").
template <typename T>
class ParamStore {
 public:
  Var<T> create(const std::string& name, Tensor<T> init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Var<T> v(std::move(init), true);
    index_[name] = entries_.size();
    entries_.emplace_back(name, v);
    return v;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Var<T> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
    return entries_[it->second].second;
  }

  const std::vector<std::pair<std::string, Var<T>>>& entries() const { return entries_; }

  /// Parameters whose name starts with `prefix`.
  std::vector<Var<T>> with_prefix(const std::string& prefix) const {
    std::vector<Var<T>> out;
    for (const auto& [name, v] : entries_)
      if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(v);
    return out;
  }

  void zero_grad() {
    for (auto& [name, v] : entries_) v.zero_grad();
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& [name, v] : entries_) n += v.numel();
    return n;
  }

 private:
  std::vector<std::pair<std::string, Var<T>>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Fan-in scaled normal initialization.
template <typename T>
Tensor<T> init_fan_in(Shape shape, std::int64_t fan_in, Rng& rng, T gain = T(1)) {
  return randn<T>(std::move(shape), rng, gain / std::sqrt(static_cast<T>(fan_in)));
}

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore<T>& store, const std::string& name, std::int64_t in, std::int64_t out, Rng& rng,
         bool zero_init = false, bool with_bias = true)
      : in_(in), out_(out) {
    w_ = store.create(name + ".w", zero_init ? Tensor<T>(Shape{in, out}) : init_fan_in<T>(Shape{in, out}, in, rng));
    if (with_bias) b_ = store.create(name + ".b", Tensor<T>(Shape{out}));
  }

  Var<T> operator()(const Var<T>& x) const { return linear(x, w_, b_); }

  std::int64_t in_features() const { return in_; }
  std::int64_t out_features() const { return out_; }
  const Var<T>& weight() const { return w_; }

 private:
  std::int64_t in_ = 0, out_ = 0;
  Var<T> w_, b_;
};

/// Fully connected stack with GELU between layers.
template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore<T>& store, const std::string& name, const std::vector<std::int64_t>& widths, Rng& rng) {
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      layers_.emplace_back(store, name + "." + std::to_string(i), widths[i], widths[i + 1], rng);
    }
  }

  Var<T> operator()(Var<T> x) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i](x);
      if (i + 1 < layers_.size()) x = gelu(x);
    }
    return x;
  }

  bool empty() const { return layers_.empty(); }

 private:
  std::vector<Linear<T>> layers_;
};

/// Sinusoidal features of scalar positions: [sin(p·ω_k), cos(p·ω_k)] with
/// geometric frequencies ω_k = max_period^(-k/half).
template <typename T>
Tensor<T> sinusoidal_embedding(const std::vector<double>& positions, std::int64_t width, double max_period = 10000.0) {
  Tensor<T> out(Shape{static_cast<std::int64_t>(positions.size()), width});
  const std::int64_t half = width / 2;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (std::int64_t k = 0; k < half; ++k) {
      const double freq = std::pow(max_period, -static_cast<double>(k) / static_cast<double>(std::max<std::int64_t>(half, 1)));
      out[static_cast<std::int64_t>(i) * width + k] = static_cast<T>(std::sin(positions[i] * freq));
      out[static_cast<std::int64_t>(i) * width + half + k] = static_cast<T>(std::cos(positions[i] * freq));
    }
  }
  return out;
}

}  // namespace echo
