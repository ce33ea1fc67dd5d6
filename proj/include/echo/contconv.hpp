#pragma once

#include <string>

#include "echo/geometry.hpp"
#include "echo/nn.hpp"
#include "echo/ops.hpp"

namespace echo {

enum class ConvNormalize { none, density };

ConvNormalize parse_conv_normalize(const std::string& s);
std::string to_string(ConvNormalize n);

/// Query/source pairing of one continuous convolution together with the
/// distinct offsets the kernel has to be evaluated at.
struct ContConvPlan {
  PointConvPlan pairs;
  int dim = 2;
  std::vector<double> offsets;  // [U × dim]

  std::int64_t n_offsets() const { return static_cast<std::int64_t>(offsets.size()) / dim; }
};

/// Pairs every query with its receptive field in `sources`. Pair weights are 1
/// (`none`) or exp(−‖o‖²/ρ²) normalized over the receptive field (`density`).
/// Queries are processed in batches of `chunk_size`; the plan does not depend on it.
ContConvPlan plan_contconv(const NeighborIndex& sources, const PointSet& queries, std::int64_t max_neighbors,
                           ConvNormalize normalize, std::int64_t chunk_size = 256);

struct ContConvConfig {
  int dim = 2;
  std::int64_t in_channels = 1;
  std::int64_t out_channels = 1;
  std::int64_t kernel_hidden = 64;
  double radius = 0.05;
  std::int64_t max_neighbors = 64;
  ConvNormalize normalize = ConvNormalize::density;
};

/// out_o(ξ) = Σ_p w_p Σ_i f_i(x_p) k_{i,o}(ξ − x_p) with an MLP kernel of the
/// offset (fed as offset/ρ).
template <typename T>
class ContConv {
 public:
  ContConv() = default;
  ContConv(ParamStore<T>& store, const std::string& name, const ContConvConfig& cfg, Rng& rng);

  const ContConvConfig& config() const { return cfg_; }

  /// Kernel values at offsets [P × D] -> [P, C_in, C_out].
  Var<T> kernel_eval(const std::vector<double>& offsets) const;
  Var<T> apply(const Var<T>& features, const ContConvPlan& plan) const;
  Var<T> apply(const Var<T>& features, ContConvPlan&& plan) const;

  /// Replace the learned kernel by k ≡ 1 (oracle checks).
  void set_constant_kernel(bool on) { constant_kernel_ = on; }

 private:
  ContConvConfig cfg_;
  Mlp<T> mlp_;
  bool constant_kernel_ = false;
};

/// Irregular points -> grid nodes. f: [N × C_in] -> [S × C_out].
template <typename T>
Var<T> encode_points_to_grid(const ContConv<T>& layer, const Var<T>& f, const PointSet& points, const RegularGrid& grid,
                             std::int64_t chunk_size = 256);

/// Grid nodes -> arbitrary queries. g: [S × C_in] -> [Q × C_out].
template <typename T>
Var<T> decode_grid_to_points(const ContConv<T>& layer, const Var<T>& g, const RegularGrid& grid, const PointSet& queries,
                             std::int64_t chunk_size = 256);

}  // namespace echo
