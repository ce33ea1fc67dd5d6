#include "echo/contconv.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>

namespace echo {

ConvNormalize parse_conv_normalize(const std::string& s) {
  if (s == "none") return ConvNormalize::none;
  if (s == "density") return ConvNormalize::density;
  throw std::invalid_argument("conv_normalize must be none or density, got " + s);
}

std::string to_string(ConvNormalize n) { return n == ConvNormalize::none ? "none" : "density"; }

ContConvPlan plan_contconv(const NeighborIndex& sources, const PointSet& queries, std::int64_t max_neighbors,
                           ConvNormalize normalize, std::int64_t chunk_size) {
  if (queries.dim != sources.points().dim) throw ShapeError("query and source dimensions differ");
  for (double v : queries.coords) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("query coordinate outside [0,1]: " + std::to_string(v));
  }
  ContConvPlan plan;
  plan.dim = queries.dim;
  auto& pc = plan.pairs;
  pc.n_queries = queries.size();
  pc.n_sources = sources.points().size();
  pc.row_ptr.assign(1, 0);
  // Offsets equal up to rounding share one kernel evaluation.
  const double quantum = sources.radius() * 1e-9;
  std::map<std::array<std::int64_t, 2>, std::int64_t> unique;
  const double inv_r2 = 1.0 / (sources.radius() * sources.radius());
  for (const auto& [begin, end] : chunk_queries(queries.size(), chunk_size)) {
    for (std::int64_t q = begin; q < end; ++q) {
      const auto nbrs = sources.query(&queries.coords[static_cast<std::size_t>(q * queries.dim)], max_neighbors);
      double total = 0.0;
      const std::size_t first = pc.weight.size();
      for (const auto& nb : nbrs) {
        std::array<std::int64_t, 2> key{std::llround(nb.offset[0] / quantum), std::llround(nb.offset[1] / quantum)};
        auto [it, inserted] = unique.try_emplace(key, plan.n_offsets());
        if (inserted)
          for (int a = 0; a < plan.dim; ++a) plan.offsets.push_back(nb.offset[static_cast<std::size_t>(a)]);
        pc.source.push_back(nb.id);
        pc.kernel_id.push_back(it->second);
        const double w = normalize == ConvNormalize::density ? std::exp(-nb.dist2 * inv_r2) : 1.0;
        pc.weight.push_back(w);
        total += w;
      }
      if (normalize == ConvNormalize::density && total > 0.0)
        for (std::size_t e = first; e < pc.weight.size(); ++e) pc.weight[e] /= total;
      pc.row_ptr.push_back(static_cast<std::int64_t>(pc.source.size()));
    }
  }
  return plan;
}

template <typename T>
ContConv<T>::ContConv(ParamStore<T>& store, const std::string& name, const ContConvConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.in_channels < 1 || cfg.out_channels < 1) throw std::invalid_argument("contconv channels must be >= 1");
  mlp_ = Mlp<T>(store, name + ".kernel", {cfg.dim, cfg.kernel_hidden, cfg.kernel_hidden, cfg.in_channels * cfg.out_channels}, rng);
}

template <typename T>
Var<T> ContConv<T>::kernel_eval(const std::vector<double>& offsets) const {
  const std::int64_t p = static_cast<std::int64_t>(offsets.size()) / cfg_.dim;
  const Shape out_shape{p, cfg_.in_channels, cfg_.out_channels};
  if (constant_kernel_) return constant(Tensor<T>::ones(out_shape));
  Tensor<T> x(Shape{p, cfg_.dim});
  for (std::size_t i = 0; i < offsets.size(); ++i) x[static_cast<std::int64_t>(i)] = static_cast<T>(offsets[i] / cfg_.radius);
  return reshape(mlp_(constant(std::move(x))), out_shape);
}

template <typename T>
Var<T> ContConv<T>::apply(const Var<T>& features, const ContConvPlan& plan) const {
  return apply(features, ContConvPlan(plan));
}

template <typename T>
Var<T> ContConv<T>::apply(const Var<T>& features, ContConvPlan&& plan) const {
  if (features.shape().size() != 2 || features.dim(1) != cfg_.in_channels) {
    throw ShapeError("contconv expects features [N, " + std::to_string(cfg_.in_channels) + "], got " + to_string(features.shape()));
  }
  if (features.dim(0) != plan.pairs.n_sources) {
    throw ShapeError("contconv feature rows " + std::to_string(features.dim(0)) + " != plan sources " +
                     std::to_string(plan.pairs.n_sources));
  }
  return point_conv(features, kernel_eval(plan.offsets), std::make_shared<const PointConvPlan>(std::move(plan.pairs)));
}

template <typename T>
Var<T> encode_points_to_grid(const ContConv<T>& layer, const Var<T>& f, const PointSet& points, const RegularGrid& grid,
                             std::int64_t chunk_size) {
  if (f.shape().empty() || f.dim(0) != points.size()) throw ShapeError("feature rows must equal point count");
  const auto& cfg = layer.config();
  NeighborIndex index(points, cfg.radius);
  return layer.apply(f, plan_contconv(index, grid.nodes(), cfg.max_neighbors, cfg.normalize, chunk_size));
}

template <typename T>
Var<T> decode_grid_to_points(const ContConv<T>& layer, const Var<T>& g, const RegularGrid& grid, const PointSet& queries,
                             std::int64_t chunk_size) {
  if (g.shape().empty() || g.dim(0) != grid.size()) throw ShapeError("grid tensor rows must equal grid node count");
  const auto& cfg = layer.config();
  NeighborIndex index(grid.nodes(), cfg.radius);
  return layer.apply(g, plan_contconv(index, queries, cfg.max_neighbors, cfg.normalize, chunk_size));
}

#define ECHO_INSTANTIATE_CONTCONV(T)                                                                              \
  template class ContConv<T>;                                                                                     \
  template Var<T> encode_points_to_grid(const ContConv<T>&, const Var<T>&, const PointSet&, const RegularGrid&,  \
                                        std::int64_t);                                                            \
  template Var<T> decode_grid_to_points(const ContConv<T>&, const Var<T>&, const RegularGrid&, const PointSet&,  \
                                        std::int64_t);

ECHO_INSTANTIATE_CONTCONV(float)
ECHO_INSTANTIATE_CONTCONV(double)

}  // namespace echo
