#include "echo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace echo {

PointSet::PointSet(int d, std::vector<double> c) : dim(d), coords(std::move(c)) {
  if (d < 1 || d > 2) throw std::invalid_argument("point dimension must be 1 or 2, got " + std::to_string(d));
  if (coords.size() % static_cast<std::size_t>(d) != 0) throw std::invalid_argument("coordinate count not divisible by dimension");
  for (double v : coords) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("coordinate outside [0,1]: " + std::to_string(v));
  }
}

PointSet PointSet::select(const std::vector<std::int64_t>& ids) const {
  PointSet out;
  out.dim = dim;
  out.coords.reserve(ids.size() * static_cast<std::size_t>(dim));
  for (auto i : ids)
    for (int a = 0; a < dim; ++a) out.coords.push_back(at(i, a));
  return out;
}

RegularGrid::RegularGrid(std::vector<std::int64_t> e) : extents(std::move(e)) {
  if (extents.empty() || extents.size() > 2) throw std::invalid_argument("grid must be 1D or 2D");
  for (auto x : extents)
    if (x < 1) throw std::invalid_argument("grid extents must be >= 1");
}

std::int64_t RegularGrid::size() const {
  std::int64_t n = 1;
  for (auto x : extents) n *= x;
  return n;
}

double RegularGrid::node_coord(std::int64_t i, int axis) const {
  std::int64_t stride = 1;
  for (int a = dim() - 1; a > axis; --a) stride *= extents[static_cast<std::size_t>(a)];
  const std::int64_t k = (i / stride) % extents[static_cast<std::size_t>(axis)];
  return (static_cast<double>(k) + 0.5) * spacing(axis);
}

PointSet RegularGrid::nodes() const {
  std::vector<double> c;
  c.reserve(static_cast<std::size_t>(size() * dim()));
  for (std::int64_t i = 0; i < size(); ++i)
    for (int a = 0; a < dim(); ++a) c.push_back(node_coord(i, a));
  return PointSet(dim(), std::move(c));
}

NeighborIndex::NeighborIndex(const PointSet& points, double radius) : points_(points), radius_(radius) {
  if (points.size() < 1) throw std::invalid_argument("cannot index an empty point set");
  if (!(radius > 0.0 && radius <= 0.5)) throw std::invalid_argument("radius must lie in (0, 0.5], got " + std::to_string(radius));
  const auto per_axis = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(1.0 / radius)));
  cells_ = {per_axis, points.dim == 2 ? per_axis : 1};
  const std::int64_t n_cells = cells_[0] * cells_[1];
  std::vector<std::int64_t> cell(static_cast<std::size_t>(points.size()));
  cell_start_.assign(static_cast<std::size_t>(n_cells + 1), 0);
  for (std::int64_t i = 0; i < points.size(); ++i) {
    std::int64_t c = cell_of(points.at(i, 0), 0);
    if (points.dim == 2) c = c * cells_[1] + cell_of(points.at(i, 1), 1);
    cell[static_cast<std::size_t>(i)] = c;
    ++cell_start_[static_cast<std::size_t>(c + 1)];
  }
  for (std::int64_t c = 0; c < n_cells; ++c) cell_start_[static_cast<std::size_t>(c + 1)] += cell_start_[static_cast<std::size_t>(c)];
  cell_items_.resize(static_cast<std::size_t>(points.size()));
  std::vector<std::int64_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::int64_t i = 0; i < points.size(); ++i) cell_items_[static_cast<std::size_t>(fill[static_cast<std::size_t>(cell[static_cast<std::size_t>(i)])]++)] = i;
}

std::int64_t NeighborIndex::cell_of(double x, int axis) const {
  const auto n = cells_[static_cast<std::size_t>(axis)];
  return std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(x * static_cast<double>(n))), 0, n - 1);
}

std::vector<Neighbor> NeighborIndex::query(const double* q, std::int64_t max_neighbors) const {
  const int dim = points_.dim;
  std::vector<Neighbor> out;
  const std::int64_t x0 = cell_of(q[0] - radius_, 0), x1 = cell_of(q[0] + radius_, 0);
  const std::int64_t y0 = dim == 2 ? cell_of(q[1] - radius_, 1) : 0;
  const std::int64_t y1 = dim == 2 ? cell_of(q[1] + radius_, 1) : 0;
  for (std::int64_t cx = x0; cx <= x1; ++cx) {
    for (std::int64_t cy = y0; cy <= y1; ++cy) {
      const std::int64_t c = cx * cells_[1] + cy;
      for (auto k = cell_start_[static_cast<std::size_t>(c)]; k < cell_start_[static_cast<std::size_t>(c + 1)]; ++k) {
        const std::int64_t id = cell_items_[static_cast<std::size_t>(k)];
        Neighbor nb{id, {0.0, 0.0}, 0.0};
        bool inside = true;
        for (int a = 0; a < dim; ++a) {
          const double o = q[a] - points_.at(id, a);
          if (std::abs(o) > radius_) inside = false;
          nb.offset[static_cast<std::size_t>(a)] = o;
          nb.dist2 += o * o;
        }
        if (inside) out.push_back(nb);
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.dist2 != b.dist2 ? a.dist2 < b.dist2 : a.id < b.id;
  });
  if (max_neighbors > 0 && static_cast<std::int64_t>(out.size()) > max_neighbors) out.resize(static_cast<std::size_t>(max_neighbors));
  return out;
}

std::vector<std::pair<std::int64_t, std::int64_t>> chunk_queries(std::int64_t n, std::int64_t chunk) {
  if (chunk < 1) throw std::invalid_argument("chunk size must be >= 1");
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (std::int64_t b = 0; b < n; b += chunk) out.emplace_back(b, std::min(n, b + chunk));
  return out;
}

}  // namespace echo
