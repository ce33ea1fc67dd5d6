#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace echo {

/// Positions in the normalized domain [0,1]^D, D ∈ {1, 2}; row-major [N × D].
struct PointSet {
  int dim = 2;
  std::vector<double> coords;

  PointSet() = default;
  PointSet(int d, std::vector<double> c);

  std::int64_t size() const { return static_cast<std::int64_t>(coords.size()) / dim; }
  double at(std::int64_t i, int axis) const { return coords[static_cast<std::size_t>(i * dim + axis)]; }
  /// Subset in the given order.
  PointSet select(const std::vector<std::int64_t>& ids) const;
};

/// Cell-centered regular grid over [0,1]^D.
struct RegularGrid {
  std::vector<std::int64_t> extents;

  RegularGrid() = default;
  explicit RegularGrid(std::vector<std::int64_t> e);

  int dim() const { return static_cast<int>(extents.size()); }
  std::int64_t size() const;
  double spacing(int axis) const { return 1.0 / static_cast<double>(extents[static_cast<std::size_t>(axis)]); }
  /// Coordinate of node `i` along `axis` (row-major node numbering, last axis fastest).
  double node_coord(std::int64_t i, int axis) const;
  PointSet nodes() const;
};

struct Neighbor {
  std::int64_t id;
  std::array<double, 2> offset;  // query − point
  double dist2;
};

/// Uniform spatial hash answering ℓ∞-box range queries of half-width `radius`.
class NeighborIndex {
 public:
  NeighborIndex() = default;
  NeighborIndex(const PointSet& points, double radius);

  double radius() const { return radius_; }
  const PointSet& points() const { return points_; }

  /// Points p with ‖query − x_p‖∞ ≤ radius, sorted by ascending Euclidean
  /// distance (ties by id) and truncated to `max_neighbors` (0 = no cap).
  std::vector<Neighbor> query(const double* query, std::int64_t max_neighbors) const;

 private:
  PointSet points_;
  double radius_ = 0.0;
  std::array<std::int64_t, 2> cells_{1, 1};
  std::vector<std::int64_t> cell_start_;
  std::vector<std::int64_t> cell_items_;

  std::int64_t cell_of(double x, int axis) const;
};

/// Partition of [0, n) into consecutive [begin, end) batches of at most `chunk` items.
std::vector<std::pair<std::int64_t, std::int64_t>> chunk_queries(std::int64_t n, std::int64_t chunk);

}  // namespace echo
