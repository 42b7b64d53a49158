#ifndef SGSKI_GRID_H_
#define SGSKI_GRID_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "sgski/error.h"
#include "sgski/matrix.h"

namespace sgski {

// Default fail-fast cap on the number of points in a sparse grid.
inline constexpr Index kDefaultPointCap = 100'000'000;

// Resolution-position name of a grid point in [0,1]^d. In dimension j the
// coordinate is positions[j] / 2^(levels[j]+1) with positions[j] odd.
struct GridIndex {
  std::vector<int> levels;
  std::vector<std::int64_t> positions;

  int dim() const { return static_cast<int>(levels.size()); }
  double coordinate(int j) const;
  bool valid() const;

  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

// Ascending cell centres of the 1-d grid with resolution `level`.
std::vector<double> rect_grid_1d(int level);

// Exact |G_{level,dim}| = sum_{s<=level} C(s+dim-1, dim-1) 2^s.
// Throws ResourceError when the count does not fit in 63 bits.
Index sparse_grid_size(int level, int dim);

// Position of the 1-d point (point_level, position) in the canonical order of
// G_{L,1} for any L >= point_level: the levels are concatenated, so the
// answer does not depend on L.
inline Index canonical_index_1d(int point_level, std::int64_t position) {
  return (Index{1} << point_level) - 1 + (position - 1) / 2;
}

// 0-based rank of the 1-d point (point_level, position) in the
// coordinate-sorted G_{level,1}, which is { j / 2^(level+1) : j = 1..2^(level+1)-1 }.
Index sorted_rank_1d(int level, int point_level, std::int64_t position);

// Dyadic rectilinear grid Omega_l: 2^{l_j} cell centres per dimension,
// enumerated row-major with the last dimension fastest.
class RectGrid {
 public:
  explicit RectGrid(std::vector<int> levels);

  int dim() const { return static_cast<int>(levels_.size()); }
  const std::vector<int>& levels() const { return levels_; }
  Index count(int j) const { return Index{1} << levels_[j]; }
  double spacing(int j) const;
  double offset(int j) const;
  Index size() const { return size_; }

  GridIndex point(Index k) const;
  std::optional<Index> find(const GridIndex& p) const;

 private:
  std::vector<int> levels_;
  Index size_ = 1;
};

// Cell-centred rectilinear lattice with an arbitrary number of points per
// dimension: coordinate (c + 1/2) / m_j for c = 0..m_j-1. With m_j = 2^{l_j}
// this is exactly Omega_l. Flat indices are row-major, last dimension fastest.
class Lattice {
 public:
  explicit Lattice(std::vector<Index> counts);
  static Lattice from_levels(std::span<const int> levels);

  int dim() const { return static_cast<int>(counts_.size()); }
  const std::vector<Index>& counts() const { return counts_; }
  Index count(int j) const { return counts_[j]; }
  double spacing(int j) const { return 1.0 / static_cast<double>(counts_[j]); }
  double offset(int j) const { return 0.5 / static_cast<double>(counts_[j]); }
  double coordinate(int j, Index c) const {
    return (static_cast<double>(c) + 0.5) / static_cast<double>(counts_[j]);
  }
  Index size() const { return size_; }

  Index flat_index(std::span<const Index> cell) const;
  std::vector<Index> cell(Index flat) const;
  RowMatrix coordinates() const;

 private:
  std::vector<Index> counts_;
  Index size_ = 1;
};

// Size and block-offset tables for G_{L,d'} with L <= level and d' <= dim,
// plus exact integer ranking of points in the canonical order.
//
// Canonical order: G_{L,1} is Omega_0, Omega_1, ..., Omega_L each ascending.
// G_{L,d} is the concatenation of blocks Omega_i x G_{L-i,d-1}, i = 0..L,
// each block row-major with the Omega_i index outermost.
class SparseGridShape {
 public:
  SparseGridShape(int level, int dim, Index cap = kDefaultPointCap);

  int level() const { return level_; }
  int dim() const { return dim_; }
  Index size() const { return size(level_, dim_); }
  Index size(int level, int dim) const {
    return sizes_[static_cast<std::size_t>(dim - 1) * (level_ + 1) + level];
  }
  // Offset of block i (first-dimension level i) inside G_{level,dim}.
  Index block_offset(int level, int dim, int i) const;

  // Rank of the point with the given per-dimension levels/positions inside
  // G_{level, levels.size()}, or nullopt if the point is not on that grid.
  std::optional<Index> rank(std::span<const int> levels,
                            std::span<const std::int64_t> positions,
                            int level) const;
  std::optional<Index> rank(const GridIndex& p) const {
    return rank(p.levels, p.positions, level_);
  }

 private:
  int level_;
  int dim_;
  std::vector<Index> sizes_;
  std::vector<Index> offsets_;  // [dim-1][level][i], i <= level
};

class SparseGrid {
 public:
  struct Block {
    int first_level;  // i in Omega_i x G_{level-i,dim-1}
    Index offset;
    Index rows;  // |Omega_i|
    Index cols;  // |G_{level-i,dim-1}| (1 when dim == 1)
  };

  SparseGrid(int level, int dim, Index cap = kDefaultPointCap);

  int level() const { return shape_.level(); }
  int dim() const { return shape_.dim(); }
  Index size() const { return shape_.size(); }
  const SparseGridShape& shape() const { return shape_; }
  const std::vector<Block>& blocks() const { return blocks_; }

  int point_level(Index k, int j) const { return levels_[k * dim() + j]; }
  std::int64_t point_position(Index k, int j) const { return positions_[k * dim() + j]; }
  double coordinate(Index k, int j) const;
  GridIndex point(Index k) const;
  std::optional<Index> find(const GridIndex& p) const;

  RowMatrix coordinates() const;
  // One row per point: index, levels, positions, coordinates.
  void write_csv(std::ostream& out) const;

 private:
  SparseGridShape shape_;
  std::vector<Block> blocks_;
  std::vector<std::uint8_t> levels_;
  std::vector<std::int64_t> positions_;
};

SparseGrid build_sparse_grid(int level, int dim, Index cap = kDefaultPointCap);

// Index injection S_{U,V} from a grid U into a grid V containing it.
// Applied as gather/scatter; never materialized as a matrix.
struct SelectionMap {
  Index from_size = 0;
  Index to_size = 0;
  std::vector<Index> target_index;

  // out[k] = v[target_index[k]]
  void select(std::span<const double> v, std::span<double> out) const;
  // out = 0 everywhere, out[target_index[k]] = v[k]
  void embed(std::span<const double> v, std::span<double> out) const;
};

// Builds S_{U,V} by exact (level, position) matching. U and V are any grid
// types exposing size(), point(k) and find(p). Throws InputError when a point
// of U is absent from V.
template <typename U, typename V>
SelectionMap selection_map(const U& u, const V& v) {
  SelectionMap map;
  map.from_size = u.size();
  map.to_size = v.size();
  map.target_index.resize(static_cast<std::size_t>(u.size()));
  for (Index k = 0; k < u.size(); ++k) {
    const auto t = v.find(u.point(k));
    if (!t) throw InputError("selection_map: point of U is not contained in V");
    map.target_index[k] = *t;
  }
  return map;
}

}  // namespace sgski

#endif  // SGSKI_GRID_H_
