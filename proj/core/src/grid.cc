#include "sgski/grid.h"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace sgski {
namespace {

using u128 = unsigned __int128;

constexpr u128 kIndexMax = static_cast<u128>(std::numeric_limits<Index>::max());

[[noreturn]] void overflow(int level, int dim) {
  throw ResourceError("sparse grid size overflows for level " + std::to_string(level) +
                      ", dim " + std::to_string(dim));
}

void check_level_dim(int level, int dim) {
  require(level >= 0, "sparse grid level must be >= 0");
  require(dim >= 1, "sparse grid dim must be >= 1");
  if (level > 61) overflow(level, dim);
}

}  // namespace

double GridIndex::coordinate(int j) const {
  return std::ldexp(static_cast<double>(positions[j]), -(levels[j] + 1));
}

bool GridIndex::valid() const {
  if (levels.size() != positions.size()) return false;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    if (levels[j] < 0 || levels[j] > 61) return false;
    const std::int64_t p = positions[j];
    if (p < 1 || p % 2 == 0 || p > (std::int64_t{1} << (levels[j] + 1))) return false;
  }
  return true;
}

std::vector<double> rect_grid_1d(int level) {
  require(level >= 0 && level < 31, "rect_grid_1d: level out of range");
  const Index n = Index{1} << level;
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Index c = 0; c < n; ++c) {
    out[c] = std::ldexp(static_cast<double>(2 * c + 1), -(level + 1));
  }
  return out;
}

Index sparse_grid_size(int level, int dim) {
  check_level_dim(level, dim);
  u128 total = 0;
  u128 binom = 1;  // C(s + dim - 1, dim - 1), starting at s = 0
  for (int s = 0; s <= level; ++s) {
    if (s > 0) {
      // C(s+d-1, d-1) = C(s-1+d-1, d-1) * (s+d-1) / s
      u128 next;
      if (__builtin_mul_overflow(binom, static_cast<u128>(s + dim - 1), &next)) {
        overflow(level, dim);
      }
      binom = next / static_cast<u128>(s);
    }
    u128 term;
    if (__builtin_mul_overflow(binom, u128{1} << s, &term)) overflow(level, dim);
    total += term;
    if (total > kIndexMax) overflow(level, dim);
  }
  return static_cast<Index>(total);
}

Index sorted_rank_1d(int level, int point_level, std::int64_t position) {
  require(point_level >= 0 && point_level <= level, "sorted_rank_1d: point not on grid");
  require(position >= 1 && position % 2 == 1 &&
              position < (std::int64_t{1} << (point_level + 1)),
          "sorted_rank_1d: invalid position");
  // position / 2^(l+1) == (position * 2^(level-l)) / 2^(level+1)
  return position * (Index{1} << (level - point_level)) - 1;
}

// ---------------------------------------------------------------- RectGrid

RectGrid::RectGrid(std::vector<int> levels) : levels_(std::move(levels)) {
  require(!levels_.empty(), "RectGrid: empty level vector");
  int total = 0;
  for (int l : levels_) {
    require(l >= 0, "RectGrid: negative level");
    total += l;
  }
  if (total > 62) throw ResourceError("RectGrid: grid too large");
  size_ = Index{1} << total;
}

double RectGrid::spacing(int j) const { return std::ldexp(1.0, -levels_[j]); }
double RectGrid::offset(int j) const { return std::ldexp(1.0, -(levels_[j] + 1)); }

GridIndex RectGrid::point(Index k) const {
  GridIndex p;
  p.levels = levels_;
  p.positions.resize(levels_.size());
  for (int j = dim() - 1; j >= 0; --j) {
    const Index c = k % count(j);
    k /= count(j);
    p.positions[j] = 2 * c + 1;
  }
  return p;
}

std::optional<Index> RectGrid::find(const GridIndex& p) const {
  if (p.levels != levels_ || !p.valid()) return std::nullopt;
  Index flat = 0;
  for (int j = 0; j < dim(); ++j) flat = flat * count(j) + (p.positions[j] - 1) / 2;
  return flat;
}

// ----------------------------------------------------------------- Lattice

Lattice::Lattice(std::vector<Index> counts) : counts_(std::move(counts)) {
  require(!counts_.empty(), "Lattice: empty count vector");
  for (Index m : counts_) {
    require(m >= 1, "Lattice: counts must be >= 1");
    if (size_ > std::numeric_limits<Index>::max() / m) {
      throw ResourceError("Lattice: grid too large");
    }
    size_ *= m;
  }
}

Lattice Lattice::from_levels(std::span<const int> levels) {
  std::vector<Index> counts;
  counts.reserve(levels.size());
  for (int l : levels) {
    require(l >= 0 && l < 62, "Lattice: level out of range");
    counts.push_back(Index{1} << l);
  }
  return Lattice(std::move(counts));
}

Index Lattice::flat_index(std::span<const Index> cell) const {
  Index flat = 0;
  for (int j = 0; j < dim(); ++j) flat = flat * counts_[j] + cell[j];
  return flat;
}

std::vector<Index> Lattice::cell(Index flat) const {
  std::vector<Index> c(counts_.size());
  for (int j = dim() - 1; j >= 0; --j) {
    c[j] = flat % counts_[j];
    flat /= counts_[j];
  }
  return c;
}

RowMatrix Lattice::coordinates() const {
  RowMatrix x(size_, dim());
  std::vector<Index> c(counts_.size(), 0);
  for (Index k = 0; k < size_; ++k) {
    for (int j = 0; j < dim(); ++j) x(k, j) = coordinate(j, c[j]);
    for (int j = dim() - 1; j >= 0; --j) {
      if (++c[j] < counts_[j]) break;
      c[j] = 0;
    }
  }
  return x;
}

// -------------------------------------------------------- SparseGridShape

SparseGridShape::SparseGridShape(int level, int dim, Index cap)
    : level_(level), dim_(dim) {
  const Index total = sparse_grid_size(level, dim);
  if (total > cap) {
    throw ResourceError("sparse grid with level " + std::to_string(level) + ", dim " +
                        std::to_string(dim) + " has " + std::to_string(total) +
                        " points, above the cap of " + std::to_string(cap));
  }
  const int nl = level + 1;
  sizes_.assign(static_cast<std::size_t>(dim) * nl, 0);
  offsets_.assign(static_cast<std::size_t>(dim) * nl * nl, 0);
  for (int L = 0; L <= level; ++L) {
    sizes_[L] = (Index{2} << L) - 1;
    for (int i = 0; i <= L; ++i) offsets_[L * nl + i] = (Index{1} << i) - 1;
  }
  for (int d = 2; d <= dim; ++d) {
    for (int L = 0; L <= level; ++L) {
      Index acc = 0;
      for (int i = 0; i <= L; ++i) {
        offsets_[(static_cast<std::size_t>(d - 1) * nl + L) * nl + i] = acc;
        acc += (Index{1} << i) * size(L - i, d - 1);
      }
      sizes_[static_cast<std::size_t>(d - 1) * nl + L] = acc;
    }
  }
}

Index SparseGridShape::block_offset(int level, int dim, int i) const {
  const int nl = level_ + 1;
  return offsets_[(static_cast<std::size_t>(dim - 1) * nl + level) * nl + i];
}

std::optional<Index> SparseGridShape::rank(std::span<const int> levels,
                                           std::span<const std::int64_t> positions,
                                           int level) const {
  const int d = static_cast<int>(levels.size());
  if (d < 1 || d > dim_ || level > level_ || positions.size() != levels.size()) {
    return std::nullopt;
  }
  Index result = 0;
  int remaining = level;
  for (int j = 0; j < d; ++j) {
    const int l = levels[j];
    const std::int64_t p = positions[j];
    if (l < 0 || l > remaining) return std::nullopt;
    if (p < 1 || p % 2 == 0 || p >= (std::int64_t{2} << l)) return std::nullopt;
    const int dims_left = d - j;
    if (dims_left == 1) {
      result += canonical_index_1d(l, p);
    } else {
      result += block_offset(remaining, dims_left, l) +
                ((p - 1) / 2) * size(remaining - l, dims_left - 1);
    }
    remaining -= l;
  }
  return result;
}

// ------------------------------------------------------------- SparseGrid

namespace {

void enumerate(int level, int dims_left, int dim_offset, std::vector<int>& lv,
               std::vector<std::int64_t>& ps,
               std::vector<std::uint8_t>& out_levels,
               std::vector<std::int64_t>& out_positions) {
  const int j = dim_offset;
  if (dims_left == 1) {
    for (int l = 0; l <= level; ++l) {
      for (std::int64_t p = 1; p < (std::int64_t{2} << l); p += 2) {
        lv[j] = l;
        ps[j] = p;
        out_levels.insert(out_levels.end(), lv.begin(), lv.end());
        out_positions.insert(out_positions.end(), ps.begin(), ps.end());
      }
    }
    return;
  }
  for (int i = 0; i <= level; ++i) {
    for (std::int64_t p = 1; p < (std::int64_t{2} << i); p += 2) {
      lv[j] = i;
      ps[j] = p;
      enumerate(level - i, dims_left - 1, dim_offset + 1, lv, ps, out_levels, out_positions);
    }
  }
}

}  // namespace

SparseGrid::SparseGrid(int level, int dim, Index cap) : shape_(level, dim, cap) {
  const Index n = shape_.size();
  for (int i = 0; i <= level; ++i) {
    Block b;
    b.first_level = i;
    b.rows = Index{1} << i;
    if (dim == 1) {
      b.offset = (Index{1} << i) - 1;
      b.cols = 1;
    } else {
      b.offset = shape_.block_offset(level, dim, i);
      b.cols = shape_.size(level - i, dim - 1);
    }
    blocks_.push_back(b);
  }
  levels_.reserve(static_cast<std::size_t>(n * dim));
  positions_.reserve(static_cast<std::size_t>(n * dim));
  std::vector<int> lv(dim, 0);
  std::vector<std::int64_t> ps(dim, 1);
  enumerate(level, dim, 0, lv, ps, levels_, positions_);
}

double SparseGrid::coordinate(Index k, int j) const {
  return std::ldexp(static_cast<double>(point_position(k, j)), -(point_level(k, j) + 1));
}

GridIndex SparseGrid::point(Index k) const {
  GridIndex p;
  p.levels.resize(dim());
  p.positions.resize(dim());
  for (int j = 0; j < dim(); ++j) {
    p.levels[j] = point_level(k, j);
    p.positions[j] = point_position(k, j);
  }
  return p;
}

std::optional<Index> SparseGrid::find(const GridIndex& p) const {
  if (p.dim() != dim()) return std::nullopt;
  return shape_.rank(p);
}

RowMatrix SparseGrid::coordinates() const {
  RowMatrix x(size(), dim());
  for (Index k = 0; k < size(); ++k) {
    for (int j = 0; j < dim(); ++j) x(k, j) = coordinate(k, j);
  }
  return x;
}

void SparseGrid::write_csv(std::ostream& out) const {
  out << "index";
  for (int j = 0; j < dim(); ++j) out << ",l" << j;
  for (int j = 0; j < dim(); ++j) out << ",i" << j;
  for (int j = 0; j < dim(); ++j) out << ",x" << j;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (Index k = 0; k < size(); ++k) {
    out << k;
    for (int j = 0; j < dim(); ++j) out << ',' << point_level(k, j);
    for (int j = 0; j < dim(); ++j) out << ',' << point_position(k, j);
    for (int j = 0; j < dim(); ++j) out << ',' << coordinate(k, j);
    out << '\n';
  }
  out.precision(old_precision);
}

SparseGrid build_sparse_grid(int level, int dim, Index cap) {
  return SparseGrid(level, dim, cap);
}

// ----------------------------------------------------------- SelectionMap

void SelectionMap::select(std::span<const double> v, std::span<double> out) const {
  require(static_cast<Index>(v.size()) == to_size && static_cast<Index>(out.size()) == from_size,
          "SelectionMap::select: size mismatch");
  for (Index k = 0; k < from_size; ++k) out[k] = v[target_index[k]];
}

void SelectionMap::embed(std::span<const double> v, std::span<double> out) const {
  require(static_cast<Index>(v.size()) == from_size && static_cast<Index>(out.size()) == to_size,
          "SelectionMap::embed: size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (Index k = 0; k < from_size; ++k) out[target_index[k]] = v[k];
}

}  // namespace sgski
