#ifndef SGSKI_INTERP_H_
#define SGSKI_INTERP_H_

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sgski/grid.h"
#include "sgski/matrix.h"

namespace sgski {

enum class BaseRule { kSimplicial, kLinear, kCubic };

std::string to_string(BaseRule rule);
BaseRule base_rule_from_string(const std::string& name);

// Entries per row on a d-dimensional rectilinear grid: d+1, 2^d or 4^d.
Index base_density(BaseRule rule, int dim);

struct WeightEntry {
  Index index;
  double weight;
  friend bool operator==(const WeightEntry&, const WeightEntry&) = default;
};
using WeightRow = std::vector<WeightEntry>;

// Sorts by index, sums duplicates and drops entries that are exactly zero.
void merge_row(WeightRow& row);

// Base rules on a cell-centred lattice; indices are the lattice's flat
// row-major indices. Cell indices are clamped to [0, m_j - 2] and local
// coordinates to [0, 1]; dimensions with a single point are constant.
WeightRow simplicial_weights_rect(std::span<const double> x, const Lattice& lattice);
WeightRow simplicial_weights_rect(std::span<const double> x, std::span<const int> levels);
// Linear or cubic tensor-product rule. Cubic uses the Keys convolution kernel
// (a = -1/2) with its boundary extrapolation and falls back to linear in
// dimensions with fewer than four points.
WeightRow tensor_weights_rect(std::span<const double> x, const Lattice& lattice, BaseRule kind);
WeightRow tensor_weights_rect(std::span<const double> x, std::span<const int> levels,
                              BaseRule kind);
WeightRow rect_weights(std::span<const double> x, const Lattice& lattice, BaseRule kind);

// Per-dimension Keys cubic convolution kernel.
double keys_cubic(double s);

enum class SparseScheme { kCombination, kSubsampled };

std::string to_string(SparseScheme scheme);
SparseScheme sparse_scheme_from_string(const std::string& name);

struct ComponentGrid {
  std::vector<int> levels;
  double coefficient;
};

// Rectilinear grids and coefficients used to interpolate on G_{level,dim}:
//   combination: sum_{q<dim} (-1)^q C(dim-1, q) over all |l|_1 = level - q >= 0
//   subsampled:  |l|_1 = level with level or level-1 among the l_j, equally
//                weighted.
std::vector<ComponentGrid> component_grids(int level, int dim, SparseScheme scheme);

// Interpolation onto a sparse grid (combination technique or subsampled
// rule) or onto a dense lattice. Row indices are global grid indices.
class GridInterpolator {
 public:
  static GridInterpolator sparse(int level, int dim, BaseRule base,
                                 SparseScheme scheme = SparseScheme::kCombination,
                                 Index cap = kDefaultPointCap);
  static GridInterpolator dense(Lattice lattice, BaseRule base);

  bool is_sparse() const { return sparse_; }
  int dim() const { return dim_; }
  int level() const { return level_; }
  BaseRule base() const { return base_; }
  SparseScheme scheme() const { return scheme_; }
  Index grid_size() const;
  const Lattice& lattice() const { return lattice_; }
  const std::vector<ComponentGrid>& components() const { return components_; }

  WeightRow weights(std::span<const double> x) const;

  // Hard bound on entries per row: base density times grids used.
  Index density_bound() const;
  // The looser count that multiplies the base density by the number of
  // top-level grids only, C(level + dim - 1, dim - 1).
  Index top_level_density_bound() const;

 private:
  GridInterpolator() : lattice_(std::vector<Index>{1}) {}

  bool sparse_ = false;
  int dim_ = 0;
  int level_ = 0;
  BaseRule base_ = BaseRule::kSimplicial;
  SparseScheme scheme_ = SparseScheme::kCombination;
  std::vector<ComponentGrid> components_;
  std::vector<Lattice> component_lattices_;
  SparseGridShape shape_{0, 1};
  Lattice lattice_;
};

// One-off conveniences; build a GridInterpolator when weighting many points.
WeightRow combination_weights(std::span<const double> x, int level, int dim, BaseRule base);
WeightRow subsampled_weights(std::span<const double> x, int level, int dim, BaseRule base);

// Row-sparse n x m matrix in compressed-row form.
class WeightMatrix {
 public:
  WeightMatrix() = default;
  WeightMatrix(Index cols, std::span<const WeightRow> rows);

  Index rows() const { return static_cast<Index>(row_ptr_.size()) - 1; }
  Index cols() const { return cols_; }
  Index nnz() const { return static_cast<Index>(values_.size()); }
  Index max_row_density() const;

  std::span<const Index> row_indices(Index r) const {
    return {indices_.data() + row_ptr_[r], static_cast<std::size_t>(row_ptr_[r + 1] - row_ptr_[r])};
  }
  std::span<const double> row_values(Index r) const {
    return {values_.data() + row_ptr_[r], static_cast<std::size_t>(row_ptr_[r + 1] - row_ptr_[r])};
  }

  // out = W v
  void apply(std::span<const double> v, std::span<double> out) const;
  // out = W^T u
  void apply_transpose(std::span<const double> u, std::span<double> out) const;
  // ||w_r||^2 per row.
  std::vector<double> row_squared_norms() const;

  // row,index,weight triplets with a header line.
  void write_triplets(std::ostream& out) const;

 private:
  Index cols_ = 0;
  std::vector<Index> row_ptr_{0};
  std::vector<Index> indices_;
  std::vector<double> values_;
};

// Stacks the weight rows of all points (rows of X, already inside [0,1]^d).
WeightMatrix assemble_w(const RowMatrix& x, const GridInterpolator& interp);

}  // namespace sgski

#endif  // SGSKI_INTERP_H_
