#include "sgski/interp.h"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace sgski {

std::string to_string(BaseRule rule) {
  switch (rule) {
    case BaseRule::kSimplicial:
      return "simplicial";
    case BaseRule::kLinear:
      return "linear";
    case BaseRule::kCubic:
      return "cubic";
  }
  return "unknown";
}

BaseRule base_rule_from_string(const std::string& name) {
  if (name == "simplicial") return BaseRule::kSimplicial;
  if (name == "linear") return BaseRule::kLinear;
  if (name == "cubic") return BaseRule::kCubic;
  throw InputError("unknown interpolation rule '" + name + "'");
}

std::string to_string(SparseScheme scheme) {
  return scheme == SparseScheme::kCombination ? "combination" : "subsampled";
}

SparseScheme sparse_scheme_from_string(const std::string& name) {
  if (name == "combination") return SparseScheme::kCombination;
  if (name == "subsampled") return SparseScheme::kSubsampled;
  throw InputError("unknown sparse-grid scheme '" + name + "'");
}

Index base_density(BaseRule rule, int dim) {
  switch (rule) {
    case BaseRule::kSimplicial:
      return dim + 1;
    case BaseRule::kLinear:
      return Index{1} << dim;
    case BaseRule::kCubic:
      return Index{1} << (2 * dim);
  }
  return 0;
}

void merge_row(WeightRow& row) {
  std::sort(row.begin(), row.end(),
            [](const WeightEntry& a, const WeightEntry& b) { return a.index < b.index; });
  std::size_t out = 0;
  for (std::size_t k = 0; k < row.size();) {
    WeightEntry e = row[k++];
    while (k < row.size() && row[k].index == e.index) e.weight += row[k++].weight;
    if (e.weight != 0.0) row[out++] = e;
  }
  row.resize(out);
}

double keys_cubic(double s) {
  const double a = std::abs(s);
  if (a <= 1.0) return (1.5 * a - 2.5) * a * a + 1.0;
  if (a < 2.0) return ((-0.5 * a + 2.5) * a - 4.0) * a + 2.0;
  return 0.0;
}

namespace {

struct Node {
  Index cell;
  double weight;
};

// Lower cell corner and local coordinate in dimension j.
void locate(double x, const Lattice& lat, int j, Index& cell, double& r) {
  const Index m = lat.count(j);
  const double t = (x - lat.offset(j)) / lat.spacing(j);
  const double c = std::clamp(std::floor(t), 0.0, static_cast<double>(m - 2));
  cell = static_cast<Index>(c);
  r = std::clamp(t - c, 0.0, 1.0);
}

void linear_nodes(double x, const Lattice& lat, int j, std::vector<Node>& nodes) {
  nodes.clear();
  if (lat.count(j) == 1) {
    nodes.push_back({0, 1.0});
    return;
  }
  Index c;
  double r;
  locate(x, lat, j, c, r);
  nodes.push_back({c, 1.0 - r});
  nodes.push_back({c + 1, r});
}

void cubic_nodes(double x, const Lattice& lat, int j, std::vector<Node>& nodes) {
  const Index m = lat.count(j);
  if (m < 4) {
    linear_nodes(x, lat, j, nodes);
    return;
  }
  nodes.clear();
  const double t = std::clamp((x - lat.offset(j)) / lat.spacing(j), 0.0, static_cast<double>(m - 1));
  const Index c = std::min(static_cast<Index>(std::floor(t)), m - 2);
  const double r = t - static_cast<double>(c);
  const double w[4] = {keys_cubic(1.0 + r), keys_cubic(r), keys_cubic(1.0 - r),
                       keys_cubic(2.0 - r)};
  for (int k = 0; k < 4; ++k) {
    const Index node = c - 1 + k;
    if (node < 0) {
      // f(-1) = 3 f(0) - 3 f(1) + f(2)
      nodes.push_back({0, 3.0 * w[k]});
      nodes.push_back({1, -3.0 * w[k]});
      nodes.push_back({2, w[k]});
    } else if (node >= m) {
      nodes.push_back({m - 1, 3.0 * w[k]});
      nodes.push_back({m - 2, -3.0 * w[k]});
      nodes.push_back({m - 3, w[k]});
    } else {
      nodes.push_back({node, w[k]});
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.cell < b.cell; });
  std::size_t out = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (out > 0 && nodes[out - 1].cell == nodes[k].cell) {
      nodes[out - 1].weight += nodes[k].weight;
    } else {
      nodes[out++] = nodes[k];
    }
  }
  nodes.resize(out);
}

// Calls emit(cells, weight) for each stencil vertex of the base rule.
template <typename Emit>
void for_each_vertex(std::span<const double> x, const Lattice& lat, BaseRule kind, Emit&& emit) {
  const int d = lat.dim();
  require(static_cast<int>(x.size()) == d, "interpolation: point dimension mismatch");
  std::vector<Index> cells(static_cast<std::size_t>(d), 0);

  if (kind == BaseRule::kSimplicial) {
    std::vector<double> r(static_cast<std::size_t>(d), 0.0);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      if (lat.count(j) == 1) continue;
      locate(x[j], lat, j, cells[j], r[j]);
      order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return r[a] > r[b]; });
    if (order.empty()) {
      emit(std::span<const Index>(cells), 1.0);
      return;
    }
    emit(std::span<const Index>(cells), 1.0 - r[order[0]]);
    for (std::size_t k = 0; k < order.size(); ++k) {
      cells[order[k]] += 1;
      const double next = k + 1 < order.size() ? r[order[k + 1]] : 0.0;
      emit(std::span<const Index>(cells), r[order[k]] - next);
    }
    return;
  }

  std::vector<std::vector<Node>> per_dim(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    if (kind == BaseRule::kCubic) {
      cubic_nodes(x[j], lat, j, per_dim[j]);
    } else {
      linear_nodes(x[j], lat, j, per_dim[j]);
    }
  }
  std::vector<std::size_t> pick(static_cast<std::size_t>(d), 0);
  while (true) {
    double w = 1.0;
    for (int j = 0; j < d; ++j) {
      cells[j] = per_dim[j][pick[j]].cell;
      w *= per_dim[j][pick[j]].weight;
    }
    emit(std::span<const Index>(cells), w);
    int j = d - 1;
    while (j >= 0 && ++pick[j] == per_dim[j].size()) pick[j--] = 0;
    if (j < 0) break;
  }
}

WeightRow lattice_row(std::span<const double> x, const Lattice& lat, BaseRule kind) {
  WeightRow row;
  for_each_vertex(x, lat, kind, [&](std::span<const Index> cells, double w) {
    row.push_back({lat.flat_index(cells), w});
  });
  merge_row(row);
  return row;
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double b = 1.0;
  for (int t = 1; t <= k; ++t) b = b * (n - k + t) / t;
  return std::round(b);
}

void compositions(int total, int parts, std::vector<int>& cur,
                  std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == parts - 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int v = total; v >= 0; --v) {
    cur.push_back(v);
    compositions(total - v, parts, cur, out);
    cur.pop_back();
  }
}

std::vector<std::vector<int>> level_vectors(int total, int parts) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  compositions(total, parts, cur, out);
  return out;
}

}  // namespace

WeightRow simplicial_weights_rect(std::span<const double> x, const Lattice& lattice) {
  return lattice_row(x, lattice, BaseRule::kSimplicial);
}

WeightRow simplicial_weights_rect(std::span<const double> x, std::span<const int> levels) {
  return lattice_row(x, Lattice::from_levels(levels), BaseRule::kSimplicial);
}

WeightRow tensor_weights_rect(std::span<const double> x, const Lattice& lattice, BaseRule kind) {
  require(kind != BaseRule::kSimplicial, "tensor_weights_rect: kind must be linear or cubic");
  return lattice_row(x, lattice, kind);
}

WeightRow tensor_weights_rect(std::span<const double> x, std::span<const int> levels,
                              BaseRule kind) {
  return tensor_weights_rect(x, Lattice::from_levels(levels), kind);
}

WeightRow rect_weights(std::span<const double> x, const Lattice& lattice, BaseRule kind) {
  return lattice_row(x, lattice, kind);
}

std::vector<ComponentGrid> component_grids(int level, int dim, SparseScheme scheme) {
  require(level >= 0 && dim >= 1, "component_grids: need level >= 0 and dim >= 1");
  std::vector<ComponentGrid> out;
  if (scheme == SparseScheme::kCombination) {
    for (int q = 0; q < dim && q <= level; ++q) {
      const double coef = (q % 2 == 0 ? 1.0 : -1.0) * binomial(dim - 1, q);
      for (auto& l : level_vectors(level - q, dim)) out.push_back({std::move(l), coef});
    }
    return out;
  }
  require(level >= 1, "subsampled rule needs level >= 1");
  for (auto& l : level_vectors(level, dim)) {
    const bool keep = std::any_of(l.begin(), l.end(), [&](int v) { return v == level || v == level - 1; });
    if (keep) out.push_back({std::move(l), 1.0});
  }
  const double scale = 1.0 / static_cast<double>(out.size());
  for (auto& c : out) c.coefficient = scale;
  return out;
}

GridInterpolator GridInterpolator::sparse(int level, int dim, BaseRule base, SparseScheme scheme,
                                          Index cap) {
  GridInterpolator g;
  g.sparse_ = true;
  g.dim_ = dim;
  g.level_ = level;
  g.base_ = base;
  g.scheme_ = scheme;
  g.shape_ = SparseGridShape(level, dim, cap);
  g.components_ = component_grids(level, dim, scheme);
  for (const auto& c : g.components_) g.component_lattices_.push_back(Lattice::from_levels(c.levels));
  return g;
}

GridInterpolator GridInterpolator::dense(Lattice lattice, BaseRule base) {
  GridInterpolator g;
  g.sparse_ = false;
  g.dim_ = lattice.dim();
  g.base_ = base;
  g.lattice_ = std::move(lattice);
  return g;
}

Index GridInterpolator::grid_size() const { return sparse_ ? shape_.size() : lattice_.size(); }

Index GridInterpolator::density_bound() const {
  const Index grids = sparse_ ? static_cast<Index>(components_.size()) : 1;
  return base_density(base_, dim_) * grids;
}

Index GridInterpolator::top_level_density_bound() const {
  if (!sparse_) return base_density(base_, dim_);
  return base_density(base_, dim_) * static_cast<Index>(binomial(level_ + dim_ - 1, dim_ - 1));
}

WeightRow GridInterpolator::weights(std::span<const double> x) const {
  if (!sparse_) return lattice_row(x, lattice_, base_);
  WeightRow row;
  row.reserve(static_cast<std::size_t>(density_bound()));
  std::vector<std::int64_t> positions(static_cast<std::size_t>(dim_));
  for (std::size_t g = 0; g < components_.size(); ++g) {
    const auto& levels = components_[g].levels;
    const double coef = components_[g].coefficient;
    for_each_vertex(x, component_lattices_[g], base_, [&](std::span<const Index> cells, double w) {
      if (w == 0.0) return;
      for (int j = 0; j < dim_; ++j) positions[j] = 2 * cells[j] + 1;
      const auto idx = shape_.rank(levels, positions, level_);
      if (!idx) throw CorrectnessError("interpolation stencil point is not on the sparse grid");
      row.push_back({*idx, coef * w});
    });
  }
  merge_row(row);
  return row;
}

WeightRow combination_weights(std::span<const double> x, int level, int dim, BaseRule base) {
  return GridInterpolator::sparse(level, dim, base, SparseScheme::kCombination).weights(x);
}

WeightRow subsampled_weights(std::span<const double> x, int level, int dim, BaseRule base) {
  return GridInterpolator::sparse(level, dim, base, SparseScheme::kSubsampled).weights(x);
}

// ------------------------------------------------------------ WeightMatrix

WeightMatrix::WeightMatrix(Index cols, std::span<const WeightRow> rows) : cols_(cols) {
  row_ptr_.reserve(rows.size() + 1);
  Index total = 0;
  for (const auto& r : rows) total += static_cast<Index>(r.size());
  indices_.reserve(static_cast<std::size_t>(total));
  values_.reserve(static_cast<std::size_t>(total));
  for (const auto& r : rows) {
    for (const auto& e : r) {
      require(e.index >= 0 && e.index < cols, "WeightMatrix: column index out of range");
      indices_.push_back(e.index);
      values_.push_back(e.weight);
    }
    row_ptr_.push_back(static_cast<Index>(indices_.size()));
  }
}

Index WeightMatrix::max_row_density() const {
  Index best = 0;
  for (Index r = 0; r < rows(); ++r) best = std::max(best, row_ptr_[r + 1] - row_ptr_[r]);
  return best;
}

void WeightMatrix::apply(std::span<const double> v, std::span<double> out) const {
  require(static_cast<Index>(v.size()) == cols_ && static_cast<Index>(out.size()) == rows(),
          "WeightMatrix::apply: size mismatch");
  for (Index r = 0; r < rows(); ++r) {
    double s = 0.0;
    for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s += values_[k] * v[indices_[k]];
    out[r] = s;
  }
}

void WeightMatrix::apply_transpose(std::span<const double> u, std::span<double> out) const {
  require(static_cast<Index>(u.size()) == rows() && static_cast<Index>(out.size()) == cols_,
          "WeightMatrix::apply_transpose: size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (Index r = 0; r < rows(); ++r) {
    const double ur = u[r];
    for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out[indices_[k]] += values_[k] * ur;
  }
}

std::vector<double> WeightMatrix::row_squared_norms() const {
  std::vector<double> out(static_cast<std::size_t>(rows()), 0.0);
  for (Index r = 0; r < rows(); ++r) {
    for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out[r] += values_[k] * values_[k];
  }
  return out;
}

void WeightMatrix::write_triplets(std::ostream& out) const {
  out << "row,index,weight\n";
  out.precision(17);
  for (Index r = 0; r < rows(); ++r) {
    for (Index k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      out << r << ',' << indices_[k] << ',' << values_[k] << '\n';
    }
  }
}

WeightMatrix assemble_w(const RowMatrix& x, const GridInterpolator& interp) {
  require(x.cols() == interp.dim(), "assemble_w: point dimension does not match the grid");
  std::vector<WeightRow> rows(static_cast<std::size_t>(x.rows()));
  const Index bound = interp.density_bound();
  for (Index i = 0; i < x.rows(); ++i) {
    rows[i] = interp.weights(x.row(i));
    if (static_cast<Index>(rows[i].size()) > bound) {
      throw CorrectnessError("assemble_w: row density exceeds the rule bound");
    }
  }
  return WeightMatrix(interp.grid_size(), rows);
}

}  // namespace sgski
