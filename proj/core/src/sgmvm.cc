#include "sgski/sgmvm.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

namespace sgski {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Index pow2(int e) { return Index{1} << e; }

}  // namespace

std::string to_string(MvmAlgorithm algo) {
  switch (algo) {
    case MvmAlgorithm::kNaive:
      return "naive";
    case MvmAlgorithm::kRecursive:
      return "recursive";
    case MvmAlgorithm::kIterative:
      return "iterative";
  }
  return "unknown";
}

MvmAlgorithm mvm_algorithm_from_string(const std::string& name) {
  if (name == "naive") return MvmAlgorithm::kNaive;
  if (name == "recursive") return MvmAlgorithm::kRecursive;
  if (name == "iterative") return MvmAlgorithm::kIterative;
  throw InputError("unknown MVM algorithm '" + name + "'");
}

// ------------------------------------------------------------------ naive

std::vector<double> naive_kernel_mvm(const SparseGrid& grid, const ProductKernel& kernel,
                                     std::span<const double> v, Index cap) {
  const Index m = grid.size();
  require(static_cast<Index>(v.size()) == m, "naive_kernel_mvm: size mismatch");
  require(kernel.dim() == grid.dim(), "naive_kernel_mvm: kernel dimension mismatch");
  if (m > cap) {
    throw ResourceError("naive_kernel_mvm: " + std::to_string(m) + " points exceed the cap of " +
                        std::to_string(cap));
  }
  const RowMatrix x = grid.coordinates();
  std::vector<double> out(static_cast<std::size_t>(m), 0.0);
  for (Index a = 0; a < m; ++a) {
    double s = 0.0;
    for (Index b = 0; b < m; ++b) s += kernel_eval(kernel, x.row(a), x.row(b)) * v[b];
    out[a] = s;
  }
  return out;
}

NaiveKernelMatrix::NaiveKernelMatrix(const RowMatrix& points, const ProductKernel& kernel,
                                     Index cap)
    : n_(points.rows()) {
  require(points.cols() == kernel.dim(), "NaiveKernelMatrix: kernel dimension mismatch");
  if (n_ > cap) {
    throw ResourceError("NaiveKernelMatrix: " + std::to_string(n_) +
                        " points exceed the cap of " + std::to_string(cap));
  }
  k_.resize(static_cast<std::size_t>(n_ * n_));
  for (Index a = 0; a < n_; ++a) {
    k_[a * n_ + a] = kernel(points.row(a), points.row(a));
    for (Index b = a + 1; b < n_; ++b) {
      const double kab = kernel(points.row(a), points.row(b));
      k_[a * n_ + b] = kab;
      k_[b * n_ + a] = kab;
    }
  }
}

void NaiveKernelMatrix::apply(std::span<const double> v, std::span<double> out) const {
  require(static_cast<Index>(v.size()) == n_ && static_cast<Index>(out.size()) == n_,
          "NaiveKernelMatrix::apply: size mismatch");
  for (Index a = 0; a < n_; ++a) {
    const double* row = k_.data() + a * n_;
    double s = 0.0;
    for (Index b = 0; b < n_; ++b) s += row[b] * v[b];
    out[a] = s;
  }
}

// ------------------------------------------------------------------- plan

MvmPlan::MvmPlan(int level, int dim, const ProductKernel& kernel, Index cap)
    : shape_(level, dim, cap), kernel_(kernel) {}

MvmPlan MvmPlan::build(int level, int dim, const ProductKernel& kernel,
                       const PlanOptions& options) {
  const auto start = Clock::now();
  require(kernel.dim() == dim, "build_plan: kernel dimension does not match grid dimension");
  MvmPlan plan(level, dim, kernel, options.point_cap);

  std::string cache_path;
  if (!options.cache_dir.empty()) {
    cache_path = (std::filesystem::path(options.cache_dir) /
                  ("plan_l" + std::to_string(level) + "_d" + std::to_string(dim) + ".bin"))
                     .string();
    plan.loaded_from_cache_ = plan.load_tables(cache_path);
  }
  if (!plan.loaded_from_cache_) {
    plan.build_tables();
    if (!cache_path.empty()) plan.save_tables(cache_path);
  }
  plan.build_groups();
  plan.refresh_kernel(kernel);
  plan.build_seconds_ = seconds_since(start);
  return plan;
}

void MvmPlan::refresh_kernel(const ProductKernel& kernel) {
  require(kernel.dim() == dim(), "refresh_kernel: dimension mismatch");
  const bool have_factors = !toeplitz_.empty();
  std::vector<ToeplitzSpec> next;
  next.reserve(static_cast<std::size_t>(dim()) * (level() + 1));
  for (int j = 0; j < dim(); ++j) {
    const bool same = have_factors && kernel.lengthscale(j) == kernel_.lengthscale(j) &&
                      kernel.family() == kernel_.family();
    for (int l = 0; l <= level(); ++l) {
      next.push_back(same ? toeplitz(j, l) : toeplitz_from_grid(kernel, j, l));
    }
  }
  toeplitz_ = std::move(next);
  kernel_ = kernel;
}

std::span<const Index> MvmPlan::sorted_order(int level) const {
  return {orders_.data() + order_offsets_[level],
          static_cast<std::size_t>(order_offsets_[level + 1] - order_offsets_[level])};
}

std::size_t MvmPlan::embed_slot(int dims, int from_level, int to_level) const {
  const int nl = level() + 1;
  return (static_cast<std::size_t>(dims - 1) * nl + from_level) * nl + to_level;
}

std::span<const Index> MvmPlan::embedding(int dims, int from_level, int to_level) const {
  require(dims >= 1 && dims <= dim() && from_level <= to_level && to_level <= level(),
          "MvmPlan::embedding: invalid grid pair");
  const std::size_t s = embed_slot(dims, from_level, to_level);
  return {embeds_.data() + embed_offsets_[s],
          static_cast<std::size_t>(embed_offsets_[s + 1] - embed_offsets_[s])};
}

SelectionMap MvmPlan::selection(int dims, int from_level, int to_level) const {
  const auto e = embedding(dims, from_level, to_level);
  SelectionMap map;
  map.from_size = shape_.size(from_level, dims);
  map.to_size = shape_.size(to_level, dims);
  map.target_index.assign(e.begin(), e.end());
  return map;
}

void MvmPlan::build_tables() {
  const int nl = level() + 1;
  order_offsets_.assign(static_cast<std::size_t>(nl + 1), 0);
  orders_.clear();
  for (int L = 0; L <= level(); ++L) {
    order_offsets_[L] = static_cast<Index>(orders_.size());
    for (int l = 0; l <= L; ++l) {
      for (Index c = 0; c < pow2(l); ++c) orders_.push_back(sorted_rank_1d(L, l, 2 * c + 1));
    }
  }
  order_offsets_[nl] = static_cast<Index>(orders_.size());

  // Embeddings for dims = 1..dim; built bottom-up since G_{a,d} -> G_{b,d}
  // maps block i through G_{a-i,d-1} -> G_{b-i,d-1}.
  const std::size_t slots = static_cast<std::size_t>(dim()) * nl * nl;
  embed_offsets_.assign(slots + 1, 0);
  embeds_.clear();
  for (int dims = 1; dims <= dim(); ++dims) {
    for (int a = 0; a <= level(); ++a) {
      for (int b = 0; b <= level(); ++b) {
        const std::size_t s = embed_slot(dims, a, b);
        embed_offsets_[s] = static_cast<Index>(embeds_.size());
        if (a > b) continue;
        if (dims == 1) {
          for (Index k = 0; k < shape_.size(a, 1); ++k) embeds_.push_back(k);
          continue;
        }
        for (int i = 0; i <= a; ++i) {
          const std::size_t sub = embed_slot(dims - 1, a - i, b - i);
          const Index sub_begin = embed_offsets_[sub];
          const Index sub_size = shape_.size(a - i, dims - 1);
          const Index target_cols = shape_.size(b - i, dims - 1);
          const Index base = shape_.block_offset(b, dims, i);
          for (Index r = 0; r < pow2(i); ++r) {
            for (Index c = 0; c < sub_size; ++c) {
              embeds_.push_back(base + r * target_cols + embeds_[sub_begin + c]);
            }
          }
        }
      }
    }
  }
  embed_offsets_[slots] = static_cast<Index>(embeds_.size());
  // Slots are filled in increasing order, so each slot ends where the next begins.
}

namespace {

constexpr char kCacheMagic[8] = {'S', 'G', 'S', 'K', 'I', 'P', 'L', '1'};

template <typename Vec>
void write_vec(std::ofstream& out, const Vec& v) {
  const std::int64_t n = static_cast<std::int64_t>(v.size());
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(Index)));
}

template <typename Vec>
bool read_vec(std::ifstream& in, Vec& v) {
  std::int64_t n = 0;
  if (!in.read(reinterpret_cast<char*>(&n), sizeof n) || n < 0) return false;
  v.resize(static_cast<std::size_t>(n));
  return static_cast<bool>(in.read(reinterpret_cast<char*>(v.data()),
                                   static_cast<std::streamsize>(n * sizeof(Index))));
}

}  // namespace

bool MvmPlan::load_tables(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  std::int32_t header[2];
  if (!in.read(magic, 8) || std::memcmp(magic, kCacheMagic, 8) != 0) return false;
  if (!in.read(reinterpret_cast<char*>(header), sizeof header)) return false;
  if (header[0] != level() || header[1] != dim()) return false;
  const bool ok = read_vec(in, orders_) && read_vec(in, order_offsets_) &&
                  read_vec(in, embeds_) && read_vec(in, embed_offsets_);
  const std::size_t nl = static_cast<std::size_t>(level() + 1);
  if (!ok || order_offsets_.size() != nl + 1 ||
      embed_offsets_.size() != static_cast<std::size_t>(dim()) * nl * nl + 1 ||
      embed_offsets_.back() != static_cast<Index>(embeds_.size()) ||
      order_offsets_.back() != static_cast<Index>(orders_.size())) {
    orders_.clear();
    embeds_.clear();
    return false;
  }
  return true;
}

void MvmPlan::save_tables(const std::string& path) const {
  std::error_code ec;
  std::filesystem::create_directories(std::filesystem::path(path).parent_path(), ec);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) return;
    const std::int32_t header[2] = {level(), dim()};
    out.write(kCacheMagic, 8);
    out.write(reinterpret_cast<const char*>(header), sizeof header);
    write_vec(out, orders_);
    write_vec(out, order_offsets_);
    write_vec(out, embeds_);
    write_vec(out, embed_offsets_);
    if (!out) return;
  }
  std::filesystem::rename(tmp, path, ec);
}

void MvmPlan::build_groups() {
  const int nl = level() + 1;
  group_counts_.assign(static_cast<std::size_t>(dim()) * nl, 0);
  child_offsets_.assign(static_cast<std::size_t>(dim()) * nl * nl, 0);
  group_counts_[level()] = 1;
  for (int depth = 0; depth + 1 < dim(); ++depth) {
    std::vector<Index> running(static_cast<std::size_t>(nl), 0);
    for (int L = 0; L <= level(); ++L) {
      const Index c = group_count(depth, L);
      if (c == 0) continue;
      for (int i = 0; i <= L; ++i) {
        child_offsets_[(static_cast<std::size_t>(depth) * nl + L) * nl + i] = running[L - i];
        running[L - i] += c * 2 * pow2(i);
      }
    }
    for (int L = 0; L <= level(); ++L) {
      group_counts_[static_cast<std::size_t>(depth + 1) * nl + L] = running[L];
    }
  }
}

Index MvmPlan::group_count(int depth, int level) const {
  return group_counts_[static_cast<std::size_t>(depth) * (this->level() + 1) + level];
}

Index MvmPlan::child_offset(int depth, int level, int i) const {
  const int nl = this->level() + 1;
  return child_offsets_[(static_cast<std::size_t>(depth) * nl + level) * nl + i];
}

std::int64_t MvmPlan::bytes() const {
  std::int64_t total = static_cast<std::int64_t>((orders_.size() + embeds_.size()) * sizeof(Index));
  for (const auto& t : toeplitz_) {
    total += static_cast<std::int64_t>(t.size() * sizeof(double)) +
             (t.size() > ToeplitzSpec::kDirectCutoff
                  ? static_cast<std::int64_t>((t.embedding_size() / 2 + 1) * sizeof(double))
                  : 0);
  }
  return total;
}

std::int64_t MvmWorkspace::bytes() const {
  std::int64_t total = static_cast<std::int64_t>((abar_.capacity() + bsum_.capacity()) * sizeof(double));
  for (const auto& g : groups_) total += static_cast<std::int64_t>(g.capacity() * sizeof(double));
  return total;
}

// -------------------------------------------------------------- recursive
//
// Block i of G_{L,d'} is Omega_i x G_{L-i,d'-1}, stored row-major as V_i with
// R = 2^i rows and n_i = |G_{L-i,d'-1}| columns. Because G_{i,1} is Omega_0..
// Omega_i concatenated, Omega_i sits at rows [R-1, 2R-1) of a G_{i,1}-indexed
// matrix. With U_i = sum_j K_{Omega_i,Omega_j} V_j K_{G_{L-j},G_{L-i}}:
//   j >  i:  rows of Abar_j = K_{G_{j,1}} [0; V_j] restricted to Omega_i,
//            columns embedded G_{L-j} -> G_{L-i}, then times K_{G_{L-i}}.
//   j <= i:  Bbar_j = V_j K_{G_{L-j}}, columns selected G_{L-j} -> G_{L-i},
//            rows placed at Omega_j in G_{i,1}, then K_{G_{i,1}} and rows
//            restricted to Omega_i.

namespace {

class RecursiveMvm {
 public:
  explicit RecursiveMvm(const MvmPlan& plan) : plan_(plan) {}

  void run(int depth, int L, const double* v, double* u) const {
    const int dims = plan_.dim() - depth;
    if (dims == 1) {
      const Index n = plan_.shape().size(L, 1);
      plan_.toeplitz(depth, L).apply_strided(v, u, 1, n, 1, plan_.sorted_order(L));
      return;
    }
    const auto& shape = plan_.shape();
    std::vector<tracked_vector<double>> abar(static_cast<std::size_t>(L + 1));
    std::vector<tracked_vector<double>> bbar(static_cast<std::size_t>(L + 1));

    for (int i = 0; i <= L; ++i) {
      const Index rows = pow2(i);
      const Index g = 2 * rows - 1;
      const Index n = shape.size(L - i, dims - 1);
      const double* vi = v + shape.block_offset(L, dims, i);
      abar[i].assign(static_cast<std::size_t>(g * n), 0.0);
      std::copy(vi, vi + rows * n, abar[i].begin() + (rows - 1) * n);
      plan_.toeplitz(depth, i).apply_strided(abar[i].data(), abar[i].data(), n, 1, n,
                                             plan_.sorted_order(i));
      bbar[i].resize(static_cast<std::size_t>(rows * n));
      for (Index r = 0; r < rows; ++r) run(depth + 1, L - i, vi + r * n, bbar[i].data() + r * n);
    }

    tracked_vector<double> acc;
    for (int i = 0; i <= L; ++i) {
      const Index rows = pow2(i);
      const Index g = 2 * rows - 1;
      const Index n = shape.size(L - i, dims - 1);
      double* ui = u + shape.block_offset(L, dims, i);

      acc.assign(static_cast<std::size_t>(rows * n), 0.0);
      for (int j = i + 1; j <= L; ++j) {
        const Index nj = shape.size(L - j, dims - 1);
        const auto embed = plan_.embedding(dims - 1, L - j, L - i);
        for (Index r = 0; r < rows; ++r) {
          const double* src = abar[j].data() + (rows - 1 + r) * nj;
          double* dst = acc.data() + r * n;
          for (Index c = 0; c < nj; ++c) dst[embed[c]] += src[c];
        }
      }
      for (Index r = 0; r < rows; ++r) run(depth + 1, L - i, acc.data() + r * n, ui + r * n);

      acc.assign(static_cast<std::size_t>(g * n), 0.0);
      for (int j = 0; j <= i; ++j) {
        const Index rj = pow2(j);
        const Index nj = shape.size(L - j, dims - 1);
        const auto select = plan_.embedding(dims - 1, L - i, L - j);
        for (Index r = 0; r < rj; ++r) {
          const double* src = bbar[j].data() + r * nj;
          double* dst = acc.data() + (rj - 1 + r) * n;
          for (Index c = 0; c < n; ++c) dst[c] += src[select[c]];
        }
      }
      plan_.toeplitz(depth, i).apply_strided(acc.data(), acc.data(), n, 1, n,
                                             plan_.sorted_order(i));
      const double* tail = acc.data() + (rows - 1) * n;
      for (Index k = 0; k < rows * n; ++k) ui[k] += tail[k];
    }
  }

 private:
  const MvmPlan& plan_;
};

void check_vector(const MvmPlan& plan, std::span<const double> v, std::span<double> out,
                  Index count) {
  if (static_cast<Index>(v.size()) != plan.size() * count ||
      static_cast<Index>(out.size()) != plan.size() * count) {
    throw InputError("sg_mvm: vector length does not match the sparse grid size " +
                     std::to_string(plan.size()));
  }
}

}  // namespace

void sg_mvm(const MvmPlan& plan, std::span<const double> v, std::span<double> out) {
  check_vector(plan, v, out, 1);
  RecursiveMvm(plan).run(0, plan.level(), v.data(), out.data());
  const double s = plan.kernel().output_scale();
  for (double& x : out) x *= s;
}

std::vector<double> sg_mvm(const MvmPlan& plan, std::span<const double> v) {
  std::vector<double> out(v.size());
  sg_mvm(plan, v, out);
  return out;
}

// ---------------------------------------------------------------- batched

class BatchedMvm {
 public:
  BatchedMvm(const MvmPlan& plan, MvmWorkspace& ws, Index batch)
      : plan_(plan), shape_(plan.shape()), ws_(ws), batch_(batch) {
    prepare();
  }

  void run(const double* v, double* out) {
    const int d = plan_.dim();
    const int top = plan_.level();
    double* x = group(0, top);
    std::copy(v, v + batch_ * plan_.size(), x);
    for (int depth = 0; depth + 1 < d; ++depth) forward(depth);
    base(d - 1);
    for (int depth = d - 2; depth >= 0; --depth) backward(depth);
    const double s = plan_.kernel().output_scale();
    const Index total = batch_ * plan_.size();
    for (Index k = 0; k < total; ++k) out[k] = x[k] * s;
  }

 private:
  double* group(int depth, int L) {
    return ws_.groups_[static_cast<std::size_t>(depth) * (plan_.level() + 1) + L].data();
  }
  Index count(int depth, int L) const { return batch_ * plan_.group_count(depth, L); }

  void prepare() {
    const int nl = plan_.level() + 1;
    abar_ptrs_.resize(static_cast<std::size_t>(nl));
    if (ws_.batch_ == batch_ && ws_.level_ == plan_.level() && ws_.dim_ == plan_.dim()) return;
    ws_.groups_.assign(static_cast<std::size_t>(plan_.dim()) * nl, {});
    Index abar_max = 0;
    Index bsum_max = 0;
    for (int depth = 0; depth < plan_.dim(); ++depth) {
      const int dims = plan_.dim() - depth;
      for (int L = 0; L <= plan_.level(); ++L) {
        const Index c = count(depth, L);
        if (c == 0) continue;
        ws_.groups_[static_cast<std::size_t>(depth) * nl + L].assign(
            static_cast<std::size_t>(c * shape_.size(L, dims)), 0.0);
        if (dims == 1) continue;
        Index abar = 0;
        for (int i = 0; i <= L; ++i) {
          const Index gi = (2 * pow2(i) - 1) * shape_.size(L - i, dims - 1);
          abar += gi;
          bsum_max = std::max(bsum_max, gi);
        }
        abar_max = std::max(abar_max, abar);
      }
    }
    ws_.abar_.assign(static_cast<std::size_t>(abar_max), 0.0);
    ws_.bsum_.assign(static_cast<std::size_t>(bsum_max), 0.0);
    ws_.batch_ = batch_;
    ws_.level_ = plan_.level();
    ws_.dim_ = plan_.dim();
  }

  void forward(int depth) {
    const int dims = plan_.dim() - depth;
    for (int L = 0; L <= plan_.level(); ++L) {
      const Index c = count(depth, L);
      if (c == 0) continue;
      const Index size = shape_.size(L, dims);
      for (Index b = 0; b < c; ++b) {
        const double* x = group(depth, L) + b * size;
        // Abar_i = K_{G_{i,1}} [0; V_i]
        double* abar = ws_.abar_.data();
        std::vector<double*>& abar_i = abar_ptrs_;
        for (int i = 0; i <= L; ++i) {
          const Index rows = pow2(i);
          const Index n = shape_.size(L - i, dims - 1);
          abar_i[i] = abar;
          std::fill(abar, abar + (rows - 1) * n, 0.0);
          const double* vi = x + shape_.block_offset(L, dims, i);
          std::copy(vi, vi + rows * n, abar + (rows - 1) * n);
          plan_.toeplitz(depth, i).apply_strided(abar, abar, n, 1, n, plan_.sorted_order(i));
          abar += (2 * rows - 1) * n;
        }
        // Children: V_i rows then the A-sum rows, both to be multiplied by
        // K_{G_{L-i,dims-1}}.
        for (int i = 0; i <= L; ++i) {
          const Index rows = pow2(i);
          const Index n = shape_.size(L - i, dims - 1);
          double* child = group(depth + 1, L - i) +
                          (batch_ * plan_.child_offset(depth, L, i) + b * 2 * rows) * n;
          const double* vi = x + shape_.block_offset(L, dims, i);
          std::copy(vi, vi + rows * n, child);
          double* asum = child + rows * n;
          std::fill(asum, asum + rows * n, 0.0);
          for (int j = i + 1; j <= L; ++j) {
            const Index nj = shape_.size(L - j, dims - 1);
            const auto embed = plan_.embedding(dims - 1, L - j, L - i);
            for (Index r = 0; r < rows; ++r) {
              const double* src = abar_i[j] + (rows - 1 + r) * nj;
              double* dst = asum + r * n;
              for (Index col = 0; col < nj; ++col) dst[embed[col]] += src[col];
            }
          }
        }
      }
    }
  }

  void base(int depth) {
    for (int L = 0; L <= plan_.level(); ++L) {
      const Index c = count(depth, L);
      if (c == 0) continue;
      const Index n = shape_.size(L, 1);
      double* x = group(depth, L);
      plan_.toeplitz(depth, L).apply_strided(x, x, c, n, 1, plan_.sorted_order(L));
    }
  }

  void backward(int depth) {
    const int dims = plan_.dim() - depth;
    for (int L = 0; L <= plan_.level(); ++L) {
      const Index c = count(depth, L);
      if (c == 0) continue;
      const Index size = shape_.size(L, dims);
      for (Index b = 0; b < c; ++b) {
        double* u = group(depth, L) + b * size;
        for (int i = 0; i <= L; ++i) {
          const Index rows = pow2(i);
          const Index n = shape_.size(L - i, dims - 1);
          double* bsum = ws_.bsum_.data();
          std::fill(bsum, bsum + (2 * rows - 1) * n, 0.0);
          for (int j = 0; j <= i; ++j) {
            const Index rj = pow2(j);
            const Index nj = shape_.size(L - j, dims - 1);
            const double* bbar = group(depth + 1, L - j) +
                                 (batch_ * plan_.child_offset(depth, L, j) + b * 2 * rj) * nj;
            const auto select = plan_.embedding(dims - 1, L - i, L - j);
            for (Index r = 0; r < rj; ++r) {
              const double* src = bbar + r * nj;
              double* dst = bsum + (rj - 1 + r) * n;
              for (Index col = 0; col < n; ++col) dst[col] += src[select[col]];
            }
          }
          plan_.toeplitz(depth, i).apply_strided(bsum, bsum, n, 1, n, plan_.sorted_order(i));
          const double* a = group(depth + 1, L - i) +
                            (batch_ * plan_.child_offset(depth, L, i) + b * 2 * rows + rows) * n;
          const double* tail = bsum + (rows - 1) * n;
          double* ui = u + shape_.block_offset(L, dims, i);
          for (Index k = 0; k < rows * n; ++k) ui[k] = a[k] + tail[k];
        }
      }
    }
  }

  const MvmPlan& plan_;
  const SparseGridShape& shape_;
  MvmWorkspace& ws_;
  Index batch_;
  std::vector<double*> abar_ptrs_;
};

void sg_mvm_batched(const MvmPlan& plan, std::span<const double> v, std::span<double> out,
                    Index count, MvmWorkspace* workspace) {
  require(count >= 1, "sg_mvm_batched: need at least one vector");
  check_vector(plan, v, out, count);
  MvmWorkspace local;
  MvmWorkspace& ws = workspace ? *workspace : local;
  BatchedMvm(plan, ws, count).run(v.data(), out.data());
}

void sg_mvm_batched(const MvmPlan& plan, const RowMatrix& v, RowMatrix& out,
                    MvmWorkspace* workspace) {
  if (v.rows() != plan.size()) {
    throw InputError("sg_mvm_batched: matrix has " + std::to_string(v.rows()) +
                     " rows, expected " + std::to_string(plan.size()));
  }
  const Index m = v.rows();
  const Index r = v.cols();
  std::vector<double> packed(static_cast<std::size_t>(m * r));
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < r; ++b) packed[b * m + a] = v(a, b);
  }
  std::vector<double> result(packed.size());
  sg_mvm_batched(plan, packed, result, r, workspace);
  if (out.rows() != m || out.cols() != r) out = RowMatrix(m, r);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < r; ++b) out(a, b) = result[b * m + a];
  }
}

// ------------------------------------------------------------------ probe

MvmCost mvm_cost_probe(const MvmPlan& plan, MvmAlgorithm algo, int repetitions,
                       std::uint64_t seed) {
  require(repetitions >= 1, "mvm_cost_probe: repetitions must be >= 1");
  MvmCost cost;
  cost.algo = algo;
  cost.level = plan.level();
  cost.dim = plan.dim();
  cost.grid_size = plan.size();
  cost.repetitions = repetitions;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> v(static_cast<std::size_t>(plan.size()));
  for (double& x : v) x = normal(rng);
  std::vector<double> u(v.size());

  std::vector<double> times;
  // Short products are looped so each timed trial spans at least kMinTrialSeconds.
  constexpr double kMinTrialSeconds = 0.02;
  auto time_runs = [&](auto&& once) {
    const auto warm = Clock::now();
    once();  // warm-up, discarded
    const double first = seconds_since(warm);
    const int calls = first >= kMinTrialSeconds
                          ? 1
                          : static_cast<int>(std::ceil(kMinTrialSeconds / std::max(first, 1e-7)));
    for (int r = 0; r < repetitions; ++r) {
      const auto start = Clock::now();
      for (int c = 0; c < calls; ++c) once();
      times.push_back(seconds_since(start) / calls);
    }
  };

  PeakMemoryScope scope;
  if (algo == MvmAlgorithm::kNaive) {
    const auto start = Clock::now();
    const SparseGrid grid(plan.level(), plan.dim());
    NaiveKernelMatrix k(grid.coordinates(), plan.kernel());
    cost.build_s = seconds_since(start);
    time_runs([&] { k.apply(v, u); });
    cost.peak_bytes = scope.peak_above_baseline();
  } else if (algo == MvmAlgorithm::kRecursive) {
    cost.build_s = plan.build_seconds();
    time_runs([&] { sg_mvm(plan, v, u); });
    cost.peak_bytes = plan.bytes() + scope.peak_above_baseline();
  } else {
    cost.build_s = plan.build_seconds();
    MvmWorkspace ws;
    time_runs([&] { sg_mvm_batched(plan, v, u, 1, &ws); });
    cost.peak_bytes = plan.bytes() + scope.peak_above_baseline();
  }

  double mean = 0.0;
  for (double t : times) mean += t;
  mean /= static_cast<double>(times.size());
  double var = 0.0;
  for (double t : times) var += (t - mean) * (t - mean);
  cost.mvm_s = mean;
  cost.mvm_stderr_s =
      times.size() > 1 ? std::sqrt(var / static_cast<double>(times.size() - 1) /
                                   static_cast<double>(times.size()))
                       : 0.0;
  return cost;
}

}  // namespace sgski
