#ifndef SGSKI_SGMVM_H_
#define SGSKI_SGMVM_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgski/grid.h"
#include "sgski/kernel.h"
#include "sgski/matrix.h"
#include "sgski/memory.h"

namespace sgski {

enum class MvmAlgorithm { kNaive, kRecursive, kIterative };

std::string to_string(MvmAlgorithm algo);
MvmAlgorithm mvm_algorithm_from_string(const std::string& name);

// Point cap for the quadratic reference multiply.
inline constexpr Index kNaivePointCap = 30'000;

// u = K v with K formed pointwise by kernel_eval. O(m^2) time, O(m) memory.
std::vector<double> naive_kernel_mvm(const SparseGrid& grid, const ProductKernel& kernel,
                                     std::span<const double> v, Index cap = kNaivePointCap);

// Fully materialized kernel matrix on an arbitrary point set; the quadratic
// baseline the fast multiply is benchmarked against.
class NaiveKernelMatrix {
 public:
  NaiveKernelMatrix(const RowMatrix& points, const ProductKernel& kernel,
                    Index cap = kNaivePointCap);

  Index size() const { return n_; }
  double operator()(Index r, Index c) const { return k_[r * n_ + c]; }
  void apply(std::span<const double> v, std::span<double> out) const;

 private:
  Index n_;
  tracked_vector<double> k_;
};

struct PlanOptions {
  Index point_cap = kDefaultPointCap;
  // Directory for cached index tables; empty disables caching.
  std::string cache_dir;
};

// Everything a repeated sparse-grid kernel multiply needs: sub-grid size and
// offset tables for every G_{L,d'} (L <= level, d' <= dim), the canonical to
// sorted permutation of every G_{L,1}, nested-grid embeddings
// G_{a,d'} -> G_{b,d'} (a <= b), and one Toeplitz factor per
// (dimension, level). The kernel must be a product kernel; only the Toeplitz
// factors depend on its hyperparameters.
class MvmPlan {
 public:
  static MvmPlan build(int level, int dim, const ProductKernel& kernel,
                       const PlanOptions& options = {});

  int level() const { return shape_.level(); }
  int dim() const { return shape_.dim(); }
  Index size() const { return shape_.size(); }
  const SparseGridShape& shape() const { return shape_; }
  const ProductKernel& kernel() const { return kernel_; }

  // Number of distinct sparse-grid kernel matrices K_{G_{L,d'}} the
  // multiply decomposes into: dim * (level + 1).
  int num_subproblems() const { return dim() * (level() + 1); }

  // Rebuilds only the Toeplitz spectra (reusing factors whose lengthscale
  // did not change).
  void refresh_kernel(const ProductKernel& kernel);

  const ToeplitzSpec& toeplitz(int dim_index, int level) const {
    return toeplitz_[static_cast<std::size_t>(dim_index) * (this->level() + 1) + level];
  }
  // order[k] = sorted rank of the k-th canonical point of G_{level,1}.
  std::span<const Index> sorted_order(int level) const;
  // target[k] = index in G_{to_level,dims} of the k-th point of
  // G_{from_level,dims}; requires from_level <= to_level.
  std::span<const Index> embedding(int dims, int from_level, int to_level) const;
  SelectionMap selection(int dims, int from_level, int to_level) const;

  // Batched-sweep bookkeeping for a unit batch: number of vectors that get
  // multiplied by K_{G_{L, dim - depth}}, and where the children of group
  // (depth, L, i) start inside group (depth + 1, L - i).
  Index group_count(int depth, int level) const;
  Index child_offset(int depth, int level, int i) const;

  double build_seconds() const { return build_seconds_; }
  bool loaded_from_cache() const { return loaded_from_cache_; }
  std::int64_t bytes() const;

 private:
  MvmPlan(int level, int dim, const ProductKernel& kernel, Index cap);

  void build_tables();
  bool load_tables(const std::string& path);
  void save_tables(const std::string& path) const;
  void build_groups();
  std::size_t embed_slot(int dims, int from_level, int to_level) const;

  SparseGridShape shape_;
  ProductKernel kernel_;
  std::vector<ToeplitzSpec> toeplitz_;
  tracked_vector<Index> orders_;
  std::vector<Index> order_offsets_;
  tracked_vector<Index> embeds_;
  std::vector<Index> embed_offsets_;
  std::vector<Index> group_counts_;
  std::vector<Index> child_offsets_;
  double build_seconds_ = 0.0;
  bool loaded_from_cache_ = false;
};

// Scratch buffers for the batched multiply; reused across calls so CG does
// not reallocate. One workspace per concurrent caller.
class MvmWorkspace {
 public:
  std::int64_t bytes() const;

 private:
  friend class BatchedMvm;
  Index batch_ = -1;
  int level_ = -1;
  int dim_ = -1;
  std::vector<tracked_vector<double>> groups_;
  tracked_vector<double> abar_;
  tracked_vector<double> bsum_;
};

// Recursive form: u = K_{G_{level,dim}} v.
void sg_mvm(const MvmPlan& plan, std::span<const double> v, std::span<double> out);
std::vector<double> sg_mvm(const MvmPlan& plan, std::span<const double> v);

// Iterative batched form over the columns of V (|G| x r). Multiplications
// with the same K_{G_{L,d'}} across the whole recursion are grouped; the
// Abar/A sweep runs over dimensions first to last and the Bbar/B sweep in
// reverse.
void sg_mvm_batched(const MvmPlan& plan, const RowMatrix& v, RowMatrix& out,
                    MvmWorkspace* workspace = nullptr);
// Same, for r vectors stored contiguously one after the other.
void sg_mvm_batched(const MvmPlan& plan, std::span<const double> v, std::span<double> out,
                    Index count, MvmWorkspace* workspace = nullptr);

struct MvmCost {
  MvmAlgorithm algo = MvmAlgorithm::kIterative;
  int level = 0;
  int dim = 0;
  Index grid_size = 0;
  double build_s = 0.0;
  double mvm_s = 0.0;         // mean over repetitions
  double mvm_stderr_s = 0.0;  // standard error of the mean
  std::int64_t peak_bytes = 0;
  int repetitions = 0;
};

// Times `repetitions` trials (after one discarded warm-up multiply) with the
// given algorithm on a fixed pseudo-random vector. A trial repeats the multiply
// until it spans about 20 ms and reports the per-multiply time.
MvmCost mvm_cost_probe(const MvmPlan& plan, MvmAlgorithm algo, int repetitions = 8,
                       std::uint64_t seed = 1);

}  // namespace sgski

#endif  // SGSKI_SGMVM_H_
