#ifndef SGSKI_KERNEL_H_
#define SGSKI_KERNEL_H_

#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "sgski/grid.h"
#include "sgski/matrix.h"

namespace sgski {

namespace detail {
class RealFftPlan;
}

enum class KernelFamily { kRbf };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

// Stationary product kernel
//   k(x, x') = output_scale * prod_j k_j(|x_j - x'_j|)
// with lengthscales in grid-domain units. Only the RBF factor is implemented;
// other families plug in through factor().
class ProductKernel {
 public:
  ProductKernel(std::vector<double> lengthscales, double output_scale = 1.0,
                KernelFamily family = KernelFamily::kRbf);
  static ProductKernel isotropic(int dim, double lengthscale, double output_scale = 1.0);

  int dim() const { return static_cast<int>(lengthscales_.size()); }
  KernelFamily family() const { return family_; }
  const std::vector<double>& lengthscales() const { return lengthscales_; }
  double lengthscale(int j) const { return lengthscales_[j]; }
  double output_scale() const { return output_scale_; }

  // Unit-scale 1-d factor of dimension j at the given distance.
  double factor(int j, double distance) const;
  double operator()(std::span<const double> x, std::span<const double> y) const;

  friend bool operator==(const ProductKernel&, const ProductKernel&) = default;

 private:
  std::vector<double> lengthscales_;
  double output_scale_;
  KernelFamily family_;
};

inline double kernel_eval(const ProductKernel& k, std::span<const double> x,
                          std::span<const double> y) {
  return k(x, y);
}

struct NoiseModel {
  double sigma2 = 0.0;
};

// {family, lengthscales[], output_scale, sigma2}
nlohmann::json hyperparameters_to_json(const ProductKernel& kernel, const NoiseModel& noise);
std::pair<ProductKernel, NoiseModel> hyperparameters_from_json(const nlohmann::json& j);

// Symmetric Toeplitz matrix given by its first column, multiplied through a
// circulant embedding of length next_pow2(2n). Immutable; apply() is
// re-entrant.
class ToeplitzSpec {
 public:
  // Sizes up to this bound use the direct product instead of transforms.
  static constexpr Index kDirectCutoff = 32;

  explicit ToeplitzSpec(std::vector<double> first_column);

  Index size() const { return static_cast<Index>(column_.size()); }
  Index embedding_size() const { return embedding_size_; }
  std::span<const double> first_column() const { return column_; }

  void apply(std::span<const double> v, std::span<double> out) const;

  // Multiplies `count` vectors. Element r of vector b lives at
  // in[b * vec_stride + r * elem_stride] (same layout for out; in == out is
  // allowed). When `order` is non-empty, element r is the order[r]-th entry
  // of the Toeplitz-ordered vector, i.e. the operator applied is P^T T P.
  void apply_strided(const double* in, double* out, Index count, Index vec_stride,
                     Index elem_stride, std::span<const Index> order = {}) const;

  RowMatrix dense() const;

 private:
  std::vector<double> column_;
  std::vector<double> dense_;  // row-major copy for the direct product
  Index embedding_size_ = 0;
  std::vector<double> spectrum_;  // real spectrum of the embedding, length N/2+1
  std::shared_ptr<const detail::RealFftPlan> fft_;
};

// Toeplitz factor of the kernel in dimension `dim_index` on the sorted 1-d
// sparse grid G_{level,1} (2^(level+1) - 1 points, spacing 2^-(level+1)).
ToeplitzSpec toeplitz_from_grid(const ProductKernel& kernel, int dim_index, int level);
// Toeplitz factor on n equispaced points with the given spacing.
ToeplitzSpec toeplitz_equispaced(const ProductKernel& kernel, int dim_index, Index n,
                                 double spacing);

std::vector<double> toeplitz_mvm(const ToeplitzSpec& t, std::span<const double> v);

// Kernel matrix of a rectilinear lattice as a Kronecker product of per-dimension
// Toeplitz factors, applied mode by mode.
class DenseGridPlan {
 public:
  DenseGridPlan(const ProductKernel& kernel, Lattice lattice);

  const Lattice& lattice() const { return lattice_; }
  const ProductKernel& kernel() const { return kernel_; }
  Index size() const { return lattice_.size(); }

  void apply(std::span<const double> v, std::span<double> out) const;
  // Columns of the row-major (size x count) matrix are independent inputs.
  void apply_batch(std::span<const double> v, std::span<double> out, Index count) const;

 private:
  ProductKernel kernel_;
  Lattice lattice_;
  std::vector<ToeplitzSpec> factors_;
};

std::vector<double> dense_grid_mvm(const ProductKernel& kernel, std::span<const int> levels,
                                   std::span<const double> v);
std::vector<double> dense_grid_mvm(const ProductKernel& kernel, const Lattice& lattice,
                                   std::span<const double> v);

}  // namespace sgski

#endif  // SGSKI_KERNEL_H_
