#ifndef SGSKI_SKI_H_
#define SGSKI_SKI_H_

#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "sgski/interp.h"
#include "sgski/kernel.h"
#include "sgski/sgmvm.h"

namespace sgski {

class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Index size() const = 0;
  virtual void apply(std::span<const double> v, std::span<double> out) const = 0;
};

// K_G for some inducing grid G.
class GridKernelOperator : public LinearOperator {
 public:
  virtual const ProductKernel& kernel() const = 0;
  virtual void refresh_kernel(const ProductKernel& kernel) = 0;
  virtual std::string backend() const = 0;
};

// Sparse grid G_{level,dim}. kNaive materializes K_G; the other two use the
// plan-based fast multiply.
std::unique_ptr<GridKernelOperator> make_sparse_grid_operator(int level, const ProductKernel& kernel,
                                                              MvmAlgorithm algo,
                                                              const PlanOptions& options = {});
// Dense lattice via Kronecker-Toeplitz products, or materialized.
std::unique_ptr<GridKernelOperator> make_dense_grid_operator(const Lattice& lattice,
                                                             const ProductKernel& kernel,
                                                             bool materialized = false);

// W K_G W^T + sigma2 I on the training points.
class SkiOperator : public LinearOperator {
 public:
  SkiOperator(const WeightMatrix& w, const GridKernelOperator& grid, double sigma2);

  Index size() const override { return w_.rows(); }
  void apply(std::span<const double> v, std::span<double> out) const override;
  // k(0) ||w_i||^2 + sigma2, the Jacobi preconditioner.
  std::vector<double> diagonal_estimate() const;

 private:
  const WeightMatrix& w_;
  const GridKernelOperator& grid_;
  double sigma2_;
  mutable std::vector<double> grid_in_;
  mutable std::vector<double> grid_out_;
  mutable std::mutex scratch_mutex_;
};

enum class Preconditioner { kNone, kJacobi };

struct CgConfig {
  double rel_tolerance = 1e-4;  // ||r|| / ||y||
  int max_iters = 1000;
  Preconditioner preconditioner = Preconditioner::kNone;
  // Stop as diverged once ||r|| exceeds this multiple of ||y||. The residual
  // of CG on an SPD system may legitimately grow by up to sqrt(cond), so a
  // small factor rejects solves that would converge.
  double divergence_factor = 1e6;
};

enum class CgStatus { kConverged, kMaxIterations, kDiverged };

std::string to_string(CgStatus status);

struct CgResult {
  std::vector<double> x;
  CgStatus status = CgStatus::kConverged;
  int iterations = 0;
  double rel_residual = 0.0;
  // Steps where the residual norm grew by more than a 1e-12 relative slack.
  int monotonicity_violations = 0;
  std::vector<double> residual_history;
};

// Solves op x = y. `diagonal` is required for the Jacobi preconditioner.
// Reports divergence on non-positive curvature, non-finite residuals or
// residual growth past cfg.divergence_factor.
CgResult cg_solve(const LinearOperator& op, std::span<const double> y, const CgConfig& cfg,
                  std::span<const double> diagonal = {});

// Per-dimension affine map of [min - pad, max + pad] (pad = 1% of the range)
// onto [margin_j, 1 - margin_j].
class DomainMap {
 public:
  static DomainMap fit(const RowMatrix& x, std::vector<double> margins);

  int dim() const { return static_cast<int>(lower_.size()); }
  RowMatrix to_unit(const RowMatrix& x) const;
  RowMatrix from_unit(const RowMatrix& u) const;

  nlohmann::json to_json() const;
  static DomainMap from_json(const nlohmann::json& j);

 private:
  std::vector<double> lower_;   // raw value mapped to margin
  std::vector<double> width_;   // raw width mapped onto [margin, 1 - margin]
  std::vector<double> margin_;
};

enum class GridKind { kSparse, kDense };

struct GridConfig {
  GridKind kind = GridKind::kSparse;
  int level = 4;                     // sparse
  std::vector<Index> dense_counts;   // dense; one entry broadcasts to all dims
  BaseRule base = BaseRule::kSimplicial;
  SparseScheme scheme = SparseScheme::kCombination;
  MvmAlgorithm algo = MvmAlgorithm::kIterative;
};

nlohmann::json grid_config_to_json(const GridConfig& g);
GridConfig grid_config_from_json(const nlohmann::json& j);

Lattice dense_lattice(const GridConfig& g, int dim);
GridInterpolator make_interpolator(const GridConfig& g, int dim);
std::unique_ptr<GridKernelOperator> make_grid_operator(const GridConfig& g,
                                                       const ProductKernel& kernel,
                                                       const PlanOptions& options = {});
// Half the finest grid spacing, per dimension.
std::vector<double> grid_margins(const GridConfig& g, int dim);

struct GpConfig {
  GridConfig grid;
  ProductKernel kernel{std::vector<double>{0.2}};  // lengthscales in grid units
  NoiseModel noise{1e-2};
  CgConfig cg;
  bool standardize = true;
  PlanOptions plan;
};

nlohmann::json gp_config_to_json(const GpConfig& c);
GpConfig gp_config_from_json(const nlohmann::json& j);

struct FitStats {
  CgStatus status = CgStatus::kConverged;
  int iterations = 0;
  double rel_residual = 0.0;
  int monotonicity_violations = 0;
  double fit_seconds = 0.0;
};

// SKI regression model. Stores the dual weights alpha and the grid-side
// vector beta = K_G W^T alpha; the predictive mean is W_* beta.
class GpModel {
 public:
  // Throws SolverError when CG does not converge.
  static GpModel fit(const GpConfig& config, const RowMatrix& x, std::span<const double> y);
  // Same, reusing a prebuilt weight matrix and grid operator for inputs that
  // were mapped with `domain`.
  static GpModel fit(const GpConfig& config, const DomainMap& domain, const WeightMatrix& w,
                     const GridKernelOperator& grid, std::span<const double> y);

  std::vector<double> predict(const RowMatrix& x) const;

  const GpConfig& config() const { return config_; }
  const DomainMap& domain() const { return domain_; }
  const std::vector<double>& alpha() const { return alpha_; }
  const std::vector<double>& beta() const { return beta_; }
  const FitStats& stats() const { return stats_; }
  double target_mean() const { return y_mean_; }
  double target_scale() const { return y_scale_; }

  nlohmann::json to_json() const;
  static GpModel from_json(const nlohmann::json& j);

 private:
  GpModel(GpConfig config, DomainMap domain);

  GpConfig config_;
  DomainMap domain_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  std::vector<double> alpha_;
  std::vector<double> beta_;
  FitStats stats_;
  std::shared_ptr<const GridInterpolator> interp_;
};

// Exact dense GP posterior mean and log p(y) by Cholesky, with one jittered
// retry (1e-8 times the mean diagonal) if the first factorization fails.
struct ExactGpResult {
  std::vector<double> mean;
  double log_marginal_likelihood = 0.0;
  bool jittered = false;
};

inline constexpr Index kExactGpPointCap = 5000;

ExactGpResult exact_gp_oracle(const RowMatrix& x, std::span<const double> y,
                              const RowMatrix& x_test, const ProductKernel& kernel,
                              double sigma2);

}  // namespace sgski

#endif  // SGSKI_SKI_H_
