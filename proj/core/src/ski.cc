#include "sgski/ski.h"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "sgski/io.h"

namespace sgski {

// ---------------------------------------------------------- grid operators

namespace {

class PlanGridOperator final : public GridKernelOperator {
 public:
  PlanGridOperator(int level, const ProductKernel& kernel, MvmAlgorithm algo,
                   const PlanOptions& options)
      : plan_(MvmPlan::build(level, kernel.dim(), kernel, options)), algo_(algo) {}

  Index size() const override { return plan_.size(); }
  void apply(std::span<const double> v, std::span<double> out) const override {
    if (algo_ == MvmAlgorithm::kRecursive) {
      sg_mvm(plan_, v, out);
      return;
    }
    std::lock_guard lock(mutex_);
    sg_mvm_batched(plan_, v, out, 1, &workspace_);
  }
  const ProductKernel& kernel() const override { return plan_.kernel(); }
  void refresh_kernel(const ProductKernel& kernel) override { plan_.refresh_kernel(kernel); }
  std::string backend() const override { return "sparse-" + to_string(algo_); }

 private:
  MvmPlan plan_;
  MvmAlgorithm algo_;
  mutable MvmWorkspace workspace_;
  mutable std::mutex mutex_;
};

class MaterializedGridOperator final : public GridKernelOperator {
 public:
  MaterializedGridOperator(RowMatrix points, const ProductKernel& kernel, std::string name)
      : points_(std::move(points)), kernel_(kernel), matrix_(points_, kernel_),
        name_(std::move(name)) {}

  Index size() const override { return matrix_.size(); }
  void apply(std::span<const double> v, std::span<double> out) const override {
    matrix_.apply(v, out);
  }
  const ProductKernel& kernel() const override { return kernel_; }
  void refresh_kernel(const ProductKernel& kernel) override {
    kernel_ = kernel;
    matrix_ = NaiveKernelMatrix(points_, kernel_);
  }
  std::string backend() const override { return name_; }

 private:
  RowMatrix points_;
  ProductKernel kernel_;
  NaiveKernelMatrix matrix_;
  std::string name_;
};

class LatticeGridOperator final : public GridKernelOperator {
 public:
  LatticeGridOperator(const Lattice& lattice, const ProductKernel& kernel)
      : plan_(kernel, lattice) {}

  Index size() const override { return plan_.size(); }
  void apply(std::span<const double> v, std::span<double> out) const override {
    plan_.apply(v, out);
  }
  const ProductKernel& kernel() const override { return plan_.kernel(); }
  void refresh_kernel(const ProductKernel& kernel) override {
    plan_ = DenseGridPlan(kernel, plan_.lattice());
  }
  std::string backend() const override { return "dense-kronecker"; }

 private:
  DenseGridPlan plan_;
};

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

std::unique_ptr<GridKernelOperator> make_sparse_grid_operator(int level, const ProductKernel& kernel,
                                                              MvmAlgorithm algo,
                                                              const PlanOptions& options) {
  if (algo == MvmAlgorithm::kNaive) {
    const SparseGrid grid(level, kernel.dim(), options.point_cap);
    return std::make_unique<MaterializedGridOperator>(grid.coordinates(), kernel, "sparse-naive");
  }
  return std::make_unique<PlanGridOperator>(level, kernel, algo, options);
}

std::unique_ptr<GridKernelOperator> make_dense_grid_operator(const Lattice& lattice,
                                                             const ProductKernel& kernel,
                                                             bool materialized) {
  if (materialized) {
    return std::make_unique<MaterializedGridOperator>(lattice.coordinates(), kernel, "dense-naive");
  }
  return std::make_unique<LatticeGridOperator>(lattice, kernel);
}

// ------------------------------------------------------------ SkiOperator

SkiOperator::SkiOperator(const WeightMatrix& w, const GridKernelOperator& grid, double sigma2)
    : w_(w), grid_(grid), sigma2_(sigma2) {
  require(w.cols() == grid.size(), "SkiOperator: weight matrix does not match the grid");
  require(sigma2 >= 0.0, "SkiOperator: sigma2 must be >= 0");
}

void SkiOperator::apply(std::span<const double> v, std::span<double> out) const {
  require(static_cast<Index>(v.size()) == size() && static_cast<Index>(out.size()) == size(),
          "ski_matvec: size mismatch");
  std::lock_guard lock(scratch_mutex_);
  grid_in_.resize(static_cast<std::size_t>(grid_.size()));
  grid_out_.resize(grid_in_.size());
  w_.apply_transpose(v, grid_in_);
  grid_.apply(grid_in_, grid_out_);
  w_.apply(grid_out_, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma2_ * v[i];
}

std::vector<double> SkiOperator::diagonal_estimate() const {
  auto d = w_.row_squared_norms();
  const double k0 = grid_.kernel().output_scale();
  for (double& x : d) x = k0 * x + sigma2_;
  return d;
}

// --------------------------------------------------------------------- CG

std::string to_string(CgStatus status) {
  switch (status) {
    case CgStatus::kConverged:
      return "converged";
    case CgStatus::kMaxIterations:
      return "max_iterations";
    case CgStatus::kDiverged:
      return "diverged";
  }
  return "unknown";
}

CgResult cg_solve(const LinearOperator& op, std::span<const double> y, const CgConfig& cfg,
                  std::span<const double> diagonal) {
  const Index n = op.size();
  require(static_cast<Index>(y.size()) == n, "cg_solve: right-hand side size mismatch");
  require(cfg.rel_tolerance > 0.0 && cfg.max_iters >= 1 && cfg.divergence_factor > 1.0,
          "cg_solve: invalid configuration");
  const bool jacobi = cfg.preconditioner == Preconditioner::kJacobi;
  require(!jacobi || static_cast<Index>(diagonal.size()) == n,
          "cg_solve: Jacobi preconditioner needs the operator diagonal");

  CgResult res;
  res.x.assign(static_cast<std::size_t>(n), 0.0);
  const double ynorm = std::sqrt(dot(y, y));
  res.residual_history.push_back(ynorm == 0.0 ? 0.0 : 1.0);
  if (ynorm == 0.0) return res;

  std::vector<double> r(y.begin(), y.end());
  std::vector<double> z(r.size());
  auto precondition = [&] {
    for (Index i = 0; i < n; ++i) z[i] = jacobi ? r[i] / diagonal[i] : r[i];
  };
  precondition();
  std::vector<double> p = z;
  std::vector<double> ap(r.size());
  double rz = dot(r, z);
  double prev = ynorm;

  res.status = CgStatus::kMaxIterations;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    op.apply(p, ap);
    const double pap = dot(p, ap);
    res.iterations = it;
    if (!(pap > 0.0)) {
      res.status = CgStatus::kDiverged;
      break;
    }
    const double a = rz / pap;
    for (Index i = 0; i < n; ++i) {
      res.x[i] += a * p[i];
      r[i] -= a * ap[i];
    }
    const double rnorm = std::sqrt(dot(r, r));
    res.rel_residual = rnorm / ynorm;
    res.residual_history.push_back(res.rel_residual);
    if (rnorm > prev * (1.0 + 1e-12)) ++res.monotonicity_violations;
    prev = rnorm;
    if (res.rel_residual <= cfg.rel_tolerance) {
      res.status = CgStatus::kConverged;
      break;
    }
    if (!std::isfinite(rnorm) || rnorm > cfg.divergence_factor * ynorm) {
      res.status = CgStatus::kDiverged;
      break;
    }
    precondition();
    const double rz_next = dot(r, z);
    const double b = rz_next / rz;
    rz = rz_next;
    for (Index i = 0; i < n; ++i) p[i] = z[i] + b * p[i];
  }
  return res;
}

// -------------------------------------------------------------- DomainMap

DomainMap DomainMap::fit(const RowMatrix& x, std::vector<double> margins) {
  require(x.rows() >= 1, "DomainMap: no points");
  require(static_cast<Index>(margins.size()) == x.cols(), "DomainMap: margin count mismatch");
  DomainMap m;
  m.margin_ = std::move(margins);
  for (Index j = 0; j < x.cols(); ++j) {
    double lo = x(0, j);
    double hi = x(0, j);
    for (Index i = 1; i < x.rows(); ++i) {
      lo = std::min(lo, x(i, j));
      hi = std::max(hi, x(i, j));
    }
    require(std::isfinite(lo) && std::isfinite(hi), "DomainMap: non-finite input");
    const double range = hi - lo;
    const double pad = range > 0.0 ? 0.01 * range : 0.5;
    m.lower_.push_back(lo - pad);
    m.width_.push_back(range + 2.0 * pad);
  }
  return m;
}

RowMatrix DomainMap::to_unit(const RowMatrix& x) const {
  require(x.cols() == dim(), "DomainMap: dimension mismatch");
  RowMatrix u(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < dim(); ++j) {
      u(i, j) = margin_[j] + (x(i, j) - lower_[j]) / width_[j] * (1.0 - 2.0 * margin_[j]);
    }
  }
  return u;
}

RowMatrix DomainMap::from_unit(const RowMatrix& u) const {
  require(u.cols() == dim(), "DomainMap: dimension mismatch");
  RowMatrix x(u.rows(), u.cols());
  for (Index i = 0; i < u.rows(); ++i) {
    for (int j = 0; j < dim(); ++j) {
      x(i, j) = lower_[j] + (u(i, j) - margin_[j]) / (1.0 - 2.0 * margin_[j]) * width_[j];
    }
  }
  return x;
}

nlohmann::json DomainMap::to_json() const {
  return {{"lower", lower_}, {"width", width_}, {"margin", margin_}};
}

DomainMap DomainMap::from_json(const nlohmann::json& j) {
  DomainMap m;
  m.lower_ = j.at("lower").get<std::vector<double>>();
  m.width_ = j.at("width").get<std::vector<double>>();
  m.margin_ = j.at("margin").get<std::vector<double>>();
  require(m.lower_.size() == m.width_.size() && m.lower_.size() == m.margin_.size(),
          "DomainMap: inconsistent JSON");
  return m;
}

// ------------------------------------------------------------ GridConfig

nlohmann::json grid_config_to_json(const GridConfig& g) {
  nlohmann::json j = {{"kind", g.kind == GridKind::kSparse ? "sparse" : "dense"},
                      {"base", to_string(g.base)}};
  if (g.kind == GridKind::kSparse) {
    j["level"] = g.level;
    j["scheme"] = to_string(g.scheme);
    j["algo"] = to_string(g.algo);
  } else {
    j["dense_counts"] = g.dense_counts;
    j["materialized"] = g.algo == MvmAlgorithm::kNaive;
  }
  return j;
}

GridConfig grid_config_from_json(const nlohmann::json& j) {
  GridConfig g;
  const std::string kind = j.value("kind", std::string("sparse"));
  if (kind == "sparse") {
    g.kind = GridKind::kSparse;
  } else if (kind == "dense") {
    g.kind = GridKind::kDense;
  } else {
    throw InputError("unknown grid kind '" + kind + "'");
  }
  g.level = j.value("level", g.level);
  g.base = base_rule_from_string(j.value("base", std::string("simplicial")));
  g.scheme = sparse_scheme_from_string(j.value("scheme", std::string("combination")));
  if (j.contains("algo")) g.algo = mvm_algorithm_from_string(j.at("algo").get<std::string>());
  if (j.contains("dense_counts")) g.dense_counts = j.at("dense_counts").get<std::vector<Index>>();
  if (j.value("materialized", false)) g.algo = MvmAlgorithm::kNaive;
  require(g.level >= 0, "grid level must be >= 0");
  return g;
}

Lattice dense_lattice(const GridConfig& g, int dim) {
  require(!g.dense_counts.empty(), "dense grid needs point counts");
  require(g.dense_counts.size() == 1 || static_cast<int>(g.dense_counts.size()) == dim,
          "dense grid: one count or one per dimension");
  std::vector<Index> counts(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) {
    counts[j] = g.dense_counts.size() == 1 ? g.dense_counts[0] : g.dense_counts[j];
    require(counts[j] >= 1, "dense grid counts must be >= 1");
  }
  return Lattice(std::move(counts));
}

GridInterpolator make_interpolator(const GridConfig& g, int dim) {
  if (g.kind == GridKind::kSparse) return GridInterpolator::sparse(g.level, dim, g.base, g.scheme);
  return GridInterpolator::dense(dense_lattice(g, dim), g.base);
}

std::unique_ptr<GridKernelOperator> make_grid_operator(const GridConfig& g,
                                                       const ProductKernel& kernel,
                                                       const PlanOptions& options) {
  if (g.kind == GridKind::kSparse) return make_sparse_grid_operator(g.level, kernel, g.algo, options);
  return make_dense_grid_operator(dense_lattice(g, kernel.dim()), kernel,
                                  g.algo == MvmAlgorithm::kNaive);
}

std::vector<double> grid_margins(const GridConfig& g, int dim) {
  if (g.kind == GridKind::kSparse) {
    return std::vector<double>(static_cast<std::size_t>(dim), std::ldexp(1.0, -(g.level + 1)));
  }
  const Lattice lat = dense_lattice(g, dim);
  std::vector<double> m(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) m[j] = lat.offset(j);
  return m;
}

nlohmann::json gp_config_to_json(const GpConfig& c) {
  return {{"grid", grid_config_to_json(c.grid)},
          {"hyperparameters", hyperparameters_to_json(c.kernel, c.noise)},
          {"cg",
           {{"rel_tolerance", c.cg.rel_tolerance},
            {"max_iters", c.cg.max_iters},
            {"divergence_factor", c.cg.divergence_factor},
            {"preconditioner", c.cg.preconditioner == Preconditioner::kJacobi ? "jacobi" : "none"}}},
          {"standardize", c.standardize}};
}

GpConfig gp_config_from_json(const nlohmann::json& j) {
  try {
    GpConfig c;
    if (j.contains("grid")) c.grid = grid_config_from_json(j.at("grid"));
    if (j.contains("hyperparameters")) {
      auto [kernel, noise] = hyperparameters_from_json(j.at("hyperparameters"));
      c.kernel = kernel;
      c.noise = noise;
    }
    if (j.contains("cg")) {
      const auto& cg = j.at("cg");
      c.cg.rel_tolerance = cg.value("rel_tolerance", c.cg.rel_tolerance);
      c.cg.max_iters = cg.value("max_iters", c.cg.max_iters);
      c.cg.divergence_factor = cg.value("divergence_factor", c.cg.divergence_factor);
      const std::string pre = cg.value("preconditioner", std::string("none"));
      require(pre == "none" || pre == "jacobi", "unknown preconditioner '" + pre + "'");
      c.cg.preconditioner = pre == "jacobi" ? Preconditioner::kJacobi : Preconditioner::kNone;
    }
    c.standardize = j.value("standardize", c.standardize);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid GP configuration: ") + e.what());
  }
}

// ----------------------------------------------------------------- GpModel

GpModel::GpModel(GpConfig config, DomainMap domain)
    : config_(std::move(config)), domain_(std::move(domain)) {}

GpModel GpModel::fit(const GpConfig& config, const RowMatrix& x, std::span<const double> y) {
  require(x.rows() >= 1, "fit: no training points");
  require(config.kernel.dim() == x.cols(), "fit: kernel dimension does not match the data");
  const DomainMap domain = DomainMap::fit(x, grid_margins(config.grid, static_cast<int>(x.cols())));
  const GridInterpolator interp = make_interpolator(config.grid, static_cast<int>(x.cols()));
  const WeightMatrix w = assemble_w(domain.to_unit(x), interp);
  const auto grid = make_grid_operator(config.grid, config.kernel, config.plan);
  return fit(config, domain, w, *grid, y);
}

GpModel GpModel::fit(const GpConfig& config, const DomainMap& domain, const WeightMatrix& w,
                     const GridKernelOperator& grid, std::span<const double> y) {
  const auto start = std::chrono::steady_clock::now();
  const Index n = w.rows();
  require(static_cast<Index>(y.size()) == n, "fit: target length does not match the inputs");
  require(n >= 1, "fit: no training points");
  for (double v : y) require(std::isfinite(v), "fit: non-finite target");
  require(config.noise.sigma2 >= 1e-10, "fit: sigma2 below 1e-10 is rejected for CG inference");
  if (!(grid.kernel() == config.kernel)) {
    throw CorrectnessError("fit: grid operator was built for different hyperparameters");
  }

  GpModel model(config, domain);
  if (config.standardize) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
    model.y_mean_ = mean;
    model.y_scale_ = sd > 0.0 ? sd : 1.0;
  }
  std::vector<double> ys(y.begin(), y.end());
  for (double& v : ys) v = (v - model.y_mean_) / model.y_scale_;

  const SkiOperator op(w, grid, config.noise.sigma2);
  std::vector<double> diag;
  if (config.cg.preconditioner == Preconditioner::kJacobi) diag = op.diagonal_estimate();
  CgResult cg = cg_solve(op, ys, config.cg, diag);
  model.stats_.status = cg.status;
  model.stats_.iterations = cg.iterations;
  model.stats_.rel_residual = cg.rel_residual;
  model.stats_.monotonicity_violations = cg.monotonicity_violations;
  if (cg.status != CgStatus::kConverged) {
    std::ostringstream msg;
    msg << "CG " << to_string(cg.status) << " after " << cg.iterations
        << " iterations, relative residual " << cg.rel_residual << " (tolerance "
        << config.cg.rel_tolerance << ")";
    throw SolverError(msg.str());
  }
  model.alpha_ = std::move(cg.x);
  std::vector<double> t(static_cast<std::size_t>(grid.size()));
  w.apply_transpose(model.alpha_, t);
  model.beta_.resize(t.size());
  grid.apply(t, model.beta_);
  model.interp_ = std::make_shared<const GridInterpolator>(
      make_interpolator(config.grid, config.kernel.dim()));
  model.stats_.fit_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return model;
}

std::vector<double> GpModel::predict(const RowMatrix& x) const {
  require(x.cols() == domain_.dim(), "predict: input dimension does not match the model");
  const RowMatrix u = domain_.to_unit(x);
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (const auto& e : interp_->weights(u.row(i))) s += e.weight * beta_[e.index];
    out[i] = y_mean_ + y_scale_ * s;
  }
  return out;
}

nlohmann::json GpModel::to_json() const {
  auto vec = [](const std::vector<double>& v) {
    return nlohmann::json{{"encoding", "base64-f64le"}, {"size", v.size()}, {"data", encode_doubles(v)}};
  };
  return {{"format", "sgski-gp-model"},
          {"version", 1},
          {"config", gp_config_to_json(config_)},
          {"domain", domain_.to_json()},
          {"target", {{"mean", y_mean_}, {"scale", y_scale_}}},
          {"fit",
           {{"status", to_string(stats_.status)},
            {"iterations", stats_.iterations},
            {"rel_residual", stats_.rel_residual}}},
          {"alpha", vec(alpha_)},
          {"beta", vec(beta_)}};
}

GpModel GpModel::from_json(const nlohmann::json& j) {
  try {
    require(j.value("format", std::string()) == "sgski-gp-model", "not a GP model file");
    GpModel model(gp_config_from_json(j.at("config")), DomainMap::from_json(j.at("domain")));
    model.y_mean_ = j.at("target").at("mean").get<double>();
    model.y_scale_ = j.at("target").at("scale").get<double>();
    auto vec = [](const nlohmann::json& v) {
      auto out = decode_doubles(v.at("data").get<std::string>());
      require(out.size() == v.at("size").get<std::size_t>(), "model vector size mismatch");
      return out;
    };
    model.alpha_ = vec(j.at("alpha"));
    model.beta_ = vec(j.at("beta"));
    require(model.config_.kernel.dim() == model.domain_.dim(), "model dimension mismatch");
    model.interp_ = std::make_shared<const GridInterpolator>(
        make_interpolator(model.config_.grid, model.domain_.dim()));
    require(static_cast<Index>(model.beta_.size()) == model.interp_->grid_size(),
            "model grid vector does not match the grid configuration");
    model.stats_.iterations = j.at("fit").value("iterations", 0);
    model.stats_.rel_residual = j.at("fit").value("rel_residual", 0.0);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid model JSON: ") + e.what());
  }
}

// --------------------------------------------------------------- exact GP

ExactGpResult exact_gp_oracle(const RowMatrix& x, std::span<const double> y,
                              const RowMatrix& x_test, const ProductKernel& kernel,
                              double sigma2) {
  const Index n = x.rows();
  require(n >= 1 && static_cast<Index>(y.size()) == n, "exact_gp_oracle: size mismatch");
  require(x.cols() == kernel.dim() && (x_test.rows() == 0 || x_test.cols() == kernel.dim()),
          "exact_gp_oracle: dimension mismatch");
  require(sigma2 >= 0.0, "exact_gp_oracle: sigma2 must be >= 0");
  if (n > kExactGpPointCap) {
    throw ResourceError("exact_gp_oracle: " + std::to_string(n) + " points exceed the cap of " +
                        std::to_string(kExactGpPointCap));
  }
  Eigen::MatrixXd k(n, n);
  for (Index a = 0; a < n; ++a) {
    k(a, a) = kernel(x.row(a), x.row(a)) + sigma2;
    for (Index b = a + 1; b < n; ++b) {
      const double v = kernel(x.row(a), x.row(b));
      k(a, b) = v;
      k(b, a) = v;
    }
  }
  ExactGpResult res;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-8 * k.trace() / static_cast<double>(n);
    k.diagonal().array() += jitter;
    llt.compute(k);
    res.jittered = true;
    if (llt.info() != Eigen::Success) {
      throw SolverError("exact_gp_oracle: kernel matrix is not positive definite");
    }
  }
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const Eigen::VectorXd alpha = llt.solve(yv);
  const Eigen::MatrixXd& l = llt.matrixLLT();
  double logdet_half = 0.0;
  for (Index i = 0; i < n; ++i) logdet_half += std::log(l(i, i));
  res.log_marginal_likelihood = -0.5 * yv.dot(alpha) - logdet_half -
                                0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  res.mean.resize(static_cast<std::size_t>(x_test.rows()));
  for (Index t = 0; t < x_test.rows(); ++t) {
    double s = 0.0;
    for (Index a = 0; a < n; ++a) s += kernel(x_test.row(t), x.row(a)) * alpha[a];
    res.mean[t] = s;
  }
  return res;
}

}  // namespace sgski
