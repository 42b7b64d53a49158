#include "sgski/kernel.h"

#include <cmath>
#include <cstring>
#include <unordered_map>

#include "fft.h"

namespace sgski {

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::kRbf:
      return "rbf";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "rbf" || name == "RBF") return KernelFamily::kRbf;
  throw InputError("unknown kernel family '" + name + "'");
}

ProductKernel::ProductKernel(std::vector<double> lengthscales, double output_scale,
                             KernelFamily family)
    : lengthscales_(std::move(lengthscales)), output_scale_(output_scale), family_(family) {
  require(!lengthscales_.empty(), "ProductKernel: need at least one dimension");
  for (double l : lengthscales_) {
    require(std::isfinite(l) && l > 0.0, "ProductKernel: lengthscales must be positive");
  }
  require(std::isfinite(output_scale_) && output_scale_ > 0.0,
          "ProductKernel: output_scale must be positive");
}

ProductKernel ProductKernel::isotropic(int dim, double lengthscale, double output_scale) {
  require(dim >= 1, "ProductKernel: dim must be >= 1");
  return ProductKernel(std::vector<double>(static_cast<std::size_t>(dim), lengthscale),
                       output_scale);
}

double ProductKernel::factor(int j, double distance) const {
  const double z = distance / lengthscales_[j];
  return std::exp(-0.5 * z * z);
}

double ProductKernel::operator()(std::span<const double> x, std::span<const double> y) const {
  double s = 0.0;
  for (int j = 0; j < dim(); ++j) {
    const double z = (x[j] - y[j]) / lengthscales_[j];
    s += z * z;
  }
  return output_scale_ * std::exp(-0.5 * s);
}

nlohmann::json hyperparameters_to_json(const ProductKernel& kernel, const NoiseModel& noise) {
  return {{"family", to_string(kernel.family())},
          {"lengthscales", kernel.lengthscales()},
          {"output_scale", kernel.output_scale()},
          {"sigma2", noise.sigma2}};
}

std::pair<ProductKernel, NoiseModel> hyperparameters_from_json(const nlohmann::json& j) {
  try {
    const auto family = kernel_family_from_string(j.value("family", std::string("rbf")));
    ProductKernel kernel(j.at("lengthscales").get<std::vector<double>>(),
                         j.value("output_scale", 1.0), family);
    NoiseModel noise{j.value("sigma2", 0.0)};
    require(noise.sigma2 >= 0.0, "sigma2 must be >= 0");
    return {kernel, noise};
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid hyperparameter JSON: ") + e.what());
  }
}

// ------------------------------------------------------------ ToeplitzSpec

namespace {

// Per-thread transform buffers, one per embedding length.
detail::FftBuffer& scratch_buffer(Index n) {
  thread_local std::unordered_map<Index, std::unique_ptr<detail::FftBuffer>> buffers;
  auto& slot = buffers[n];
  if (!slot) slot = std::make_unique<detail::FftBuffer>(n);
  return *slot;
}

}  // namespace

ToeplitzSpec::ToeplitzSpec(std::vector<double> first_column) : column_(std::move(first_column)) {
  require(!column_.empty(), "ToeplitzSpec: empty first column");
  const Index n = size();
  Index big = 1;
  while (big < 2 * n) big <<= 1;
  embedding_size_ = big;
  if (n <= kDirectCutoff) {
    dense_.resize(static_cast<std::size_t>(n * n));
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < n; ++c) dense_[r * n + c] = column_[r > c ? r - c : c - r];
    }
    return;
  }

  fft_ = detail::RealFftPlan::get(big);
  detail::FftBuffer buf(big);
  double* c = buf.real();
  std::fill(c, c + big, 0.0);
  c[0] = column_[0];
  for (Index t = 1; t < n; ++t) {
    c[t] = column_[t];
    c[big - t] = column_[t];
  }
  fft_->forward(c, buf.spectrum());
  spectrum_.resize(static_cast<std::size_t>(big / 2 + 1));
  const double scale = 1.0 / static_cast<double>(big);
  for (Index k = 0; k <= big / 2; ++k) spectrum_[k] = buf.spectrum()[k].real() * scale;
}

void ToeplitzSpec::apply(std::span<const double> v, std::span<double> out) const {
  require(static_cast<Index>(v.size()) == size() && static_cast<Index>(out.size()) == size(),
          "toeplitz_mvm: size mismatch");
  apply_strided(v.data(), out.data(), 1, size(), 1);
}

void ToeplitzSpec::apply_strided(const double* in, double* out, Index count, Index vec_stride,
                                 Index elem_stride, std::span<const Index> order) const {
  const Index n = size();
  const bool permuted = !order.empty();
  if (n <= kDirectCutoff) {
    double x[kDirectCutoff];
    for (Index b = 0; b < count; ++b) {
      const double* src = in + b * vec_stride;
      double* dst = out + b * vec_stride;
      for (Index r = 0; r < n; ++r) x[permuted ? order[r] : r] = src[r * elem_stride];
      for (Index r = 0; r < n; ++r) {
        const double* row = dense_.data() + (permuted ? order[r] : r) * n;
        double s = 0.0;
        for (Index c = 0; c < n; ++c) s += row[c] * x[c];
        dst[r * elem_stride] = s;
      }
    }
    return;
  }

  const Index big = embedding_size_;
  detail::FftBuffer& buf = scratch_buffer(big);
  double* x = buf.real();
  std::complex<double>* xf = buf.spectrum();
  for (Index b = 0; b < count; ++b) {
    const double* src = in + b * vec_stride;
    double* dst = out + b * vec_stride;
    std::fill(x + n, x + big, 0.0);
    for (Index r = 0; r < n; ++r) x[permuted ? order[r] : r] = src[r * elem_stride];
    fft_->forward(x, xf);
    for (Index k = 0; k <= big / 2; ++k) xf[k] *= spectrum_[k];
    fft_->inverse(xf, x);
    for (Index r = 0; r < n; ++r) dst[r * elem_stride] = x[permuted ? order[r] : r];
  }
}

RowMatrix ToeplitzSpec::dense() const {
  const Index n = size();
  RowMatrix t(n, n);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) t(r, c) = column_[r > c ? r - c : c - r];
  }
  return t;
}

ToeplitzSpec toeplitz_equispaced(const ProductKernel& kernel, int dim_index, Index n,
                                 double spacing) {
  require(dim_index >= 0 && dim_index < kernel.dim(), "toeplitz: dimension out of range");
  require(n >= 1, "toeplitz: need at least one point");
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Index t = 0; t < n; ++t) col[t] = kernel.factor(dim_index, static_cast<double>(t) * spacing);
  return ToeplitzSpec(std::move(col));
}

ToeplitzSpec toeplitz_from_grid(const ProductKernel& kernel, int dim_index, int level) {
  require(level >= 0 && level < 40, "toeplitz_from_grid: level out of range");
  return toeplitz_equispaced(kernel, dim_index, (Index{2} << level) - 1,
                             std::ldexp(1.0, -(level + 1)));
}

std::vector<double> toeplitz_mvm(const ToeplitzSpec& t, std::span<const double> v) {
  std::vector<double> out(v.size());
  t.apply(v, out);
  return out;
}

// ----------------------------------------------------------- DenseGridPlan

DenseGridPlan::DenseGridPlan(const ProductKernel& kernel, Lattice lattice)
    : kernel_(kernel), lattice_(std::move(lattice)) {
  require(kernel_.dim() == lattice_.dim(), "DenseGridPlan: kernel/lattice dimension mismatch");
  for (int j = 0; j < lattice_.dim(); ++j) {
    factors_.push_back(toeplitz_equispaced(kernel_, j, lattice_.count(j), lattice_.spacing(j)));
  }
}

void DenseGridPlan::apply(std::span<const double> v, std::span<double> out) const {
  apply_batch(v, out, 1);
}

void DenseGridPlan::apply_batch(std::span<const double> v, std::span<double> out,
                                Index count) const {
  const Index m = lattice_.size();
  require(static_cast<Index>(v.size()) == m * count && static_cast<Index>(out.size()) == m * count,
          "dense_grid_mvm: size mismatch");
  if (out.data() != v.data()) std::copy(v.begin(), v.end(), out.begin());
  // Row-major tensor of shape (m_0, ..., m_{d-1}, count); mode j has stride
  // inner_j = count * prod_{j' > j} m_j'.
  Index inner = count;
  for (int j = lattice_.dim() - 1; j >= 0; --j) {
    const Index mj = lattice_.count(j);
    const Index outer = m * count / (inner * mj);
    for (Index o = 0; o < outer; ++o) {
      double* base = out.data() + o * mj * inner;
      factors_[j].apply_strided(base, base, inner, 1, inner);
    }
    inner *= mj;
  }
  const double s = kernel_.output_scale();
  for (double& x : out) x *= s;
}

std::vector<double> dense_grid_mvm(const ProductKernel& kernel, const Lattice& lattice,
                                   std::span<const double> v) {
  DenseGridPlan plan(kernel, lattice);
  std::vector<double> out(v.size());
  plan.apply(v, out);
  return out;
}

std::vector<double> dense_grid_mvm(const ProductKernel& kernel, std::span<const int> levels,
                                   std::span<const double> v) {
  return dense_grid_mvm(kernel, Lattice::from_levels(levels), v);
}

}  // namespace sgski
