#ifndef SGSKI_TESTS_SUPPORT_H_
#define SGSKI_TESTS_SUPPORT_H_

// Shared generators and slow reference implementations for the tests. None
// of the oracles here call into the library code they check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "sgski/grid.h"
#include "sgski/interp.h"
#include "sgski/kernel.h"
#include "sgski/matrix.h"

namespace sgski::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double normal() { return std::normal_distribution<double>()(rng_); }
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  std::vector<double> vector(Index n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = normal();
    return v;
  }
  std::vector<double> point(int dim, double lo = 0.0, double hi = 1.0) {
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (double& c : x) c = uniform(lo, hi);
    return x;
  }
  RowMatrix points(Index n, int dim, double lo = 0.0, double hi = 1.0) {
    RowMatrix x(n, dim);
    for (Index i = 0; i < n; ++i) {
      for (int j = 0; j < dim; ++j) x(i, j) = uniform(lo, hi);
    }
    return x;
  }
  std::vector<int> levels(int dim, int max_level) {
    std::vector<int> l(static_cast<std::size_t>(dim));
    for (int& v : l) v = integer(0, max_level);
    return l;
  }
  ProductKernel kernel(int dim) {
    std::vector<double> ls(static_cast<std::size_t>(dim));
    for (double& l : ls) l = log_uniform(0.05, 1.0);
    return ProductKernel(ls, log_uniform(0.5, 2.0));
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline double rel_l2(std::span<const double> a, std::span<const double> b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// RBF with per-dimension lengthscales, written out independently.
inline double rbf(std::span<const double> x, std::span<const double> y,
                  std::span<const double> ls, double scale) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double z = (x[j] - y[j]) / ls[j];
    s += z * z;
  }
  return scale * std::exp(-0.5 * s);
}

inline Eigen::MatrixXd kernel_matrix(const RowMatrix& a, const RowMatrix& b,
                                     const ProductKernel& k) {
  Eigen::MatrixXd m(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) {
      m(i, j) = rbf(a.row(i), b.row(j), k.lengthscales(), k.output_scale());
    }
  }
  return m;
}

inline std::vector<double> dense_apply(const Eigen::MatrixXd& m, std::span<const double> v) {
  const Eigen::VectorXd r = m * Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  return {r.data(), r.data() + r.size()};
}

// All points of G_{level,dim} as exact dyadic coordinates, by enumerating
// every level vector with |l|_1 <= level and every odd position.
inline std::set<std::vector<double>> brute_force_sparse_grid(int level, int dim) {
  std::set<std::vector<double>> pts;
  std::vector<int> l(static_cast<std::size_t>(dim), 0);
  auto visit_levels = [&](auto&& self, int j, int budget) -> void {
    if (j == dim) {
      std::vector<std::int64_t> pos(static_cast<std::size_t>(dim), 1);
      while (true) {
        std::vector<double> x(static_cast<std::size_t>(dim));
        for (int k = 0; k < dim; ++k) x[k] = static_cast<double>(pos[k]) / std::ldexp(1.0, l[k] + 1);
        pts.insert(x);
        int k = dim - 1;
        while (k >= 0) {
          pos[k] += 2;
          if (pos[k] < (std::int64_t{2} << l[k])) break;
          pos[k] = 1;
          --k;
        }
        if (k < 0) break;
      }
      return;
    }
    for (int v = 0; v <= budget; ++v) {
      l[j] = v;
      self(self, j + 1, budget - v);
    }
  };
  visit_levels(visit_levels, 0, level);
  return pts;
}

// Reference simplicial interpolation on an m_1 x ... x m_d cell-centred
// lattice of values f(c) for integer cells c: barycentric coordinates in
// the Kuhn simplex that contains the point, found by sorting the local
// coordinates, evaluated by walking the simplex vertex chain.
template <typename F>
double reference_simplicial(std::span<const double> x, const std::vector<Index>& counts, F&& f) {
  const int d = static_cast<int>(counts.size());
  std::vector<Index> base(d);
  std::vector<double> r(d, 0.0);
  for (int j = 0; j < d; ++j) {
    if (counts[j] == 1) {
      base[j] = 0;
      continue;
    }
    const double u = x[j] * static_cast<double>(counts[j]) - 0.5;
    const Index c = std::clamp<Index>(static_cast<Index>(std::floor(u)), 0, counts[j] - 2);
    base[j] = c;
    r[j] = std::clamp(u - static_cast<double>(c), 0.0, 1.0);
  }
  std::vector<int> order(d);
  for (int j = 0; j < d; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return r[a] > r[b]; });
  std::vector<Index> vertex = base;
  double prev = 1.0;
  double value = 0.0;
  for (int k = 0; k < d; ++k) {
    const double rk = r[order[k]];
    value += (prev - rk) * f(vertex);
    if (counts[order[k]] > 1) vertex[order[k]] += 1;
    prev = rk;
  }
  value += prev * f(vertex);
  return value;
}

}  // namespace sgski::testing

#endif  // SGSKI_TESTS_SUPPORT_H_
