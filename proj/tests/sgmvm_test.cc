#include <gtest/gtest.h>

#include <filesystem>

#include "sgski/sgmvm.h"
#include "support.h"

namespace sgski {
namespace {

using testing::Gen;
using testing::rel_l2;

Eigen::MatrixXd oracle_matrix(int level, int dim, const ProductKernel& k) {
  const SparseGrid g(level, dim);
  const RowMatrix pts = g.coordinates();
  return testing::kernel_matrix(pts, pts, k);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> batched(const MvmPlan& plan, std::span<const double> v) {
  std::vector<double> out(v.size());
  sg_mvm_batched(plan, v, out, 1);
  return out;
}

TEST(NaiveMvm, TrivialCases) {
  const ProductKernel k({0.3, 0.3, 0.3}, 1.8);
  const SparseGrid one(0, 3);
  const std::vector<double> v = {2.0};
  EXPECT_NEAR(naive_kernel_mvm(one, k, v)[0], 3.6, 1e-15);

  const SparseGrid g(3, 2);
  const auto zero = naive_kernel_mvm(g, ProductKernel({0.3, 0.3}), std::vector<double>(g.size()));
  for (double x : zero) EXPECT_EQ(x, 0.0);
}

TEST(NaiveMvm, SymmetricAndMatchesOracle) {
  Gen gen(1);
  const SparseGrid g(4, 3);
  const auto k = gen.kernel(3);
  const auto v = gen.vector(g.size());
  const auto w = gen.vector(g.size());
  EXPECT_NEAR(dot(w, naive_kernel_mvm(g, k, v)), dot(v, naive_kernel_mvm(g, k, w)),
              1e-10 * std::abs(dot(w, naive_kernel_mvm(g, k, v))));
  const auto slow = testing::dense_apply(oracle_matrix(4, 3, k), v);
  EXPECT_LE(rel_l2(naive_kernel_mvm(g, k, v), slow), 1e-13);
}

TEST(NaiveMvm, CapIsEnforced) {
  const SparseGrid g(5, 4);
  EXPECT_THROW(naive_kernel_mvm(g, ProductKernel::isotropic(4, 0.3), std::vector<double>(g.size()), 100),
               ResourceError);
}

TEST(MvmPlan, SubproblemCount) {
  const auto plan = MvmPlan::build(3, 2, ProductKernel::isotropic(2, 0.5));
  EXPECT_EQ(plan.num_subproblems(), 8);
  EXPECT_EQ(MvmPlan::build(0, 5, ProductKernel::isotropic(5, 0.5)).size(), 1);
}

TEST(MvmPlan, StoredSelectionsRoundTrip) {
  Gen gen(2);
  const auto plan = MvmPlan::build(4, 3, ProductKernel::isotropic(3, 0.5));
  for (int dims = 1; dims <= 3; ++dims) {
    for (int a = 0; a <= 4; ++a) {
      for (int b = a; b <= 4; ++b) {
        const auto map = plan.selection(dims, a, b);
        // The stored map agrees with the one built by point matching.
        const auto ref = selection_map(SparseGrid(a, dims), SparseGrid(b, dims));
        EXPECT_EQ(map.target_index, ref.target_index);
        const auto x = gen.vector(map.from_size);
        std::vector<double> big(map.to_size), back(map.from_size);
        map.embed(x, big);
        map.select(big, back);
        EXPECT_EQ(back, x);
      }
    }
  }
}

TEST(MvmPlan, KernelMustMatchDimension) {
  EXPECT_THROW(MvmPlan::build(2, 3, ProductKernel::isotropic(2, 0.5)), InputError);
}

TEST(SgMvm, OneDimensionalIsPermutedToeplitz) {
  Gen gen(3);
  for (int level = 0; level <= 6; ++level) {
    const ProductKernel k({gen.log_uniform(0.05, 1.0)}, 1.3);
    const auto plan = MvmPlan::build(level, 1, k);
    const auto v = gen.vector(plan.size());
    const auto slow = testing::dense_apply(oracle_matrix(level, 1, k), v);
    EXPECT_LE(rel_l2(sg_mvm(plan, v), slow), 1e-12);
    EXPECT_LE(rel_l2(batched(plan, v), slow), 1e-12);
  }
}

TEST(SgMvm, SeventeenPointGrid) {
  Gen gen(4);
  const ProductKernel k({0.3, 0.6});
  const auto plan = MvmPlan::build(2, 2, k);
  ASSERT_EQ(plan.size(), 17);
  const auto v = gen.vector(17);
  const auto slow = testing::dense_apply(oracle_matrix(2, 2, k), v);
  EXPECT_LE(rel_l2(sg_mvm(plan, v), slow), 1e-12);
}

TEST(SgMvm, RandomLengthscalesLevelFourDimThree) {
  Gen gen(5);
  std::vector<double> ls = {gen.uniform(0.1, 2.0), gen.uniform(0.1, 2.0), gen.uniform(0.1, 2.0)};
  const ProductKernel k(ls, 1.0);
  const auto plan = MvmPlan::build(4, 3, k);
  const SparseGrid g(4, 3);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const auto v = gen.vector(plan.size());
    worst = std::max(worst, rel_l2(sg_mvm(plan, v), naive_kernel_mvm(g, k, v)));
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(SgMvm, OracleEquivalenceProperty) {
  Gen gen(6);
  for (int d = 1; d <= 4; ++d) {
    for (int level = 0; level <= 4; ++level) {
      for (int draw = 0; draw < 2; ++draw) {
        const auto k = gen.kernel(d);
        const auto plan = MvmPlan::build(level, d, k);
        const Eigen::MatrixXd m = oracle_matrix(level, d, k);
        for (int r = 0; r < 2; ++r) {
          const auto v = gen.vector(plan.size());
          const auto slow = testing::dense_apply(m, v);
          EXPECT_LE(rel_l2(sg_mvm(plan, v), slow), 1e-10) << level << "," << d;
          EXPECT_LE(rel_l2(batched(plan, v), slow), 1e-10) << level << "," << d;
        }
      }
    }
  }
}

TEST(SgMvm, SymmetryThroughTheAlgorithm) {
  Gen gen(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = gen.integer(2, 4);
    const int level = gen.integer(1, 4);
    const auto plan = MvmPlan::build(level, d, gen.kernel(d));
    const auto v = gen.vector(plan.size());
    const auto w = gen.vector(plan.size());
    const double a = dot(w, sg_mvm(plan, v));
    const double b = dot(v, sg_mvm(plan, w));
    EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(a)));
    const double c = dot(w, batched(plan, v));
    const double e = dot(v, batched(plan, w));
    EXPECT_NEAR(c, e, 1e-10 * std::max(1.0, std::abs(c)));
  }
}

TEST(SgMvm, Linearity) {
  Gen gen(8);
  const auto plan = MvmPlan::build(4, 3, gen.kernel(3));
  const auto u = gen.vector(plan.size());
  const auto v = gen.vector(plan.size());
  const double a = 0.7;
  const double b = -2.1;
  std::vector<double> w(u.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = a * u[i] + b * v[i];
  const auto ku = sg_mvm(plan, u);
  const auto kv = sg_mvm(plan, v);
  const auto kw = sg_mvm(plan, w);
  std::vector<double> combo(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) combo[i] = a * ku[i] + b * kv[i];
  EXPECT_LE(rel_l2(kw, combo), 1e-12);
}

TEST(SgMvmBatched, SingleColumnEqualsRecursive) {
  Gen gen(9);
  const auto plan = MvmPlan::build(5, 3, gen.kernel(3));
  const auto v = gen.vector(plan.size());
  EXPECT_LE(rel_l2(batched(plan, v), sg_mvm(plan, v)), 1e-12);
}

TEST(SgMvmBatched, EightColumns) {
  Gen gen(10);
  const auto k = gen.kernel(3);
  const auto plan = MvmPlan::build(3, 3, k);
  const SparseGrid g(3, 3);
  RowMatrix v(plan.size(), 8);
  for (double& x : v.data()) x = gen.normal();
  RowMatrix out;
  MvmWorkspace ws;
  sg_mvm_batched(plan, v, out, &ws);
  ASSERT_EQ(out.rows(), plan.size());
  ASSERT_EQ(out.cols(), 8);
  for (Index c = 0; c < 8; ++c) {
    std::vector<double> col(plan.size()), got(plan.size());
    for (Index r = 0; r < plan.size(); ++r) {
      col[r] = v(r, c);
      got[r] = out(r, c);
    }
    EXPECT_LE(rel_l2(got, sg_mvm(plan, col)), 1e-12);
    EXPECT_LE(rel_l2(got, naive_kernel_mvm(g, k, col)), 1e-10);
  }
  // The workspace is reusable for a different batch size.
  RowMatrix v2(plan.size(), 3, 1.0);
  RowMatrix out2;
  sg_mvm_batched(plan, v2, out2, &ws);
  std::vector<double> ones(plan.size(), 1.0);
  const auto ref = sg_mvm(plan, ones);
  for (Index r = 0; r < plan.size(); ++r) EXPECT_NEAR(out2(r, 2), ref[r], 1e-12);
}

TEST(SgMvmBatched, IdentityColumnsReconstructKernelMatrix) {
  const ProductKernel k({0.35, 0.2}, 1.4);
  const auto plan = MvmPlan::build(2, 2, k);
  const Index n = plan.size();
  ASSERT_EQ(n, 17);
  RowMatrix id(n, n);
  for (Index i = 0; i < n; ++i) id(i, i) = 1.0;
  RowMatrix km;
  sg_mvm_batched(plan, id, km);
  const Eigen::MatrixXd oracle = oracle_matrix(2, 2, k);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      EXPECT_NEAR(km(r, c), km(c, r), 1e-14);
      EXPECT_NEAR(km(r, c), oracle(r, c), 1e-13);
    }
  }
}

TEST(SgMvm, BlockConsistency) {
  Gen gen(11);
  const int level = 4;
  const int d = 3;
  const auto k = gen.kernel(d);
  const auto plan = MvmPlan::build(level, d, k);
  const SparseGrid g(level, d);
  const Eigen::MatrixXd m = oracle_matrix(level, d, k);
  for (const auto& block : g.blocks()) {
    std::vector<double> v(plan.size(), 0.0);
    const Index len = block.rows * block.cols;
    for (Index t = 0; t < len; ++t) v[block.offset + t] = gen.normal();
    const Eigen::VectorXd expect =
        m.middleCols(block.offset, len) *
        Eigen::Map<const Eigen::VectorXd>(v.data() + block.offset, len);
    EXPECT_LE(rel_l2(sg_mvm(plan, v), {expect.data(), static_cast<std::size_t>(expect.size())}), 1e-10);
  }
}

TEST(SgMvm, RefreshKernelTracksNewHyperparameters) {
  Gen gen(12);
  const auto k1 = ProductKernel({0.2, 0.5, 0.9}, 1.0);
  const auto k2 = ProductKernel({0.2, 0.1, 0.4}, 2.0);
  auto plan = MvmPlan::build(3, 3, k1);
  const SparseGrid g(3, 3);
  const auto v = gen.vector(plan.size());
  plan.refresh_kernel(k2);
  EXPECT_EQ(plan.kernel(), k2);
  EXPECT_LE(rel_l2(sg_mvm(plan, v), naive_kernel_mvm(g, k2, v)), 1e-10);
  EXPECT_LE(rel_l2(batched(plan, v), naive_kernel_mvm(g, k2, v)), 1e-10);
}

TEST(SgMvm, ShapeMismatchIsAnError) {
  const auto plan = MvmPlan::build(2, 2, ProductKernel::isotropic(2, 0.3));
  std::vector<double> v(16), out(17);
  EXPECT_THROW(sg_mvm(plan, v, out), InputError);
  EXPECT_THROW(sg_mvm_batched(plan, v, out, 1), InputError);
}

TEST(MvmPlan, CacheRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "sgski_plan_cache_test";
  std::filesystem::remove_all(dir);
  PlanOptions opts;
  opts.cache_dir = dir.string();
  Gen gen(13);
  const auto k = gen.kernel(3);
  const auto first = MvmPlan::build(4, 3, k, opts);
  EXPECT_FALSE(first.loaded_from_cache());
  const auto second = MvmPlan::build(4, 3, k, opts);
  EXPECT_TRUE(second.loaded_from_cache());
  const auto v = gen.vector(first.size());
  EXPECT_EQ(sg_mvm(first, v), sg_mvm(second, v));
  EXPECT_EQ(batched(first, v), batched(second, v));
  std::filesystem::remove_all(dir);
}

TEST(MvmCostProbe, CountersNonNegativeAndGrowing) {
  const auto kernel = ProductKernel::isotropic(3, 0.5);
  std::int64_t prev_bytes = 0;
  Index prev_size = 0;
  for (int level = 1; level <= 5; ++level) {
    const auto plan = MvmPlan::build(level, 3, kernel);
    for (auto algo : {MvmAlgorithm::kNaive, MvmAlgorithm::kRecursive, MvmAlgorithm::kIterative}) {
      const auto c = mvm_cost_probe(plan, algo, 2);
      EXPECT_GE(c.build_s, 0.0);
      EXPECT_GT(c.mvm_s, 0.0);
      EXPECT_GE(c.mvm_stderr_s, 0.0);
      EXPECT_GT(c.peak_bytes, 0);
      EXPECT_EQ(c.grid_size, plan.size());
      if (algo == MvmAlgorithm::kIterative) {
        EXPECT_GT(c.peak_bytes, prev_bytes);
        prev_bytes = c.peak_bytes;
      }
    }
    EXPECT_GT(plan.size(), prev_size);
    prev_size = plan.size();
  }
}

TEST(MvmAlgorithm, NamesRoundTrip) {
  for (auto a : {MvmAlgorithm::kNaive, MvmAlgorithm::kRecursive, MvmAlgorithm::kIterative}) {
    EXPECT_EQ(mvm_algorithm_from_string(to_string(a)), a);
  }
  EXPECT_THROW(mvm_algorithm_from_string("fast"), InputError);
}

}  // namespace
}  // namespace sgski
