// Acceptance suite: one PASS/FAIL line per criterion, then a determinism
// pass that reruns criteria 1-7 and compares every non-timing metric.
//
//   acceptance [--out DIR] [--only N[,N...]]

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "sgski/bench.h"
#include "sgski/grid.h"
#include "sgski/interp.h"
#include "sgski/sgmvm.h"
#include "sgski/ski.h"

namespace {

using namespace sgski;
using json = nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string summary;
  json metrics = json::object();  // deterministic values only
  double seconds = 0.0;
};

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double rel_l2(std::span<const double> a, std::span<const double> b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return den == 0.0 ? std::sqrt(num) : std::sqrt(num / den);
}

// ------------------------------------------------------------ 1 grid sizes

Outcome grid_sizes() {
  Outcome o;
  const std::vector<std::tuple<int, int, Index>> expected = {
      {2, 2, 17}, {4, 2, 129}, {4, 6, 2561}, {4, 8, 6401}, {4, 10, 13441}};
  bool ok = true;
  for (const auto& [level, dim, size] : expected) {
    const Index closed = sparse_grid_size(level, dim);
    const SparseGrid g(level, dim);
    // Enumeration: every point is valid, distinct and found at its index.
    bool enumerated = g.size() == closed;
    for (Index k = 0; k < g.size() && enumerated; ++k) {
      const auto p = g.point(k);
      enumerated = p.valid() && g.find(p) == k;
    }
    ok = ok && enumerated && closed == size;
    o.metrics["size_" + std::to_string(level) + "_" + std::to_string(dim)] = g.size();
  }
  const Index four = sparse_grid_size(4, 4);
  o.metrics["size_4_4"] = four;
  ok = ok && four == 769;
  o.pass = ok;
  o.summary = "17, 129, 2561, 6401, 13441 closed form == enumeration; (l=4,d=4) computes " +
              std::to_string(four) + ", printed value 796 flagged as inconsistent";
  return o;
}

// ----------------------------------------------------- 2 MVM oracle agreement

Outcome mvm_oracle() {
  Outcome o;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ls_dist(0.1, 2.0);
  std::normal_distribution<double> normal;
  double worst_rec = 0.0;
  double worst_it = 0.0;
  int cases = 0;
  for (int dim = 1; dim <= 4; ++dim) {
    for (int level = 0; level <= 5; ++level) {
      const SparseGrid grid(level, dim);
      for (int h = 0; h < 5; ++h) {
        std::vector<double> ls(static_cast<std::size_t>(dim));
        for (double& l : ls) l = ls_dist(rng);
        const ProductKernel kernel(ls, 0.5 + ls_dist(rng));
        const MvmPlan plan = MvmPlan::build(level, dim, kernel);
        const Index n = grid.size();
        std::vector<double> all(static_cast<std::size_t>(n * 5));
        for (double& x : all) x = normal(rng);
        std::vector<double> batched(all.size());
        sg_mvm_batched(plan, all, batched, 5);
        for (int r = 0; r < 5; ++r) {
          const std::span<const double> v(all.data() + r * n, static_cast<std::size_t>(n));
          const auto oracle = naive_kernel_mvm(grid, kernel, v);
          const auto rec = sg_mvm(plan, v);
          worst_rec = std::max(worst_rec, rel_l2(rec, oracle));
          worst_it = std::max(worst_it, rel_l2({batched.data() + r * n, static_cast<std::size_t>(n)}, oracle));
          ++cases;
        }
      }
    }
  }
  o.pass = worst_rec <= 1e-10 && worst_it <= 1e-10;
  o.summary = std::to_string(cases) + " products, max rel L2 error recursive " + fmt(worst_rec, 3) +
              ", iterative " + fmt(worst_it, 3) + " (bound 1e-10)";
  o.metrics["cases"] = cases;
  o.metrics["worst_recursive"] = worst_rec;
  o.metrics["worst_iterative"] = worst_it;
  return o;
}

// ---------------------------------------------------------- 3 MVM scaling

Outcome mvm_scaling(const std::string& out_dir) {
  Outcome o;
  MvmScalingConfig cfg;
  cfg.dim = 6;
  cfg.level_min = 3;
  cfg.level_max = 7;
  cfg.repetitions = 8;
  const auto run = run_mvm_scaling(cfg);
  if (!out_dir.empty()) write_result_files(run.result, out_dir + "/mvm_scaling");

  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> times;
  std::vector<double> mem_x;
  std::vector<double> mem_y;
  for (const auto& row : run.result.rows) {
    if (row.status != "ok") continue;
    const std::string algo = row.labels.at("algo");
    const double size = row.labels.at("grid_size").get<double>();
    if (row.metric == "mvm_s") {
      times[algo].first.push_back(size);
      times[algo].second.push_back(row.value);
    }
    if (row.metric == "peak_bytes" && algo == "iterative") {
      mem_x.push_back(size);
      mem_y.push_back(row.value);
      o.metrics["peak_bytes_" + row.labels.at("level").dump()] = row.value;
    }
  }
  auto slope = [&](const std::string& algo) {
    const auto& [x, y] = times[algo];
    return x.size() >= 2 ? loglog_slope(x, y) : NAN;
  };
  const double s_it = slope("iterative");
  const double s_rec = slope("recursive");
  const double s_naive = slope("naive");
  const double s_mem = loglog_slope(mem_x, mem_y);
  const auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  o.pass = run.result.correct && in(s_it, 0.8, 1.4) && in(s_rec, 0.8, 1.4) &&
           in(s_naive, 1.7, 2.3) && s_mem <= 1.5;
  o.summary = "d=6, l=3..7: time slope iterative " + fmt(s_it, 3) + ", recursive " + fmt(s_rec, 3) +
              " (want [0.8,1.4]); naive " + fmt(s_naive, 3) + " over " +
              std::to_string(times["naive"].first.size()) + " levels (want [1.7,2.3]); memory slope " +
              fmt(s_mem, 3) + " (want <= 1.5); backends agree: " + (run.result.correct ? "yes" : "no");
  o.metrics["correct"] = run.result.correct;
  o.metrics["memory_slope"] = s_mem;
  o.metrics["naive_levels"] = times["naive"].first.size();
  return o;
}

// ------------------------------------------------- 4 interpolation accuracy

Outcome interp_accuracy(const std::string& out_dir) {
  Outcome o;
  InterpAccuracyConfig cfg;
  cfg.dim = 6;
  cfg.level_min = 2;
  cfg.level_max = 5;
  cfg.n_eval = 200;
  const auto r = run_interp_accuracy(cfg);
  if (!out_dir.empty()) write_result_files(r, out_dir + "/interp_accuracy");
  bool ok = true;
  double prev = INFINITY;
  std::string table;
  for (int level = 2; level <= 5; ++level) {
    const auto* s = r.find("rmse", {{"grid_kind", "sparse"}, {"level", level}});
    const auto* d = r.find("rmse", {{"grid_kind", "dense"}, {"level", level}});
    if (!s || !d) return {false, "missing rows", {}, 0.0};
    ok = ok && s->value <= prev;
    if (level >= 3) ok = ok && s->value <= d->value;
    prev = s->value;
    table += " l=" + std::to_string(level) + " " + fmt(s->value, 3) + "/" + fmt(d->value, 3);
    o.metrics["sparse_" + std::to_string(level)] = s->value;
    o.metrics["dense_" + std::to_string(level)] = d->value;
  }
  o.pass = ok;
  o.summary = "d=6 simplicial RMS error sparse/dense:" + table;
  return o;
}

// ---------------------------------------------- 5 partition of unity, affine

Outcome partition_of_unity() {
  Outcome o;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif;
  std::uniform_int_distribution<int> dim_dist(1, 6);
  std::uniform_int_distribution<int> level_dist(0, 6);
  std::uniform_int_distribution<int> count_dist(2, 9);
  std::map<std::pair<int, int>, GridInterpolator> cache;
  double worst_sum = 0.0;
  double worst_affine = 0.0;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    const int dim = dim_dist(rng);
    const int level = level_dist(rng);
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (double& v : x) v = unif(rng);

    auto it = cache.find({level, dim});
    if (it == cache.end()) {
      it = cache.emplace(std::pair{level, dim}, GridInterpolator::sparse(level, dim, BaseRule::kSimplicial)).first;
    }
    double s = 0.0;
    for (const auto& e : it->second.weights(x)) s += e.weight;
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));

    // Affine reproduction on a random single rectilinear grid, inside its hull.
    std::vector<Index> counts(static_cast<std::size_t>(dim));
    for (auto& c : counts) c = count_dist(rng);
    const Lattice lat(counts);
    std::vector<double> a(static_cast<std::size_t>(dim));
    for (double& v : a) v = 4.0 * unif(rng) - 2.0;
    const double b = unif(rng);
    for (int j = 0; j < dim; ++j) x[j] = lat.offset(j) + (1.0 - 2.0 * lat.offset(j)) * unif(rng);
    double exact = b;
    for (int j = 0; j < dim; ++j) exact += a[j] * x[j];
    for (BaseRule rule : {BaseRule::kSimplicial, BaseRule::kLinear}) {
      double got = 0.0;
      for (const auto& e : rect_weights(x, lat, rule)) {
        const auto cell = lat.cell(e.index);
        double f = b;
        for (int j = 0; j < dim; ++j) f += a[j] * lat.coordinate(j, cell[j]);
        got += e.weight * f;
      }
      worst_affine = std::max(worst_affine, std::abs(got - exact));
    }
  }
  o.pass = worst_sum <= 1e-12 && worst_affine <= 1e-12;
  o.summary = std::to_string(draws) + " draws, d<=6: max |row sum - 1| " + fmt(worst_sum, 3) +
              ", max affine error " + fmt(worst_affine, 3) + " (bound 1e-12)";
  o.metrics["worst_sum"] = worst_sum;
  o.metrics["worst_affine"] = worst_affine;
  return o;
}

// ------------------------------------------------------- 6 SKI solver oracle

Eigen::MatrixXd dense_weights(const WeightMatrix& w) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(w.rows(), w.cols());
  for (Index r = 0; r < w.rows(); ++r) {
    const auto idx = w.row_indices(r);
    const auto val = w.row_values(r);
    for (std::size_t k = 0; k < idx.size(); ++k) m(r, idx[k]) += val[k];
  }
  return m;
}

Eigen::MatrixXd kernel_matrix(const RowMatrix& a, const RowMatrix& b, const ProductKernel& k) {
  Eigen::MatrixXd m(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) m(i, j) = k(a.row(i), b.row(j));
  }
  return m;
}

Outcome ski_oracle() {
  Outcome o;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unif;
  auto log_uniform = [&](double lo, double hi) {
    return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * unif(rng));
  };
  double worst_mean = 0.0;
  Index largest_grid = 0;
  for (int t = 0; t < 20; ++t) {
    const int dim = 1 + t % 3;
    // Largest levels with at most 3000 grid points: 2047, 1793 and 2815.
    const int max_level = dim == 1 ? 10 : dim == 2 ? 7 : 6;
    GridConfig g;
    g.level = 1 + static_cast<int>(unif(rng) * max_level);
    g.base = t % 2 ? BaseRule::kLinear : BaseRule::kSimplicial;
    std::vector<double> ls(static_cast<std::size_t>(dim));
    for (double& l : ls) l = log_uniform(0.05, 1.0);
    const ProductKernel kernel(ls, log_uniform(0.5, 2.0));
    const Index n = 20 + static_cast<Index>(unif(rng) * 280);
    RowMatrix x(n, dim);
    RowMatrix xs(50, dim);
    for (double& v : x.data()) v = unif(rng);
    for (double& v : xs.data()) v = unif(rng);
    std::vector<double> y(static_cast<std::size_t>(n));
    for (double& v : y) v = std::sin(7.0 * unif(rng));

    GpConfig cfg;
    cfg.grid = g;
    cfg.kernel = kernel;
    cfg.noise.sigma2 = log_uniform(1e-2, 1.0);
    cfg.cg = CgConfig{1e-13, 20000};
    cfg.standardize = false;
    const auto interp = make_interpolator(g, dim);
    const WeightMatrix w = assemble_w(x, interp);
    const WeightMatrix ws = assemble_w(xs, interp);
    const auto grid = make_grid_operator(g, kernel);
    RowMatrix corners(2, dim);
    for (int j = 0; j < dim; ++j) corners(1, j) = 1.0;
    const GpModel model =
        GpModel::fit(cfg, DomainMap::fit(corners, std::vector<double>(dim, 0.0)), w, *grid, y);
    std::vector<double> mean(static_cast<std::size_t>(ws.rows()));
    ws.apply(model.beta(), mean);

    const SparseGrid sg(g.level, dim);
    RowMatrix pts(sg.size(), dim);
    for (Index k = 0; k < sg.size(); ++k) {
      for (int j = 0; j < dim; ++j) pts(k, j) = sg.coordinate(k, j);
    }
    largest_grid = std::max(largest_grid, sg.size());
    const Eigen::MatrixXd kg = kernel_matrix(pts, pts, kernel);
    const Eigen::MatrixXd wd = dense_weights(w);
    const Eigen::MatrixXd a = wd * kg * wd.transpose() + cfg.noise.sigma2 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd alpha = a.llt().solve(Eigen::Map<const Eigen::VectorXd>(y.data(), n));
    const Eigen::VectorXd oracle = dense_weights(ws) * kg * wd.transpose() * alpha;
    double err = 0.0;
    for (Index i = 0; i < ws.rows(); ++i) err = std::max(err, std::abs(mean[i] - oracle[i]));
    worst_mean = std::max(worst_mean, err / std::max(1.0, oracle.cwiseAbs().maxCoeff()));
  }

  // Exact-GP log marginal likelihood against a direct inverse at n = 50.
  double worst_logp = 0.0;
  for (int t = 0; t < 5; ++t) {
    const int dim = 1 + t % 4;
    std::vector<double> ls(static_cast<std::size_t>(dim));
    for (double& l : ls) l = log_uniform(0.05, 1.0);
    const ProductKernel kernel(ls, log_uniform(0.5, 2.0));
    RowMatrix x(50, dim);
    for (double& v : x.data()) v = unif(rng);
    std::vector<double> y(50);
    for (double& v : y) v = 2.0 * unif(rng) - 1.0;
    const double s2 = log_uniform(1e-2, 1.0);
    const auto r = exact_gp_oracle(x, y, RowMatrix(0, dim), kernel, s2);
    const Eigen::MatrixXd c = kernel_matrix(x, x, kernel) + s2 * Eigen::MatrixXd::Identity(50, 50);
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), 50);
    const double direct = -0.5 * yv.dot(c.inverse() * yv) - 0.5 * std::log(c.determinant()) -
                          25.0 * std::log(2.0 * std::numbers::pi);
    worst_logp = std::max(worst_logp, std::abs(r.log_marginal_likelihood - direct) /
                                          std::max(1.0, std::abs(direct)));
  }
  o.pass = worst_mean <= 1e-8 && worst_logp <= 1e-6;
  o.summary = "20 instances (n<=300, |G|<=" + std::to_string(largest_grid) +
              "): max predictive-mean error " + fmt(worst_mean, 3) +
              " (bound 1e-8); exact log p(y) vs direct inverse at n=50: " + fmt(worst_logp, 3) +
              " (bound 1e-6)";
  o.metrics["worst_mean"] = worst_mean;
  o.metrics["worst_logp"] = worst_logp;
  return o;
}

// ------------------------------------------------------- 7 GP regression

GpStudyConfig study_config(int dim) {
  GpStudyConfig cfg;
  cfg.dims = {dim};
  cfg.level = 4;
  cfg.n_train = 4000;
  cfg.noise_std = 0.05;
  cfg.base = BaseRule::kSimplicial;
  cfg.exact_oracle = dim == 2;
  cfg.seed = 1;
  if (dim == 8) {
    // With lengthscales of 0.2 or less the combination-technique SKI system
    // at d=8 is too ill-conditioned for CG to converge in the time budget;
    // both grid kinds search the same shifted set.
    cfg.lengthscales = {0.4, 0.8, 1.6};
    cfg.cg.rel_tolerance = 1e-3;
  }
  return cfg;
}

Outcome gp_regression(const std::string& out_dir) {
  Outcome o;
  const auto low = run_gp_study(study_config(2));
  const auto high = run_gp_study(study_config(8));
  if (!out_dir.empty()) {
    write_result_files(low, out_dir + "/gp_study_d2");
    write_result_files(high, out_dir + "/gp_study_d8");
  }
  auto value = [](const ExperimentResult& r, const char* kind) {
    const auto* row = r.find("rmse_test", {{"grid_kind", kind}});
    return row && row->status == "ok" ? row->value : NAN;
  };
  const double sparse2 = value(low, "sparse");
  const double dense2 = value(low, "dense");
  const double exact2 = value(low, "exact");
  const double sparse8 = value(high, "sparse");
  const double dense8 = value(high, "dense");
  const double noise = 0.05;
  const bool noise_ok = sparse2 <= 3.0 * noise;
  const bool exact_ok = sparse2 <= 2.0 * exact2;
  const bool high_ok = sparse8 <= dense8;
  o.pass = noise_ok && exact_ok && high_ok;
  o.summary = "d=2 test RMSE sparse " + fmt(sparse2, 3) + ", dense " + fmt(dense2, 3) + ", exact " +
              fmt(exact2, 3) + " (sparse <= 3x noise: " + (noise_ok ? "yes" : "no") +
              "; sparse/exact = " + fmt(sparse2 / exact2, 3) + ", want <= 2: " +
              (exact_ok ? "yes" : "no") + "); d=8 sparse " + fmt(sparse8, 3) + " vs dense " +
              fmt(dense8, 3) + " (sparse <= dense: " + (high_ok ? "yes" : "no") + ")";
  for (const auto* r : {&low, &high}) {
    for (const auto& row : r->rows) {
      if (row.metric == "fit_s") continue;
      o.metrics[row.labels.dump() + " " + row.metric] = row.value;
    }
  }
  return o;
}

// ---------------------------------------------------------------- driver

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::string out_dir;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--out" && i + 1 < argc) {
      out_dir = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      std::string item;
      while (std::getline(list, item, ',')) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--out DIR] [--only N[,N...]]\n";
      return 1;
    }
  }
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  const std::vector<Criterion> criteria = {
      {1, "grid sizes", 1.0, grid_sizes},
      {2, "MVM oracle equivalence", 120.0, mvm_oracle},
      {3, "MVM complexity scaling", 600.0, [&] { return mvm_scaling(out_dir); }},
      {4, "interpolation accuracy", 300.0, [&] { return interp_accuracy(out_dir); }},
      {5, "partition of unity and exactness", 600.0, partition_of_unity},
      {6, "SKI solver oracle", 600.0, ski_oracle},
      {7, "GP regression", 1200.0, [&] { return gp_regression(out_dir); }},
  };

  auto selected = [&](int id) { return only.empty() || only.count(id) > 0; };
  auto execute = [&](const Criterion& c) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    o.seconds = elapsed(start);
    return o;
  };

  bool all = true;
  json report = json::object();
  std::map<int, json> first_metrics;
  for (const auto& c : criteria) {
    if (!selected(c.id)) continue;
    Outcome o = execute(c);
    const bool in_time = o.seconds < c.budget_s;
    const bool pass = o.pass && in_time;
    all = all && pass;
    std::printf("%s criterion %d (%s): %s; runtime %.1f s (limit %.0f s)\n", pass ? "PASS" : "FAIL",
                c.id, c.name.c_str(), o.summary.c_str(), o.seconds, c.budget_s);
    std::fflush(stdout);
    first_metrics[c.id] = o.metrics;
    report[std::to_string(c.id)] = {{"pass", pass}, {"summary", o.summary}, {"seconds", o.seconds},
                                    {"metrics", o.metrics}};
  }

  if (selected(8)) {
    // Second consecutive run of the same criteria with the same seeds.
    std::vector<int> differing;
    for (const auto& c : criteria) {
      if (!selected(c.id)) continue;
      const Outcome again = execute(c);
      if (again.metrics != first_metrics[c.id]) differing.push_back(c.id);
    }
    const bool pass = differing.empty() && !first_metrics.empty();
    std::string detail = std::to_string(first_metrics.size()) + " criteria rerun, ";
    if (differing.empty()) {
      detail += "all non-timing metrics bit-identical";
    } else {
      detail += "metrics differ for criteria";
      for (int id : differing) detail += " " + std::to_string(id);
    }
    all = all && pass;
    std::printf("%s criterion 8 (determinism): %s\n", pass ? "PASS" : "FAIL", detail.c_str());
    report["8"] = {{"pass", pass}, {"summary", detail}};
  }

  if (!out_dir.empty()) std::ofstream(out_dir + "/acceptance.json") << report.dump(2) << '\n';
  return all ? 0 : 1;
}
