#include "sgski/bench.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <thread>

namespace sgski {

std::string to_string(SyntheticFunction f) {
  switch (f) {
    case SyntheticFunction::kCosL1:
      return "cos_l1";
    case SyntheticFunction::kAnisoCos:
      return "aniso_cos";
    case SyntheticFunction::kCornerPeak:
      return "corner_peak";
  }
  return "unknown";
}

SyntheticFunction synthetic_function_from_string(const std::string& name) {
  if (name == "cos_l1") return SyntheticFunction::kCosL1;
  if (name == "aniso_cos") return SyntheticFunction::kAnisoCos;
  if (name == "corner_peak") return SyntheticFunction::kCornerPeak;
  throw InputError("unknown synthetic function '" + name + "'");
}

SyntheticTask SyntheticTask::make(SyntheticFunction function, int dim, std::uint64_t seed,
                                  double noise_std) {
  require(dim >= 1, "synthetic task: dim must be >= 1");
  require(noise_std >= 0.0, "synthetic task: noise_std must be >= 0");
  SyntheticTask t;
  t.function = function;
  t.dim = dim;
  t.seed = seed;
  t.noise_std = noise_std;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  t.w = unif(rng);
  t.c.resize(static_cast<std::size_t>(dim));
  for (double& v : t.c) v = unif(rng);
  return t;
}

double SyntheticTask::operator()(std::span<const double> x) const {
  switch (function) {
    case SyntheticFunction::kCosL1: {
      double s = 0.0;
      for (double v : x) s += std::abs(v);
      return std::cos(s);
    }
    case SyntheticFunction::kAnisoCos: {
      double s = 2.0 * std::numbers::pi * w;
      for (int j = 0; j < dim; ++j) s += c[j] * x[j];
      return std::cos(s);
    }
    case SyntheticFunction::kCornerPeak: {
      double s = 1.0;
      for (int j = 0; j < dim; ++j) s += c[j] * x[j];
      return std::pow(s, -(dim + 1));
    }
  }
  return 0.0;
}

SyntheticData gen_synthetic(const SyntheticTask& task) {
  require(task.n_train >= 1 && task.n_val >= 0 && task.n_test >= 0,
          "gen_synthetic: invalid split sizes");
  std::mt19937_64 rng(task.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto points = [&](Index n) {
    RowMatrix x(n, task.dim);
    for (double& v : x.data()) v = unif(rng);
    return x;
  };
  auto noisy = [&](const RowMatrix& x) {
    std::vector<double> y(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) y[i] = task(x.row(i)) + task.noise_std * normal(rng);
    return y;
  };
  SyntheticData d;
  d.x_train = points(task.n_train);
  d.x_val = points(task.n_val);
  d.x_test = points(task.n_test);
  d.y_train = noisy(d.x_train);
  d.y_val = noisy(d.x_val);
  d.f_test.resize(static_cast<std::size_t>(task.n_test));
  for (Index i = 0; i < task.n_test; ++i) d.f_test[i] = task(d.x_test.row(i));
  return d;
}

// ------------------------------------------------------------------ results

void ExperimentResult::add(nlohmann::json labels, std::string metric, double value) {
  rows.push_back({std::move(labels), std::move(metric), value, "ok", {}});
}

void ExperimentResult::add_status(nlohmann::json labels, std::string metric, std::string status,
                                  std::string note) {
  rows.push_back({std::move(labels), std::move(metric), 0.0, std::move(status), std::move(note)});
}

const MetricRow* ExperimentResult::find(const std::string& metric,
                                        const nlohmann::json& labels) const {
  for (const auto& r : rows) {
    if (r.metric != metric) continue;
    bool match = true;
    for (const auto& [k, v] : labels.items()) {
      if (!r.labels.contains(k) || r.labels.at(k) != v) {
        match = false;
        break;
      }
    }
    if (match) return &r;
  }
  return nullptr;
}

nlohmann::json environment_metadata() {
  nlohmann::json env = {{"library", "sgski"},
                        {"compiler", __VERSION__},
                        {"hardware_threads", std::thread::hardware_concurrency()}};
#ifdef NDEBUG
  env["assertions"] = false;
#else
  env["assertions"] = true;
#endif
  return env;
}

nlohmann::json metric_row_to_json(const ExperimentResult& result, const MetricRow& row) {
  nlohmann::json j = {{"experiment", result.experiment},
                      {"metric", row.metric},
                      {"status", row.status},
                      {"labels", row.labels}};
  j["value"] = row.status == "ok" && std::isfinite(row.value) ? nlohmann::json(row.value)
                                                              : nlohmann::json(nullptr);
  if (!row.note.empty()) j["note"] = row.note;
  return j;
}

void write_jsonl(const ExperimentResult& result, std::ostream& out) {
  for (const auto& r : result.rows) out << metric_row_to_json(result, r).dump() << '\n';
}

void write_csv(const ExperimentResult& result, std::ostream& out) {
  std::set<std::string> keys;
  for (const auto& r : result.rows) {
    for (const auto& [k, v] : r.labels.items()) keys.insert(k);
  }
  out << "experiment,metric,value,status";
  for (const auto& k : keys) out << ',' << k;
  out << '\n';
  out.precision(17);
  for (const auto& r : result.rows) {
    out << result.experiment << ',' << r.metric << ',';
    if (r.status == "ok") out << r.value;
    out << ',' << r.status;
    for (const auto& k : keys) {
      out << ',';
      if (!r.labels.contains(k)) continue;
      const auto& v = r.labels.at(k);
      out << (v.is_string() ? v.get<std::string>() : v.dump());
    }
    out << '\n';
  }
}

void write_result_files(const ExperimentResult& result, const std::string& prefix) {
  std::ofstream jsonl(prefix + ".jsonl");
  std::ofstream csv(prefix + ".csv");
  std::ofstream meta(prefix + ".meta.json");
  if (!jsonl || !csv || !meta) throw InputError("cannot write results under '" + prefix + "'");
  write_jsonl(result, jsonl);
  write_csv(result, csv);
  meta << nlohmann::json{{"experiment", result.experiment},
                         {"config", result.config},
                         {"environment", result.environment},
                         {"correct", result.correct},
                         {"rows", result.rows.size()}}
              .dump(2)
       << '\n';
}

nlohmann::json mvm_cost_to_json(const MvmCost& cost) {
  return {{"algo", to_string(cost.algo)}, {"level", cost.level},
          {"d", cost.dim},                {"grid_size", cost.grid_size},
          {"build_s", cost.build_s},      {"mvm_s", cost.mvm_s},
          {"peak_bytes", cost.peak_bytes}};
}

std::string schema_dir() {
  if (const char* env = std::getenv("SGSKI_SCHEMA_DIR")) return env;
  return SGSKI_SCHEMA_DIR;
}

Index matched_dense_points(Index points, int dim) {
  require(points >= 1 && dim >= 1, "matched_dense_points: invalid arguments");
  Index m = std::max<Index>(1, static_cast<Index>(std::floor(std::pow(static_cast<double>(points), 1.0 / dim))) - 1);
  auto power_at_least = [&](Index base) {
    long double p = 1.0L;
    for (int j = 0; j < dim; ++j) p *= static_cast<long double>(base);
    return p >= static_cast<long double>(points);
  };
  while (!power_at_least(m)) ++m;
  return m;
}

double rmse(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && !a.empty(), "rmse: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "loglog_slope: need at least two points");
  double mx = 0.0;
  double my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, "loglog_slope: values must be positive");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

// ------------------------------------------------------------ MVM scaling

namespace {

std::vector<std::string> algo_names(const std::vector<MvmAlgorithm>& algos) {
  std::vector<std::string> out;
  for (auto a : algos) out.push_back(to_string(a));
  return out;
}

double rel_l2(std::span<const double> a, std::span<const double> ref) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ref[i]) * (a[i] - ref[i]);
    den += ref[i] * ref[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace

nlohmann::json to_json(const MvmScalingConfig& c) {
  return {{"dim", c.dim},
          {"level_min", c.level_min},
          {"level_max", c.level_max},
          {"algos", algo_names(c.algos)},
          {"repetitions", c.repetitions},
          {"lengthscale", c.lengthscale},
          {"seed", c.seed},
          {"naive_point_cap", c.naive_point_cap},
          {"naive_memory_bytes", c.naive_memory_bytes},
          {"agreement_tolerance", c.agreement_tolerance},
          {"inject_fault", c.inject_fault}};
}

MvmScalingConfig mvm_scaling_config_from_json(const nlohmann::json& j) {
  try {
    MvmScalingConfig c;
    c.dim = j.value("dim", c.dim);
    c.level_min = j.value("level_min", c.level_min);
    c.level_max = j.value("level_max", c.level_max);
    if (j.contains("algos")) {
      c.algos.clear();
      for (const auto& a : j.at("algos")) c.algos.push_back(mvm_algorithm_from_string(a.get<std::string>()));
    }
    c.repetitions = j.value("repetitions", c.repetitions);
    c.lengthscale = j.value("lengthscale", c.lengthscale);
    c.seed = j.value("seed", c.seed);
    c.naive_point_cap = j.value("naive_point_cap", c.naive_point_cap);
    c.naive_memory_bytes = j.value("naive_memory_bytes", c.naive_memory_bytes);
    c.agreement_tolerance = j.value("agreement_tolerance", c.agreement_tolerance);
    c.inject_fault = j.value("inject_fault", c.inject_fault);
    c.plan_cache_dir = j.value("plan_cache_dir", c.plan_cache_dir);
    require(c.dim >= 1 && c.level_min >= 0 && c.level_max >= c.level_min,
            "mvm-bench: invalid dimension or level range");
    require(c.repetitions >= 1, "mvm-bench: repetitions must be >= 1");
    require(!c.algos.empty(), "mvm-bench: no algorithms selected");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid mvm-bench configuration: ") + e.what());
  }
}

MvmScalingResult run_mvm_scaling(const MvmScalingConfig& config) {
  MvmScalingResult out;
  ExperimentResult& res = out.result;
  res.experiment = "mvm_scaling";
  res.config = to_json(config);
  res.environment = environment_metadata();

  const ProductKernel kernel = ProductKernel::isotropic(config.dim, config.lengthscale);
  PlanOptions options;
  options.cache_dir = config.plan_cache_dir;

  for (int level = config.level_min; level <= config.level_max; ++level) {
    const Index size = sparse_grid_size(level, config.dim);
    const MvmPlan plan = MvmPlan::build(level, config.dim, kernel, options);

    std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(level));
    std::normal_distribution<double> normal;
    std::vector<double> v(static_cast<std::size_t>(size));
    for (double& x : v) x = normal(rng);

    const bool naive_ok = size <= config.naive_point_cap &&
                          static_cast<double>(size) * static_cast<double>(size) * 8.0 <=
                              static_cast<double>(config.naive_memory_bytes);

    std::vector<std::pair<MvmAlgorithm, std::vector<double>>> outputs;
    for (MvmAlgorithm algo : config.algos) {
      const nlohmann::json labels = {{"algo", to_string(algo)}, {"level", level},
                                     {"dim", config.dim}, {"grid_size", size}};
      if (algo == MvmAlgorithm::kNaive && !naive_ok) {
        res.add_status(labels, "mvm_s", "skipped",
                       "grid of " + std::to_string(size) + " points exceeds the naive cap");
        continue;
      }
      std::vector<double> u;
      switch (algo) {
        case MvmAlgorithm::kNaive:
          u = naive_kernel_mvm(SparseGrid(level, config.dim), kernel, v, config.naive_point_cap);
          break;
        case MvmAlgorithm::kRecursive:
          u = sg_mvm(plan, v);
          break;
        case MvmAlgorithm::kIterative:
          u.resize(v.size());
          sg_mvm_batched(plan, v, u, 1);
          if (config.inject_fault) u[u.size() / 2] += 1e-3 * (1.0 + std::abs(u[u.size() / 2]));
          break;
      }
      outputs.emplace_back(algo, std::move(u));

      const MvmCost cost = mvm_cost_probe(plan, algo, config.repetitions, config.seed);
      out.counters.push_back(cost);
      res.add(labels, "build_s", cost.build_s);
      res.add(labels, "mvm_s", cost.mvm_s);
      res.add(labels, "mvm_stderr_s", cost.mvm_stderr_s);
      res.add(labels, "peak_bytes", static_cast<double>(cost.peak_bytes));
      res.add(labels, "cg_proxy_s", cost.build_s + 50.0 * cost.mvm_s);
    }

    // Correctness piggyback: every algorithm against the naive product when
    // available, else against the first one that ran.
    if (outputs.size() >= 2) {
      auto ref = outputs.begin();
      for (auto it = outputs.begin(); it != outputs.end(); ++it) {
        if (it->first == MvmAlgorithm::kNaive) ref = it;
      }
      for (const auto& [algo, u] : outputs) {
        if (algo == ref->first) continue;
        const double err = rel_l2(u, ref->second);
        res.add({{"algo", to_string(algo)}, {"reference", to_string(ref->first)},
                 {"level", level}, {"dim", config.dim}, {"grid_size", size}},
                "agreement_rel_error", err);
        if (!(err <= config.agreement_tolerance)) res.correct = false;
      }
    }
  }
  return out;
}

// ------------------------------------------------- interpolation accuracy

namespace {

std::string kind_name(GridKind k) { return k == GridKind::kSparse ? "sparse" : "dense"; }

GridKind kind_from_string(const std::string& s) {
  if (s == "sparse") return GridKind::kSparse;
  if (s == "dense") return GridKind::kDense;
  throw InputError("unknown grid kind '" + s + "'");
}

std::vector<double> interpolate(const GridInterpolator& interp, std::span<const double> values,
                                const RowMatrix& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (const auto& e : interp.weights(x.row(i))) s += e.weight * values[e.index];
    out[i] = s;
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const InterpAccuracyConfig& c) {
  std::vector<std::string> kinds;
  for (auto k : c.kinds) kinds.push_back(kind_name(k));
  std::vector<std::string> rules;
  for (auto r : c.rules) rules.push_back(to_string(r));
  return {{"function", to_string(c.function)}, {"dim", c.dim},
          {"level_min", c.level_min},          {"level_max", c.level_max},
          {"kinds", kinds},                    {"rules", rules},
          {"scheme", to_string(c.scheme)},     {"n_eval", c.n_eval},
          {"seed", c.seed}};
}

InterpAccuracyConfig interp_accuracy_config_from_json(const nlohmann::json& j) {
  try {
    InterpAccuracyConfig c;
    c.function = synthetic_function_from_string(j.value("function", to_string(c.function)));
    c.dim = j.value("dim", c.dim);
    c.level_min = j.value("level_min", c.level_min);
    c.level_max = j.value("level_max", c.level_max);
    if (j.contains("kinds")) {
      c.kinds.clear();
      for (const auto& k : j.at("kinds")) c.kinds.push_back(kind_from_string(k.get<std::string>()));
    }
    if (j.contains("rules")) {
      c.rules.clear();
      for (const auto& r : j.at("rules")) c.rules.push_back(base_rule_from_string(r.get<std::string>()));
    }
    c.scheme = sparse_scheme_from_string(j.value("scheme", to_string(c.scheme)));
    c.n_eval = j.value("n_eval", c.n_eval);
    c.seed = j.value("seed", c.seed);
    require(c.dim >= 1 && c.level_min >= 0 && c.level_max >= c.level_min && c.n_eval >= 1,
            "interp-bench: invalid configuration");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid interp-bench configuration: ") + e.what());
  }
}

ExperimentResult run_interp_accuracy(const InterpAccuracyConfig& config) {
  ExperimentResult res;
  res.experiment = "interp_accuracy";
  res.config = to_json(config);
  res.environment = environment_metadata();

  const SyntheticTask task = SyntheticTask::make(config.function, config.dim, config.seed, 0.0);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RowMatrix x(config.n_eval, config.dim);
  for (double& v : x.data()) v = unif(rng);
  std::vector<double> truth(static_cast<std::size_t>(config.n_eval));
  for (Index i = 0; i < x.rows(); ++i) truth[i] = task(x.row(i));

  for (int level = config.level_min; level <= config.level_max; ++level) {
    const Index sparse_size = sparse_grid_size(level, config.dim);
    for (GridKind kind : config.kinds) {
      RowMatrix points;
      std::optional<Lattice> lattice;
      Index per_dim = 0;
      if (kind == GridKind::kSparse) {
        points = SparseGrid(level, config.dim).coordinates();
      } else {
        per_dim = matched_dense_points(sparse_size, config.dim);
        lattice.emplace(std::vector<Index>(static_cast<std::size_t>(config.dim), per_dim));
        points = lattice->coordinates();
      }
      std::vector<double> values(static_cast<std::size_t>(points.rows()));
      for (Index k = 0; k < points.rows(); ++k) values[k] = task(points.row(k));

      for (BaseRule rule : config.rules) {
        const GridInterpolator interp =
            kind == GridKind::kSparse
                ? GridInterpolator::sparse(level, config.dim, rule, config.scheme)
                : GridInterpolator::dense(*lattice, rule);
        const auto pred = interpolate(interp, values, x);
        nlohmann::json labels = {{"grid_kind", kind_name(kind)},
                                 {"rule", to_string(rule)},
                                 {"level", level},
                                 {"dim", config.dim},
                                 {"function", to_string(config.function)},
                                 {"grid_size", points.rows()}};
        if (kind == GridKind::kDense) labels["points_per_dim"] = per_dim;
        res.add(labels, "rmse", rmse(pred, truth));
      }
    }
  }
  return res;
}

// --------------------------------------------------------------- GP study

nlohmann::json to_json(const GpStudyConfig& c) {
  std::vector<std::string> fns;
  for (auto f : c.functions) fns.push_back(to_string(f));
  std::vector<std::string> kinds;
  for (auto k : c.kinds) kinds.push_back(kind_name(k));
  return {{"functions", fns},
          {"dims", c.dims},
          {"level", c.level},
          {"kinds", kinds},
          {"base", to_string(c.base)},
          {"n_train", c.n_train},
          {"n_val", c.n_val},
          {"n_test", c.n_test},
          {"noise_std", c.noise_std},
          {"noise_model", "gaussian, noise_std is the standard deviation"},
          {"seed", c.seed},
          {"lengthscales", c.lengthscales},
          {"sigma2s", c.sigma2s},
          {"cg",
           {{"rel_tolerance", c.cg.rel_tolerance},
            {"max_iters", c.cg.max_iters},
            {"divergence_factor", c.cg.divergence_factor},
            {"preconditioner", c.cg.preconditioner == Preconditioner::kJacobi ? "jacobi" : "none"}}},
          {"exact_oracle", c.exact_oracle}};
}

GpStudyConfig gp_study_config_from_json(const nlohmann::json& j) {
  try {
    GpStudyConfig c;
    if (j.contains("functions")) {
      c.functions.clear();
      for (const auto& f : j.at("functions")) {
        c.functions.push_back(synthetic_function_from_string(f.get<std::string>()));
      }
    }
    if (j.contains("dims")) c.dims = j.at("dims").get<std::vector<int>>();
    c.level = j.value("level", c.level);
    if (j.contains("kinds")) {
      c.kinds.clear();
      for (const auto& k : j.at("kinds")) c.kinds.push_back(kind_from_string(k.get<std::string>()));
    }
    c.base = base_rule_from_string(j.value("base", to_string(c.base)));
    c.n_train = j.value("n_train", c.n_train);
    c.n_val = j.value("n_val", c.n_val);
    c.n_test = j.value("n_test", c.n_test);
    c.noise_std = j.value("noise_std", c.noise_std);
    c.seed = j.value("seed", c.seed);
    if (j.contains("lengthscales")) c.lengthscales = j.at("lengthscales").get<std::vector<double>>();
    if (j.contains("sigma2s")) c.sigma2s = j.at("sigma2s").get<std::vector<double>>();
    if (j.contains("cg")) {
      const auto& cg = j.at("cg");
      c.cg.rel_tolerance = cg.value("rel_tolerance", c.cg.rel_tolerance);
      c.cg.max_iters = cg.value("max_iters", c.cg.max_iters);
      c.cg.divergence_factor = cg.value("divergence_factor", c.cg.divergence_factor);
      const std::string pre = cg.value("preconditioner", std::string("jacobi"));
      require(pre == "none" || pre == "jacobi", "unknown preconditioner '" + pre + "'");
      c.cg.preconditioner = pre == "jacobi" ? Preconditioner::kJacobi : Preconditioner::kNone;
    }
    c.exact_oracle = j.value("exact_oracle", c.exact_oracle);
    c.plan_cache_dir = j.value("plan_cache_dir", c.plan_cache_dir);
    require(!c.dims.empty() && !c.functions.empty() && !c.kinds.empty(),
            "gp study: empty function, dimension or grid list");
    require(!c.lengthscales.empty() && !c.sigma2s.empty(), "gp study: empty hyperparameter grid");
    require(c.n_train >= 1 && c.n_val >= 1 && c.n_test >= 1, "gp study: invalid split sizes");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid gp study configuration: ") + e.what());
  }
}

namespace {

struct Selection {
  double val_rmse = std::numeric_limits<double>::infinity();
  double lengthscale = 0.0;
  double sigma2 = 0.0;
  std::vector<double> test_pred;
  int iterations = 0;
  double fit_s = 0.0;
};

std::vector<double> predict_with(const WeightMatrix& w, const GpModel& model) {
  std::vector<double> out(static_cast<std::size_t>(w.rows()));
  w.apply(model.beta(), out);
  for (double& v : out) v = model.target_mean() + model.target_scale() * v;
  return out;
}

RowMatrix stack_rows(const RowMatrix& a, const RowMatrix& b) {
  RowMatrix out(a.rows() + b.rows(), a.cols());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + a.rows() * a.cols());
  return out;
}

}  // namespace

ExperimentResult run_gp_study(const GpStudyConfig& config) {
  ExperimentResult res;
  res.experiment = "gp_study";
  res.config = to_json(config);
  res.environment = environment_metadata();

  for (SyntheticFunction fn : config.functions) {
    for (int dim : config.dims) {
      SyntheticTask task = SyntheticTask::make(fn, dim, config.seed, config.noise_std);
      task.n_train = config.n_train;
      task.n_val = config.n_val;
      task.n_test = config.n_test;
      const SyntheticData data = gen_synthetic(task);
      const Index sparse_size = sparse_grid_size(config.level, dim);

      for (GridKind kind : config.kinds) {
        GridConfig g;
        g.kind = kind;
        g.level = config.level;
        g.base = config.base;
        if (kind == GridKind::kDense) g.dense_counts = {matched_dense_points(sparse_size, dim)};
        nlohmann::json labels = {{"function", to_string(fn)}, {"dim", dim},
                                 {"grid_kind", kind_name(kind)}, {"level", config.level}};
        if (kind == GridKind::kDense) labels["points_per_dim"] = g.dense_counts[0];

        const DomainMap domain = DomainMap::fit(data.x_train, grid_margins(g, dim));
        const GridInterpolator interp = make_interpolator(g, dim);
        const WeightMatrix w_train = assemble_w(domain.to_unit(data.x_train), interp);
        const WeightMatrix w_val = assemble_w(domain.to_unit(data.x_val), interp);
        const WeightMatrix w_test = assemble_w(domain.to_unit(data.x_test), interp);
        labels["grid_size"] = interp.grid_size();
        res.add(labels, "w_max_row_density", static_cast<double>(w_train.max_row_density()));

        PlanOptions options;
        options.cache_dir = config.plan_cache_dir;
        std::unique_ptr<GridKernelOperator> grid;
        Selection best;
        int failures = 0;
        for (double ls : config.lengthscales) {
          const ProductKernel kernel = ProductKernel::isotropic(dim, ls);
          if (!grid) {
            grid = make_grid_operator(g, kernel, options);
          } else {
            grid->refresh_kernel(kernel);
          }
          for (double s2 : config.sigma2s) {
            GpConfig cfg;
            cfg.grid = g;
            cfg.kernel = kernel;
            cfg.noise.sigma2 = s2;
            cfg.cg = config.cg;
            try {
              const GpModel model = GpModel::fit(cfg, domain, w_train, *grid, data.y_train);
              const double val = rmse(predict_with(w_val, model), data.y_val);
              if (val < best.val_rmse) {
                best.val_rmse = val;
                best.lengthscale = ls;
                best.sigma2 = s2;
                best.test_pred = predict_with(w_test, model);
                best.iterations = model.stats().iterations;
                best.fit_s = model.stats().fit_seconds;
              }
            } catch (const SolverError&) {
              ++failures;
            }
          }
        }
        res.add(labels, "cg_failures", failures);
        if (best.test_pred.empty()) {
          res.add_status(labels, "rmse_test", "failed", "no hyperparameter setting converged");
          continue;
        }
        res.add(labels, "rmse_val", best.val_rmse);
        res.add(labels, "rmse_test", rmse(best.test_pred, data.f_test));
        res.add(labels, "lengthscale", best.lengthscale);
        res.add(labels, "sigma2", best.sigma2);
        res.add(labels, "cg_iterations", best.iterations);
        res.add(labels, "fit_s", best.fit_s);
      }

      if (config.exact_oracle) {
        nlohmann::json labels = {{"function", to_string(fn)}, {"dim", dim}, {"grid_kind", "exact"}};
        if (config.n_train > kExactGpPointCap) {
          res.add_status(labels, "rmse_test", "skipped", "training set exceeds the exact-GP cap");
          continue;
        }
        double mean = 0.0;
        for (double v : data.y_train) mean += v;
        mean /= static_cast<double>(data.y_train.size());
        double var = 0.0;
        for (double v : data.y_train) var += (v - mean) * (v - mean);
        const double sd = data.y_train.size() > 1
                              ? std::sqrt(var / static_cast<double>(data.y_train.size() - 1))
                              : 1.0;
        std::vector<double> ys(data.y_train);
        for (double& v : ys) v = (v - mean) / (sd > 0.0 ? sd : 1.0);
        const RowMatrix query = stack_rows(data.x_val, data.x_test);
        Selection best;
        for (double ls : config.lengthscales) {
          const ProductKernel kernel = ProductKernel::isotropic(dim, ls);
          for (double s2 : config.sigma2s) {
            const auto ex = exact_gp_oracle(data.x_train, ys, query, kernel, s2);
            std::vector<double> val(ex.mean.begin(), ex.mean.begin() + config.n_val);
            for (double& v : val) v = mean + sd * v;
            const double r = rmse(val, data.y_val);
            if (r < best.val_rmse) {
              best.val_rmse = r;
              best.lengthscale = ls;
              best.sigma2 = s2;
              best.test_pred.assign(ex.mean.begin() + config.n_val, ex.mean.end());
              for (double& v : best.test_pred) v = mean + sd * v;
            }
          }
        }
        res.add(labels, "rmse_val", best.val_rmse);
        res.add(labels, "rmse_test", rmse(best.test_pred, data.f_test));
        res.add(labels, "lengthscale", best.lengthscale);
        res.add(labels, "sigma2", best.sigma2);
      }
    }
  }
  return res;
}

}  // namespace sgski
