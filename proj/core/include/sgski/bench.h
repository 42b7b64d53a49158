#ifndef SGSKI_BENCH_H_
#define SGSKI_BENCH_H_

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "sgski/interp.h"
#include "sgski/sgmvm.h"
#include "sgski/ski.h"

namespace sgski {

enum class SyntheticFunction { kCosL1, kAnisoCos, kCornerPeak };

std::string to_string(SyntheticFunction f);
SyntheticFunction synthetic_function_from_string(const std::string& name);

struct SyntheticTask {
  SyntheticFunction function = SyntheticFunction::kCosL1;
  int dim = 2;
  double noise_std = 0.05;
  std::uint64_t seed = 0;
  Index n_train = 4000;
  Index n_val = 2000;
  Index n_test = 3000;
  // Shift and per-dimension weights of the anisotropic functions, drawn
  // uniform on [0, 1] from the seed by make().
  double w = 0.0;
  std::vector<double> c;

  static SyntheticTask make(SyntheticFunction function, int dim, std::uint64_t seed,
                            double noise_std = 0.05);
  double operator()(std::span<const double> x) const;
};

struct SyntheticData {
  RowMatrix x_train;
  std::vector<double> y_train;
  RowMatrix x_val;
  std::vector<double> y_val;
  RowMatrix x_test;
  std::vector<double> f_test;  // noiseless
};

// Inputs uniform on [0,1]^d; noisy targets for train/validation, clean
// targets for test.
SyntheticData gen_synthetic(const SyntheticTask& task);

// One metric per row; labels identify the configuration.
struct MetricRow {
  nlohmann::json labels = nlohmann::json::object();
  std::string metric;
  double value = 0.0;
  std::string status = "ok";  // ok | skipped | failed
  std::string note;
};

struct ExperimentResult {
  std::string experiment;
  nlohmann::json config;
  nlohmann::json environment;
  std::vector<MetricRow> rows;
  // False when a correctness check between algorithms failed.
  bool correct = true;

  void add(nlohmann::json labels, std::string metric, double value);
  void add_status(nlohmann::json labels, std::string metric, std::string status, std::string note);
  // First row matching the metric and every given label, or nullptr.
  const MetricRow* find(const std::string& metric, const nlohmann::json& labels) const;
};

nlohmann::json environment_metadata();

nlohmann::json metric_row_to_json(const ExperimentResult& result, const MetricRow& row);
// <prefix>.jsonl, <prefix>.csv and <prefix>.meta.json (config echo and
// environment).
void write_result_files(const ExperimentResult& result, const std::string& prefix);
void write_jsonl(const ExperimentResult& result, std::ostream& out);
void write_csv(const ExperimentResult& result, std::ostream& out);
nlohmann::json mvm_cost_to_json(const MvmCost& cost);

// Directory holding the published JSON schema files.
std::string schema_dir();

// Smallest m with m^dim >= points.
Index matched_dense_points(Index points, int dim);

// ------------------------------------------------------------ MVM scaling

struct MvmScalingConfig {
  int dim = 6;
  int level_min = 2;
  int level_max = 5;
  std::vector<MvmAlgorithm> algos = {MvmAlgorithm::kNaive, MvmAlgorithm::kRecursive,
                                     MvmAlgorithm::kIterative};
  int repetitions = 8;
  double lengthscale = 0.5;
  std::uint64_t seed = 1;
  Index naive_point_cap = kNaivePointCap;
  std::int64_t naive_memory_bytes = std::int64_t{2} << 30;
  double agreement_tolerance = 1e-10;
  // Test hook: perturbs the iterative output before the agreement check.
  bool inject_fault = false;
  std::string plan_cache_dir;
};

nlohmann::json to_json(const MvmScalingConfig& c);
MvmScalingConfig mvm_scaling_config_from_json(const nlohmann::json& j);

struct MvmScalingResult {
  ExperimentResult result;
  std::vector<MvmCost> counters;
};

MvmScalingResult run_mvm_scaling(const MvmScalingConfig& config);

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

// ------------------------------------------------- interpolation accuracy

struct InterpAccuracyConfig {
  SyntheticFunction function = SyntheticFunction::kCosL1;
  int dim = 6;
  int level_min = 2;
  int level_max = 5;
  std::vector<GridKind> kinds = {GridKind::kSparse, GridKind::kDense};
  std::vector<BaseRule> rules = {BaseRule::kSimplicial};
  SparseScheme scheme = SparseScheme::kCombination;
  Index n_eval = 200;
  std::uint64_t seed = 1;
};

nlohmann::json to_json(const InterpAccuracyConfig& c);
InterpAccuracyConfig interp_accuracy_config_from_json(const nlohmann::json& j);

// RMS error of interpolating the exactly-sampled function, per grid kind,
// rule and level. Dense grids use matched_dense_points(|G_{level,dim}|).
ExperimentResult run_interp_accuracy(const InterpAccuracyConfig& config);

// --------------------------------------------------------------- GP study

struct GpStudyConfig {
  std::vector<SyntheticFunction> functions = {SyntheticFunction::kCosL1};
  std::vector<int> dims = {2};
  int level = 4;
  std::vector<GridKind> kinds = {GridKind::kSparse, GridKind::kDense};
  BaseRule base = BaseRule::kSimplicial;
  Index n_train = 4000;
  Index n_val = 2000;
  Index n_test = 3000;
  double noise_std = 0.05;
  std::uint64_t seed = 1;
  std::vector<double> lengthscales = {0.05, 0.1, 0.2, 0.4, 0.8};
  std::vector<double> sigma2s = {1e-3, 1e-2, 1e-1};
  CgConfig cg{1e-4, 2000, Preconditioner::kJacobi};
  bool exact_oracle = false;
  std::string plan_cache_dir;
};

nlohmann::json to_json(const GpStudyConfig& c);
GpStudyConfig gp_study_config_from_json(const nlohmann::json& j);

// Per (function, dim, grid kind): validation-selected hyperparameters, test
// RMSE against clean targets, grid size and solver statistics. With
// exact_oracle the dense exact GP is tuned and scored on the same split.
ExperimentResult run_gp_study(const GpStudyConfig& config);

double rmse(std::span<const double> a, std::span<const double> b);

}  // namespace sgski

#endif  // SGSKI_BENCH_H_
