// sgski command-line tool: grid inspection, MVM and interpolation benchmarks,
// GP fit/predict/study. Machine-readable results go to files or stdout;
// human-readable summaries go to stderr.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <new>
#include <sstream>

#include "sgski/bench.h"
#include "sgski/grid.h"
#include "sgski/io.h"
#include "sgski/ski.h"

namespace {

using sgski::Index;
using json = nlohmann::json;

struct Globals {
  std::string config_path;
  std::uint64_t seed = 1;
  bool seed_given = false;
  int verbosity = 1;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j = sgski::read_json_file(path);
  if (!j.is_object()) throw sgski::InputError(path + ": configuration must be a JSON object");
  return j;
}

std::string plan_cache_dir() {
  const char* env = std::getenv("SGSKI_PLAN_CACHE");
  return env ? env : "";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void log(const Globals& g, const std::string& msg) {
  if (g.verbosity > 0) std::cerr << msg << '\n';
}

// --------------------------------------------------------------------- grid

struct GridArgs {
  int level = 0;
  int dim = 1;
  std::string dump;
  bool json_out = false;
  Index cap = sgski::kDefaultPointCap;
};

int cmd_grid(const GridArgs& a, const Globals& g) {
  sgski::require(a.level >= 0 && a.dim >= 1, "grid: need --l >= 0 and --d >= 1");
  const Index closed = sgski::sparse_grid_size(a.level, a.dim);
  if (closed > a.cap) {
    throw sgski::ResourceError("grid: " + std::to_string(closed) + " points exceed the cap of " +
                               std::to_string(a.cap));
  }
  const sgski::SparseGrid grid(a.level, a.dim, a.cap);
  if (grid.size() != closed) {
    throw sgski::CorrectnessError("grid: enumerated size " + std::to_string(grid.size()) +
                                  " differs from closed form " + std::to_string(closed));
  }
  if (a.json_out) {
    std::cout << json{{"level", a.level}, {"dim", a.dim}, {"closed_form", closed},
                      {"enumerated", grid.size()}}
                     .dump()
              << '\n';
  } else {
    std::cout << closed << (closed == 1 ? " point" : " points") << '\n';
  }
  log(g, "closed form " + std::to_string(closed) + ", enumerated " + std::to_string(grid.size()));
  if (!a.dump.empty()) {
    if (a.dump == "-") {
      grid.write_csv(std::cout);
    } else {
      std::ofstream out(a.dump);
      if (!out) throw sgski::InputError("cannot write '" + a.dump + "'");
      grid.write_csv(out);
    }
  }
  return 0;
}

// ---------------------------------------------------------------- mvm-bench

struct MvmArgs {
  std::string out = "mvm_bench";
  int dim = 0;
  int level = -1;
  int level_min = -1;
  int level_max = -1;
  std::string algos;
  int reps = 0;
  bool inject_fault = false;
};

int cmd_mvm_bench(const MvmArgs& a, const Globals& g) {
  json j = load_config(g.config_path);
  if (a.dim > 0) j["dim"] = a.dim;
  if (a.level >= 0) j["level_min"] = j["level_max"] = a.level;
  if (a.level_min >= 0) j["level_min"] = a.level_min;
  if (a.level_max >= 0) j["level_max"] = a.level_max;
  if (!a.algos.empty()) j["algos"] = split_list(a.algos);
  if (a.reps > 0) j["repetitions"] = a.reps;
  if (a.inject_fault) j["inject_fault"] = true;
  if (g.seed_given) j["seed"] = g.seed;
  if (!j.contains("plan_cache_dir")) j["plan_cache_dir"] = plan_cache_dir();

  const auto config = sgski::mvm_scaling_config_from_json(j);
  const auto run = sgski::run_mvm_scaling(config);
  sgski::write_result_files(run.result, a.out);
  {
    std::ofstream counters(a.out + ".counters.jsonl");
    for (const auto& c : run.counters) counters << sgski::mvm_cost_to_json(c).dump() << '\n';
  }
  for (const auto& r : run.result.rows) {
    if (r.status == "skipped") std::cerr << "warning: skipped " << r.labels.dump() << ": " << r.note << '\n';
    if (r.metric == "mvm_s" && r.status == "ok" && g.verbosity > 0) {
      std::cerr << r.labels.at("algo").get<std::string>() << " l=" << r.labels.at("level")
                << " |G|=" << r.labels.at("grid_size") << " mvm " << r.value << " s\n";
    }
  }
  log(g, "results written to " + a.out + ".{jsonl,csv,meta.json,counters.jsonl}");
  if (!run.result.correct) {
    std::cerr << "error: MVM algorithms disagree beyond tolerance\n";
    return 2;
  }
  return 0;
}

// ------------------------------------------------------------- interp-bench

struct InterpArgs {
  std::string out = "interp_bench";
  int dim = 0;
  int level_min = -1;
  int level_max = -1;
  std::string function;
  std::string rules;
  std::string kinds;
  Index n_eval = 0;
};

int cmd_interp_bench(const InterpArgs& a, const Globals& g) {
  json j = load_config(g.config_path);
  if (a.dim > 0) j["dim"] = a.dim;
  if (a.level_min >= 0) j["level_min"] = a.level_min;
  if (a.level_max >= 0) j["level_max"] = a.level_max;
  if (!a.function.empty()) j["function"] = a.function;
  if (!a.rules.empty()) j["rules"] = split_list(a.rules);
  if (!a.kinds.empty()) j["kinds"] = split_list(a.kinds);
  if (a.n_eval > 0) j["n_eval"] = a.n_eval;
  if (g.seed_given) j["seed"] = g.seed;
  const auto result = sgski::run_interp_accuracy(sgski::interp_accuracy_config_from_json(j));
  sgski::write_result_files(result, a.out);
  for (const auto& r : result.rows) {
    if (g.verbosity > 0) std::cerr << r.labels.dump() << " rmse " << r.value << '\n';
  }
  return 0;
}

// ----------------------------------------------------------------------- gp

struct GpArgs {
  std::string data;
  std::string model;
  std::string out;
  std::string grid_kind;
  int level = -1;
  std::vector<Index> dense_points;
  std::string rule;
  std::string scheme;
  std::string algo;
  std::vector<double> lengthscales;
  double output_scale = 0.0;
  double sigma2 = -1.0;
  double tol = 0.0;
  int max_iters = 0;
  std::string precond;
  // study
  std::string dims;
  Index n_train = 0;
  bool exact = false;
};

sgski::GpConfig resolve_fit_config(const GpArgs& a, const Globals& g, int dim) {
  json j = load_config(g.config_path);
  for (const char* key : {"grid", "hyperparameters", "cg"}) {
    if (!j.contains(key)) j[key] = json::object();
  }
  json& grid = j["grid"];
  if (!a.grid_kind.empty()) grid["kind"] = a.grid_kind;
  if (a.level >= 0) grid["level"] = a.level;
  if (!a.dense_points.empty()) grid["dense_counts"] = a.dense_points;
  if (!a.rule.empty()) grid["base"] = a.rule;
  if (!a.scheme.empty()) grid["scheme"] = a.scheme;
  if (!a.algo.empty()) grid["algo"] = a.algo;
  json& hp = j["hyperparameters"];
  if (!a.lengthscales.empty()) hp["lengthscales"] = a.lengthscales;
  if (!hp.contains("lengthscales")) hp["lengthscales"] = std::vector<double>{0.2};
  if (hp["lengthscales"].size() == 1 && dim > 1) {
    hp["lengthscales"] = std::vector<double>(static_cast<std::size_t>(dim), hp["lengthscales"][0].get<double>());
  }
  if (a.output_scale > 0.0) hp["output_scale"] = a.output_scale;
  if (a.sigma2 >= 0.0) hp["sigma2"] = a.sigma2;
  if (!hp.contains("sigma2")) hp["sigma2"] = 1e-2;
  json& cg = j["cg"];
  if (a.tol > 0.0) cg["rel_tolerance"] = a.tol;
  if (a.max_iters > 0) cg["max_iters"] = a.max_iters;
  if (!a.precond.empty()) cg["preconditioner"] = a.precond;
  auto config = sgski::gp_config_from_json(j);
  config.plan.cache_dir = plan_cache_dir();
  return config;
}

int cmd_gp_fit(const GpArgs& a, const Globals& g) {
  sgski::require(!a.data.empty() && !a.model.empty(), "gp fit: need --data and --model");
  const auto data = sgski::read_csv_dataset(a.data);
  const auto config = resolve_fit_config(a, g, static_cast<int>(data.x.cols()));
  if (static_cast<Index>(config.kernel.dim()) != data.x.cols()) {
    throw sgski::InputError("gp fit: " + std::to_string(config.kernel.dim()) +
                            " lengthscales for " + std::to_string(data.x.cols()) + " input columns");
  }
  try {
    const auto model = sgski::GpModel::fit(config, data.x, data.y);
    sgski::write_json_file(a.model, model.to_json());
    const auto& s = model.stats();
    log(g, "fit: " + std::to_string(data.x.rows()) + " points, CG " + sgski::to_string(s.status) +
               " in " + std::to_string(s.iterations) + " iterations, relative residual " +
               std::to_string(s.rel_residual) + ", " + std::to_string(s.fit_seconds) + " s");
  } catch (const sgski::SolverError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}

int cmd_gp_predict(const GpArgs& a, const Globals& g) {
  sgski::require(!a.data.empty() && !a.model.empty(), "gp predict: need --data and --model");
  const auto model = sgski::GpModel::from_json(sgski::read_json_file(a.model));
  const auto table = sgski::read_csv_table(a.data);
  const Index d = model.domain().dim();
  const Index width = table.values.cols();
  if (width != d && width != d + 1) {
    throw sgski::InputError(a.data + ": expected " + std::to_string(d) + " feature columns (plus an optional target)");
  }
  sgski::RowMatrix x(table.values.rows(), d);
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < d; ++c) x(r, c) = table.values(r, c);
  }
  const auto mean = model.predict(x);
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw sgski::InputError("cannot write '" + a.out + "'");
  }
  std::ostream& out = a.out.empty() ? std::cout : file;
  out.precision(17);
  out << "mean\n";
  for (double m : mean) out << m << '\n';
  if (width == d + 1) {
    std::vector<double> y(static_cast<std::size_t>(x.rows()));
    for (Index r = 0; r < x.rows(); ++r) y[r] = table.values(r, d);
    log(g, "predict: RMSE against the target column " + std::to_string(sgski::rmse(mean, y)));
  }
  return 0;
}

int cmd_gp_study(const GpArgs& a, const Globals& g) {
  json j = load_config(g.config_path);
  if (!a.dims.empty()) {
    std::vector<int> dims;
    for (const auto& s : split_list(a.dims)) dims.push_back(std::stoi(s));
    j["dims"] = dims;
  }
  if (a.level >= 0) j["level"] = a.level;
  if (!a.grid_kind.empty()) j["kinds"] = split_list(a.grid_kind);
  if (!a.rule.empty()) j["base"] = a.rule;
  if (a.n_train > 0) j["n_train"] = a.n_train;
  if (!a.lengthscales.empty()) j["lengthscales"] = a.lengthscales;
  if (a.exact) j["exact_oracle"] = true;
  if (g.seed_given) j["seed"] = g.seed;
  if (!j.contains("plan_cache_dir")) j["plan_cache_dir"] = plan_cache_dir();
  const auto result = sgski::run_gp_study(sgski::gp_study_config_from_json(j));
  const std::string out = a.out.empty() ? "gp_study" : a.out;
  sgski::write_result_files(result, out);
  int failures = 0;
  for (const auto& r : result.rows) {
    if (r.metric != "rmse_test") continue;
    if (r.status == "failed") ++failures;
    if (g.verbosity > 0) std::cerr << r.labels.dump() << " test RMSE " << r.value << " (" << r.status << ")\n";
  }
  log(g, "results written to " + out + ".{jsonl,csv,meta.json}");
  return failures > 0 ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-grid structured kernel interpolation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON configuration file; flags override its keys")
      ->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed");
  app.add_option("-v,--verbosity", g.verbosity, "0 silences the stderr summary");

  GridArgs grid_args;
  auto* grid = app.add_subcommand("grid", "Sparse grid size and optional point dump");
  grid->add_option("--l,--level", grid_args.level, "Resolution level")->required();
  grid->add_option("--d,--dim", grid_args.dim, "Dimension")->required();
  grid->add_option("--dump", grid_args.dump, "Write points as CSV to a file ('-' for stdout)");
  grid->add_flag("--json", grid_args.json_out, "Print a JSON size report");
  grid->add_option("--cap", grid_args.cap, "Point cap");

  MvmArgs mvm_args;
  auto* mvm = app.add_subcommand("mvm-bench", "Sparse-grid kernel MVM scaling benchmark");
  mvm->add_option("--out", mvm_args.out, "Output prefix");
  mvm->add_option("--d,--dim", mvm_args.dim, "Dimension");
  mvm->add_option("--l,--level", mvm_args.level, "Single level");
  mvm->add_option("--l-min", mvm_args.level_min, "Smallest level");
  mvm->add_option("--l-max", mvm_args.level_max, "Largest level");
  mvm->add_option("--algos", mvm_args.algos, "Comma list of naive,recursive,iterative");
  mvm->add_option("--reps", mvm_args.reps, "Timed repetitions per point");
  mvm->add_flag("--inject-fault", mvm_args.inject_fault, "Perturb one backend (test hook)")
      ->group("");

  InterpArgs interp_args;
  auto* interp = app.add_subcommand("interp-bench", "Interpolation accuracy study");
  interp->add_option("--out", interp_args.out, "Output prefix");
  interp->add_option("--d,--dim", interp_args.dim, "Dimension");
  interp->add_option("--l-min", interp_args.level_min, "Smallest level");
  interp->add_option("--l-max", interp_args.level_max, "Largest level");
  interp->add_option("--function", interp_args.function, "cos_l1, aniso_cos or corner_peak");
  interp->add_option("--rules", interp_args.rules, "Comma list of simplicial,linear,cubic");
  interp->add_option("--kinds", interp_args.kinds, "Comma list of sparse,dense");
  interp->add_option("--n-eval", interp_args.n_eval, "Evaluation points");

  GpArgs gp_args;
  auto* gp = app.add_subcommand("gp", "GP regression");
  gp->require_subcommand(1);
  auto add_model_options = [&](CLI::App* sub) {
    sub->add_option("--grid", gp_args.grid_kind, "sparse or dense");
    sub->add_option("--l,--level", gp_args.level, "Sparse grid level");
    sub->add_option("--rule", gp_args.rule, "simplicial, linear or cubic");
    sub->add_option("--lengthscale", gp_args.lengthscales, "One value or one per dimension");
  };
  auto* fit = gp->add_subcommand("fit", "Fit a model to a CSV (last column is the target)");
  fit->add_option("--data", gp_args.data, "Training CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--model", gp_args.model, "Model JSON to write")->required();
  add_model_options(fit);
  fit->add_option("--dense-points", gp_args.dense_points, "Dense lattice points per dimension");
  fit->add_option("--scheme", gp_args.scheme, "combination or subsampled");
  fit->add_option("--algo", gp_args.algo, "naive, recursive or iterative");
  fit->add_option("--output-scale", gp_args.output_scale, "Kernel output scale");
  fit->add_option("--sigma2", gp_args.sigma2, "Noise variance (standardized targets)");
  fit->add_option("--tol", gp_args.tol, "CG relative tolerance");
  fit->add_option("--max-iters", gp_args.max_iters, "CG iteration limit");
  fit->add_option("--precond", gp_args.precond, "none or jacobi");
  auto* predict = gp->add_subcommand("predict", "Predictive mean for a CSV");
  predict->add_option("--model", gp_args.model, "Model JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--data", gp_args.data, "Input CSV")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", gp_args.out, "Predictions CSV (default stdout)");
  auto* study = gp->add_subcommand("study", "Synthetic GP regression study");
  add_model_options(study);
  study->add_option("--dims", gp_args.dims, "Comma list of dimensions");
  study->add_option("--n-train", gp_args.n_train, "Training points");
  study->add_flag("--exact", gp_args.exact, "Also tune and score the exact GP");
  study->add_option("--out", gp_args.out, "Output prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (*grid) return cmd_grid(grid_args, g);
    if (*mvm) return cmd_mvm_bench(mvm_args, g);
    if (*interp) return cmd_interp_bench(interp_args, g);
    if (*fit) return cmd_gp_fit(gp_args, g);
    if (*predict) return cmd_gp_predict(gp_args, g);
    if (*study) return cmd_gp_study(gp_args, g);
  } catch (const sgski::Error& e) {
    std::cerr << "error (" << sgski::to_string(e.kind()) << "): " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::bad_alloc&) {
    std::cerr << "error (resource): out of memory\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error (input): " << e.what() << '\n';
    return 1;
  }
  return 1;
}
