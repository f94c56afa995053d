// Command-line front end: synthetic data generation, quantization, exact
// transport solves, dual GDA solvers, and the Rademacher estimator, with
// machine-readable JSON reports.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cotdre/csv.hpp"
#include "cotdre/exact_transport.hpp"
#include "cotdre/quantize.hpp"
#include "cotdre/solvers.hpp"
#include "cotdre/synthetic.hpp"
#include "cotdre/version.hpp"

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;
using namespace cotdre;

namespace {

// ---------------------------------------------------------------------------
// Strict config parsing: unknown keys are rejected everywhere.
// ---------------------------------------------------------------------------

void reject_unknown(const json& obj, const char* where,
                    std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ParameterError(std::string(where) + ": expected a JSON object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw ParameterError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

ObjectiveSpec parse_objective(const json& j) {
  reject_unknown(j, "objective", {"kind", "a", "b", "t", "k", "values", "net"});
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear_relu")
    return ObjectiveSpec::linear_relu(j.at("a").get<std::vector<double>>(),
                                      get_or(j, "b", 0.0));
  if (kind == "coordinate")
    return ObjectiveSpec::coordinate(j.at("t").get<int>(), get_or(j, "k", 1));
  if (kind == "table")
    return ObjectiveSpec::grid_table(j.at("values").get<std::vector<double>>());
  if (kind == "network")
    return ObjectiveSpec::network(std::make_shared<DenseNet>(
        DenseNet::from_json_string(j.at("net").dump())));
  throw ParameterError("objective: unknown kind '" + kind + "'");
}

CostSpec parse_cost(const json& j) {
  reject_unknown(j, "cost", {"kind", "B", "values", "rows", "cols", "t_x", "t_y"});
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "scaled_quadratic") return CostSpec::scaled_quadratic(j.at("B").get<double>());
  if (kind == "l1") return CostSpec::l1();
  if (kind == "table")
    return CostSpec::pair_table(j.at("values").get<std::vector<double>>(),
                                j.at("rows").get<int>(), j.at("cols").get<int>());
  if (kind == "indicator_feature")
    return CostSpec::indicator_feature(j.at("t_x").get<int>(), j.at("t_y").get<int>());
  throw ParameterError("cost: unknown kind '" + kind + "'");
}

struct Problem {
  Bounds bounds;
  int T = 0, d = 0;
  std::optional<ObjectiveSpec> objective;
  std::optional<CostSpec> cost;
  double eps = 0.0;
  bool adapt = false;  // build mu via adapted empirical quantization
  std::string mu_csv, grid_csv, nu_csv, paths_csv;
  json reference_values;
};

Problem parse_problem(const json& j, const fs::path& base) {
  reject_unknown(j, "problem",
                 {"bounds", "T", "d", "objective", "cost", "eps", "adapt",
                  "mu_csv", "grid_csv", "nu_csv", "paths_csv",
                  "reference_values"});
  Problem p;
  const auto b = j.at("bounds").get<std::vector<double>>();
  if (b.size() != 2) throw ParameterError("problem.bounds: expected [lo, hi]");
  p.bounds = Bounds{b[0], b[1]};
  p.T = j.at("T").get<int>();
  p.d = j.at("d").get<int>();
  if (j.contains("objective")) p.objective = parse_objective(j.at("objective"));
  if (j.contains("cost")) p.cost = parse_cost(j.at("cost"));
  p.eps = get_or(j, "eps", 0.0);
  p.adapt = get_or(j, "adapt", false);
  const auto resolve = [&](const char* key) -> std::string {
    if (!j.contains(key)) return {};
    const auto raw = j.at(key).get<std::string>();
    const fs::path path(raw);
    return path.is_absolute() ? raw : (base / path).string();
  };
  p.mu_csv = resolve("mu_csv");
  p.grid_csv = resolve("grid_csv");
  p.nu_csv = resolve("nu_csv");
  p.paths_csv = resolve("paths_csv");
  if (j.contains("reference_values")) p.reference_values = j.at("reference_values");
  return p;
}

GdaConfig parse_gda(const json& j) {
  reject_unknown(j, "solver",
                 {"outer_steps", "inner_steps", "inner_rel_tol", "lambda0",
                  "lambda_momentum", "lambda_denom_slope", "lambda_denom_base",
                  "L", "hidden", "lr_hm", "clamp", "y_step0", "y_normalize",
                  "y_init_variance", "xi", "eta", "inner_mode", "seed",
                  "divergence_guard", "cost_band", "lambda_small",
                  "tail_fraction"});
  GdaConfig c;
  c.outer_steps = get_or<long>(j, "outer_steps", c.outer_steps);
  c.inner_steps = get_or(j, "inner_steps", c.inner_steps);
  c.inner_rel_tol = get_or(j, "inner_rel_tol", c.inner_rel_tol);
  c.lambda0 = get_or(j, "lambda0", c.lambda0);
  c.lambda_momentum = get_or(j, "lambda_momentum", c.lambda_momentum);
  c.lambda_denom_slope = get_or(j, "lambda_denom_slope", c.lambda_denom_slope);
  c.lambda_denom_base = get_or(j, "lambda_denom_base", c.lambda_denom_base);
  c.L = get_or(j, "L", c.L);
  c.hidden = get_or(j, "hidden", c.hidden);
  c.lr_hm = get_or(j, "lr_hm", c.lr_hm);
  if (j.contains("clamp")) {
    const auto v = j.at("clamp").get<std::vector<double>>();
    if (v.size() != 2) throw ParameterError("solver.clamp: expected [low, high]");
    c.clamp = {v[0], v[1]};
  }
  c.y_step0 = get_or(j, "y_step0", c.y_step0);
  c.y_normalize = get_or(j, "y_normalize", c.y_normalize);
  c.y_init_variance = get_or(j, "y_init_variance", c.y_init_variance);
  c.xi = get_or(j, "xi", c.xi);
  c.eta = get_or(j, "eta", c.eta);
  const std::string mode = get_or<std::string>(j, "inner_mode", "gradient");
  if (mode == "grid")
    c.inner_mode = GdaConfig::InnerMode::Grid;
  else if (mode == "gradient")
    c.inner_mode = GdaConfig::InnerMode::Gradient;
  else
    throw ParameterError("solver.inner_mode: expected 'grid' or 'gradient'");
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.divergence_guard = get_or(j, "divergence_guard", c.divergence_guard);
  c.cost_band = get_or(j, "cost_band", c.cost_band);
  c.lambda_small = get_or(j, "lambda_small", c.lambda_small);
  c.tail_fraction = get_or(j, "tail_fraction", c.tail_fraction);
  return c;
}

SinkhornConfig parse_sinkhorn(const json& j) {
  reject_unknown(j, "sinkhorn",
                 {"rule", "fixed_reg", "coupled_slope", "coupled_floor",
                  "max_iter", "tol"});
  SinkhornConfig c;
  const std::string rule = get_or<std::string>(j, "rule", "coupled");
  if (rule == "fixed")
    c.rule = SinkhornConfig::TauRule::Fixed;
  else if (rule == "coupled")
    c.rule = SinkhornConfig::TauRule::Coupled;
  else
    throw ParameterError("sinkhorn.rule: expected 'fixed' or 'coupled'");
  c.fixed_reg = get_or(j, "fixed_reg", c.fixed_reg);
  c.coupled_slope = get_or(j, "coupled_slope", c.coupled_slope);
  c.coupled_floor = get_or(j, "coupled_floor", c.coupled_floor);
  c.max_iter = get_or(j, "max_iter", c.max_iter);
  c.tol = get_or(j, "tol", c.tol);
  return c;
}

ScotConfig parse_scot(const json& j) {
  reject_unknown(j, "solver",
                 {"iterations", "batch", "lambda0", "lambda_momentum",
                  "lambda_denom_slope", "lambda_denom_base", "L", "hidden",
                  "lr_hm", "clamp", "gen_hidden", "lr_gen", "gen_clamp",
                  "sigma2", "quantize_y", "quantizer_samples", "xi", "eta", "sinkhorn",
                  "pretrain_steps", "pretrain_lr", "seed", "divergence_guard",
                  "cost_band", "lambda_small", "tail_fraction", "early_stop",
                  "min_iterations", "check_every"});
  ScotConfig c;
  c.iterations = get_or<long>(j, "iterations", c.iterations);
  c.batch = get_or(j, "batch", c.batch);
  c.lambda0 = get_or(j, "lambda0", c.lambda0);
  c.lambda_momentum = get_or(j, "lambda_momentum", c.lambda_momentum);
  c.lambda_denom_slope = get_or(j, "lambda_denom_slope", c.lambda_denom_slope);
  c.lambda_denom_base = get_or(j, "lambda_denom_base", c.lambda_denom_base);
  c.L = get_or(j, "L", c.L);
  c.hidden = get_or(j, "hidden", c.hidden);
  c.lr_hm = get_or(j, "lr_hm", c.lr_hm);
  if (j.contains("clamp")) {
    const auto v = j.at("clamp").get<std::vector<double>>();
    if (v.size() != 2) throw ParameterError("solver.clamp: expected [low, high]");
    c.clamp = {v[0], v[1]};
  }
  c.gen_hidden = get_or(j, "gen_hidden", c.gen_hidden);
  c.lr_gen = get_or(j, "lr_gen", c.lr_gen);
  if (j.contains("gen_clamp")) {
    const auto v = j.at("gen_clamp").get<std::vector<double>>();
    if (v.size() != 2) throw ParameterError("solver.gen_clamp: expected [low, high]");
    c.gen_clamp = {v[0], v[1]};
  }
  c.sigma2 = get_or(j, "sigma2", c.sigma2);
  c.quantize_y = get_or(j, "quantize_y", c.quantize_y);
  c.quantizer_samples = get_or<long>(j, "quantizer_samples", c.quantizer_samples);
  c.xi = get_or(j, "xi", c.xi);
  c.eta = get_or(j, "eta", c.eta);
  if (j.contains("sinkhorn")) c.sinkhorn = parse_sinkhorn(j.at("sinkhorn"));
  c.pretrain_steps = get_or<long>(j, "pretrain_steps", c.pretrain_steps);
  c.pretrain_lr = get_or(j, "pretrain_lr", c.pretrain_lr);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.divergence_guard = get_or(j, "divergence_guard", c.divergence_guard);
  c.cost_band = get_or(j, "cost_band", c.cost_band);
  c.lambda_small = get_or(j, "lambda_small", c.lambda_small);
  c.tail_fraction = get_or(j, "tail_fraction", c.tail_fraction);
  c.early_stop = get_or(j, "early_stop", c.early_stop);
  c.min_iterations = get_or<long>(j, "min_iterations", c.min_iterations);
  c.check_every = get_or(j, "check_every", c.check_every);
  return c;
}

// ---------------------------------------------------------------------------
// Report helpers
// ---------------------------------------------------------------------------

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

json input_digest(const std::string& path) {
  json j;
  j["path"] = path;
  j["fnv1a64"] = fnv1a64_hex(slurp(path));
  return j;
}

json sparse_plan(const Coupling& plan, double cutoff = 1e-12) {
  json triplets = json::array();
  for (int i = 0; i < plan.rows(); ++i)
    for (int j = 0; j < plan.cols(); ++j)
      if (plan.at(i, j) > cutoff) triplets.push_back({i, j, plan.at(i, j)});
  return triplets;
}

json measure_json(const DiscreteMeasure& m) {
  json out;
  json paths = json::array();
  for (int n = 0; n < m.size(); ++n) {
    const auto p = m.support().path(n);
    paths.push_back(std::vector<double>(p.begin(), p.end()));
  }
  out["paths"] = std::move(paths);
  out["weights"] = m.weights();
  return out;
}

// Compare a computed value against any reference entries for this command.
// Each entry may be a bare number or {"value": v, "note": "..."}; the check
// is reported, never enforced.
json reference_check(const json& refs, const std::string& command, double value,
                     double tol = 1e-6) {
  json out = json::array();
  if (!refs.is_object()) return out;
  for (const auto& [key, entry] : refs.items()) {
    if (key.rfind(command, 0) != 0) continue;
    double ref = 0.0;
    std::string note;
    if (entry.is_number()) {
      ref = entry.get<double>();
    } else if (entry.is_object()) {
      ref = entry.at("value").get<double>();
      note = entry.value("note", "");
    } else {
      continue;
    }
    json row;
    row["name"] = key;
    row["reference"] = ref;
    row["computed"] = value;
    row["matches"] = std::abs(value - ref) <= tol;
    if (!note.empty()) row["note"] = note;
    out.push_back(std::move(row));
  }
  return out;
}

void emit_report(json report, const std::string& out_path) {
  const std::string text = report.dump(2) + "\n";
  if (!out_path.empty()) {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + out_path + "'");
    f << text;
  } else {
    std::cout << text;
  }
}

int error_exit_code(const std::exception& e) {
  if (dynamic_cast<const DimensionError*>(&e)) return 3;
  if (dynamic_cast<const DomainError*>(&e)) return 4;
  if (dynamic_cast<const InfeasibleError*>(&e)) return 6;
  if (dynamic_cast<const ConvergenceError*>(&e)) return 7;
  if (dynamic_cast<const NumericError*>(&e)) return 8;
  if (dynamic_cast<const IoError*>(&e)) return 9;
  if (dynamic_cast<const MissingCellError*>(&e)) return 10;
  if (dynamic_cast<const ParameterError*>(&e)) return 5;
  return 1;
}

const char* error_class_name(const std::exception& e) {
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const InfeasibleError*>(&e)) return "infeasible";
  if (dynamic_cast<const ConvergenceError*>(&e)) return "convergence";
  if (dynamic_cast<const NumericError*>(&e)) return "numeric";
  if (dynamic_cast<const IoError*>(&e)) return "io";
  if (dynamic_cast<const MissingCellError*>(&e)) return "missing_cell";
  if (dynamic_cast<const ParameterError*>(&e)) return "parameter";
  return "internal";
}

int max_threads() {
  if (const char* env = std::getenv("COTDRE_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Run `count` seeded jobs in parallel, preserving result order.
std::vector<json> parallel_runs(int count,
                                const std::function<json(int)>& job) {
  std::vector<json> results(count);
  std::vector<std::string> errors(count);
  const int workers = std::min(count, max_threads());
  std::mutex next_mutex;
  int next = 0;
  std::vector<std::thread> pool;
  for (int wk = 0; wk < workers; ++wk) {
    pool.emplace_back([&] {
      while (true) {
        int idx;
        {
          std::lock_guard<std::mutex> lk(next_mutex);
          if (next >= count) return;
          idx = next++;
        }
        try {
          results[idx] = job(idx);
        } catch (const std::exception& e) {
          errors[idx] = e.what();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& err : errors)
    if (!err.empty()) throw Error("repeat run failed: " + err);
  return results;
}

json aggregate_values(const std::vector<json>& runs, const char* key) {
  double sum = 0.0, sumsq = 0.0;
  for (const auto& r : runs) {
    const double v = r.at(key).get<double>();
    sum += v;
    sumsq += v * v;
  }
  const double n = static_cast<double>(runs.size());
  const double mean = sum / n;
  const double var = std::max(0.0, sumsq / n - mean * mean);
  json out;
  out["mean"] = mean;
  out["std"] = std::sqrt(var);
  out["runs"] = runs.size();
  return out;
}

// ---------------------------------------------------------------------------
// Input loading
// ---------------------------------------------------------------------------

DiscreteMeasure load_measure(const Problem& p, json& inputs) {
  if (!p.mu_csv.empty()) {
    inputs["mu_csv"] = input_digest(p.mu_csv);
    auto csv = read_path_csv(p.mu_csv);
    auto m = to_measure(csv, p.bounds);
    if (!p.adapt) return m;
    const auto qcfg = QuantizerConfig::make(p.bounds, p.d, p.T, m.size());
    return adapted_empirical(qcfg, m.support());
  }
  if (!p.paths_csv.empty()) {
    inputs["paths_csv"] = input_digest(p.paths_csv);
    auto csv = read_path_csv(p.paths_csv);
    auto batch = to_path_batch(csv, p.bounds);
    const auto qcfg = QuantizerConfig::make(p.bounds, p.d, p.T, batch.num_paths());
    return adapted_empirical(qcfg, batch);
  }
  throw ParameterError("problem: mu_csv or paths_csv required");
}

PathBatch load_grid(const Problem& p, json& inputs) {
  if (p.grid_csv.empty()) throw ParameterError("problem.grid_csv required");
  inputs["grid_csv"] = input_digest(p.grid_csv);
  return to_path_batch(read_path_csv(p.grid_csv), p.bounds);
}

}  // namespace

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_path;
  std::string out_measure_csv;
  std::optional<std::uint64_t> seed;
  int repeats = 1;
};

struct LoadedConfig {
  json raw;
  Problem problem;
  fs::path base;
};

LoadedConfig load_config(const CommonArgs& args) {
  if (args.config_path.empty()) throw ParameterError("--config is required");
  LoadedConfig lc;
  lc.raw = json::parse(slurp(args.config_path), nullptr, true, true);
  reject_unknown(lc.raw, "config", {"problem", "solver", "rademacher"});
  lc.base = fs::path(args.config_path).parent_path();
  lc.problem = parse_problem(lc.raw.at("problem"), lc.base);
  return lc;
}

json report_skeleton(const std::string& command, const LoadedConfig& lc,
                     std::uint64_t seed) {
  json rep;
  rep["command"] = command;
  rep["version"] = kVersion;
  rep["seed"] = seed;
  rep["config"] = lc.raw;
  rep["inputs"] = json::object();
  return rep;
}

int run_command(const std::string& command, const CommonArgs& args) {
  const auto t0 = std::chrono::steady_clock::now();
  LoadedConfig lc = load_config(args);
  const std::uint64_t seed = args.seed.value_or(0);
  json rep = report_skeleton(command, lc, seed);
  json& inputs = rep["inputs"];
  const Problem& p = lc.problem;

  json results;
  if (command == "quantize") {
    if (p.paths_csv.empty()) throw ParameterError("problem.paths_csv required");
    inputs["paths_csv"] = input_digest(p.paths_csv);
    auto batch = to_path_batch(read_path_csv(p.paths_csv), p.bounds);
    const auto qcfg = QuantizerConfig::make(p.bounds, p.d, p.T, batch.num_paths());
    const auto m = adapted_empirical(qcfg, batch);
    results["atoms"] = m.size();
    results["cells_per_axis"] = qcfg.cells_per_axis;
    results["q"] = qcfg.q;
    if (!args.out_measure_csv.empty()) {
      write_measure_csv(args.out_measure_csv, m);
      results["measure_csv"] = args.out_measure_csv;
    } else {
      results["measure"] = measure_json(m);
    }
  } else if (command == "ot" || command == "cot") {
    const auto mu = load_measure(p, inputs);
    if (p.nu_csv.empty()) throw ParameterError("problem.nu_csv required");
    inputs["nu_csv"] = input_digest(p.nu_csv);
    const auto nu = to_measure(read_path_csv(p.nu_csv), p.bounds);
    if (!p.cost) throw ParameterError("problem.cost required");
    const auto res = command == "ot" ? ot_distance_lp(mu, nu, *p.cost)
                                     : cot_distance_lp(mu, nu, *p.cost);
    results["value"] = res.value;
    results["plan"] = sparse_plan(res.plan);
    results["diagnostics"] = {
        {"causal_within_1e-8", verify_causality(res.plan, mu, 1e-8)}};
  } else if (command == "primal-ot" || command == "primal-cot") {
    const auto mu = load_measure(p, inputs);
    const auto grid = load_grid(p, inputs);
    if (!p.cost || !p.objective)
      throw ParameterError("problem.cost and problem.objective required");
    const bool causal = command == "primal-cot";
    const auto res = causal ? primal_cot_lp(mu, grid, *p.objective, *p.cost, p.eps)
                            : primal_ot_lp(mu, grid, *p.objective, *p.cost, p.eps);
    results["value"] = res.value;
    results["worst"] = measure_json(res.worst);
    results["plan"] = sparse_plan(res.plan);
    const auto costs = cost_matrix(*p.cost, mu.support(), grid);
    results["diagnostics"] = {
        {"transport_cost", res.plan.contract(costs)},
        {"causal_within_1e-8", verify_causality(res.plan, mu, 1e-8)}};
    if (!args.out_measure_csv.empty()) {
      write_measure_csv(args.out_measure_csv, res.worst);
      results["worst_csv"] = args.out_measure_csv;
    }
    rep["reference_check"] =
        reference_check(p.reference_values, command, res.value);
  } else if (command == "dual-cot") {
    const auto mu = load_measure(p, inputs);
    if (!p.cost || !p.objective)
      throw ParameterError("problem.cost and problem.objective required");
    GdaConfig cfg =
        lc.raw.contains("solver") ? parse_gda(lc.raw.at("solver")) : GdaConfig{};
    std::optional<PathBatch> grid;
    if (!p.grid_csv.empty()) grid = load_grid(p, inputs);
    const auto solve_at = [&](int k) {
      GdaConfig run_cfg = cfg;
      run_cfg.seed = seed + static_cast<std::uint64_t>(k);
      return solve_dual_cot_gda(mu, *p.objective, *p.cost, p.eps, run_cfg,
                                grid ? &*grid : nullptr);
    };
    const auto compact_json = [](const SolverReport& r) {
      json compact;
      compact["value"] = r.final_dual();
      compact["lambda"] = r.final_lambda();
      compact["converged"] = r.converged;
      compact["reason"] = r.reason;
      compact["report"] = json::parse(r.to_json_string());
      return compact;
    };
    if (args.repeats <= 1) {
      const auto r = solve_at(0);
      results = compact_json(r);
      rep["reference_check"] = reference_check(
          p.reference_values, command, r.final_dual(), 0.05);
      if (!args.out_measure_csv.empty() && r.final_measure) {
        write_measure_csv(args.out_measure_csv, *r.final_measure);
        results["final_measure_csv"] = args.out_measure_csv;
      }
    } else {
      const auto runs = parallel_runs(
          args.repeats, [&](int k) { return compact_json(solve_at(k)); });
      results["runs"] = runs;
      results["aggregate"] = aggregate_values(runs, "value");
    }
  } else if (command == "scot") {
    const auto mu = load_measure(p, inputs);
    if (!p.cost || !p.objective)
      throw ParameterError("problem.cost and problem.objective required");
    ScotConfig cfg =
        lc.raw.contains("solver") ? parse_scot(lc.raw.at("solver")) : ScotConfig{};
    const auto one_run = [&](int k) {
      ScotConfig run_cfg = cfg;
      run_cfg.seed = seed + static_cast<std::uint64_t>(k);
      CounterRng gen_rng(run_cfg.seed, 0xC0DE);
      GeneratorSpec gen =
          GeneratorSpec::make(p.T, p.d, cfg.gen_hidden, cfg.sigma2, gen_rng);
      if (cfg.pretrain_steps > 0) {
        const auto pre = pretrain_generator(
            gen, mu.support(), {cfg.pretrain_steps, cfg.pretrain_lr, run_cfg.seed});
        gen = pre.generator;
      }
      const auto r = solve_scot_gda(mu, gen, *p.objective, *p.cost, p.eps, run_cfg);
      json compact;
      compact["value"] = r.final_dual();
      compact["lambda"] = r.final_lambda();
      compact["cost"] = r.cost.empty() ? 0.0 : r.cost.back();
      compact["converged"] = r.converged;
      compact["reason"] = r.reason;
      compact["report"] = json::parse(r.to_json_string());
      return compact;
    };
    if (args.repeats <= 1) {
      results = one_run(0);
    } else {
      const auto runs = parallel_runs(args.repeats, one_run);
      results["runs"] = runs;
      results["aggregate"] = aggregate_values(runs, "value");
      int converged = 0;
      for (const auto& r : runs)
        if (r.at("converged").get<bool>()) ++converged;
      results["aggregate"]["converged_runs"] = converged;
    }
  } else if (command == "rademacher") {
    const auto mu = load_measure(p, inputs);
    if (!lc.raw.contains("rademacher"))
      throw ParameterError("config.rademacher section required");
    const json& rj = lc.raw.at("rademacher");
    reject_unknown(rj, "rademacher",
                   {"mode", "draws", "objectives", "hidden", "ascent_steps", "lr"});
    const std::string mode = get_or<std::string>(rj, "mode", "finite");
    const long draws = get_or<long>(rj, "draws", 1000);
    CounterRng rng(seed);
    if (mode == "finite") {
      std::vector<Hypothesis> hyps;
      std::vector<ObjectiveSpec> specs;
      for (const auto& oj : rj.at("objectives")) specs.push_back(parse_objective(oj));
      const int T = p.T, d = p.d;
      for (const auto& spec : specs)
        hyps.push_back([spec, T, d](std::span<const double> x) {
          return eval_objective(spec, x, T, d);
        });
      results["estimate"] = rademacher_estimate(hyps, mu.support(), draws, rng);
      if (mu.size() <= 20)
        results["exact"] = rademacher_exact(hyps, mu.support());
    } else if (mode == "net") {
      ParametricRademacherConfig pcfg;
      pcfg.draws = draws;
      pcfg.ascent_steps = get_or(rj, "ascent_steps", pcfg.ascent_steps);
      pcfg.lr = get_or(rj, "lr", pcfg.lr);
      const int hidden = get_or(rj, "hidden", 4);
      CounterRng init(seed, 1);
      const DenseNet proto = DenseNet::random(
          {p.T * p.d, hidden, 1}, {Activation::Tanh, Activation::Identity}, init);
      results["estimate"] =
          rademacher_estimate_parametric(proto, mu.support(), pcfg, rng);
      results["mode"] = "net_lower_estimate";
    } else {
      throw ParameterError("rademacher.mode: expected 'finite' or 'net'");
    }
  } else {
    throw ParameterError("unknown command '" + command + "'");
  }

  rep["results"] = std::move(results);
  const auto t1 = std::chrono::steady_clock::now();
  rep["wall_clock_ms"] =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  emit_report(std::move(rep), args.out_path);
  return 0;
}

// ---------------------------------------------------------------------------
// gen subcommand
// ---------------------------------------------------------------------------

json objective_json(const ObjectiveSpec& f) {
  json j;
  switch (f.kind) {
    case ObjectiveSpec::Kind::LinearRelu:
      j["kind"] = "linear_relu";
      j["a"] = f.a;
      j["b"] = f.b;
      break;
    case ObjectiveSpec::Kind::Coordinate:
      j["kind"] = "coordinate";
      j["t"] = f.t;
      j["k"] = f.k;
      break;
    case ObjectiveSpec::Kind::Table:
      j["kind"] = "table";
      j["values"] = f.values;
      break;
    case ObjectiveSpec::Kind::Network:
      j["kind"] = "network";
      j["net"] = json::parse(f.net->to_json_string());
      break;
  }
  return j;
}

json cost_json(const CostSpec& c) {
  json j;
  switch (c.kind) {
    case CostSpec::Kind::ScaledQuadratic:
      j["kind"] = "scaled_quadratic";
      j["B"] = c.B;
      break;
    case CostSpec::Kind::L1:
      j["kind"] = "l1";
      break;
    case CostSpec::Kind::Table:
      j["kind"] = "table";
      j["values"] = c.table;
      j["rows"] = c.table_rows;
      j["cols"] = c.table_cols;
      break;
    case CostSpec::Kind::IndicatorFeature:
      j["kind"] = "indicator_feature";
      j["t_x"] = c.t_x;
      j["t_y"] = c.t_y;
      break;
  }
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
}

int run_gen(const std::string& kind, const std::string& out_dir, int N, int T,
            double K, std::uint64_t seed) {
  const fs::path dir(out_dir.empty() ? "." : out_dir);
  fs::create_directories(dir);
  json problem;

  if (kind == "example1" || kind == "example2") {
    const auto ex = synthetic::example1();
    write_measure_csv((dir / "mu.csv").string(), ex.mu);
    write_text(dir / "grid.csv", format_path_csv(ex.grid, nullptr));
    problem["bounds"] = {ex.bounds.lo, ex.bounds.hi};
    problem["T"] = 2;
    problem["d"] = 1;
    problem["eps"] = ex.eps;
    problem["cost"] = cost_json(ex.cost);
    problem["mu_csv"] = "mu.csv";
    problem["grid_csv"] = "grid.csv";
    if (kind == "example1") {
      problem["objective"] = objective_json(ex.f);
      problem["reference_values"] = {
          {"primal-cot", -1.0},
          {"primal-ot", -0.2},
          {"primal-ot_disputed",
           {{"value", -0.6},
            {"note",
             "hand-derived value sometimes quoted for this instance; the "
             "piecewise dual min over lambda >= 0 of {0.2*lambda + 0.2*1 + "
             "0.8*max(-1, 1 - lambda)} attains -0.2 at lambda = 2, matching "
             "the enumeration and the linear program"}}}};
    } else {
      problem["objective"] = objective_json(synthetic::example2_objective(K, ex.grid));
      problem["reference_values"] = {{"primal-cot", 0.0}};
    }
  } else if (kind == "ar1_vol") {
    const Bounds b{0.0, 1.0};
    const auto paths = synthetic::ar1_vol(N, T, seed, b);
    write_text(dir / "paths.csv", format_path_csv(paths, nullptr));
    std::vector<double> a(T, 1.0 / T);
    problem["bounds"] = {b.lo, b.hi};
    problem["T"] = T;
    problem["d"] = 1;
    problem["eps"] = 0.3;
    problem["objective"] = objective_json(ObjectiveSpec::linear_relu(a, 0.0));
    problem["cost"] = cost_json(CostSpec::scaled_quadratic(100.0));
    problem["paths_csv"] = "paths.csv";
  } else if (kind == "separable_random") {
    const auto inst = synthetic::separable_random(N, T, seed);
    write_measure_csv((dir / "mu.csv").string(), inst.mu);
    write_text(dir / "grid.csv", format_path_csv(inst.grid, nullptr));
    problem["bounds"] = {inst.bounds.lo, inst.bounds.hi};
    problem["T"] = T;
    problem["d"] = 1;
    problem["eps"] = 0.1;
    problem["objective"] = objective_json(inst.f);
    problem["cost"] = cost_json(inst.cost);
    problem["mu_csv"] = "mu.csv";
    problem["grid_csv"] = "grid.csv";
  } else {
    throw ParameterError("gen: unknown kind '" + kind + "'");
  }

  json config;
  config["problem"] = std::move(problem);
  write_text(dir / "problem.json", config.dump(2) + "\n");
  std::cout << "wrote " << (dir / "problem.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Worst-case expected values of path functionals over causal "
      "optimal-transport ambiguity sets"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string gen_kind, gen_out = ".";
  int gen_N = 100, gen_T = 12;
  double gen_K = 10.0;
  std::uint64_t gen_seed = 0;

  auto* gen = app.add_subcommand(
      "gen", "Generate a synthetic problem bundle (CSV files + problem JSON)");
  gen->add_option("--kind", gen_kind,
                  "example1 | example2 | ar1_vol | separable_random")
      ->required();
  gen->add_option("--out-dir", gen_out, "Output directory");
  gen->add_option("--N", gen_N, "Number of paths (ar1_vol, separable_random)");
  gen->add_option("--T", gen_T, "Time steps (ar1_vol, separable_random)");
  gen->add_option("--K", gen_K, "Objective scale (example2)");
  gen->add_option("--seed", gen_seed, "Generation seed");

  const std::vector<std::string> run_commands{
      "quantize", "ot", "cot", "primal-ot", "primal-cot",
      "dual-cot", "scot", "rademacher"};
  const std::map<std::string, std::string> descriptions{
      {"quantize", "Adapted empirical measure of a path CSV (cube quantization)"},
      {"ot", "Exact transport distance between two measures"},
      {"cot", "Exact causal transport distance between two measures"},
      {"primal-ot", "Worst-case expected value over the transport ball"},
      {"primal-cot", "Worst-case expected value over the causal transport ball"},
      {"dual-cot",
       "Gradient descent-ascent on the dual (L=0 gives the plain transport "
       "dual). Defaults: lambda0 10, lr 0.05, clamp [-50,50], xi 100, eta "
       "1e-6, y step 50/(iter+1), velocity v <- 0.9v - grad/(0.1*iter+10)"},
      {"scot",
       "Structural solver: Sinkhorn inner loop against a generator. Entropic "
       "rule 0.01*lambda + 1e-5; same dual defaults as dual-cot"},
      {"rademacher", "Empirical Rademacher complexity estimator"}};
  std::map<std::string, CLI::App*> subs;
  for (const auto& name : run_commands) {
    auto* sub = app.add_subcommand(name, descriptions.at(name));
    sub->add_option("--config", common.config_path, "Problem/solver JSON")
        ->required();
    sub->add_option("--out", common.out_path, "Report JSON path (default stdout)");
    sub->add_option("--out-measure", common.out_measure_csv,
                    "Write the resulting measure as CSV");
    sub->add_option("--seed", common.seed, "Base seed (default 0)");
    sub->add_option("--repeats", common.repeats,
                    "Independent seeded repeats, aggregated (mean/std); "
                    "parallelism capped by COTDRE_THREADS");
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed())
      return run_gen(gen_kind, gen_out, gen_N, gen_T, gen_K, gen_seed);
    for (const auto& name : run_commands)
      if (subs[name]->parsed()) return run_command(name, common);
    return 2;
  } catch (const std::exception& e) {
    json err;
    err["error"] = {{"class", error_class_name(e)}, {"message", e.what()}};
    const std::string text = err.dump(2) + "\n";
    std::cerr << text;
    if (!common.out_path.empty()) {
      std::ofstream f(common.out_path, std::ios::binary);
      if (f) f << text;
    }
    return error_exit_code(e);
  }
}
