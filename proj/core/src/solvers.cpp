#include "cotdre/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

namespace cotdre {

using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Family parameter plumbing
// ---------------------------------------------------------------------------

int family_param_count(const TestFunctionFamily& fam) {
  int n = 0;
  for (const auto& net : fam.h_nets()) n += net.param_count();
  for (const auto& net : fam.M_nets()) n += net.param_count();
  return n;
}

std::vector<double> gather_family_params(const TestFunctionFamily& fam) {
  std::vector<double> out;
  out.reserve(family_param_count(fam));
  for (const auto& net : fam.h_nets())
    out.insert(out.end(), net.params().begin(), net.params().end());
  for (const auto& net : fam.M_nets())
    out.insert(out.end(), net.params().begin(), net.params().end());
  return out;
}

void scatter_family_params(TestFunctionFamily& fam, std::span<const double> flat) {
  std::size_t p = 0;
  for (auto& net : fam.h_nets()) {
    std::copy_n(flat.begin() + p, net.param_count(), net.mutable_params().begin());
    p += net.param_count();
  }
  for (auto& net : fam.M_nets()) {
    std::copy_n(flat.begin() + p, net.param_count(), net.mutable_params().begin());
    p += net.param_count();
  }
}

// Tape leaves for every family parameter, in gather order.
struct FamilyOnTape {
  std::vector<std::vector<int>> h_leaves;  // per h net
  std::vector<std::vector<int>> M_leaves;  // per M net
  std::vector<int> flat;
};

FamilyOnTape bind_family(ad::Tape& tape, const TestFunctionFamily& fam) {
  FamilyOnTape fo;
  for (const auto& net : fam.h_nets()) {
    std::vector<int> ls(net.param_count());
    for (int k = 0; k < net.param_count(); ++k) ls[k] = tape.leaf(net.params()[k]);
    fo.flat.insert(fo.flat.end(), ls.begin(), ls.end());
    fo.h_leaves.push_back(std::move(ls));
  }
  for (const auto& net : fam.M_nets()) {
    std::vector<int> ls(net.param_count());
    for (int k = 0; k < net.param_count(); ++k) ls[k] = tape.leaf(net.params()[k]);
    fo.flat.insert(fo.flat.end(), ls.begin(), ls.end());
    fo.M_leaves.push_back(std::move(ls));
  }
  return fo;
}

std::vector<double> family_grads(const ad::Tape& tape, const FamilyOnTape& fo) {
  std::vector<double> g;
  g.reserve(fo.flat.size());
  for (int leaf : fo.flat) g.push_back(tape.adjoint(leaf));
  return g;
}

// ---------------------------------------------------------------------------
// Numeric tables for gamma'
// ---------------------------------------------------------------------------

// Martingale increments dM_{l,t}(x_n) per (l, t, atom), both raw and
// conditionally centered per prefix cell (centered increments integrate to
// zero given every x_{1:t}, so they form an exact discrete martingale).
struct IncrementTables {
  int L = 0, Tm1 = 0, N = 0;
  std::vector<double> raw;
  std::vector<double> centered;

  bool empty() const { return L == 0; }
  std::size_t idx(int l, int t, int n) const {  // t in 1..T-1
    return (static_cast<std::size_t>(l) * Tm1 + (t - 1)) * N + n;
  }
};

std::map<std::vector<double>, std::vector<int>> prefix_groups(
    const PathBatch& batch, int t) {
  std::map<std::vector<double>, std::vector<int>> groups;
  const int d = batch.dim();
  for (int n = 0; n < batch.num_paths(); ++n) {
    const auto p = batch.path(n);
    std::vector<double> key(p.begin(), p.begin() + static_cast<std::size_t>(t) * d);
    groups[std::move(key)].push_back(n);
  }
  return groups;
}

IncrementTables increment_tables(const TestFunctionFamily& fam,
                                 const DiscreteMeasure& mu) {
  IncrementTables tabs;
  if (fam.empty()) return tabs;
  const PathBatch& xs = mu.support();
  const auto& w = mu.weights();
  const int T = fam.T(), d = fam.d(), N = mu.size();
  tabs.L = fam.L();
  tabs.Tm1 = T - 1;
  tabs.N = N;
  tabs.raw.resize(static_cast<std::size_t>(tabs.L) * tabs.Tm1 * N);
  tabs.centered = tabs.raw;

  for (int l = 0; l < fam.L(); ++l) {
    std::vector<double> mvals(static_cast<std::size_t>(N) * T);
    for (int n = 0; n < N; ++n) {
      const auto path = xs.path(n);
      for (int t = 1; t <= T; ++t)
        mvals[static_cast<std::size_t>(n) * T + (t - 1)] =
            fam.M(l, t).forward(path.subspan(0, static_cast<std::size_t>(t) * d))[0];
    }
    for (int t = 1; t <= T - 1; ++t) {
      for (int n = 0; n < N; ++n)
        tabs.raw[tabs.idx(l, t, n)] = mvals[static_cast<std::size_t>(n) * T + t] -
                                      mvals[static_cast<std::size_t>(n) * T + (t - 1)];
    }
  }
  // Conditional centering per time and prefix group.
  for (int t = 1; t <= T - 1; ++t) {
    const auto groups = prefix_groups(xs, t);
    for (const auto& [key, members] : groups) {
      double mass = 0.0;
      for (int m : members) mass += w[m];
      for (int l = 0; l < fam.L(); ++l) {
        double mean = 0.0;
        if (mass > 0.0) {
          for (int m : members) mean += w[m] * tabs.raw[tabs.idx(l, t, m)];
          mean /= mass;
        }
        for (int m : members)
          tabs.centered[tabs.idx(l, t, m)] = tabs.raw[tabs.idx(l, t, m)] - mean;
      }
    }
  }
  return tabs;
}

// h_{l,t} evaluated on prefixes of a y-batch: layout [(l*(T-1)+t-1)*G + j].
std::vector<double> h_tables(const TestFunctionFamily& fam, const PathBatch& ys) {
  if (fam.empty()) return {};
  const int T = fam.T(), d = fam.d(), G = ys.num_paths();
  std::vector<double> out(static_cast<std::size_t>(fam.L()) * (T - 1) * G);
  for (int l = 0; l < fam.L(); ++l) {
    for (int t = 1; t <= T - 1; ++t) {
      for (int j = 0; j < G; ++j) {
        out[(static_cast<std::size_t>(l) * (T - 1) + (t - 1)) * G + j] =
            fam.h(l, t).forward(
                ys.path(j).subspan(0, static_cast<std::size_t>(t) * d))[0];
      }
    }
  }
  return out;
}

double gamma_from_tables(const IncrementTables& tabs,
                         std::span<const double> htab, int G, int n, int j,
                         bool centered) {
  if (tabs.empty()) return 0.0;
  const auto& inc = centered ? tabs.centered : tabs.raw;
  double s = 0.0;
  for (int l = 0; l < tabs.L; ++l) {
    for (int t = 1; t <= tabs.Tm1; ++t) {
      const std::size_t lt = static_cast<std::size_t>(l) * tabs.Tm1 + (t - 1);
      s += htab[lt * G + j] * inc[tabs.idx(l, t, n)];
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Tape builders
// ---------------------------------------------------------------------------

std::vector<ad::Var> lift_span(ad::Tape& tape, std::span<const double> xs) {
  std::vector<ad::Var> out;
  out.reserve(xs.size());
  for (double v : xs) out.push_back(ad::lift(tape, v));
  return out;
}

ad::Var objective_on_tape(ad::Tape& tape, const ObjectiveSpec& f,
                          std::span<const ad::Var> y, int T, int d) {
  switch (f.kind) {
    case ObjectiveSpec::Kind::LinearRelu: {
      if (f.a.size() != static_cast<std::size_t>(T))
        throw DimensionError("objective_on_tape: weight length mismatch");
      std::vector<int> ids;
      std::vector<double> coefs;
      for (int t = 0; t < T; ++t) {
        for (int k = 0; k < d; ++k) {
          ids.push_back(y[static_cast<std::size_t>(t) * d + k].id);
          coefs.push_back(f.a[t]);
        }
      }
      const ad::Var lin = ad::wrap(tape, tape.lincomb(ids, coefs, f.b));
      return ad::max(lin, ad::lift(tape, 0.0));
    }
    case ObjectiveSpec::Kind::Coordinate:
      return y[static_cast<std::size_t>(f.t - 1) * d + (f.k - 1)];
    case ObjectiveSpec::Kind::Network: {
      const auto out = f.net->forward_tape(tape, y);
      return out[0];
    }
    case ObjectiveSpec::Kind::Table:
      throw ParameterError(
          "objective_on_tape: table objectives have no pointwise gradient");
  }
  throw ParameterError("objective_on_tape: unknown kind");
}

// Differentiable cost when the kind admits a gradient; indicator and table
// costs enter as constants (their gradient is zero almost everywhere).
ad::Var cost_on_tape(ad::Tape& tape, const CostSpec& cost,
                     std::span<const double> x, std::span<const ad::Var> y,
                     int T, int d) {
  switch (cost.kind) {
    case CostSpec::Kind::ScaledQuadratic: {
      std::vector<int> ids;
      std::vector<double> coefs;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const ad::Var diff = y[i] - x[i];
        const ad::Var sq = diff * diff;
        ids.push_back(sq.id);
        coefs.push_back(1.0 / cost.B);
      }
      return ad::wrap(tape, tape.lincomb(ids, coefs, 0.0));
    }
    case CostSpec::Kind::L1: {
      std::vector<int> ids;
      std::vector<double> coefs;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const ad::Var term = ad::abs(y[i] - x[i]);
        ids.push_back(term.id);
        coefs.push_back(1.0);
      }
      return ad::wrap(tape, tape.lincomb(ids, coefs, 0.0));
    }
    case CostSpec::Kind::IndicatorFeature: {
      std::vector<double> yv(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) yv[i] = y[i].value();
      return ad::lift(tape, eval_cost(cost, x, yv, T, d));
    }
    case CostSpec::Kind::Table:
      throw ParameterError("cost_on_tape: table costs have no pointwise value");
  }
  throw ParameterError("cost_on_tape: unknown kind");
}

// M_{l,t}(x_n) for every (l, t in 1..T, n) as tape vars with parameter
// leaves, so gradients reach the M nets. Layout [l][t-1][n].
std::vector<std::vector<std::vector<ad::Var>>> m_vars_on_tape(
    ad::Tape& tape, const TestFunctionFamily& fam, const FamilyOnTape& fo,
    const PathBatch& xs) {
  const int T = fam.T(), d = fam.d(), N = xs.num_paths();
  std::vector<std::vector<std::vector<ad::Var>>> out(
      fam.L(), std::vector<std::vector<ad::Var>>(T, std::vector<ad::Var>(N)));
  for (int n = 0; n < N; ++n) {
    const auto in_vars = lift_span(tape, xs.path(n));
    for (int l = 0; l < fam.L(); ++l) {
      for (int t = 1; t <= T; ++t) {
        const auto& net = fam.M(l, t);
        const auto& leaves = fo.M_leaves[static_cast<std::size_t>(l) * T + (t - 1)];
        const auto outv = net.forward_tape(
            tape, std::span<const ad::Var>(in_vars.data(), static_cast<std::size_t>(t) * d),
            leaves);
        out[l][t - 1][n] = outv[0];
      }
    }
  }
  return out;
}

// Conditionally centered increment vars dM~[l][t-1][n] (t in 1..T-1): the
// per-prefix-cell weighted mean is subtracted on tape, so the represented
// test function is an exact discrete martingale and the dual objective is
// bounded below by the primal.
std::vector<std::vector<std::vector<ad::Var>>> centered_increment_vars(
    ad::Tape& tape, const TestFunctionFamily& fam,
    const std::vector<std::vector<std::vector<ad::Var>>>& mvars,
    const PathBatch& xs, std::span<const double> w) {
  const int T = fam.T(), N = xs.num_paths();
  std::vector<std::vector<std::vector<ad::Var>>> out(
      fam.L(), std::vector<std::vector<ad::Var>>(T - 1, std::vector<ad::Var>(N)));
  for (int t = 1; t <= T - 1; ++t) {
    const auto groups = prefix_groups(xs, t);
    for (int l = 0; l < fam.L(); ++l) {
      std::vector<ad::Var> raw(N);
      for (int n = 0; n < N; ++n) raw[n] = mvars[l][t][n] - mvars[l][t - 1][n];
      for (const auto& [key, members] : groups) {
        double mass = 0.0;
        for (int m : members) mass += w[m];
        std::vector<int> ids;
        std::vector<double> coefs;
        for (int m : members) {
          ids.push_back(raw[m].id);
          coefs.push_back(mass > 0.0 ? w[m] / mass : 0.0);
        }
        const ad::Var mean = ad::wrap(tape, tape.lincomb(ids, coefs, 0.0));
        for (int m : members) out[l][t - 1][m] = raw[m] - mean;
      }
    }
  }
  return out;
}

// Martingale penalty on tape from precomputed M vars. Weighted per-time
// variances averaged over t, pooled across atoms.
ad::Var penalty_on_tape(ad::Tape& tape, const TestFunctionFamily& fam,
                        const std::vector<std::vector<std::vector<ad::Var>>>& mvars,
                        std::span<const double> w, double eta) {
  const int T = fam.T();
  const int N = static_cast<int>(w.size());
  std::vector<int> ids;
  std::vector<double> coefs;
  ad::Var total = ad::lift(tape, 0.0);
  for (int l = 0; l < fam.L(); ++l) {
    // Pooled variance.
    std::vector<int> var_ids;
    std::vector<double> var_coefs;
    for (int t = 0; t < T; ++t) {
      ids.clear();
      coefs.clear();
      for (int n = 0; n < N; ++n) {
        ids.push_back(mvars[l][t][n].id);
        coefs.push_back(w[n]);
      }
      const ad::Var mean = ad::wrap(tape, tape.lincomb(ids, coefs, 0.0));
      ids.clear();
      coefs.clear();
      for (int n = 0; n < N; ++n) {
        const ad::Var diff = mvars[l][t][n] - mean;
        const ad::Var sq = diff * diff;
        ids.push_back(sq.id);
        coefs.push_back(w[n]);
      }
      var_ids.push_back(tape.lincomb(ids, coefs, 0.0));
      var_coefs.push_back(1.0 / T);
    }
    const ad::Var var = ad::wrap(tape, tape.lincomb(var_ids, var_coefs, 0.0));
    const ad::Var denom = ad::sqrt(var) + eta;
    for (int t = 0; t < T - 1; ++t) {
      ids.clear();
      coefs.clear();
      for (int n = 0; n < N; ++n) {
        const ad::Var diff = mvars[l][t + 1][n] - mvars[l][t][n];
        ids.push_back(diff.id);
        coefs.push_back(w[n]);
      }
      const ad::Var inc = ad::wrap(tape, tape.lincomb(ids, coefs, 0.0));
      total = total + ad::abs(inc / denom);
    }
  }
  return total * (1.0 / T);
}

double project(double v, Bounds b) { return std::clamp(v, b.lo, b.hi); }

DiscreteMeasure merge_candidates(const std::vector<double>& y,
                                 std::span<const double> w, int N, int T, int d,
                                 Bounds bounds) {
  std::map<std::vector<double>, double> acc;
  std::vector<std::vector<double>> order;
  for (int n = 0; n < N; ++n) {
    std::vector<double> key(y.begin() + static_cast<std::size_t>(n) * T * d,
                            y.begin() + static_cast<std::size_t>(n + 1) * T * d);
    auto [it, inserted] = acc.try_emplace(key, 0.0);
    if (inserted) order.push_back(key);
    it->second += w[n];
  }
  std::vector<double> data;
  std::vector<double> weights;
  for (const auto& key : order) {
    data.insert(data.end(), key.begin(), key.end());
    weights.push_back(acc[key]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) sum += weights[i];
  weights.back() = 1.0 - sum;
  const int atoms = static_cast<int>(weights.size());
  PathBatch support(std::move(data), atoms, T, d, bounds);
  return DiscreteMeasure(std::move(support), std::move(weights));
}

bool tail_converged(const SolverReport& rep, double eps, double band,
                    double lambda_small, double fraction, std::string* reason) {
  const double mc = rep.tail_mean_cost(fraction);
  const double ml = rep.tail_mean_lambda(fraction);
  if (ml <= lambda_small) {
    if (reason) *reason = "lambda at zero within tolerance";
    return true;
  }
  if (std::abs(mc - eps) <= band * eps) {
    if (reason) *reason = "transport cost at the radius within tolerance";
    return true;
  }
  if (reason) *reason = "no convergence criterion met";
  return false;
}

std::vector<int> sample_indices(std::span<const double> weights, int count,
                                CounterRng& rng) {
  std::vector<double> cum(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    cum[i] = acc;
  }
  std::vector<int> out(count);
  for (int k = 0; k < count; ++k) {
    const double u = rng.uniform01() * acc;
    out[k] = static_cast<int>(
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (out[k] >= static_cast<int>(weights.size()))
      out[k] = static_cast<int>(weights.size()) - 1;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// SolverReport
// ---------------------------------------------------------------------------

static double tail_mean(const std::vector<double>& xs, double fraction) {
  if (xs.empty()) return 0.0;
  const std::size_t k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * xs.size())));
  double s = 0.0;
  for (std::size_t i = xs.size() - k; i < xs.size(); ++i) s += xs[i];
  return s / k;
}

double SolverReport::tail_mean_cost(double fraction) const {
  return tail_mean(cost, fraction);
}

double SolverReport::tail_mean_lambda(double fraction) const {
  return tail_mean(lambda, fraction);
}

std::string SolverReport::to_json_string() const {
  json j;
  j["dual"] = dual;
  j["lambda"] = lambda;
  j["cost"] = cost;
  j["penalty"] = penalty;
  j["iterations"] = iterations;
  j["converged"] = converged;
  j["reason"] = reason;
  if (final_measure) {
    json m;
    const auto& fm = *final_measure;
    json paths = json::array();
    for (int n = 0; n < fm.size(); ++n) {
      const auto p = fm.support().path(n);
      paths.push_back(std::vector<double>(p.begin(), p.end()));
    }
    m["paths"] = std::move(paths);
    m["weights"] = fm.weights();
    m["T"] = fm.support().num_steps();
    m["d"] = fm.support().dim();
    j["final_measure"] = std::move(m);
  }
  return j.dump();
}

// ---------------------------------------------------------------------------
// dual_objective_cot
// ---------------------------------------------------------------------------

double dual_objective_cot(const DualState& state, const DiscreteMeasure& mu,
                          const ObjectiveSpec& f, const CostSpec& cost,
                          double eps, double xi, double eta) {
  const PathBatch& xs = mu.support();
  const int N = mu.size();
  if (state.T != xs.num_steps() || state.d != xs.dim())
    throw DimensionError("dual_objective_cot: state shape mismatch");
  if (static_cast<int>(state.y.size()) != N * state.T * state.d)
    throw DimensionError("dual_objective_cot: one candidate per atom required");
  double acc = 0.0;
  for (int n = 0; n < N; ++n) {
    const auto yn = state.candidate(n);
    const double fv = eval_objective(f, yn, state.T, state.d);
    const double cv = eval_cost(cost, xs.path(n), yn, state.T, state.d);
    const double gv = gamma_prime(state.family, xs.path(n), yn);
    acc += mu.weights()[n] * (fv - state.lambda * cv + gv);
  }
  double pen = 0.0;
  if (!state.family.empty()) pen = martingale_penalty(state.family, mu, eta);
  return state.lambda * eps + acc + xi * pen;
}

// ---------------------------------------------------------------------------
// solve_dual_cot_gda
// ---------------------------------------------------------------------------

SolverReport solve_dual_cot_gda(const DiscreteMeasure& mu_adapted,
                                const ObjectiveSpec& f, const CostSpec& cost,
                                double eps, const GdaConfig& cfg,
                                const PathBatch* y_grid) {
  const PathBatch& xs = mu_adapted.support();
  const auto& w = mu_adapted.weights();
  const int N = mu_adapted.size(), T = xs.num_steps(), d = xs.dim();
  const Bounds bounds = xs.bounds();
  const bool grid_mode = cfg.inner_mode == GdaConfig::InnerMode::Grid;
  if (grid_mode && y_grid == nullptr)
    throw ParameterError("solve_dual_cot_gda: grid mode requires a candidate grid");
  if (!grid_mode &&
      (f.kind == ObjectiveSpec::Kind::Table || cost.kind == CostSpec::Kind::Table))
    throw ParameterError(
        "solve_dual_cot_gda: table objective/cost requires grid mode");
  if (eps < 0.0) throw ParameterError("solve_dual_cot_gda: eps must be >= 0");

  CounterRng rng(cfg.seed);
  DualState st;
  st.lambda = cfg.lambda0;
  st.T = T;
  st.d = d;
  if (cfg.L > 0)
    st.family = TestFunctionFamily::make(cfg.L, T, d, cfg.hidden, cfg.clamp, rng);
  st.lambda_opt.momentum = cfg.lambda_momentum;
  st.lambda_opt.denom_slope = cfg.lambda_denom_slope;
  st.lambda_opt.denom_base = cfg.lambda_denom_base;
  st.family_opt.lr = cfg.lr_hm;
  SgdSchedule y_opt{cfg.y_step0, cfg.y_normalize};

  st.y.resize(static_cast<std::size_t>(N) * T * d);
  for (int n = 0; n < N; ++n) {
    const auto p = xs.path(n);
    for (int c = 0; c < T * d; ++c)
      st.y[static_cast<std::size_t>(n) * T * d + c] =
          project(p[c] + rng.normal(0.0, cfg.y_init_variance), bounds);
  }

  // Grid tables reused across iterations.
  std::vector<double> grid_f, grid_c;
  int G = 0;
  if (grid_mode) {
    G = y_grid->num_paths();
    grid_f = objective_values(f, *y_grid);
    grid_c = cost_matrix(cost, xs, *y_grid);
  }

  AdamOptimizer& fam_opt = st.family_opt;
  std::vector<int> chosen(grid_mode ? N : 0, 0);

  SolverReport rep;
  std::string abort_reason;
  for (long it = 0; it < cfg.outer_steps; ++it) {
    st.iter = it;
    const auto tabs = increment_tables(st.family, mu_adapted);

    // ----- inner maximization over candidates -----
    if (grid_mode) {
      const auto htab = h_tables(st.family, *y_grid);
      for (int n = 0; n < N; ++n) {
        int best_j = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < G; ++j) {
          const double v = grid_f[j] -
                           st.lambda * grid_c[static_cast<std::size_t>(n) * G + j] +
                           gamma_from_tables(tabs, htab, G, n, j, true);
          if (v > best + 1e-15) {
            best = v;
            best_j = j;
          }
        }
        chosen[n] = best_j;
        const auto yp = y_grid->path(best_j);
        std::copy(yp.begin(), yp.end(),
                  st.y.begin() + static_cast<std::size_t>(n) * T * d);
      }
    } else {
      double prev_obj = std::numeric_limits<double>::quiet_NaN();
      for (int s = 0; s < cfg.inner_steps; ++s) {
        ad::Tape tape;
        std::vector<ad::Var> yv;
        yv.reserve(st.y.size());
        for (double v : st.y) yv.push_back(ad::lift(tape, v));
        // Unweighted sum: each candidate ascends its own objective.
        ad::Var obj = ad::lift(tape, 0.0);
        for (int n = 0; n < N; ++n) {
          std::span<const ad::Var> yn(yv.data() + static_cast<std::size_t>(n) * T * d,
                                      static_cast<std::size_t>(T) * d);
          ad::Var term = objective_on_tape(tape, f, yn, T, d) -
                         st.lambda * cost_on_tape(tape, cost, xs.path(n), yn, T, d);
          if (!st.family.empty()) {
            // gamma' with numeric increments; h consumes the y candidates.
            for (int l = 0; l < st.family.L(); ++l) {
              for (int t = 1; t <= T - 1; ++t) {
                const auto hv = st.family.h(l, t).forward_tape(
                    tape, yn.subspan(0, static_cast<std::size_t>(t) * d));
                term = term + hv[0] * tabs.centered[tabs.idx(l, t, n)];
              }
            }
          }
          obj = obj + term;
        }
        tape.backward(obj.id);
        std::vector<double> grads(st.y.size());
        for (std::size_t k = 0; k < st.y.size(); ++k) grads[k] = tape.adjoint(yv[k].id);
        y_opt.step(st.y, grads, it);
        for (std::size_t k = 0; k < st.y.size(); ++k) st.y[k] = project(st.y[k], bounds);
        const double cur = obj.value();
        if (s > 0 && std::isfinite(prev_obj) &&
            std::abs(cur - prev_obj) <= cfg.inner_rel_tol * (std::abs(prev_obj) + 1e-12))
          break;
        prev_obj = cur;
      }
    }

    // ----- record (centered test function certifies the bound) -----
    double dual_cert = st.lambda * eps;
    double cost_e = 0.0;
    if (grid_mode) {
      const auto htab = h_tables(st.family, *y_grid);
      for (int n = 0; n < N; ++n) {
        double best = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < G; ++j) {
          const double v = grid_f[j] -
                           st.lambda * grid_c[static_cast<std::size_t>(n) * G + j] +
                           gamma_from_tables(tabs, htab, G, n, j, true);
          best = std::max(best, v);
        }
        dual_cert += w[n] * best;
        cost_e += w[n] * grid_c[static_cast<std::size_t>(n) * G + chosen[n]];
      }
    } else {
      for (int n = 0; n < N; ++n) {
        const auto yn = st.candidate(n);
        const double fv = eval_objective(f, yn, T, d);
        const double cv = eval_cost(cost, xs.path(n), yn, T, d);
        double gv = 0.0;
        if (!st.family.empty()) {
          for (int l = 0; l < st.family.L(); ++l) {
            for (int t = 1; t <= T - 1; ++t) {
              const double hv = st.family.h(l, t).forward(
                  yn.subspan(0, static_cast<std::size_t>(t) * d))[0];
              gv += hv * tabs.centered[tabs.idx(l, t, n)];
            }
          }
        }
        dual_cert += w[n] * (fv - st.lambda * cv + gv);
        cost_e += w[n] * cv;
      }
    }
    const double pen =
        st.family.empty() ? 0.0 : martingale_penalty(st.family, mu_adapted, cfg.eta);
    rep.dual.push_back(dual_cert);
    rep.lambda.push_back(st.lambda);
    rep.cost.push_back(cost_e);
    rep.penalty.push_back(pen);
    if (!std::isfinite(dual_cert) || std::abs(dual_cert) > cfg.divergence_guard) {
      abort_reason = "dual value exceeded the divergence guard";
      break;
    }

    // ----- outer descent over lambda and family parameters -----
    {
      ad::Tape tape;
      const ad::Var lam = ad::lift(tape, st.lambda);
      const FamilyOnTape fo =
          st.family.empty() ? FamilyOnTape{} : bind_family(tape, st.family);

      double f_e = 0.0, c_e = 0.0;
      for (int n = 0; n < N; ++n) {
        if (grid_mode) {
          f_e += w[n] * grid_f[chosen[n]];
          c_e += w[n] * grid_c[static_cast<std::size_t>(n) * G + chosen[n]];
        } else {
          const auto yn = st.candidate(n);
          f_e += w[n] * eval_objective(f, yn, T, d);
          c_e += w[n] * eval_cost(cost, xs.path(n), yn, T, d);
        }
      }
      ad::Var obj = lam * (eps - c_e) + f_e;
      if (!st.family.empty()) {
        const auto mvars = m_vars_on_tape(tape, st.family, fo, xs);
        const auto cvars = centered_increment_vars(tape, st.family, mvars, xs, w);
        // sum_n w_n gamma'(x_n, y_n) with h on parameter leaves.
        for (int l = 0; l < st.family.L(); ++l) {
          for (int t = 1; t <= T - 1; ++t) {
            const auto& leaves =
                fo.h_leaves[static_cast<std::size_t>(l) * (T - 1) + (t - 1)];
            std::vector<int> ids;
            std::vector<double> coefs;
            for (int n = 0; n < N; ++n) {
              const auto yn = st.candidate(n);
              const auto in_vars =
                  lift_span(tape, yn.subspan(0, static_cast<std::size_t>(t) * d));
              const auto hv = st.family.h(l, t).forward_tape(tape, in_vars, leaves);
              const ad::Var prod = hv[0] * cvars[l][t - 1][n];
              ids.push_back(prod.id);
              coefs.push_back(w[n]);
            }
            obj = obj + ad::wrap(tape, tape.lincomb(ids, coefs, 0.0));
          }
        }
        obj = obj + cfg.xi * penalty_on_tape(tape, st.family, mvars, w, cfg.eta);
      }
      tape.backward(obj.id);

      double lam_grad = tape.adjoint(lam.id);
      double lam_val = st.lambda;
      st.lambda_opt.step({&lam_val, 1}, {&lam_grad, 1}, it);
      st.lambda = std::max(0.0, lam_val);

      if (!st.family.empty()) {
        auto flat = gather_family_params(st.family);
        const auto grads = family_grads(tape, fo);
        fam_opt.step(flat, grads);
        scatter_family_params(st.family, flat);
        st.family.clamp_all();
      }
    }
  }

  rep.iterations = static_cast<long>(rep.dual.size());
  if (!abort_reason.empty()) {
    rep.converged = false;
    rep.reason = abort_reason;
  } else {
    std::string reason;
    rep.converged = tail_converged(rep, eps, cfg.cost_band, cfg.lambda_small,
                                   cfg.tail_fraction, &reason);
    rep.reason = reason;
  }
  rep.final_measure = merge_candidates(st.y, w, N, T, d, bounds);
  return rep;
}

// ---------------------------------------------------------------------------
// solve_scot_gda
// ---------------------------------------------------------------------------

SolverReport solve_scot_gda(const DiscreteMeasure& mu_adapted,
                            const GeneratorSpec& gen0, const ObjectiveSpec& f,
                            const CostSpec& cost, double eps,
                            const ScotConfig& cfg) {
  const PathBatch& xs = mu_adapted.support();
  const int N = mu_adapted.size(), T = xs.num_steps(), d = xs.dim();
  const Bounds bounds = xs.bounds();
  if (f.kind == ObjectiveSpec::Kind::Table || cost.kind == CostSpec::Kind::Table)
    throw ParameterError("solve_scot_gda: table objective/cost unsupported");
  if (eps < 0.0) throw ParameterError("solve_scot_gda: eps must be >= 0");
  if (gen0.R.input_dim() != T * d || gen0.R.output_dim() != T * d)
    throw DimensionError("solve_scot_gda: generator shape mismatch");

  CounterRng rng(cfg.seed);
  GeneratorSpec gen = gen0;
  TestFunctionFamily family;
  if (cfg.L > 0)
    family = TestFunctionFamily::make(cfg.L, T, d, cfg.hidden, cfg.clamp, rng);

  double lambda = cfg.lambda0;
  MomentumSchedule lam_opt;
  lam_opt.momentum = cfg.lambda_momentum;
  lam_opt.denom_slope = cfg.lambda_denom_slope;
  lam_opt.denom_base = cfg.lambda_denom_base;
  AdamOptimizer fam_opt;
  fam_opt.lr = cfg.lr_hm;
  AdamOptimizer gen_opt;
  gen_opt.lr = cfg.lr_gen;

  const bool full_mode = cfg.batch >= N;
  const int batch = full_mode ? N : cfg.batch;
  const QuantizerConfig qcfg = QuantizerConfig::make(
      bounds, d, T, cfg.quantizer_samples > 0 ? cfg.quantizer_samples : batch);

  std::vector<double> warm_u, warm_v;
  SolverReport rep;
  std::string abort_reason;
  std::optional<DiscreteMeasure> last_y_measure;

  for (long it = 0; it < cfg.iterations; ++it) {
    // ----- x batch -----
    std::vector<int> idx(batch);
    std::vector<double> bw(batch);
    if (full_mode) {
      for (int i = 0; i < batch; ++i) idx[i] = i;
      bw = mu_adapted.weights();
    } else {
      idx = sample_indices(mu_adapted.weights(), batch, rng);
      std::fill(bw.begin(), bw.end(), 1.0 / batch);
      double s = 0.0;
      for (int i = 0; i + 1 < batch; ++i) s += bw[i];
      bw[batch - 1] = 1.0 - s;
    }
    std::vector<double> xb_data;
    xb_data.reserve(static_cast<std::size_t>(batch) * T * d);
    for (int i = 0; i < batch; ++i) {
      const auto p = xs.path(idx[i]);
      xb_data.insert(xb_data.end(), p.begin(), p.end());
    }
    PathBatch xb(xb_data, batch, T, d, bounds);
    DiscreteMeasure xb_measure(xb, bw);

    // ----- y batch: x' = x + z, y = x' + R(x' - mean(x')) -----
    std::vector<double> xprime(xb_data);
    if (cfg.sigma2 > 0.0) {
      for (double& v : xprime) v += rng.normal(0.0, cfg.sigma2);
    }
    std::vector<double> centered(xprime.size());
    for (int j = 0; j < batch; ++j) {
      for (int k = 0; k < d; ++k) {
        double mean = 0.0;
        for (int t = 0; t < T; ++t)
          mean += xprime[(static_cast<std::size_t>(j) * T + t) * d + k];
        mean /= T;
        for (int t = 0; t < T; ++t) {
          const std::size_t c = (static_cast<std::size_t>(j) * T + t) * d + k;
          centered[c] = xprime[c] - mean;
        }
      }
    }
    std::vector<double> y_raw(xprime.size());
    for (int j = 0; j < batch; ++j) {
      const std::span<const double> cen(centered.data() +
                                            static_cast<std::size_t>(j) * T * d,
                                        static_cast<std::size_t>(T) * d);
      const auto r = gen.R.forward(cen);
      for (int c = 0; c < T * d; ++c) {
        const std::size_t o = static_cast<std::size_t>(j) * T * d + c;
        y_raw[o] = xprime[o] + r[c];
      }
    }
    std::vector<double> y_used(y_raw.size());
    for (std::size_t c = 0; c < y_raw.size(); ++c) y_used[c] = project(y_raw[c], bounds);
    PathBatch yb_proj(y_used, batch, T, d, bounds);
    PathBatch yb = cfg.quantize_y ? quantize_paths(qcfg, yb_proj) : yb_proj;
    DiscreteMeasure yb_measure(yb, bw);

    // ----- Sinkhorn on the modified cost -----
    const auto plain_c = cost_matrix(cost, xb, yb);
    const auto fvals = objective_values(f, yb);
    const auto tabs = increment_tables(family, xb_measure);
    const auto htab = h_tables(family, yb);
    std::vector<double> K(static_cast<std::size_t>(batch) * batch);
    for (int i = 0; i < batch; ++i) {
      for (int j = 0; j < batch; ++j) {
        const std::size_t o = static_cast<std::size_t>(i) * batch + j;
        K[o] = -fvals[j] + lambda * plain_c[o] -
               gamma_from_tables(tabs, htab, batch, i, j, true);
      }
    }
    const double reg = cfg.sinkhorn.effective_reg(lambda);
    SinkhornResult sink = [&] {
      try {
        return sinkhorn_plan(xb_measure, yb_measure, K, reg, cfg.sinkhorn,
                             warm_u.empty() ? nullptr : &warm_u,
                             warm_v.empty() ? nullptr : &warm_v);
      } catch (const ConvergenceError& e) {
        throw ConvergenceError("scot iteration " + std::to_string(it) + ": " +
                                   e.what(),
                               e.iterations, e.residual);
      }
    }();
    warm_u = sink.u;
    warm_v = sink.v;
    const auto& pi = sink.plan.matrix();

    // ----- record -----
    double sink_value = 0.0, cost_e = 0.0;
    for (std::size_t o = 0; o < pi.size(); ++o) {
      sink_value += pi[o] * K[o];
      cost_e += pi[o] * plain_c[o];
    }
    const double dual_v = lambda * eps - sink_value;
    const double pen =
        family.empty() ? 0.0 : martingale_penalty(family, xb_measure, cfg.eta);
    rep.dual.push_back(dual_v);
    rep.lambda.push_back(lambda);
    rep.cost.push_back(cost_e);
    rep.penalty.push_back(pen);
    last_y_measure = yb_measure;
    if (!std::isfinite(dual_v) || std::abs(dual_v) > cfg.divergence_guard) {
      abort_reason = "dual value exceeded the divergence guard";
      break;
    }

    // ----- descent over lambda and family (pi fixed by the envelope) -----
    {
      ad::Tape tape;
      const ad::Var lam = ad::lift(tape, lambda);
      double pi_f = 0.0, pi_c = 0.0;
      for (int i = 0; i < batch; ++i) {
        for (int j = 0; j < batch; ++j) {
          const std::size_t o = static_cast<std::size_t>(i) * batch + j;
          pi_f += pi[o] * fvals[j];
          pi_c += pi[o] * plain_c[o];
        }
      }
      ad::Var obj = lam * (eps - pi_c) + pi_f;
      if (!family.empty()) {
        const FamilyOnTape fo = bind_family(tape, family);
        const auto mvars = m_vars_on_tape(tape, family, fo, xb);
        const auto cvars = centered_increment_vars(tape, family, mvars, xb, bw);
        // sum_ij pi_ij gamma(x_i, y_j) = sum_lt sum_i dM~_i * (sum_j pi_ij H_j)
        for (int l = 0; l < family.L(); ++l) {
          for (int t = 1; t <= T - 1; ++t) {
            const auto& leaves =
                fo.h_leaves[static_cast<std::size_t>(l) * (T - 1) + (t - 1)];
            // H_j vars on parameter leaves.
            std::vector<ad::Var> hv(batch);
            for (int j = 0; j < batch; ++j) {
              const auto in_vars = lift_span(
                  tape, yb.path(j).subspan(0, static_cast<std::size_t>(t) * d));
              hv[j] = family.h(l, t).forward_tape(tape, in_vars, leaves)[0];
            }
            std::vector<int> ids;
            std::vector<double> coefs;
            for (int i = 0; i < batch; ++i) {
              std::vector<int> hids(batch);
              std::vector<double> hcoefs(batch);
              for (int j = 0; j < batch; ++j) {
                hids[j] = hv[j].id;
                hcoefs[j] = pi[static_cast<std::size_t>(i) * batch + j];
              }
              const ad::Var s = ad::wrap(tape, tape.lincomb(hids, hcoefs, 0.0));
              const ad::Var prod = s * cvars[l][t - 1][i];
              ids.push_back(prod.id);
              coefs.push_back(1.0);
            }
            obj = obj + ad::wrap(tape, tape.lincomb(ids, coefs, 0.0));
          }
        }
        obj = obj + cfg.xi * penalty_on_tape(tape, family, mvars, bw, cfg.eta);
        tape.backward(obj.id);
        auto flat = gather_family_params(family);
        const auto grads = family_grads(tape, fo);
        fam_opt.step(flat, grads);
        scatter_family_params(family, flat);
        family.clamp_all();
      } else {
        tape.backward(obj.id);
      }
      double lam_grad = tape.adjoint(lam.id);
      double lam_val = lambda;
      lam_opt.step({&lam_val, 1}, {&lam_grad, 1}, it);
      lambda = std::max(0.0, lam_val);
    }

    // ----- ascent over the generator (straight-through quantization) -----
    {
      ad::Tape tape;
      std::vector<int> leaves(gen.R.param_count());
      for (int k = 0; k < gen.R.param_count(); ++k)
        leaves[k] = tape.leaf(gen.R.params()[k]);
      const auto new_tabs = increment_tables(family, xb_measure);
      ad::Var obj = ad::lift(tape, 0.0);
      for (int j = 0; j < batch; ++j) {
        const std::span<const double> cen(centered.data() +
                                              static_cast<std::size_t>(j) * T * d,
                                          static_cast<std::size_t>(T) * d);
        const auto in_vars = lift_span(tape, cen);
        const auto r = gen.R.forward_tape(tape, in_vars, leaves);
        std::vector<ad::Var> yj(T * d);
        for (int c = 0; c < T * d; ++c)
          yj[c] = r[c] + xprime[static_cast<std::size_t>(j) * T * d + c];
        double colmass = 0.0;
        for (int i = 0; i < batch; ++i)
          colmass += pi[static_cast<std::size_t>(i) * batch + j];

        ad::Var term = colmass * objective_on_tape(tape, f, yj, T, d);
        // - lambda * sum_i pi_ij c(x_i, y_j)
        for (int i = 0; i < batch; ++i) {
          const double pij = pi[static_cast<std::size_t>(i) * batch + j];
          if (pij <= 1e-300) continue;
          const ad::Var cij = cost_on_tape(tape, cost, xb.path(i), yj, T, d);
          term = term - (lambda * pij) * cij;
        }
        // + sum_lt H(y_j) * (sum_i pi_ij dM_i)
        if (!family.empty()) {
          for (int l = 0; l < family.L(); ++l) {
            for (int t = 1; t <= T - 1; ++t) {
              double md = 0.0;
              for (int i = 0; i < batch; ++i)
                md += pi[static_cast<std::size_t>(i) * batch + j] *
                      new_tabs.centered[new_tabs.idx(l, t, i)];
              const auto hv = family.h(l, t).forward_tape(
                  tape, std::span<const ad::Var>(yj.data(),
                                                 static_cast<std::size_t>(t) * d));
              term = term + hv[0] * md;
            }
          }
        }
        obj = obj + term;
      }
      tape.backward(obj.id);
      std::vector<double> grads(gen.R.param_count());
      for (int k = 0; k < gen.R.param_count(); ++k)
        grads[k] = -tape.adjoint(leaves[k]);  // ascent
      gen_opt.step(gen.R.mutable_params(), grads);
      clamp_params(gen.R, cfg.gen_clamp[0], cfg.gen_clamp[1]);
    }

    // ----- optional early exit on the trailing-window diagnostic -----
    if (cfg.early_stop && it + 1 >= cfg.min_iterations &&
        (it + 1) % cfg.check_every == 0) {
      std::string reason;
      if (tail_converged(rep, eps, cfg.cost_band, cfg.lambda_small,
                         cfg.tail_fraction, &reason)) {
        rep.converged = true;
        rep.reason = reason + " (early stop)";
        break;
      }
    }
  }

  rep.iterations = static_cast<long>(rep.dual.size());
  if (!abort_reason.empty()) {
    rep.converged = false;
    rep.reason = abort_reason;
  } else if (!rep.converged) {
    std::string reason;
    rep.converged = tail_converged(rep, eps, cfg.cost_band, cfg.lambda_small,
                                   cfg.tail_fraction, &reason);
    rep.reason = reason;
  }
  rep.final_measure = last_y_measure;
  return rep;
}

// ---------------------------------------------------------------------------
// lambda_grid_dual
// ---------------------------------------------------------------------------

LambdaGridResult lambda_grid_dual(const DiscreteMeasure& mu,
                                  const PathBatch& y_grid,
                                  const ObjectiveSpec& f, const CostSpec& cost,
                                  double eps,
                                  std::span<const double> lambda_grid) {
  if (lambda_grid.empty() || y_grid.num_paths() == 0)
    throw ParameterError("lambda_grid_dual: empty grid");
  const auto fvals = objective_values(f, y_grid);
  const auto costs = cost_matrix(cost, mu.support(), y_grid);
  const int N = mu.size(), G = y_grid.num_paths();

  LambdaGridResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (double lam : lambda_grid) {
    if (lam < 0.0) throw ParameterError("lambda_grid_dual: lambda must be >= 0");
    double acc = lam * eps;
    for (int n = 0; n < N; ++n) {
      double sup = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < G; ++j)
        sup = std::max(sup,
                       fvals[j] - lam * costs[static_cast<std::size_t>(n) * G + j]);
      acc += mu.weights()[n] * sup;
    }
    if (acc < best.value) {
      best.value = acc;
      best.lambda_star = lam;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// pretrain_generator
// ---------------------------------------------------------------------------

PretrainResult pretrain_generator(const GeneratorSpec& gen0,
                                  const PathBatch& data,
                                  const PretrainConfig& cfg) {
  GeneratorSpec gen = gen0;
  const int N = data.num_paths(), T = data.num_steps(), d = data.dim();
  if (gen.R.input_dim() != T * d || gen.R.output_dim() != T * d)
    throw DimensionError("pretrain_generator: generator shape mismatch");
  CounterRng rng(cfg.seed);
  AdamOptimizer opt;
  opt.lr = cfg.lr;

  const auto loss_pass = [&](bool train) -> double {
    ad::Tape tape;
    std::vector<int> leaves(gen.R.param_count());
    for (int k = 0; k < gen.R.param_count(); ++k)
      leaves[k] = tape.leaf(gen.R.params()[k]);
    std::vector<int> sq_ids;
    std::vector<double> sq_coefs;
    const double inv = 1.0 / (static_cast<double>(N) * T * d);
    for (int n = 0; n < N; ++n) {
      const auto x = data.path(n);
      std::vector<double> xprime(x.begin(), x.end());
      if (gen.sigma2 > 0.0)
        for (double& v : xprime) v += rng.normal(0.0, gen.sigma2);
      std::vector<double> centered(xprime.size());
      for (int k = 0; k < d; ++k) {
        double mean = 0.0;
        for (int t = 0; t < T; ++t) mean += xprime[static_cast<std::size_t>(t) * d + k];
        mean /= T;
        for (int t = 0; t < T; ++t)
          centered[static_cast<std::size_t>(t) * d + k] =
              xprime[static_cast<std::size_t>(t) * d + k] - mean;
      }
      const auto in_vars = lift_span(tape, centered);
      const auto r = gen.R.forward_tape(tape, in_vars, leaves);
      for (int c = 0; c < T * d; ++c) {
        // y - x = z + r
        const ad::Var diff = r[c] + (xprime[c] - x[c]);
        const ad::Var sq = diff * diff;
        sq_ids.push_back(sq.id);
        sq_coefs.push_back(inv);
      }
    }
    const ad::Var loss = ad::wrap(tape, tape.lincomb(sq_ids, sq_coefs, 0.0));
    if (train) {
      tape.backward(loss.id);
      std::vector<double> grads(gen.R.param_count());
      for (int k = 0; k < gen.R.param_count(); ++k)
        grads[k] = tape.adjoint(leaves[k]);
      opt.step(gen.R.mutable_params(), grads);
    }
    return loss.value();
  };

  PretrainResult res;
  res.initial_mse = loss_pass(false);
  double last = res.initial_mse;
  for (long s = 0; s < cfg.steps; ++s) last = loss_pass(true);
  res.final_mse = cfg.steps > 0 ? loss_pass(false) : last;
  res.generator = std::move(gen);
  return res;
}

// ---------------------------------------------------------------------------
// Rademacher estimators
// ---------------------------------------------------------------------------

static std::vector<std::vector<double>> hypothesis_table(
    const std::vector<Hypothesis>& hypotheses, const PathBatch& sample) {
  if (hypotheses.empty())
    throw ParameterError("rademacher: empty hypothesis set");
  std::vector<std::vector<double>> table(hypotheses.size());
  for (std::size_t h = 0; h < hypotheses.size(); ++h) {
    table[h].resize(sample.num_paths());
    for (int i = 0; i < sample.num_paths(); ++i)
      table[h][i] = hypotheses[h](sample.path(i));
  }
  return table;
}

static double sup_correlation(const std::vector<std::vector<double>>& table,
                              std::span<const int> sigma) {
  const int N = static_cast<int>(sigma.size());
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& row : table) {
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += sigma[i] * row[i];
    best = std::max(best, s / N);
  }
  return best;
}

double rademacher_estimate(const std::vector<Hypothesis>& hypotheses,
                           const PathBatch& sample, long draws,
                           CounterRng& rng) {
  if (draws < 1) throw ParameterError("rademacher: draws must be >= 1");
  const auto table = hypothesis_table(hypotheses, sample);
  const int N = sample.num_paths();
  std::vector<int> sigma(N);
  double acc = 0.0;
  for (long k = 0; k < draws; ++k) {
    for (int i = 0; i < N; ++i) sigma[i] = (rng.next_u64() & 1) ? 1 : -1;
    acc += sup_correlation(table, sigma);
  }
  return acc / static_cast<double>(draws);
}

double rademacher_exact(const std::vector<Hypothesis>& hypotheses,
                        const PathBatch& sample) {
  const int N = sample.num_paths();
  if (N > 24) throw ParameterError("rademacher_exact: 2^N enumeration too large");
  const auto table = hypothesis_table(hypotheses, sample);
  std::vector<int> sigma(N);
  double acc = 0.0;
  const long total = 1L << N;
  for (long mask = 0; mask < total; ++mask) {
    for (int i = 0; i < N; ++i) sigma[i] = (mask >> i) & 1 ? 1 : -1;
    acc += sup_correlation(table, sigma);
  }
  return acc / static_cast<double>(total);
}

double rademacher_estimate_parametric(const DenseNet& prototype,
                                      const PathBatch& sample,
                                      const ParametricRademacherConfig& cfg,
                                      CounterRng& rng) {
  if (cfg.draws < 1 || cfg.ascent_steps < 1)
    throw ParameterError("rademacher: draws and ascent_steps must be >= 1");
  if (prototype.output_dim() != 1)
    throw DimensionError("rademacher: hypothesis net must be scalar-valued");
  const int N = sample.num_paths();
  double acc = 0.0;
  for (long k = 0; k < cfg.draws; ++k) {
    std::vector<int> sigma(N);
    for (int i = 0; i < N; ++i) sigma[i] = (rng.next_u64() & 1) ? 1 : -1;
    DenseNet net = prototype;
    AdamOptimizer opt;
    opt.lr = cfg.lr;
    double best = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < cfg.ascent_steps; ++s) {
      ad::Tape tape;
      std::vector<int> leaves(net.param_count());
      for (int p = 0; p < net.param_count(); ++p)
        leaves[p] = tape.leaf(net.params()[p]);
      std::vector<int> ids;
      std::vector<double> coefs;
      for (int i = 0; i < N; ++i) {
        const auto in_vars = lift_span(tape, sample.path(i));
        const auto out = net.forward_tape(tape, in_vars, leaves);
        ids.push_back(out[0].id);
        coefs.push_back(static_cast<double>(sigma[i]) / N);
      }
      const ad::Var obj = ad::wrap(tape, tape.lincomb(ids, coefs, 0.0));
      best = std::max(best, obj.value());
      tape.backward(obj.id);
      std::vector<double> grads(net.param_count());
      for (int p = 0; p < net.param_count(); ++p)
        grads[p] = -tape.adjoint(leaves[p]);
      opt.step(net.mutable_params(), grads);
    }
    acc += best;
  }
  return acc / static_cast<double>(cfg.draws);
}

}  // namespace cotdre
