#include "cotdre/exact_transport.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cotdre {

namespace {

// Groups of path indices sharing the exact time-t prefix.
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

std::vector<std::vector<double>> coupling_rows(const LpSolution& sol, int nx,
                                               int ny) {
  std::vector<std::vector<double>> pi(nx, std::vector<double>(ny, 0.0));
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      pi[i][j] = std::max(0.0, sol.x[static_cast<std::size_t>(i) * ny + j]);
  return pi;
}

// The simplex solution satisfies the marginals to pivot accuracy; snap row
// and column sums onto the exact weights so the Coupling invariant (1e-9)
// holds by construction.
std::vector<double> snap_to_marginals(std::vector<std::vector<double>> pi,
                                      const std::vector<double>& row_w,
                                      const std::vector<double>& col_w) {
  const int nx = static_cast<int>(pi.size());
  const int ny = nx > 0 ? static_cast<int>(pi[0].size()) : 0;
  for (int i = 0; i < nx; ++i) {
    double s = 0.0;
    for (int j = 0; j < ny; ++j) s += pi[i][j];
    if (s > 0.0) {
      const double f = row_w[i] / s;
      for (int j = 0; j < ny; ++j) pi[i][j] *= f;
    } else if (row_w[i] > 0.0) {
      // Degenerate row lost to rounding; spread uniformly.
      for (int j = 0; j < ny; ++j) pi[i][j] = row_w[i] / ny;
    }
  }
  // Column residuals after row snapping are at rounding scale; absorb them
  // with a rank-one correction that keeps entries nonnegative.
  std::vector<double> col_err(ny, 0.0);
  double pos = 0.0;
  for (int j = 0; j < ny; ++j) {
    double s = 0.0;
    for (int i = 0; i < nx; ++i) s += pi[i][j];
    col_err[j] = col_w[j] - s;
    if (col_err[j] > 0) pos += col_err[j];
  }
  if (pos > 0.0) {
    for (int j = 0; j < ny; ++j) {
      if (col_err[j] >= 0.0) continue;
      double excess = -col_err[j];
      for (int jj = 0; jj < ny && excess > 0.0; ++jj) {
        if (col_err[jj] <= 0.0) continue;
        const double move = std::min(excess, col_err[jj]);
        double colsum = 0.0;
        for (int i = 0; i < nx; ++i) colsum += pi[i][j];
        if (colsum <= 0.0) break;
        // Shift mass within rows so row sums stay exact.
        for (int i = 0; i < nx; ++i) {
          const double delta = move * pi[i][j] / colsum;
          pi[i][j] -= delta;
          pi[i][jj] += delta;
        }
        col_err[jj] -= move;
        excess -= move;
      }
    }
  }
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(nx) * ny);
  for (const auto& row : pi)
    for (double v : row) flat.push_back(std::max(0.0, v));
  return flat;
}

struct TransportLp {
  LinearProgram lp;
  int nx = 0, ny = 0;
};

TransportLp marginal_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  TransportLp t;
  t.nx = mu.size();
  t.ny = nu.size();
  t.lp.num_vars = t.nx * t.ny;
  t.lp.objective.assign(t.lp.num_vars, 0.0);
  for (int i = 0; i < t.nx; ++i) {
    std::vector<double> row(t.lp.num_vars, 0.0);
    for (int j = 0; j < t.ny; ++j) row[static_cast<std::size_t>(i) * t.ny + j] = 1.0;
    t.lp.eq_lhs.push_back(std::move(row));
    t.lp.eq_rhs.push_back(mu.weights()[i]);
  }
  for (int j = 0; j < t.ny; ++j) {
    std::vector<double> row(t.lp.num_vars, 0.0);
    for (int i = 0; i < t.nx; ++i) row[static_cast<std::size_t>(i) * t.ny + j] = 1.0;
    t.lp.eq_lhs.push_back(std::move(row));
    t.lp.eq_rhs.push_back(nu.weights()[j]);
  }
  return t;
}

void append_causality_rows(LinearProgram& lp, int ny,
                           const std::vector<CausalityConstraint>& constraints) {
  for (const auto& c : constraints) {
    std::vector<double> row(lp.num_vars, 0.0);
    for (int j : c.y_class) row[static_cast<std::size_t>(c.x_atom) * ny + j] += 1.0;
    for (int m : c.x_group)
      for (int j : c.y_class) row[static_cast<std::size_t>(m) * ny + j] -= c.cond_prob;
    lp.eq_lhs.push_back(std::move(row));
    lp.eq_rhs.push_back(0.0);
  }
}

void require_compatible(const DiscreteMeasure& mu, const PathBatch& ys,
                        const CostSpec& cost) {
  if (cost.kind != CostSpec::Kind::Table && !mu.support().same_shape(ys))
    throw DimensionError("transport: measures must share (T, d)");
}

}  // namespace

std::vector<CausalityConstraint> causality_constraints(
    const DiscreteMeasure& mu, const PathBatch& y_support) {
  std::vector<CausalityConstraint> out;
  const PathBatch& xs = mu.support();
  const int T = std::min(xs.num_steps(), y_support.num_steps());
  for (int t = 1; t <= T - 1; ++t) {
    const auto x_groups = prefix_groups(xs, t);
    const auto y_groups = prefix_groups(y_support, t);
    for (const auto& [xkey, group] : x_groups) {
      if (group.size() < 2) continue;  // constraint is an identity
      double group_mass = 0.0;
      for (int m : group) group_mass += mu.weights()[m];
      if (group_mass <= 0.0) continue;
      for (int n : group) {
        const double cond = mu.weights()[n] / group_mass;
        for (const auto& [ykey, y_class] : y_groups) {
          CausalityConstraint c;
          c.t = t;
          c.x_atom = n;
          c.x_group = group;
          c.y_class = y_class;
          c.cond_prob = cond;
          out.push_back(std::move(c));
        }
      }
    }
  }
  return out;
}

static TransportResult distance_lp(const DiscreteMeasure& mu,
                                   const DiscreteMeasure& nu,
                                   const CostSpec& cost, bool causal) {
  require_compatible(mu, nu.support(), cost);
  const auto costs = cost_matrix(cost, mu.support(), nu.support());
  auto t = marginal_lp(mu, nu);
  t.lp.objective = costs;
  if (causal)
    append_causality_rows(t.lp, t.ny, causality_constraints(mu, nu.support()));
  const auto sol = solve_lp(t.lp);
  auto pi = snap_to_marginals(coupling_rows(sol, t.nx, t.ny), mu.weights(),
                              nu.weights());
  Coupling plan(std::move(pi), mu, nu);
  // Report the value of the snapped plan so re-evaluation reproduces it.
  return TransportResult{plan.contract(costs), std::move(plan)};
}

TransportResult ot_distance_lp(const DiscreteMeasure& mu,
                               const DiscreteMeasure& nu,
                               const CostSpec& cost) {
  return distance_lp(mu, nu, cost, false);
}

TransportResult cot_distance_lp(const DiscreteMeasure& mu,
                                const DiscreteMeasure& nu,
                                const CostSpec& cost) {
  return distance_lp(mu, nu, cost, true);
}

static PrimalResult primal_lp(const DiscreteMeasure& mu, const PathBatch& grid,
                              const ObjectiveSpec& f, const CostSpec& cost,
                              double eps, bool causal) {
  if (eps < 0.0) throw ParameterError("primal: eps must be >= 0");
  require_compatible(mu, grid, cost);
  const int nx = mu.size();
  const int ny = grid.num_paths();
  const auto costs = cost_matrix(cost, mu.support(), grid);
  const auto fvals = objective_values(f, grid);

  // Cheap budget check: each reference atom must be able to move somewhere.
  double min_cost = 0.0;
  for (int i = 0; i < nx; ++i) {
    double best = costs[static_cast<std::size_t>(i) * ny];
    for (int j = 1; j < ny; ++j)
      best = std::min(best, costs[static_cast<std::size_t>(i) * ny + j]);
    min_cost += mu.weights()[i] * best;
  }
  if (min_cost > eps + 1e-12)
    throw InfeasibleError("transport_budget",
                          "primal: eps below the minimum achievable transport cost");

  LinearProgram lp;
  lp.num_vars = nx * ny;
  lp.objective.resize(lp.num_vars);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      lp.objective[static_cast<std::size_t>(i) * ny + j] = -fvals[j];
  for (int i = 0; i < nx; ++i) {
    std::vector<double> row(lp.num_vars, 0.0);
    for (int j = 0; j < ny; ++j) row[static_cast<std::size_t>(i) * ny + j] = 1.0;
    lp.eq_lhs.push_back(std::move(row));
    lp.eq_rhs.push_back(mu.weights()[i]);
  }
  lp.ub_lhs.push_back(costs);
  lp.ub_rhs.push_back(eps);
  if (causal) append_causality_rows(lp, ny, causality_constraints(mu, grid));

  LpSolution sol;
  try {
    sol = solve_lp(lp);
  } catch (const InfeasibleError&) {
    throw InfeasibleError("transport_budget",
                          "primal: no plan satisfies the cost budget");
  }

  // Column marginal of the optimal plan = worst-case measure.
  auto rows = coupling_rows(sol, nx, ny);
  std::vector<double> col(ny, 0.0);
  for (int i = 0; i < nx; ++i) {
    // Snap rows onto the exact atom weights first.
    double s = 0.0;
    for (int j = 0; j < ny; ++j) s += rows[i][j];
    const double fscale = s > 0.0 ? mu.weights()[i] / s : 0.0;
    for (int j = 0; j < ny; ++j) {
      rows[i][j] *= fscale;
      col[j] += rows[i][j];
    }
  }
  double total = 0.0;
  for (double v : col) total += v;
  if (total <= 0.0) throw NumericError("primal: degenerate plan");
  for (int j = 0; j < ny; ++j) col[j] /= total;
  // Let the heaviest column absorb the normalization residual so no weight
  // can round below zero.
  int heaviest = 0;
  double acc = 0.0;
  for (int j = 0; j < ny; ++j) {
    if (col[j] > col[heaviest]) heaviest = j;
    acc += col[j];
  }
  col[heaviest] += 1.0 - acc;

  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(nx) * ny);
  for (const auto& r : rows)
    for (double v : r) flat.push_back(v);

  DiscreteMeasure grid_measure(grid, col);
  Coupling plan(std::move(flat), mu, grid_measure);

  // Report the plan's own objective so value and plan stay consistent.
  double value = 0.0;
  for (int j = 0; j < ny; ++j) value += col[j] * fvals[j];

  // Keep only atoms carrying mass in the worst-case measure.
  std::vector<int> keep;
  for (int j = 0; j < ny; ++j)
    if (col[j] > 1e-14) keep.push_back(j);
  std::vector<double> wdata, wweights;
  double wacc = 0.0;
  for (int idx : keep) {
    const auto p = grid.path(idx);
    wdata.insert(wdata.end(), p.begin(), p.end());
    wweights.push_back(col[idx]);
    wacc += col[idx];
  }
  for (double& w : wweights) w /= wacc;
  DiscreteMeasure worst(
      PathBatch(std::move(wdata), static_cast<int>(keep.size()),
                grid.num_steps(), grid.dim(), grid.bounds()),
      std::move(wweights));

  return PrimalResult{value, std::move(worst), std::move(plan)};
}

PrimalResult primal_ot_lp(const DiscreteMeasure& mu, const PathBatch& grid,
                          const ObjectiveSpec& f, const CostSpec& cost,
                          double eps) {
  return primal_lp(mu, grid, f, cost, eps, false);
}

PrimalResult primal_cot_lp(const DiscreteMeasure& mu, const PathBatch& grid,
                           const ObjectiveSpec& f, const CostSpec& cost,
                           double eps) {
  return primal_lp(mu, grid, f, cost, eps, true);
}

bool verify_causality(const Coupling& plan, const DiscreteMeasure& mu,
                      double tol) {
  const auto constraints =
      causality_constraints(mu, plan.col_marginal().support());
  for (const auto& c : constraints) {
    double lhs = 0.0;
    for (int j : c.y_class) lhs += plan.at(c.x_atom, j);
    double group_sum = 0.0;
    for (int m : c.x_group)
      for (int j : c.y_class) group_sum += plan.at(m, j);
    if (std::abs(lhs - c.cond_prob * group_sum) > tol) return false;
  }
  return true;
}

}  // namespace cotdre
