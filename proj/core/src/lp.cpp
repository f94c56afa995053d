#include "cotdre/lp.hpp"

#include <cmath>
#include <limits>

namespace cotdre {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kFeasTol = 1e-9;

// Tableau layout: rows = constraints, columns = structural vars, slacks,
// artificials, rhs last. Basis tracks the basic column of each row.
struct Tableau {
  int rows = 0, cols = 0;  // cols excludes the rhs column
  std::vector<double> a;   // (rows) x (cols + 1)
  std::vector<int> basis;

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * (cols + 1) + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * (cols + 1) + c]; }
  double& rhs(int r) { return at(r, cols); }
  double rhs(int r) const { return at(r, cols); }

  void pivot(int pr, int pc) {
    const double p = at(pr, pc);
    const double inv = 1.0 / p;
    for (int c = 0; c <= cols; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (int r = 0; r < rows; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (int c = 0; c <= cols; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
    basis[pr] = pc;
  }
};

// Reduced costs under the current basis for objective coefficients obj
// (length cols, zero-padded beyond). Returns the objective value through y.
void reduced_costs(const Tableau& t, const std::vector<double>& obj,
                   std::vector<double>& out, double& value) {
  // value = sum over basic rows of obj[basis] * rhs; reduced_j = obj_j - z_j.
  value = 0.0;
  for (int r = 0; r < t.rows; ++r) {
    const int b = t.basis[r];
    const double cb = b < static_cast<int>(obj.size()) ? obj[b] : 0.0;
    value += cb * t.rhs(r);
  }
  out.assign(t.cols, 0.0);
  for (int c = 0; c < t.cols; ++c) {
    double z = 0.0;
    for (int r = 0; r < t.rows; ++r) {
      const int b = t.basis[r];
      const double cb = b < static_cast<int>(obj.size()) ? obj[b] : 0.0;
      if (cb != 0.0) z += cb * t.at(r, c);
    }
    const double cj = c < static_cast<int>(obj.size()) ? obj[c] : 0.0;
    out[c] = cj - z;
  }
}

// Bland's rule: entering = lowest-index column with negative reduced cost,
// leaving = min ratio with lowest basic index on ties. Columns in `blocked`
// are never entered (used to keep artificials out in phase 2).
int simplex_iterate(Tableau& t, const std::vector<double>& obj,
                    const std::vector<bool>& blocked, int max_pivots) {
  std::vector<double> red;
  double value = 0.0;
  int pivots = 0;
  while (true) {
    reduced_costs(t, obj, red, value);
    int enter = -1;
    for (int c = 0; c < t.cols; ++c) {
      if (blocked[c]) continue;
      if (red[c] < -kPivotTol) {
        enter = c;
        break;
      }
    }
    if (enter < 0) return pivots;

    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int r = 0; r < t.rows; ++r) {
      const double arc = t.at(r, enter);
      if (arc > kPivotTol) {
        const double ratio = t.rhs(r) / arc;
        if (ratio < best_ratio - 1e-15 ||
            (std::abs(ratio - best_ratio) <= 1e-15 &&
             (leave < 0 || t.basis[r] < t.basis[leave]))) {
          best_ratio = ratio;
          leave = r;
        }
      }
    }
    if (leave < 0)
      throw NumericError("simplex: objective unbounded below");
    t.pivot(leave, enter);
    if (++pivots > max_pivots)
      throw NumericError("simplex: pivot budget exhausted");
  }
}

}  // namespace

void LinearProgram::validate() const {
  if (num_vars < 1) throw ParameterError("lp: no variables");
  if (objective.size() != static_cast<std::size_t>(num_vars))
    throw DimensionError("lp: objective length mismatch");
  if (eq_lhs.size() != eq_rhs.size() || ub_lhs.size() != ub_rhs.size())
    throw DimensionError("lp: constraint lhs/rhs count mismatch");
  auto check_rows = [&](const std::vector<std::vector<double>>& rows) {
    for (const auto& row : rows) {
      if (row.size() != static_cast<std::size_t>(num_vars))
        throw DimensionError("lp: constraint row length mismatch");
      for (double v : row)
        if (!std::isfinite(v)) throw NumericError("lp: non-finite coefficient");
    }
  };
  check_rows(eq_lhs);
  check_rows(ub_lhs);
  for (double v : objective)
    if (!std::isfinite(v)) throw NumericError("lp: non-finite objective");
  for (double v : eq_rhs)
    if (!std::isfinite(v)) throw NumericError("lp: non-finite rhs");
  for (double v : ub_rhs)
    if (!std::isfinite(v)) throw NumericError("lp: non-finite rhs");
}

LpSolution solve_lp(const LinearProgram& lp) {
  lp.validate();
  const int n = lp.num_vars;
  const int m_eq = static_cast<int>(lp.eq_lhs.size());
  const int m_ub = static_cast<int>(lp.ub_lhs.size());
  const int m = m_eq + m_ub;
  const int n_slack = m_ub;
  const int n_art = m;  // one artificial per row; unused ones never enter

  Tableau t;
  t.rows = m;
  t.cols = n + n_slack + n_art;
  t.a.assign(static_cast<std::size_t>(t.rows) * (t.cols + 1), 0.0);
  t.basis.assign(t.rows, -1);

  // Equalities first, then inequalities with slacks.
  for (int r = 0; r < m_eq; ++r) {
    for (int c = 0; c < n; ++c) t.at(r, c) = lp.eq_lhs[r][c];
    t.rhs(r) = lp.eq_rhs[r];
  }
  for (int r = 0; r < m_ub; ++r) {
    const int row = m_eq + r;
    for (int c = 0; c < n; ++c) t.at(row, c) = lp.ub_lhs[r][c];
    t.at(row, n + r) = 1.0;
    t.rhs(row) = lp.ub_rhs[r];
  }
  // Normalize rhs signs.
  for (int r = 0; r < m; ++r) {
    if (t.rhs(r) < 0.0) {
      for (int c = 0; c <= t.cols; ++c) t.at(r, c) = -t.at(r, c);
    }
  }
  // Start from slack where possible, otherwise artificial.
  std::vector<double> phase1_obj(t.cols, 0.0);
  for (int r = 0; r < m; ++r) {
    const int slack_col = (r >= m_eq) ? n + (r - m_eq) : -1;
    if (slack_col >= 0 && t.at(r, slack_col) == 1.0) {
      t.basis[r] = slack_col;
    } else {
      const int art = n + n_slack + r;
      t.at(r, art) = 1.0;
      t.basis[r] = art;
      phase1_obj[art] = 1.0;
    }
  }

  const int max_pivots = 50000 + 200 * (t.rows + t.cols);
  std::vector<bool> none(t.cols, false);
  int pivots = simplex_iterate(t, phase1_obj, none, max_pivots);

  // Phase 1 value = sum of basic artificials.
  double infeas = 0.0;
  for (int r = 0; r < m; ++r)
    if (t.basis[r] >= n + n_slack) infeas += t.rhs(r);
  if (infeas > kFeasTol)
    throw InfeasibleError("lp", "simplex: constraints are infeasible");

  // Drive surviving artificials out of the basis; a row with no eligible
  // pivot column is redundant and gets neutralized.
  std::vector<bool> blocked(t.cols, false);
  for (int c = n + n_slack; c < t.cols; ++c) blocked[c] = true;
  std::vector<bool> row_dead(m, false);
  for (int r = 0; r < m; ++r) {
    if (t.basis[r] < n + n_slack) continue;
    int col = -1;
    for (int c = 0; c < n + n_slack; ++c) {
      if (std::abs(t.at(r, c)) > kPivotTol) {
        col = c;
        break;
      }
    }
    if (col >= 0) {
      t.pivot(r, col);
    } else {
      // 0 = 0 row; keep the artificial basic at zero but never let any
      // column re-enter through it.
      row_dead[r] = true;
    }
  }
  (void)row_dead;

  pivots += simplex_iterate(t, lp.objective, blocked, max_pivots);

  LpSolution sol;
  sol.pivots = pivots;
  sol.x.assign(n, 0.0);
  for (int r = 0; r < m; ++r) {
    if (t.basis[r] < n) sol.x[t.basis[r]] = t.rhs(r);
  }
  double value = 0.0;
  for (int c = 0; c < n; ++c) value += lp.objective[c] * sol.x[c];
  sol.value = value;
  return sol;
}

}  // namespace cotdre
