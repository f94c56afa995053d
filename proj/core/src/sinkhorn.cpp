#include "cotdre/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cotdre {

std::vector<double> modified_cost_matrix(const ObjectiveSpec& f, double lambda,
                                         const PairFunction& gamma,
                                         const CostSpec& cost,
                                         const PathBatch& mu_support,
                                         const PathBatch& nu_support) {
  if (lambda < 0.0) throw ParameterError("modified_cost_matrix: lambda < 0");
  const int nx = mu_support.num_paths();
  const int ny = nu_support.num_paths();
  const auto costs = cost_matrix(cost, mu_support, nu_support);
  const auto fvals = objective_values(f, nu_support);
  std::vector<double> out(static_cast<std::size_t>(nx) * ny);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * ny + j;
      double g = 0.0;
      if (gamma) g = gamma(mu_support.path(i), nu_support.path(j));
      const double v = -fvals[j] + lambda * costs[idx] - g;
      if (!std::isfinite(v))
        throw NumericError("modified_cost_matrix: non-finite entry");
      out[idx] = v;
    }
  }
  return out;
}

namespace {

// log sum_k w_k * exp(s_k), stabilized.
double logsumexp(std::span<const double> s, std::span<const double> logw) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < s.size(); ++k) m = std::max(m, s[k] + logw[k]);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) acc += std::exp(s[k] + logw[k] - m);
  return m + std::log(acc);
}

}  // namespace

SinkhornResult sinkhorn_plan(const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu,
                             std::span<const double> cost_mat, double reg,
                             const SinkhornConfig& cfg,
                             const std::vector<double>* warm_u,
                             const std::vector<double>* warm_v) {
  if (!(reg > 0.0)) throw ParameterError("sinkhorn: reg must be positive");
  const int nx = mu.size();
  const int ny = nu.size();
  if (cost_mat.size() != static_cast<std::size_t>(nx) * ny)
    throw DimensionError("sinkhorn: cost matrix shape mismatch");
  const auto& a = mu.weights();
  const auto& b = nu.weights();
  std::vector<double> loga(nx), logb(ny);
  for (int i = 0; i < nx; ++i) {
    if (!(a[i] > 0.0))
      throw ParameterError("sinkhorn: weights must be strictly positive");
    loga[i] = std::log(a[i]);
  }
  for (int j = 0; j < ny; ++j) {
    if (!(b[j] > 0.0))
      throw ParameterError("sinkhorn: weights must be strictly positive");
    logb[j] = std::log(b[j]);
  }

  std::vector<double> u(nx, 0.0), v(ny, 0.0);
  if (warm_u && static_cast<int>(warm_u->size()) == nx) u = *warm_u;
  if (warm_v && static_cast<int>(warm_v->size()) == ny) v = *warm_v;

  const auto K = [&](int i, int j) {
    return cost_mat[static_cast<std::size_t>(i) * ny + j];
  };

  // Alternate exact row and column scalings in the log domain. The reference
  // weights are folded into the kernel, so the fixed point transports a to b
  // with plan pi_ij = exp((u_i + v_j - K_ij)/reg + log a_i + log b_j).
  double err = std::numeric_limits<double>::infinity();
  int it = 0;
  std::vector<double> srow(ny), scol(nx), zeros_row(ny, 0.0), zeros_col(nx, 0.0);
  for (it = 0; it < cfg.max_iter; ++it) {
    // Row update makes row marginals exact.
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) srow[j] = (v[j] - K(i, j)) / reg + logb[j];
      u[i] = -reg * logsumexp(srow, zeros_row);
    }
    // Column update.
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) scol[i] = (u[i] - K(i, j)) / reg + loga[i];
      v[j] = -reg * logsumexp(scol, zeros_col);
    }
    // After the column update the column marginals are exact; measure the
    // row-side violation in total variation.
    err = 0.0;
    for (int i = 0; i < nx; ++i) {
      double s = 0.0;
      for (int j = 0; j < ny; ++j)
        s += std::exp((u[i] + v[j] - K(i, j)) / reg + loga[i] + logb[j]);
      err += std::abs(s - a[i]);
    }
    if (!std::isfinite(err))
      throw NumericError("sinkhorn: non-finite marginal error");
    if (err <= cfg.tol) break;
  }
  if (err > cfg.tol)
    throw ConvergenceError("sinkhorn: marginal error above tol after max_iter",
                           it, err);

  std::vector<double> pi(static_cast<std::size_t>(nx) * ny);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      pi[static_cast<std::size_t>(i) * ny + j] =
          std::exp((u[i] + v[j] - K(i, j)) / reg + loga[i] + logb[j]);

  // Round onto the polytope: rescale rows onto a, absorb the column residual
  // with a nonnegative rank-one correction. Keeps entries strictly positive.
  for (int i = 0; i < nx; ++i) {
    double s = 0.0;
    for (int j = 0; j < ny; ++j) s += pi[static_cast<std::size_t>(i) * ny + j];
    const double f = a[i] / s;
    for (int j = 0; j < ny; ++j) pi[static_cast<std::size_t>(i) * ny + j] *= f;
  }
  std::vector<double> col_def(ny, 0.0), row_exc(nx, 0.0);
  double total_def = 0.0;
  for (int j = 0; j < ny; ++j) {
    double s = 0.0;
    for (int i = 0; i < nx; ++i) s += pi[static_cast<std::size_t>(i) * ny + j];
    col_def[j] = b[j] - s;
  }
  // Scale columns with excess down to their target, collecting the freed
  // mass per row, then redistribute it to deficit columns.
  for (int j = 0; j < ny; ++j) {
    if (col_def[j] >= 0.0) {
      total_def += col_def[j];
      continue;
    }
    double s = b[j] - col_def[j];  // current sum
    const double f = b[j] / s;
    for (int i = 0; i < nx; ++i) {
      auto& e = pi[static_cast<std::size_t>(i) * ny + j];
      row_exc[i] += e * (1.0 - f);
      e *= f;
    }
  }
  if (total_def > 0.0) {
    double freed = 0.0;
    for (double v2 : row_exc) freed += v2;
    if (freed > 0.0) {
      for (int i = 0; i < nx; ++i) {
        if (row_exc[i] <= 0.0) continue;
        for (int j = 0; j < ny; ++j) {
          if (col_def[j] <= 0.0) continue;
          pi[static_cast<std::size_t>(i) * ny + j] +=
              row_exc[i] * (col_def[j] / total_def);
        }
      }
    }
  }

  Coupling plan(std::move(pi), mu, nu);
  return SinkhornResult{std::move(plan), it + 1, err, std::move(u), std::move(v)};
}

double regularized_distance(const DiscreteMeasure& mu,
                            const DiscreteMeasure& nu, const ObjectiveSpec& f,
                            double lambda, const PairFunction& gamma,
                            const CostSpec& cost, const SinkhornConfig& cfg) {
  const auto K =
      modified_cost_matrix(f, lambda, gamma, cost, mu.support(), nu.support());
  const auto res =
      sinkhorn_plan(mu, nu, K, cfg.effective_reg(lambda), cfg);
  return res.plan.contract(K);
}

}  // namespace cotdre
