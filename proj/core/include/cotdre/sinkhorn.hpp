#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cotdre/measures.hpp"

namespace cotdre {

// Entropic regularization config. The effective regularizer must stay
// strictly positive for every lambda >= 0, so "fixed" pins the product
// itself while "coupled" follows slope*lambda + floor.
struct SinkhornConfig {
  enum class TauRule { Fixed, Coupled };

  TauRule rule = TauRule::Coupled;
  double fixed_reg = 1e-3;
  double coupled_slope = 0.01;
  double coupled_floor = 1e-5;
  int max_iter = 10000;
  double tol = 1e-8;  // total-variation marginal tolerance

  double effective_reg(double lambda) const {
    const double r = rule == TauRule::Fixed
                         ? fixed_reg
                         : coupled_slope * lambda + coupled_floor;
    if (!(r > 0.0))
      throw ParameterError("sinkhorn: effective regularizer must be positive");
    return r;
  }
};

using PairFunction =
    std::function<double(std::span<const double>, std::span<const double>)>;

// Entries -f(y_j) + lambda*c(x_i, y_j) - gamma(x_i, y_j), row-major. A null
// gamma means gamma == 0.
std::vector<double> modified_cost_matrix(const ObjectiveSpec& f, double lambda,
                                         const PairFunction& gamma,
                                         const CostSpec& cost,
                                         const PathBatch& mu_support,
                                         const PathBatch& nu_support);

struct SinkhornResult {
  Coupling plan;
  int iterations = 0;
  double marginal_err = 0.0;  // pre-rounding total-variation error
  std::vector<double> u, v;   // dual potentials, reusable as warm start
};

// Log-domain Sinkhorn on a generic cost matrix. Weights must be strictly
// positive. After converging the plan is rounded onto the transport polytope
// so both marginals hold exactly; entries stay strictly positive. Throws
// ConvergenceError when max_iter is hit, carrying the last marginal error.
SinkhornResult sinkhorn_plan(const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu,
                             std::span<const double> cost_mat, double reg,
                             const SinkhornConfig& cfg,
                             const std::vector<double>* warm_u = nullptr,
                             const std::vector<double>* warm_v = nullptr);

// Modified-cost transport value at the entropic optimizer (entropy term
// excluded from the reported value).
double regularized_distance(const DiscreteMeasure& mu,
                            const DiscreteMeasure& nu, const ObjectiveSpec& f,
                            double lambda, const PairFunction& gamma,
                            const CostSpec& cost, const SinkhornConfig& cfg);

}  // namespace cotdre
