#pragma once

#include <vector>

#include "cotdre/lp.hpp"
#include "cotdre/measures.hpp"

namespace cotdre {

// One discretized causality equality on coupling entries:
//   sum_{j in y_class} pi[x_atom][j]
//     - cond_prob * sum_{m in x_group} sum_{j in y_class} pi[m][j] = 0
// where cond_prob = mu(x_atom suffix | shared prefix) and x_group collects the
// atoms sharing the time-t prefix of x_atom.
struct CausalityConstraint {
  int t = 1;
  int x_atom = 0;
  std::vector<int> x_group;
  std::vector<int> y_class;
  double cond_prob = 1.0;
};

// Full constraint set for plans between mu and a y-support. Only prefixes
// with positive mu probability generate constraints; singleton prefix groups
// are identities and are skipped.
std::vector<CausalityConstraint> causality_constraints(
    const DiscreteMeasure& mu, const PathBatch& y_support);

struct TransportResult {
  double value = 0.0;
  Coupling plan;
};

// Classic optimal transport between two discrete measures.
TransportResult ot_distance_lp(const DiscreteMeasure& mu,
                               const DiscreteMeasure& nu,
                               const CostSpec& cost);

// Causal optimal transport: same LP plus causality equalities from mu.
TransportResult cot_distance_lp(const DiscreteMeasure& mu,
                                const DiscreteMeasure& nu,
                                const CostSpec& cost);

struct PrimalResult {
  double value = 0.0;
  DiscreteMeasure worst;
  Coupling plan;
};

// Worst-case expected value of f over the eps-ball around mu, with the
// alternative measure supported on `grid`. Throws InfeasibleError
// ("transport_budget") when no plan fits the cost budget.
PrimalResult primal_ot_lp(const DiscreteMeasure& mu, const PathBatch& grid,
                          const ObjectiveSpec& f, const CostSpec& cost,
                          double eps);

// Same with the causal ball.
PrimalResult primal_cot_lp(const DiscreteMeasure& mu, const PathBatch& grid,
                           const ObjectiveSpec& f, const CostSpec& cost,
                           double eps);

// True iff every discretized causality equality holds within tol.
bool verify_causality(const Coupling& plan, const DiscreteMeasure& mu,
                      double tol);

}  // namespace cotdre
