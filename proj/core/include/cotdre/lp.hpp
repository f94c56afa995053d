#pragma once

#include <vector>

#include "cotdre/errors.hpp"

namespace cotdre {

// Dense linear program
//   minimize    c . x
//   subject to  A_eq x  = b_eq
//               A_ub x <= b_ub
//               x >= 0
// All coefficients must be finite; rows are stored densely.
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> objective;
  std::vector<std::vector<double>> eq_lhs;
  std::vector<double> eq_rhs;
  std::vector<std::vector<double>> ub_lhs;
  std::vector<double> ub_rhs;

  void validate() const;
};

struct LpSolution {
  double value = 0.0;
  std::vector<double> x;
  int pivots = 0;
};

// Two-phase dense simplex with Bland's anti-cycling rule. Deterministic:
// identical input produces the identical pivot sequence and solution.
// Throws InfeasibleError (constraint_class "lp") or NumericError on an
// unbounded objective.
LpSolution solve_lp(const LinearProgram& lp);

}  // namespace cotdre
