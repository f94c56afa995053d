#pragma once

#include <cstdint>

#include "cotdre/measures.hpp"
#include "cotdre/rng.hpp"

namespace cotdre::synthetic {

// Two-atom reference measure on [-1,1]^2 with the anticipative indicator
// cost; the standard hand-checkable instance used across the test suites.
struct Example1 {
  DiscreteMeasure mu;
  PathBatch grid;  // {-1, 1}^2, four paths
  ObjectiveSpec f;
  CostSpec cost;
  double eps = 0.2;
  Bounds bounds{-1.0, 1.0};
};

Example1 example1();

// f = K * 1{y_1 = 1} on the example1 grid, as a table objective.
ObjectiveSpec example2_objective(double K, const PathBatch& grid);

// Exponentiated AR(1) volatility-like paths, all coordinates positive and
// clipped into bounds.
PathBatch ar1_vol(int N, int T, std::uint64_t seed, Bounds bounds = {0.0, 1.0},
                  double phi = 0.8, double log_mean = -1.4,
                  double noise_sd = 0.3);

// Uniformly random paths in the box.
PathBatch random_paths(int N, int T, int d, Bounds bounds, CounterRng& rng);

// Small random instance with separable affine objective and separable cost
// (c_t(x,x) = 0), alternative support on a product grid containing the atoms.
struct SeparableInstance {
  DiscreteMeasure mu;
  PathBatch grid;
  ObjectiveSpec f;
  CostSpec cost;
  Bounds bounds{0.0, 1.0};
};

SeparableInstance separable_random(int n_atoms, int T, std::uint64_t seed);

}  // namespace cotdre::synthetic
