#include "cotdre/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cotdre::synthetic {

Example1 example1() {
  const Bounds b{-1.0, 1.0};
  PathBatch support({-1.0, 1.0, -1.0, -1.0}, 2, 2, 1, b);
  DiscreteMeasure mu(std::move(support), {0.2, 0.8});
  PathBatch grid({-1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0}, 4, 2, 1, b);
  Example1 ex{std::move(mu), std::move(grid),
              ObjectiveSpec::coordinate(1, 1),
              CostSpec::indicator_feature(2, 1), 0.2, b};
  return ex;
}

ObjectiveSpec example2_objective(double K, const PathBatch& grid) {
  if (K < 0.0) throw ParameterError("example2_objective: K must be >= 0");
  std::vector<double> values(grid.num_paths(), 0.0);
  for (int j = 0; j < grid.num_paths(); ++j)
    if (grid.at(j, 0, 0) == 1.0) values[j] = K;
  return ObjectiveSpec::grid_table(std::move(values));
}

PathBatch ar1_vol(int N, int T, std::uint64_t seed, Bounds bounds, double phi,
                  double log_mean, double noise_sd) {
  if (N < 1 || T < 1) throw ParameterError("ar1_vol: N, T must be >= 1");
  CounterRng rng(seed);
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(N) * T);
  const double stat_sd = noise_sd / std::sqrt(std::max(1e-12, 1.0 - phi * phi));
  for (int n = 0; n < N; ++n) {
    double v = log_mean + stat_sd * rng.normal();
    for (int t = 0; t < T; ++t) {
      const double x = std::exp(v);
      data.push_back(std::clamp(x, std::max(bounds.lo, 1e-9), bounds.hi));
      v = log_mean + phi * (v - log_mean) + noise_sd * rng.normal();
    }
  }
  return PathBatch(std::move(data), N, T, 1, bounds);
}

PathBatch random_paths(int N, int T, int d, Bounds bounds, CounterRng& rng) {
  std::vector<double> data(static_cast<std::size_t>(N) * T * d);
  for (double& v : data) v = rng.uniform(bounds.lo, bounds.hi);
  return PathBatch(std::move(data), N, T, d, bounds);
}

SeparableInstance separable_random(int n_atoms, int T, std::uint64_t seed) {
  if (n_atoms < 1 || T < 1)
    throw ParameterError("separable_random: sizes must be >= 1");
  const Bounds b{0.0, 1.0};
  CounterRng rng(seed);

  PathBatch atoms = random_paths(n_atoms, T, 1, b, rng);
  std::vector<double> weights(n_atoms);
  double s = 0.0;
  for (double& w : weights) {
    w = 0.05 + rng.uniform01();
    s += w;
  }
  for (double& w : weights) w /= s;
  double acc = 0.0;
  for (int i = 0; i + 1 < n_atoms; ++i) acc += weights[i];
  weights[n_atoms - 1] = 1.0 - acc;

  // Per-time axis values: the atom coordinates plus one random extra, so the
  // product grid contains every atom (identity transport stays feasible).
  std::vector<std::vector<double>> axes(T);
  for (int t = 0; t < T; ++t) {
    std::set<double> vals;
    for (int n = 0; n < n_atoms; ++n) vals.insert(atoms.at(n, t, 0));
    vals.insert(rng.uniform(b.lo, b.hi));
    axes[t].assign(vals.begin(), vals.end());
  }
  std::vector<double> grid_data;
  long total = 1;
  for (const auto& ax : axes) total *= static_cast<long>(ax.size());
  for (long code = 0; code < total; ++code) {
    long rem = code;
    for (int t = 0; t < T; ++t) {
      grid_data.push_back(axes[t][rem % axes[t].size()]);
      rem /= static_cast<long>(axes[t].size());
    }
  }
  PathBatch grid(std::move(grid_data), static_cast<int>(total), T, 1, b);

  // Affine objective realized through linear_relu with an intercept that
  // keeps the pre-activation positive over the whole box.
  std::vector<double> a(T);
  double abs_sum = 0.0;
  for (double& ai : a) {
    ai = rng.uniform(-1.0, 1.0);
    abs_sum += std::abs(ai);
  }
  ObjectiveSpec f = ObjectiveSpec::linear_relu(std::move(a), abs_sum + 0.1);
  CostSpec cost = (rng.next_u64() & 1) ? CostSpec::l1()
                                       : CostSpec::scaled_quadratic(1.0);
  return SeparableInstance{DiscreteMeasure(std::move(atoms), std::move(weights)),
                           std::move(grid), std::move(f), std::move(cost), b};
}

}  // namespace cotdre::synthetic
