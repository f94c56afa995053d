#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cotdre/exact_transport.hpp"
#include "cotdre/rng.hpp"
#include "cotdre/synthetic.hpp"
#include "oracles.hpp"

using namespace cotdre;

namespace {

DiscreteMeasure random_measure(int n, int T, Bounds b, CounterRng& rng) {
  auto support = synthetic::random_paths(n, T, 1, b, rng);
  std::vector<double> w(n);
  double s = 0;
  for (auto& v : w) {
    v = 0.05 + rng.uniform01();
    s += v;
  }
  for (auto& v : w) v /= s;
  double acc = 0;
  for (int i = 0; i + 1 < n; ++i) acc += w[i];
  w[n - 1] = 1.0 - acc;
  return DiscreteMeasure(std::move(support), std::move(w));
}

// Independent check of a transport value by vertex enumeration of the
// equality polytope (marginals plus optional causality rows).
double vertex_transport_value(const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu, const CostSpec& cost,
                              bool causal) {
  auto P = oracle::transport_polytope(mu.weights(), nu.weights());
  const int ny = nu.size();
  if (causal) {
    for (const auto& c : causality_constraints(mu, nu.support())) {
      std::vector<double> row(static_cast<std::size_t>(mu.size()) * ny, 0.0);
      for (int j : c.y_class) row[static_cast<std::size_t>(c.x_atom) * ny + j] += 1.0;
      for (int m : c.x_group)
        for (int j : c.y_class)
          row[static_cast<std::size_t>(m) * ny + j] -= c.cond_prob;
      P.A.push_back(std::move(row));
      P.b.push_back(0.0);
    }
  }
  const auto costs = cost_matrix(cost, mu.support(), nu.support());
  return oracle::min_linear_over_vertices(P, costs);
}

}  // namespace

TEST_CASE("ot identity transport and single couplings") {
  CounterRng rng(2);
  const Bounds b{0, 1};
  const auto mu = random_measure(4, 2, b, rng);
  const auto quad = CostSpec::scaled_quadratic(1.0);

  const auto same = ot_distance_lp(mu, mu, quad);
  CHECK(same.value == doctest::Approx(0.0).epsilon(1e-12));
  // Diagonal plan is the only zero-cost one for distinct atoms.
  for (int i = 0; i < mu.size(); ++i)
    CHECK(same.plan.at(i, i) == doctest::Approx(mu.weights()[i]));

  const DiscreteMeasure dx(PathBatch({0.1, 0.4}, 1, 2, 1, b), {1.0});
  const DiscreteMeasure dy(PathBatch({0.9, 0.2}, 1, 2, 1, b), {1.0});
  const auto single = ot_distance_lp(dx, dy, quad);
  CHECK(single.value ==
        doctest::Approx(eval_cost(quad, dx.support().path(0),
                                  dy.support().path(0), 2, 1)));
}

TEST_CASE("ot matches vertex enumeration on random 3x3 instances") {
  CounterRng rng(23);
  const Bounds b{0, 1};
  for (int trial = 0; trial < 12; ++trial) {
    const auto mu = random_measure(3, 2, b, rng);
    const auto nu = random_measure(3, 2, b, rng);
    const auto cost = trial % 2 ? CostSpec::l1() : CostSpec::scaled_quadratic(1.0);
    const auto lp = ot_distance_lp(mu, nu, cost);
    const double oracle_value = vertex_transport_value(mu, nu, cost, false);
    CHECK(lp.value == doctest::Approx(oracle_value).epsilon(1e-8));
  }
}

TEST_CASE("cot reduces to ot at T = 1 and is bounded by the product coupling") {
  CounterRng rng(5);
  const Bounds b{0, 1};
  const auto mu = random_measure(3, 1, b, rng);
  const auto nu = random_measure(3, 1, b, rng);
  const auto cost = CostSpec::l1();
  CHECK(cot_distance_lp(mu, nu, cost).value ==
        doctest::Approx(ot_distance_lp(mu, nu, cost).value).epsilon(1e-10));

  // Product coupling is causal: W_c <= sum_ij w_i v_j c_ij.
  const auto mu2 = random_measure(3, 3, b, rng);
  const auto nu2 = random_measure(4, 3, b, rng);
  const auto costs = cost_matrix(cost, mu2.support(), nu2.support());
  double product_cost = 0.0;
  for (int i = 0; i < mu2.size(); ++i)
    for (int j = 0; j < nu2.size(); ++j)
      product_cost += mu2.weights()[i] * nu2.weights()[j] *
                      costs[static_cast<std::size_t>(i) * nu2.size() + j];
  const auto cot = cot_distance_lp(mu2, nu2, cost);
  CHECK(cot.value <= product_cost + 1e-9);
  CHECK(verify_causality(cot.plan, mu2, 1e-8));
}

TEST_CASE("anticipative target separates cot from ot") {
  const auto ex = synthetic::example1();
  // nu puts y_1 = x_2 deterministically: 0.2 at (1,1), 0.8 at (-1,-1).
  const DiscreteMeasure nu(
      PathBatch({1.0, 1.0, -1.0, -1.0}, 2, 2, 1, ex.bounds), {0.2, 0.8});
  const auto ot = ot_distance_lp(ex.mu, nu, ex.cost);
  const auto cot = cot_distance_lp(ex.mu, nu, ex.cost);
  CHECK(ot.value == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(cot.value == doctest::Approx(0.32).epsilon(1e-8));
  CHECK(cot.value > ot.value);
  // Same values from the vertex oracle.
  CHECK(vertex_transport_value(ex.mu, nu, ex.cost, false) ==
        doctest::Approx(ot.value).epsilon(1e-8));
  CHECK(vertex_transport_value(ex.mu, nu, ex.cost, true) ==
        doctest::Approx(cot.value).epsilon(1e-8));

  // The anticipative plan itself fails the causality check.
  const Coupling anticipative({0.2, 0.0, 0.0, 0.8}, ex.mu, nu);
  CHECK_FALSE(verify_causality(anticipative, ex.mu, 1e-8));
  // The product coupling passes it.
  std::vector<double> prod(4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      prod[static_cast<std::size_t>(i) * 2 + j] =
          ex.mu.weights()[i] * nu.weights()[j];
  CHECK(verify_causality(Coupling(prod, ex.mu, nu), ex.mu, 1e-12));
}

TEST_CASE("primal ot limits: huge eps and zero eps") {
  CounterRng rng(9);
  const Bounds b{0, 1};
  const auto mu = random_measure(3, 2, b, rng);
  const auto grid = synthetic::random_paths(5, 2, 1, b, rng);
  const auto f = ObjectiveSpec::linear_relu({0.6, 0.4}, 0.1);
  const auto cost = CostSpec::scaled_quadratic(1.0);

  const auto fvals = objective_values(f, grid);
  const double fmax = *std::max_element(fvals.begin(), fvals.end());
  const auto relaxed = primal_ot_lp(mu, grid, f, cost, 1e6);
  CHECK(relaxed.value == doctest::Approx(fmax).epsilon(1e-9));

  // eps = 0 with the atoms inside the grid pins the identity transport.
  std::vector<double> grid2_data(mu.support().data());
  grid2_data.insert(grid2_data.end(), grid.data().begin(), grid.data().end());
  const PathBatch grid2(grid2_data, mu.size() + grid.num_paths(), 2, 1, b);
  const auto pinned = primal_ot_lp(mu, grid2, f, cost, 0.0);
  CHECK(pinned.value == doctest::Approx(expected_value(f, mu)).epsilon(1e-9));

  // Budget below the minimum achievable cost is a typed infeasibility.
  try {
    primal_ot_lp(mu, grid, f,
                 CostSpec::pair_table(std::vector<double>(3 * 5, 1.0), 3, 5),
                 0.5);
    CHECK(false);
  } catch (const InfeasibleError& e) {
    CHECK(e.constraint_class == "transport_budget");
  }
}

TEST_CASE("example1 primal values: cot -1, ot -0.2") {
  const auto ex = synthetic::example1();
  const auto cot = primal_cot_lp(ex.mu, ex.grid, ex.f, ex.cost, ex.eps);
  CHECK(cot.value == doctest::Approx(-1.0).epsilon(1e-10));
  // Worst case is supported on y_1 = -1.
  for (int n = 0; n < cot.worst.size(); ++n)
    CHECK(cot.worst.support().at(n, 0, 0) == -1.0);
  CHECK(verify_causality(cot.plan, ex.mu, 1e-8));

  const auto ot = primal_ot_lp(ex.mu, ex.grid, ex.f, ex.cost, ex.eps);
  CHECK(ot.value == doctest::Approx(-0.2).epsilon(1e-9));
  CHECK(cot.value <= ot.value + 1e-12);
}

TEST_CASE("example1 ot primal matches the lattice enumeration oracle") {
  const auto ex = synthetic::example1();
  const auto fvals = objective_values(ex.f, ex.grid);
  const int G = ex.grid.num_paths();
  const int R = 30;
  double best = -1e300;
  oracle::for_each_composition(R, G, [&](const std::vector<int>& counts) {
    std::vector<double> w(G);
    std::vector<double> data;
    std::vector<double> wkeep;
    for (int j = 0; j < G; ++j) w[j] = static_cast<double>(counts[j]) / R;
    // Build the candidate measure on its positive-mass support.
    for (int j = 0; j < G; ++j) {
      if (counts[j] == 0) continue;
      const auto p = ex.grid.path(j);
      data.insert(data.end(), p.begin(), p.end());
      wkeep.push_back(w[j]);
    }
    double acc = 0;
    for (std::size_t i = 0; i + 1 < wkeep.size(); ++i) acc += wkeep[i];
    wkeep.back() = 1.0 - acc;
    const DiscreteMeasure nu(
        PathBatch(std::move(data), static_cast<int>(wkeep.size()), 2, 1,
                  ex.bounds),
        wkeep);
    if (ot_distance_lp(ex.mu, nu, ex.cost).value > ex.eps + 1e-12) return;
    double val = 0.0;
    for (int j = 0, k = 0; j < G; ++j)
      if (counts[j] > 0) val += wkeep[k++] * fvals[j];
    best = std::max(best, val);
  });
  CHECK(best == doctest::Approx(-0.2).epsilon(1e-9));
  const auto ot = primal_ot_lp(ex.mu, ex.grid, ex.f, ex.cost, ex.eps);
  CHECK(ot.value == doctest::Approx(best).epsilon(1e-7));
}

TEST_CASE("zero radius: causality alone can make the ball empty") {
  const auto ex = synthetic::example1();
  // Plain transport at eps = 0 is feasible through the anticipative map
  // y_1 = x_2 (zero indicator cost), worth 0.2 - 0.8 = -0.6.
  const auto ot = primal_ot_lp(ex.mu, ex.grid, ex.f, ex.cost, 0.0);
  CHECK(ot.value == doctest::Approx(-0.6).epsilon(1e-9));
  // The causal ball at eps = 0 is empty: no causal plan avoids the cost.
  CHECK_THROWS_AS(primal_cot_lp(ex.mu, ex.grid, ex.f, ex.cost, 0.0),
                  InfeasibleError);
}

TEST_CASE("example2 analogue: cot primal stays zero for any K") {
  const auto ex = synthetic::example1();
  for (double K : {0.0, 10.0, 1000.0}) {
    const auto f2 = synthetic::example2_objective(K, ex.grid);
    const auto res = primal_cot_lp(ex.mu, ex.grid, f2, ex.cost, ex.eps);
    CHECK(std::abs(res.value) <= 1e-9);
  }
}

TEST_CASE("separable objective and cost give equal primal values") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto inst = synthetic::separable_random(3, 2 + seed % 2, seed);
    for (double eps : {0.05, 0.2}) {
      const auto ot = primal_ot_lp(inst.mu, inst.grid, inst.f, inst.cost, eps);
      const auto cot = primal_cot_lp(inst.mu, inst.grid, inst.f, inst.cost, eps);
      CHECK(std::abs(ot.value - cot.value) <= 1e-7);
    }
  }
}

TEST_CASE("ordering and monotonicity across radii") {
  CounterRng rng(31);
  const Bounds b{0, 1};
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(4));
    const int T = 2 + static_cast<int>(rng.next_below(2));
    const auto mu = random_measure(n, T, b, rng);
    const auto nu = random_measure(3, T, b, rng);
    const auto cost = trial % 2 ? CostSpec::l1() : CostSpec::scaled_quadratic(1.0);
    CHECK(cot_distance_lp(mu, nu, cost).value >=
          ot_distance_lp(mu, nu, cost).value - 1e-7);

    std::vector<double> grid_data(mu.support().data());
    const auto extra = synthetic::random_paths(2, T, 1, b, rng);
    grid_data.insert(grid_data.end(), extra.data().begin(), extra.data().end());
    const PathBatch grid(grid_data, n + 2, T, 1, b);
    std::vector<double> a(T, 1.0 / T);
    const auto f = ObjectiveSpec::linear_relu(a, 0.1);

    double prev_ot = -1e300, prev_cot = -1e300;
    for (double eps : {0.0, 0.05, 0.15, 0.4}) {
      const auto ot = primal_ot_lp(mu, grid, f, cost, eps);
      const auto cot = primal_cot_lp(mu, grid, f, cost, eps);
      CHECK(cot.value <= ot.value + 1e-7);
      CHECK(ot.value >= prev_ot - 1e-7);
      CHECK(cot.value >= prev_cot - 1e-7);
      prev_ot = ot.value;
      prev_cot = cot.value;
    }
  }
}

TEST_CASE("returned plans satisfy constraints and reproduce their value") {
  CounterRng rng(41);
  const Bounds b{0, 1};
  const auto mu = random_measure(4, 2, b, rng);
  std::vector<double> grid_data(mu.support().data());
  const auto extra = synthetic::random_paths(2, 2, 1, b, rng);
  grid_data.insert(grid_data.end(), extra.data().begin(), extra.data().end());
  const PathBatch grid(grid_data, 6, 2, 1, b);
  const auto f = ObjectiveSpec::linear_relu({0.5, 0.5}, 0.2);
  const auto cost = CostSpec::scaled_quadratic(1.0);

  const auto res = primal_cot_lp(mu, grid, f, cost, 0.1);
  // Row marginals match mu exactly (Coupling construction enforces 1e-9).
  const auto fvals = objective_values(f, grid);
  double re_value = 0.0;
  for (int j = 0; j < grid.num_paths(); ++j) {
    double col = 0.0;
    for (int i = 0; i < mu.size(); ++i) col += res.plan.at(i, j);
    re_value += col * fvals[j];
  }
  CHECK(re_value == doctest::Approx(res.value).epsilon(1e-9));
  CHECK(verify_causality(res.plan, mu, 1e-8));
  const auto costs = cost_matrix(cost, mu.support(), grid);
  CHECK(res.plan.contract(costs) <= 0.1 + 1e-8);
}

TEST_CASE("grid refinement keeps example1 primal values") {
  const auto ex = synthetic::example1();
  // Add midpoints: y coordinates {-1, 0, 1}^2.
  std::vector<double> data;
  for (double a : {-1.0, 0.0, 1.0})
    for (double c : {-1.0, 0.0, 1.0}) {
      data.push_back(a);
      data.push_back(c);
    }
  const PathBatch fine(data, 9, 2, 1, ex.bounds);
  const auto coarse_ot = primal_ot_lp(ex.mu, ex.grid, ex.f, ex.cost, ex.eps);
  const auto fine_ot = primal_ot_lp(ex.mu, fine, ex.f, ex.cost, ex.eps);
  CHECK(fine_ot.value == doctest::Approx(coarse_ot.value).epsilon(1e-9));
  const auto coarse_cot = primal_cot_lp(ex.mu, ex.grid, ex.f, ex.cost, ex.eps);
  const auto fine_cot = primal_cot_lp(ex.mu, fine, ex.f, ex.cost, ex.eps);
  CHECK(fine_cot.value == doctest::Approx(coarse_cot.value).epsilon(1e-9));
}
