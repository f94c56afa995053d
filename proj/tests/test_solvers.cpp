#include <doctest.h>

#include <cmath>

#include "cotdre/solvers.hpp"
#include "cotdre/synthetic.hpp"

using namespace cotdre;

namespace {

// The piecewise example1 dual with gamma' == 0 and exact inner sup over
// {-1, 1}: g(lambda) = 0.2 lambda + 0.2*1 + 0.8*max(-1, 1 - lambda).
double example1_piecewise_dual(double lambda) {
  return 0.2 * lambda + 0.2 * 1.0 + 0.8 * std::max(-1.0, 1.0 - lambda);
}

GdaConfig example1_gda_config(int L, long steps, std::uint64_t seed) {
  GdaConfig cfg;
  cfg.outer_steps = steps;
  cfg.L = L;
  cfg.inner_mode = GdaConfig::InnerMode::Grid;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("dual_objective_cot closed forms") {
  const auto ex = synthetic::example1();

  // y_n = x_n with a diagonal-free cost: lambda*eps + E[f].
  DualState st;
  st.lambda = 3.0;
  st.T = 2;
  st.d = 1;
  st.y = ex.mu.support().data();
  const auto quad = CostSpec::scaled_quadratic(100.0);
  CHECK(dual_objective_cot(st, ex.mu, ex.f, quad, 0.2, 100.0, 1e-6) ==
        doctest::Approx(3.0 * 0.2 + expected_value(ex.f, ex.mu)));

  // lambda = 0 with candidates at the grid argmax: eps drops out.
  DualState st0;
  st0.lambda = 0.0;
  st0.T = 2;
  st0.d = 1;
  st0.y = {1.0, 1.0, 1.0, 1.0};  // argmax of f = y_1 over the grid
  const double v1 = dual_objective_cot(st0, ex.mu, ex.f, ex.cost, 0.2, 100.0, 1e-6);
  const double v2 = dual_objective_cot(st0, ex.mu, ex.f, ex.cost, 17.0, 100.0, 1e-6);
  CHECK(v1 == doctest::Approx(1.0));
  CHECK(v1 == doctest::Approx(v2));

  // Piecewise dual at several lambdas with exact inner grid sup.
  for (double lam : {0.0, 0.5, 1.0, 2.0, 3.0, 6.0}) {
    DualState stl;
    stl.lambda = lam;
    stl.T = 2;
    stl.d = 1;
    stl.y.resize(4);
    // Inner argmax per atom over the grid.
    for (int n = 0; n < 2; ++n) {
      double best = -1e300;
      int best_j = 0;
      for (int j = 0; j < ex.grid.num_paths(); ++j) {
        const double v =
            eval_objective(ex.f, ex.grid.path(j), 2, 1) -
            lam * eval_cost(ex.cost, ex.mu.support().path(n), ex.grid.path(j), 2, 1);
        if (v > best + 1e-15) {
          best = v;
          best_j = j;
        }
      }
      const auto yp = ex.grid.path(best_j);
      std::copy(yp.begin(), yp.end(), stl.y.begin() + 2 * n);
    }
    CHECK(dual_objective_cot(stl, ex.mu, ex.f, ex.cost, ex.eps, 100.0, 1e-6) ==
          doctest::Approx(example1_piecewise_dual(lam)).epsilon(1e-12));
  }
}

TEST_CASE("lambda_grid_dual examples") {
  const auto ex = synthetic::example1();
  std::vector<double> grid;
  for (int k = 0; k <= 100; ++k) grid.push_back(0.1 * k);  // 0, 0.1, ..., 10
  const auto res = lambda_grid_dual(ex.mu, ex.grid, ex.f, ex.cost, ex.eps, grid);
  CHECK(res.value == doctest::Approx(-0.2).epsilon(1e-9));
  CHECK(res.lambda_star == doctest::Approx(2.0));

  // eps = 0, c(x,x) = 0, atoms inside the grid, large lambdas pin y = x.
  CounterRng rng(3);
  const Bounds b{0, 1};
  auto support = synthetic::random_paths(3, 2, 1, b, rng);
  const DiscreteMeasure mu = DiscreteMeasure::uniform(support);
  std::vector<double> gdata(support.data());
  const auto extra = synthetic::random_paths(3, 2, 1, b, rng);
  gdata.insert(gdata.end(), extra.data().begin(), extra.data().end());
  const PathBatch ygrid(gdata, 6, 2, 1, b);
  const auto f = ObjectiveSpec::linear_relu({0.5, 0.5}, 0.2);
  std::vector<double> lambdas{0.0, 1.0, 10.0, 100.0, 1e4, 1e6};
  const auto pinned = lambda_grid_dual(mu, ygrid, f, CostSpec::scaled_quadratic(1.0),
                                       0.0, lambdas);
  CHECK(pinned.value == doctest::Approx(expected_value(f, mu)).epsilon(1e-4));

  // Constant objective: value = m for any eps.
  const auto constant = ObjectiveSpec::linear_relu({0.0, 0.0}, 0.75);
  for (double eps : {0.0, 0.3, 5.0}) {
    const auto cres = lambda_grid_dual(mu, ygrid, constant,
                                       CostSpec::scaled_quadratic(1.0), eps,
                                       lambdas);
    CHECK(cres.value == doctest::Approx(0.75).epsilon(1e-12));
  }
  CHECK_THROWS_AS(lambda_grid_dual(mu, ygrid, f, CostSpec::l1(), 0.1, {}),
                  ParameterError);
}

TEST_CASE("gda in ot mode tracks the lambda-grid dual on example1") {
  const auto ex = synthetic::example1();
  const auto cfg = example1_gda_config(0, 1500, 11);
  const auto rep = solve_dual_cot_gda(ex.mu, ex.f, ex.cost, ex.eps, cfg, &ex.grid);
  REQUIRE(rep.iterations == 1500);
  std::vector<double> lgrid;
  for (int k = 0; k <= 1000; ++k) lgrid.push_back(0.01 * k);
  const auto oracle = lambda_grid_dual(ex.mu, ex.grid, ex.f, ex.cost, ex.eps, lgrid);
  CHECK(std::abs(rep.final_dual() - oracle.value) <= 0.05);
  // Weak duality against the exact primal at every iterate.
  const double primal = primal_ot_lp(ex.mu, ex.grid, ex.f, ex.cost, ex.eps).value;
  for (double v : rep.dual) CHECK(v >= primal - 1e-6);
}

TEST_CASE("gda with test functions tightens below the ot dual") {
  const auto ex = synthetic::example1();
  const auto ot_rep =
      solve_dual_cot_gda(ex.mu, ex.f, ex.cost, ex.eps, example1_gda_config(0, 1200, 1),
                         &ex.grid);
  const auto cot_rep =
      solve_dual_cot_gda(ex.mu, ex.f, ex.cost, ex.eps, example1_gda_config(2, 1200, 1),
                         &ex.grid);
  const double primal = primal_cot_lp(ex.mu, ex.grid, ex.f, ex.cost, ex.eps).value;
  for (double v : cot_rep.dual) CHECK(v >= primal - 1e-6);
  CHECK(cot_rep.final_dual() <= ot_rep.final_dual() - 0.1);
  // Lambda stays nonnegative and candidates in bounds throughout.
  for (double l : cot_rep.lambda) CHECK(l >= 0.0);
  REQUIRE(cot_rep.final_measure.has_value());
  for (double v : cot_rep.final_measure->support().data()) {
    CHECK(v >= ex.bounds.lo);
    CHECK(v <= ex.bounds.hi);
  }
}

TEST_CASE("gda with huge radius sends lambda to zero") {
  const auto ex = synthetic::example1();
  GdaConfig cfg = example1_gda_config(0, 400, 5);
  const double eps = 50.0;
  const auto rep = solve_dual_cot_gda(ex.mu, ex.f, ex.cost, eps, cfg, &ex.grid);
  CHECK(rep.lambda.back() <= 1e-2);
  // Unconstrained value: E over atoms of max_grid f = 1.
  CHECK(rep.final_dual() == doctest::Approx(1.0).epsilon(0.05));
  CHECK(rep.converged);
}

TEST_CASE("gda reports are deterministic given seed and config") {
  const auto ex = synthetic::example1();
  const auto cfg = example1_gda_config(2, 120, 42);
  const auto r1 = solve_dual_cot_gda(ex.mu, ex.f, ex.cost, ex.eps, cfg, &ex.grid);
  const auto r2 = solve_dual_cot_gda(ex.mu, ex.f, ex.cost, ex.eps, cfg, &ex.grid);
  CHECK(r1.to_json_string() == r2.to_json_string());
  const auto cfg2 = example1_gda_config(2, 120, 43);
  const auto r3 = solve_dual_cot_gda(ex.mu, ex.f, ex.cost, ex.eps, cfg2, &ex.grid);
  CHECK(r1.to_json_string() != r3.to_json_string());
}

TEST_CASE("duality gap grows with K while the primal stays zero") {
  const auto ex = synthetic::example1();
  double prev_dual = -1e300;
  for (double K : {10.0, 100.0, 1000.0}) {
    const auto f2 = synthetic::example2_objective(K, ex.grid);
    const double primal = primal_cot_lp(ex.mu, ex.grid, f2, ex.cost, ex.eps).value;
    CHECK(std::abs(primal) <= 1e-9);
    GdaConfig cfg = example1_gda_config(2, 300, 7);
    // Tight truncation: |h| and |M| stay small, so the family cannot absorb
    // the K-scale spike and the gap must open.
    cfg.clamp = {-1.0, 1.0};
    cfg.divergence_guard = 1e9;
    const auto rep = solve_dual_cot_gda(ex.mu, f2, ex.cost, ex.eps, cfg, &ex.grid);
    CHECK(rep.final_dual() > prev_dual);
    prev_dual = rep.final_dual();
  }
  // Linear growth: at K = 1000 the dual is far above the primal.
  CHECK(prev_dual >= 50.0);
}

TEST_CASE("gradient-mode inner ascent improves smooth instances") {
  CounterRng rng(3);
  const Bounds b{0, 1};
  auto support = synthetic::random_paths(4, 3, 1, b, rng);
  const auto mu = DiscreteMeasure::uniform(std::move(support));
  const auto f = ObjectiveSpec::linear_relu({1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.0);
  const auto cost = CostSpec::scaled_quadratic(100.0);
  GdaConfig cfg;
  cfg.outer_steps = 300;
  cfg.inner_steps = 5;
  cfg.L = 0;
  cfg.seed = 9;
  cfg.inner_mode = GdaConfig::InnerMode::Gradient;
  const auto rep = solve_dual_cot_gda(mu, f, cost, 0.3, cfg, nullptr);
  REQUIRE(rep.iterations == 300);
  // The unconstrained supremum over the box is f at the all-ones path = 1;
  // with eps = 0.3 and tiny quadratic cost the dual should approach it.
  CHECK(rep.final_dual() > expected_value(f, mu));
  CHECK(rep.final_dual() <= 1.0 + 1e-9);
  for (double l : rep.lambda) CHECK(l >= 0.0);
}

TEST_CASE("scot with a frozen identity generator keeps cost near zero") {
  const Bounds b{0, 1};
  const auto data = synthetic::ar1_vol(24, 3, 5, b);
  const auto qcfg = QuantizerConfig::make(b, 1, 3, 24);
  const auto mu = adapted_empirical(qcfg, data);

  GeneratorSpec gen;
  gen.sigma2 = 0.0;
  gen.R = DenseNet({3, 3}, {Activation::Identity});  // zero net

  ScotConfig cfg;
  cfg.iterations = 120;
  cfg.batch = 1000;  // full-measure mode
  cfg.L = 0;
  cfg.lr_gen = 0.0;  // frozen
  cfg.sigma2 = 0.0;
  cfg.seed = 3;
  cfg.quantizer_samples = 24;  // match the partition behind mu
  cfg.sinkhorn.tol = 1e-8;
  const auto f = ObjectiveSpec::linear_relu({1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.0);
  const auto cost = CostSpec::scaled_quadratic(100.0);
  const auto rep = solve_scot_gda(mu, gen, f, cost, 0.3, cfg);
  REQUIRE(rep.iterations == 120);
  CHECK(rep.cost.back() <= 0.02);
  // With gamma == 0 and the generated marginal equal to mu, the dual is
  // exactly lambda*eps + E[f] - lambda * E_pi[c]; the residual transport
  // term vanishes with the cost.
  const double target = rep.lambda.back() * 0.3 + expected_value(f, mu) -
                        rep.lambda.back() * rep.cost.back();
  CHECK(std::abs(rep.final_dual() - target) <= 1e-9);
  CHECK(rep.lambda.back() * rep.cost.back() <= 0.2);
}

TEST_CASE("scot stays below cot on a common smooth instance") {
  const Bounds b{0, 1};
  const auto data = synthetic::ar1_vol(16, 3, 11, b);
  const auto qcfg = QuantizerConfig::make(b, 1, 3, 16);
  const auto mu = adapted_empirical(qcfg, data);
  const auto f = ObjectiveSpec::linear_relu({1.0 / 3, 1.0 / 3, 1.0 / 3}, 0.0);
  const auto cost = CostSpec::scaled_quadratic(100.0);
  const double eps = 0.05;

  GdaConfig gda;
  gda.outer_steps = 400;
  gda.inner_steps = 5;
  gda.L = 2;
  gda.seed = 1;
  gda.inner_mode = GdaConfig::InnerMode::Gradient;
  const auto cot_rep = solve_dual_cot_gda(mu, f, cost, eps, gda, nullptr);

  CounterRng grng(21);
  GeneratorSpec gen = GeneratorSpec::make(3, 1, 4, 1e-4, grng);
  const auto pre = pretrain_generator(gen, mu.support(), {300, 0.01, 2});
  ScotConfig cfg;
  cfg.iterations = 400;
  cfg.batch = 1000;
  cfg.L = 2;
  cfg.seed = 2;
  cfg.quantizer_samples = 16;
  cfg.sigma2 = 1e-4;
  const auto scot_rep = solve_scot_gda(mu, pre.generator, f, cost, eps, cfg);
  CHECK(scot_rep.final_dual() <= cot_rep.final_dual() + 0.1);
}

TEST_CASE("pretraining shrinks generator error") {
  const Bounds b{0, 1};
  const auto data = synthetic::ar1_vol(20, 4, 9, b);
  CounterRng rng(33);
  GeneratorSpec gen = GeneratorSpec::make(4, 1, 4, 1e-4, rng);
  // Inflate the residual net so there is something to learn away.
  for (auto& p : gen.R.mutable_params()) p *= 5.0;
  const auto res = pretrain_generator(gen, data, {500, 0.01, 7});
  CHECK(res.final_mse <= 0.5 * res.initial_mse);

  // Zero generator is a fixed point: mse stays zero.
  GeneratorSpec zero;
  zero.sigma2 = 0.0;
  zero.R = DenseNet({4, 4}, {Activation::Identity});
  const auto noop = pretrain_generator(zero, data, {10, 0.01, 7});
  CHECK(noop.initial_mse == 0.0);
  CHECK(noop.final_mse == 0.0);
}

TEST_CASE("rademacher estimators") {
  const Bounds b{0, 1};
  const PathBatch sample({0.2, 0.8}, 2, 1, 1, b);

  // {+c, -c} on N = 2: exact value c/2.
  const double c = 0.7;
  std::vector<Hypothesis> pm{{[c](std::span<const double>) { return c; }},
                             {[c](std::span<const double>) { return -c; }}};
  CHECK(rademacher_exact(pm, sample) == doctest::Approx(c / 2));
  // Doubling c doubles the estimate.
  std::vector<Hypothesis> pm2{{[c](std::span<const double>) { return 2 * c; }},
                              {[c](std::span<const double>) { return -2 * c; }}};
  CHECK(rademacher_exact(pm2, sample) == doctest::Approx(c));

  // Singleton set: Monte Carlo estimate concentrates at 0.
  std::vector<Hypothesis> single{
      {[](std::span<const double> x) { return 3.0 * x[0]; }}};
  CounterRng rng(55);
  const long draws = 100000;
  const double est = rademacher_estimate(single, sample, draws, rng);
  CHECK(std::abs(est) <= 3.0 * 3.0 / std::sqrt(static_cast<double>(draws)));

  // Parametric mode produces a finite lower estimate.
  CounterRng prng(66);
  DenseNet proto = DenseNet::random({1, 3, 1}, {Activation::Tanh, Activation::Identity}, prng);
  ParametricRademacherConfig pcfg;
  pcfg.draws = 20;
  pcfg.ascent_steps = 10;
  const double pest = rademacher_estimate_parametric(proto, sample, pcfg, prng);
  CHECK(std::isfinite(pest));
}

TEST_CASE("weak duality on random grid instances") {
  CounterRng rng(77);
  const Bounds b{0, 1};
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(3));
    auto support = synthetic::random_paths(n, 2, 1, b, rng);
    const auto mu = DiscreteMeasure::uniform(std::move(support));
    std::vector<double> gdata(mu.support().data());
    const auto extra = synthetic::random_paths(3, 2, 1, b, rng);
    gdata.insert(gdata.end(), extra.data().begin(), extra.data().end());
    const PathBatch grid(gdata, n + 3, 2, 1, b);
    const auto f = ObjectiveSpec::linear_relu({0.5, 0.5}, 0.1);
    const auto cost = CostSpec::l1();
    const double eps = 0.1;
    const double primal = primal_cot_lp(mu, grid, f, cost, eps).value;
    GdaConfig cfg;
    cfg.outer_steps = 250;
    cfg.L = 2;
    cfg.seed = 100 + trial;
    cfg.inner_mode = GdaConfig::InnerMode::Grid;
    const auto rep = solve_dual_cot_gda(mu, f, cost, eps, cfg, &grid);
    for (double v : rep.dual) CHECK(v >= primal - 1e-6);
  }
}
