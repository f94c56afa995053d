#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cotdre/quantize.hpp"
#include "cotdre/rng.hpp"
#include "cotdre/synthetic.hpp"

using namespace cotdre;

TEST_CASE("QuantizerConfig exponent rule and cell counts") {
  const auto c1 = QuantizerConfig::make(Bounds{0, 1}, 1, 3, 16);
  CHECK(c1.q == doctest::Approx(0.25));
  CHECK(c1.cells_per_axis == 2);  // 16^(1/4) = 2 exactly

  const auto c2 = QuantizerConfig::make(Bounds{0, 1}, 2, 2, 100);
  CHECK(c2.q == doctest::Approx(0.25));
  CHECK(c2.cells_per_axis == 4);  // ceil(100^0.25) = ceil(3.162...) = 4

  CHECK_THROWS_AS(QuantizerConfig::make(Bounds{0, 1}, 1, 1, 0), ParameterError);
}

TEST_CASE("quantize_point examples") {
  const auto cfg = QuantizerConfig::make(Bounds{0, 1}, 1, 1, 4);  // 2 cells
  REQUIRE(cfg.cells_per_axis == 2);
  const double u1 = 0.3;
  CHECK(quantize_point(cfg, {&u1, 1})[0] == doctest::Approx(0.25));
  const double u2 = 1.0;  // top face belongs to the last cube
  CHECK(quantize_point(cfg, {&u2, 1})[0] == doctest::Approx(0.75));
  const double u3 = 0.25;  // centers are fixed points
  CHECK(quantize_point(cfg, {&u3, 1})[0] == 0.25);
  const double u4 = 0.5;  // shared boundary -> cube whose lower face it is
  CHECK(quantize_point(cfg, {&u4, 1})[0] == doctest::Approx(0.75));
  const double bad = 1.5;
  CHECK_THROWS_AS(quantize_point(cfg, {&bad, 1}), DomainError);
}

TEST_CASE("displacement never exceeds half the edge") {
  CounterRng rng(3);
  for (int trial = 0; trial < 6; ++trial) {
    const Bounds b{rng.uniform(-3, 0), rng.uniform(1, 4)};
    const auto cfg =
        QuantizerConfig::make(b, 1, 2 + trial % 3, 10 + 37 * trial);
    const double bound = 0.5 * ((b.hi - b.lo) / cfg.cells_per_axis);
    for (int k = 0; k < 20000; ++k) {
      const double u = rng.uniform(b.lo, b.hi);
      const double q = quantize_point(cfg, {&u, 1})[0];
      CHECK(std::abs(u - q) <= bound);
    }
    // At the exact interval endpoints the representable-center grid can sit
    // up to a few ulps past the half-edge mark; allow that much and no more.
    for (double u : {b.lo, b.hi}) {
      const double q = quantize_point(cfg, {&u, 1})[0];
      const double ulps = 4.0 * std::abs(u) * 2.220446049250313e-16;
      CHECK(std::abs(u - q) <= bound + ulps);
    }
  }
}

TEST_CASE("quantize_point handles higher-dimensional coordinates") {
  const auto cfg = QuantizerConfig::make(Bounds{0, 1}, 2, 1, 16);
  REQUIRE(cfg.cells_per_axis == 4);  // q = 1/(dT) = 1/2, ceil(16^(1/2)) = 4
  const std::vector<double> u{0.1, 0.9};
  const auto q = quantize_point(cfg, u);
  CHECK(q[0] == doctest::Approx(0.125));
  CHECK(q[1] == doctest::Approx(0.875));
  const std::vector<double> bad{0.1};
  CHECK_THROWS_AS(quantize_point(cfg, bad), DimensionError);
}

TEST_CASE("adapted_empirical merges duplicates") {
  const Bounds b{0, 1};
  const auto cfg = QuantizerConfig::make(b, 1, 1, 3);
  REQUIRE(cfg.cells_per_axis == 2);  // ceil(3^(1/2)) = 2

  // {0.1, 0.4, 0.9} -> centers {0.25, 0.25, 0.75}.
  const PathBatch paths({0.1, 0.4, 0.9}, 3, 1, 1, b);
  const auto m = adapted_empirical(cfg, paths);
  REQUIRE(m.size() == 2);
  CHECK(m.support().at(0, 0, 0) == doctest::Approx(0.25));
  CHECK(m.weights()[0] == doctest::Approx(2.0 / 3.0));
  CHECK(m.support().at(1, 0, 0) == doctest::Approx(0.75));
  CHECK(m.weights()[1] == doctest::Approx(1.0 / 3.0));

  // Identical paths merge to a single atom.
  const PathBatch same({0.3, 0.3, 0.31, 0.31}, 2, 2, 1, b);
  const auto cfg2 = QuantizerConfig::make(b, 1, 2, 2);
  const auto m2 = adapted_empirical(cfg2, same);
  CHECK(m2.size() == 1);
  CHECK(m2.weights()[0] == 1.0);

  // All paths in distinct cells stay uniform.
  const auto cfg3 = QuantizerConfig::make(b, 1, 1, 100);  // many cells
  const PathBatch spread({0.05, 0.35, 0.65, 0.95}, 4, 1, 1, b);
  const auto m3 = adapted_empirical(cfg3, spread);
  CHECK(m3.size() == 4);
  for (double w : m3.weights()) CHECK(w == doctest::Approx(0.25));

  // Support atoms are pairwise distinct after merging.
  CounterRng rng(8);
  const auto noisy = synthetic::random_paths(50, 2, 1, b, rng);
  const auto cfg4 = QuantizerConfig::make(b, 1, 2, 50);
  const auto m4 = adapted_empirical(cfg4, noisy);
  for (int i = 0; i < m4.size(); ++i)
    for (int j = i + 1; j < m4.size(); ++j) {
      const auto a1 = m4.support().path(i);
      const auto a2 = m4.support().path(j);
      CHECK_FALSE(std::equal(a1.begin(), a1.end(), a2.begin()));
    }
}

TEST_CASE("conditional_kernel modes and recomposition") {
  const Bounds b{0, 1};
  const auto cfg = QuantizerConfig::make(b, 1, 2, 4);
  REQUIRE(cfg.cells_per_axis == 2);

  const PathBatch paths({0.1, 0.2, 0.4, 0.9, 0.9, 0.9}, 3, 2, 1, b);
  const auto ker = conditional_kernel(cfg, paths, 1, KernelMode::Quantized);
  REQUIRE(ker.num_cells() == 2);

  const double lo_prefix = 0.1;
  const auto& cell_lo = ker.at_prefix(cfg, {&lo_prefix, 1});
  REQUIRE(cell_lo.size() == 2);
  CHECK(cell_lo.support().at(0, 0, 0) == doctest::Approx(0.25));
  CHECK(cell_lo.weights()[0] == doctest::Approx(0.5));
  CHECK(cell_lo.support().at(1, 0, 0) == doctest::Approx(0.75));

  const double hi_prefix = 0.9;
  const auto& cell_hi = ker.at_prefix(cfg, {&hi_prefix, 1});
  CHECK(cell_hi.size() == 1);
  CHECK(cell_hi.support().at(0, 0, 0) == doctest::Approx(0.75));
  CHECK(cell_hi.weights()[0] == 1.0);

  const double empty = 0.6;  // occupied cell ids are {0}, {1}; 0.6 -> cell 1
  CHECK_NOTHROW(ker.at_prefix(cfg, {&empty, 1}));
  // A kernel over a single-cell prefix has no entry for the other cell.
  const PathBatch one_side({0.1, 0.2, 0.2, 0.9}, 2, 2, 1, b);
  const auto ker2 = conditional_kernel(cfg, one_side, 1, KernelMode::Quantized);
  const double other = 0.9;
  CHECK_THROWS_AS(ker2.at_prefix(cfg, {&other, 1}), MissingCellError);

  // Every prefix alone in its cell: all kernel entries are point masses.
  const auto fine_cfg = QuantizerConfig::make(b, 1, 2, 100000);
  const auto dirac = conditional_kernel(fine_cfg, paths, 1, KernelMode::Identity);
  REQUIRE(dirac.num_cells() == 3);
  for (const auto& [cell, m] : dirac.cells()) {
    CHECK(m.size() == 1);
    CHECK(m.weights()[0] == 1.0);
  }

  // Identity mode keeps raw suffixes.
  const auto id_ker = conditional_kernel(cfg, paths, 1, KernelMode::Identity);
  const auto& id_lo = id_ker.at_prefix(cfg, {&lo_prefix, 1});
  std::set<double> suffixes;
  for (int n = 0; n < id_lo.size(); ++n) suffixes.insert(id_lo.support().at(n, 0, 0));
  CHECK(suffixes == std::set<double>{0.2, 0.9});
}

TEST_CASE("kernel entries weighted by prefix mass recompose the suffix marginal") {
  CounterRng rng(17);
  const Bounds b{0, 1};
  const int N = 60, T = 3;
  const auto paths = synthetic::random_paths(N, T, 1, b, rng);
  const auto cfg = QuantizerConfig::make(b, 1, T, N);
  for (int t = 1; t <= T - 1; ++t) {
    const auto ker = conditional_kernel(cfg, paths, t, KernelMode::Quantized);
    // Accumulate P(cell) * kernel and compare against the quantized suffix
    // empirical measure.
    std::map<std::vector<double>, double> recomposed;
    double cells_mass = 0.0;
    const auto q = quantize_paths(cfg, paths);
    std::map<std::vector<int>, int> occupancy;
    for (int n = 0; n < N; ++n) {
      const auto prefix = paths.path(n).subspan(0, static_cast<std::size_t>(t));
      occupancy[path_cell_indices(cfg, prefix)]++;
    }
    for (const auto& [cell, count] : occupancy) {
      const double pmass = static_cast<double>(count) / N;
      cells_mass += pmass;
      const auto& m = ker.at(cell);
      for (int j = 0; j < m.size(); ++j) {
        const auto sp = m.support().path(j);
        recomposed[std::vector<double>(sp.begin(), sp.end())] +=
            pmass * m.weights()[j];
      }
    }
    CHECK(cells_mass == doctest::Approx(1.0).epsilon(1e-12));
    std::map<std::vector<double>, double> marginal;
    for (int n = 0; n < N; ++n) {
      const auto suffix = q.path(n).subspan(static_cast<std::size_t>(t));
      marginal[std::vector<double>(suffix.begin(), suffix.end())] += 1.0 / N;
    }
    REQUIRE(recomposed.size() == marginal.size());
    for (const auto& [key, mass] : marginal) {
      REQUIRE(recomposed.count(key) == 1);
      CHECK(std::abs(recomposed[key] - mass) <= 1e-12);
    }
  }
}

TEST_CASE("cells share atoms under a continuous sampler (smoke)") {
  CounterRng rng(5);
  const Bounds b{0, 1};
  const int N = 400;
  const auto paths = synthetic::random_paths(N, 2, 1, b, rng);
  const auto cfg = QuantizerConfig::make(b, 1, 2, N);
  REQUIRE(cfg.cells_per_axis >= 2);
  const auto m = adapted_empirical(cfg, paths);
  CHECK(m.size() < N);  // collisions must have happened
}

TEST_CASE("rate follows the piecewise definition") {
  CHECK(rate(16, 1, 3) == 0.5);
  CHECK(rate(1, 1, 5) == 1.0);
  CHECK(rate(1, 3, 2) == 1.0);
  CHECK(rate(8, 3, 1) == doctest::Approx(0.5));
  CHECK(rate(100, 2, 2) ==
        doctest::Approx(std::pow(100.0, -0.25) * std::log(101.0)));
  CHECK_THROWS_AS(rate(0, 1, 1), ParameterError);
}

TEST_CASE("radius_schedule") {
  // C = 0 leaves only the concentration term.
  CHECK(radius_schedule(9, 0.5, 2.0, 0.0, 1, 3) ==
        doctest::Approx(std::sqrt(std::log(12.0) / 18.0)));
  // delta = 2T/e makes the log term exactly 1.
  const double delta = 2.0 / std::exp(1.0);
  CHECK(radius_schedule(1, delta, 1.0, 1.0, 1, 1) == doctest::Approx(2.0));
  CHECK_THROWS_AS(radius_schedule(10, 1.5, 1.0, 1.0, 1, 2), ParameterError);
  CHECK_THROWS_AS(radius_schedule(10, 0.0, 1.0, 1.0, 1, 2), ParameterError);
  // Strictly decreasing in N (d = 1 and d = 3).
  for (int d : {1, 3}) {
    double prev = radius_schedule(10, 0.1, 1.0, 1.0, d, 4);
    for (long long n : {100LL, 1000LL}) {
      const double cur = radius_schedule(n, 0.1, 1.0, 1.0, d, 4);
      CHECK(cur < prev);
      prev = cur;
    }
  }
}
