#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cotdre/exact_transport.hpp"
#include "cotdre/measures.hpp"
#include "cotdre/nnet.hpp"
#include "cotdre/quantize.hpp"
#include "cotdre/rng.hpp"
#include "cotdre/sinkhorn.hpp"

namespace cotdre {

// Minimax solver configuration; defaults follow the volatility setup
// (lambda0 10, quadratic scale through CostSpec, batch 100, xi 100,
// eta 1e-6, clamp +-50, h/M learning rate 0.05).
struct GdaConfig {
  long outer_steps = 4000;
  int inner_steps = 5;
  double inner_rel_tol = 1e-6;

  double lambda0 = 10.0;
  double lambda_momentum = 0.9;
  double lambda_denom_slope = 0.1;
  double lambda_denom_base = 10.0;

  int L = 2;
  int hidden = 4;
  double lr_hm = 0.05;
  std::array<double, 2> clamp{-50.0, 50.0};

  double y_step0 = 50.0;
  bool y_normalize = false;
  double y_init_variance = 1e-3;

  double xi = 100.0;
  double eta = 1e-6;

  // Inner maximization: Gradient follows the printed ascent schedule; Grid
  // takes an exact argmax over a finite candidate grid (needed for
  // discontinuous costs whose gradient is zero almost everywhere).
  enum class InnerMode { Gradient, Grid };
  InnerMode inner_mode = InnerMode::Gradient;

  std::uint64_t seed = 0;
  double divergence_guard = 1e6;

  // Convergence declaration over the trailing window of iterates:
  // mean |E_pi[c] - eps| <= cost_band * eps, or mean lambda <= lambda_small.
  double cost_band = 0.05;
  double lambda_small = 1e-2;
  double tail_fraction = 0.1;
};

struct ScotConfig {
  long iterations = 4000;
  int batch = 100;  // >= support size runs the deterministic full-measure mode

  double lambda0 = 10.0;
  double lambda_momentum = 0.9;
  double lambda_denom_slope = 0.1;
  double lambda_denom_base = 10.0;

  int L = 2;
  int hidden = 4;
  double lr_hm = 0.05;
  std::array<double, 2> clamp{-50.0, 50.0};

  int gen_hidden = 4;
  double lr_gen = 0.01;
  std::array<double, 2> gen_clamp{-50.0, 50.0};
  double sigma2 = 1e-3;
  bool quantize_y = true;
  // Sample count behind the partition map; 0 derives it from the batch.
  long quantizer_samples = 0;

  double xi = 100.0;
  double eta = 1e-6;

  SinkhornConfig sinkhorn{};

  long pretrain_steps = 500;
  double pretrain_lr = 0.01;

  std::uint64_t seed = 0;
  double divergence_guard = 1e6;

  double cost_band = 0.05;
  double lambda_small = 1e-2;
  double tail_fraction = 0.1;

  // Optional early exit once the trailing-window diagnostic holds.
  bool early_stop = false;
  long min_iterations = 200;
  int check_every = 25;
};

// Trajectories share one entry per recorded iteration. The dual value
// excludes the xi*p penalty term, which is reported separately.
struct SolverReport {
  std::vector<double> dual;
  std::vector<double> lambda;
  std::vector<double> cost;
  std::vector<double> penalty;
  std::optional<DiscreteMeasure> final_measure;
  bool converged = false;
  std::string reason;
  long iterations = 0;
  double final_dual() const { return dual.empty() ? 0.0 : dual.back(); }
  double final_lambda() const { return lambda.empty() ? 0.0 : lambda.back(); }
  double tail_mean_cost(double fraction) const;
  double tail_mean_lambda(double fraction) const;

  std::string to_json_string() const;
};

// Mutable dual iterate: multiplier, test-function family (empty for plain
// OT), one candidate worst point per reference atom, optimizer states.
struct DualState {
  double lambda = 10.0;
  TestFunctionFamily family;
  std::vector<double> y;  // row-major [n][t][k]
  int T = 0, d = 0;
  MomentumSchedule lambda_opt;
  AdamOptimizer family_opt;
  long iter = 0;

  std::span<const double> candidate(int n) const {
    return {y.data() + static_cast<std::size_t>(n) * T * d,
            static_cast<std::size_t>(T) * d};
  }
};

// lambda*eps + sum_n w_n [f(y_n) - lambda c(x_n, y_n) + gamma'(x_n, y_n)]
// + xi * p(M), evaluated at the state's candidates.
double dual_objective_cot(const DualState& state, const DiscreteMeasure& mu,
                          const ObjectiveSpec& f, const CostSpec& cost,
                          double eps, double xi, double eta);

// Alternating GDA for the COT dual (OT dual when cfg.L == 0). Grid mode
// requires y_grid. The report's dual trajectory is evaluated with the
// martingale-centered test function, which upper-bounds the grid primal at
// every iterate.
SolverReport solve_dual_cot_gda(const DiscreteMeasure& mu_adapted,
                                const ObjectiveSpec& f, const CostSpec& cost,
                                double eps, const GdaConfig& cfg,
                                const PathBatch* y_grid = nullptr);

// Sinkhorn-inner GDA against a structural generator.
SolverReport solve_scot_gda(const DiscreteMeasure& mu_adapted,
                            const GeneratorSpec& gen, const ObjectiveSpec& f,
                            const CostSpec& cost, double eps,
                            const ScotConfig& cfg);

struct LambdaGridResult {
  double value = 0.0;
  double lambda_star = 0.0;
};

// Exact dual upper bound on finite grids:
// min over lambda_grid of lambda*eps + sum_n w_n max_{y in grid}
// [f(y) - lambda c(x_n, y)].
LambdaGridResult lambda_grid_dual(const DiscreteMeasure& mu,
                                  const PathBatch& y_grid,
                                  const ObjectiveSpec& f, const CostSpec& cost,
                                  double eps,
                                  std::span<const double> lambda_grid);

struct PretrainConfig {
  long steps = 500;
  double lr = 0.01;
  std::uint64_t seed = 1;
};

struct PretrainResult {
  GeneratorSpec generator;
  double initial_mse = 0.0;
  double final_mse = 0.0;
};

// Fit the residual net so generated paths track the data in mean square
// (noise active). Generated paths are projected into the data bounds when
// the result is used to build measures, not here.
PretrainResult pretrain_generator(const GeneratorSpec& gen,
                                  const PathBatch& data,
                                  const PretrainConfig& cfg);

using Hypothesis = std::function<double(std::span<const double>)>;

// Monte Carlo empirical Rademacher complexity of a finite hypothesis set:
// average over sign draws of sup_g (1/N) sum_i sigma_i g(x_i).
double rademacher_estimate(const std::vector<Hypothesis>& hypotheses,
                           const PathBatch& sample, long draws,
                           CounterRng& rng);

// Exact value by enumerating all 2^N sign vectors (N <= 24).
double rademacher_exact(const std::vector<Hypothesis>& hypotheses,
                        const PathBatch& sample);

struct ParametricRademacherConfig {
  long draws = 100;
  int ascent_steps = 50;
  double lr = 0.05;
};

// Parametric mode: per sign draw, runs ascent steps from the prototype's
// initialization; a lower estimate of the true supremum.
double rademacher_estimate_parametric(const DenseNet& prototype,
                                      const PathBatch& sample,
                                      const ParametricRademacherConfig& cfg,
                                      CounterRng& rng);

}  // namespace cotdre
