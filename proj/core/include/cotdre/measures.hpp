#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cotdre/errors.hpp"

namespace cotdre {

class DenseNet;  // nnet.hpp

struct Bounds {
  double lo = 0.0;
  double hi = 1.0;
};

// N sample paths, each T steps of d-dimensional vectors, every coordinate in
// [lo, hi]. Immutable after construction; storage is row-major [n][t][k].
class PathBatch {
public:
  PathBatch(std::vector<double> data, int num_paths, int num_steps, int dim,
            Bounds bounds);

  int num_paths() const { return n_; }
  int num_steps() const { return t_; }
  int dim() const { return d_; }
  Bounds bounds() const { return bounds_; }
  int path_len() const { return t_ * d_; }

  std::span<const double> path(int n) const {
    return {data_.data() + static_cast<std::size_t>(n) * path_len(),
            static_cast<std::size_t>(path_len())};
  }
  double at(int n, int t, int k) const {
    return data_[(static_cast<std::size_t>(n) * t_ + t) * d_ + k];
  }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const PathBatch& other) const {
    return t_ == other.t_ && d_ == other.d_;
  }

private:
  std::vector<double> data_;
  int n_ = 0, t_ = 0, d_ = 0;
  Bounds bounds_;
};

// Finite support plus probability weights (sum to 1 within 1e-12, all
// nonnegative).
class DiscreteMeasure {
public:
  DiscreteMeasure(PathBatch support, std::vector<double> weights);

  const PathBatch& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  int size() const { return support_.num_paths(); }

  static DiscreteMeasure uniform(PathBatch support);

  static constexpr double kWeightTol = 1e-12;

private:
  PathBatch support_;
  std::vector<double> weights_;
};

// Transport plan between two discrete measures. Entries nonnegative; row and
// column sums must match the marginals within 1e-9 (iterative solvers produce
// small residues, exact solvers none).
class Coupling {
public:
  Coupling(std::vector<double> pi, DiscreteMeasure row_marginal,
           DiscreteMeasure col_marginal);

  double at(int i, int j) const {
    return pi_[static_cast<std::size_t>(i) * cols_ + j];
  }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const std::vector<double>& matrix() const { return pi_; }
  const DiscreteMeasure& row_marginal() const { return row_; }
  const DiscreteMeasure& col_marginal() const { return col_; }

  // Weighted sum of an entrywise cost table over the plan.
  double contract(std::span<const double> table) const;

  static constexpr double kMarginalTol = 1e-9;

private:
  std::vector<double> pi_;
  int rows_ = 0, cols_ = 0;
  DiscreteMeasure row_;
  DiscreteMeasure col_;
};

// Ground cost c(x, y) over paths.
struct CostSpec {
  enum class Kind { ScaledQuadratic, L1, Table, IndicatorFeature };

  Kind kind = Kind::ScaledQuadratic;
  double B = 1.0;                  // ScaledQuadratic scale
  std::vector<double> table;       // Table, row-major [i][j]
  int table_rows = 0, table_cols = 0;
  int t_x = 1, t_y = 1;            // IndicatorFeature time indices, 1-based

  static CostSpec scaled_quadratic(double B);
  static CostSpec l1();
  static CostSpec pair_table(std::vector<double> values, int rows, int cols);
  static CostSpec indicator_feature(int t_x, int t_y);

  bool needs_indices() const { return kind == Kind::Table; }
  // Zero at x == y; lets feasibility checks assume identity transport is free.
  bool zero_on_diagonal() const { return kind != Kind::IndicatorFeature && kind != Kind::Table; }
};

// Path functional f(y).
struct ObjectiveSpec {
  enum class Kind { LinearRelu, Coordinate, Table, Network };

  Kind kind = Kind::LinearRelu;
  std::vector<double> a;           // LinearRelu weights, length T
  double b = 0.0;                  // LinearRelu intercept
  int t = 1, k = 1;                // Coordinate indices, 1-based
  std::vector<double> values;      // Table, one entry per grid atom
  std::shared_ptr<const DenseNet> net;  // Network, fixed trained net

  static ObjectiveSpec linear_relu(std::vector<double> a, double b);
  static ObjectiveSpec coordinate(int t, int k);
  static ObjectiveSpec grid_table(std::vector<double> values);
  static ObjectiveSpec network(std::shared_ptr<const DenseNet> net);

  bool needs_indices() const { return kind == Kind::Table; }
};

// c(x, y) for pointwise kinds; Table kind needs indices and throws here.
double eval_cost(const CostSpec& cost, std::span<const double> x,
                 std::span<const double> y, int T, int d);
double eval_cost_indexed(const CostSpec& cost, int i, int j);

// Full pairwise matrix between two supports, row-major [xs][ys]. Table kind
// validates dimensions instead of evaluating.
std::vector<double> cost_matrix(const CostSpec& cost, const PathBatch& xs,
                                const PathBatch& ys);

double eval_objective(const ObjectiveSpec& obj, std::span<const double> y,
                      int T, int d);
double eval_objective_indexed(const ObjectiveSpec& obj, int j);

// f evaluated on every path of a batch (Table kind: the values themselves).
std::vector<double> objective_values(const ObjectiveSpec& obj,
                                     const PathBatch& batch);

// Integral of f against the measure.
double expected_value(const ObjectiveSpec& obj, const DiscreteMeasure& m);

}  // namespace cotdre
