#include "cotdre/measures.hpp"

#include <cmath>
#include <cstdlib>

#include "cotdre/nnet.hpp"

namespace cotdre {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw ParameterError(msg);
}

}  // namespace

PathBatch::PathBatch(std::vector<double> data, int num_paths, int num_steps,
                     int dim, Bounds bounds)
    : data_(std::move(data)), n_(num_paths), t_(num_steps), d_(dim),
      bounds_(bounds) {
  if (n_ < 1 || t_ < 1 || d_ < 1)
    throw DimensionError("PathBatch: N, T, d must all be >= 1");
  if (!(bounds_.lo < bounds_.hi))
    throw ParameterError("PathBatch: bounds must satisfy lo < hi");
  if (data_.size() != static_cast<std::size_t>(n_) * t_ * d_)
    throw DimensionError("PathBatch: data size does not match N*T*d");
  for (double v : data_) {
    if (!std::isfinite(v)) throw NumericError("PathBatch: non-finite coordinate");
    if (v < bounds_.lo || v > bounds_.hi)
      throw DomainError("PathBatch: coordinate outside [lo, hi]");
  }
}

DiscreteMeasure::DiscreteMeasure(PathBatch support, std::vector<double> weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (weights_.size() != static_cast<std::size_t>(support_.num_paths()))
    throw DimensionError("DiscreteMeasure: one weight per support path required");
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw ParameterError("DiscreteMeasure: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightTol)
    throw ParameterError("DiscreteMeasure: weights must sum to 1 within 1e-12");
}

DiscreteMeasure DiscreteMeasure::uniform(PathBatch support) {
  const int n = support.num_paths();
  std::vector<double> w(n, 1.0 / n);
  // Guard against accumulated representation error for odd n.
  double sum = 0.0;
  for (int i = 0; i + 1 < n; ++i) sum += w[i];
  w[n - 1] = 1.0 - sum;
  return DiscreteMeasure(std::move(support), std::move(w));
}

Coupling::Coupling(std::vector<double> pi, DiscreteMeasure row_marginal,
                   DiscreteMeasure col_marginal)
    : pi_(std::move(pi)), rows_(row_marginal.size()), cols_(col_marginal.size()),
      row_(std::move(row_marginal)), col_(std::move(col_marginal)) {
  if (pi_.size() != static_cast<std::size_t>(rows_) * cols_)
    throw DimensionError("Coupling: matrix shape does not match marginals");
  for (double v : pi_) {
    if (!std::isfinite(v)) throw NumericError("Coupling: non-finite entry");
    if (v < 0.0) throw ParameterError("Coupling: negative entry");
  }
  for (int i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (int j = 0; j < cols_; ++j) s += at(i, j);
    if (std::abs(s - row_.weights()[i]) > kMarginalTol)
      throw ParameterError("Coupling: row sum violates row marginal beyond 1e-9");
  }
  for (int j = 0; j < cols_; ++j) {
    double s = 0.0;
    for (int i = 0; i < rows_; ++i) s += at(i, j);
    if (std::abs(s - col_.weights()[j]) > kMarginalTol)
      throw ParameterError("Coupling: column sum violates column marginal beyond 1e-9");
  }
}

double Coupling::contract(std::span<const double> table) const {
  if (table.size() != pi_.size())
    throw DimensionError("Coupling::contract: table shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < pi_.size(); ++k) s += pi_[k] * table[k];
  return s;
}

CostSpec CostSpec::scaled_quadratic(double B) {
  require(B > 0.0, "scaled_quadratic: B must be positive");
  CostSpec c;
  c.kind = Kind::ScaledQuadratic;
  c.B = B;
  return c;
}

CostSpec CostSpec::l1() {
  CostSpec c;
  c.kind = Kind::L1;
  return c;
}

CostSpec CostSpec::pair_table(std::vector<double> values, int rows, int cols) {
  require(rows >= 1 && cols >= 1, "pair_table: empty table");
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw DimensionError("pair_table: values size does not match rows*cols");
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0)
      throw NumericError("pair_table: costs must be finite and >= 0");
  }
  CostSpec c;
  c.kind = Kind::Table;
  c.table = std::move(values);
  c.table_rows = rows;
  c.table_cols = cols;
  return c;
}

CostSpec CostSpec::indicator_feature(int t_x, int t_y) {
  require(t_x >= 1 && t_y >= 1, "indicator_feature: time indices are 1-based");
  CostSpec c;
  c.kind = Kind::IndicatorFeature;
  c.t_x = t_x;
  c.t_y = t_y;
  return c;
}

ObjectiveSpec ObjectiveSpec::linear_relu(std::vector<double> a, double b) {
  ObjectiveSpec o;
  o.kind = Kind::LinearRelu;
  o.a = std::move(a);
  o.b = b;
  return o;
}

ObjectiveSpec ObjectiveSpec::coordinate(int t, int k) {
  require(t >= 1 && k >= 1, "coordinate: indices are 1-based");
  ObjectiveSpec o;
  o.kind = Kind::Coordinate;
  o.t = t;
  o.k = k;
  return o;
}

ObjectiveSpec ObjectiveSpec::grid_table(std::vector<double> values) {
  require(!values.empty(), "grid_table: empty value list");
  ObjectiveSpec o;
  o.kind = Kind::Table;
  o.values = std::move(values);
  return o;
}

ObjectiveSpec ObjectiveSpec::network(std::shared_ptr<const DenseNet> net) {
  require(net != nullptr, "network objective: null net");
  ObjectiveSpec o;
  o.kind = Kind::Network;
  o.net = std::move(net);
  return o;
}

double eval_cost(const CostSpec& cost, std::span<const double> x,
                 std::span<const double> y, int T, int d) {
  if (x.size() != static_cast<std::size_t>(T) * d ||
      y.size() != static_cast<std::size_t>(T) * d)
    throw DimensionError("eval_cost: x and y must both have shape [T][d]");
  switch (cost.kind) {
    case CostSpec::Kind::ScaledQuadratic: {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = x[i] - y[i];
        s += diff * diff;
      }
      return s / cost.B;
    }
    case CostSpec::Kind::L1: {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
      return s;
    }
    case CostSpec::Kind::IndicatorFeature: {
      if (cost.t_x > T || cost.t_y > T)
        throw DimensionError("eval_cost: indicator time index beyond T");
      for (int k = 0; k < d; ++k) {
        if (x[(cost.t_x - 1) * d + k] != y[(cost.t_y - 1) * d + k]) return 1.0;
      }
      return 0.0;
    }
    case CostSpec::Kind::Table:
      throw ParameterError("eval_cost: table cost is indexed, use eval_cost_indexed");
  }
  throw ParameterError("eval_cost: unknown kind");
}

double eval_cost_indexed(const CostSpec& cost, int i, int j) {
  if (cost.kind != CostSpec::Kind::Table)
    throw ParameterError("eval_cost_indexed: cost kind carries no table");
  if (i < 0 || i >= cost.table_rows || j < 0 || j >= cost.table_cols)
    throw DimensionError("eval_cost_indexed: index outside table");
  return cost.table[static_cast<std::size_t>(i) * cost.table_cols + j];
}

std::vector<double> cost_matrix(const CostSpec& cost, const PathBatch& xs,
                                const PathBatch& ys) {
  if (cost.kind == CostSpec::Kind::Table) {
    if (cost.table_rows != xs.num_paths() || cost.table_cols != ys.num_paths())
      throw DimensionError("cost_matrix: table shape does not match supports");
    return cost.table;
  }
  if (!xs.same_shape(ys))
    throw DimensionError("cost_matrix: supports have different (T, d)");
  std::vector<double> m(static_cast<std::size_t>(xs.num_paths()) * ys.num_paths());
  for (int i = 0; i < xs.num_paths(); ++i) {
    for (int j = 0; j < ys.num_paths(); ++j) {
      m[static_cast<std::size_t>(i) * ys.num_paths() + j] =
          eval_cost(cost, xs.path(i), ys.path(j), xs.num_steps(), xs.dim());
    }
  }
  return m;
}

double eval_objective(const ObjectiveSpec& obj, std::span<const double> y,
                      int T, int d) {
  if (y.size() != static_cast<std::size_t>(T) * d)
    throw DimensionError("eval_objective: path must have shape [T][d]");
  switch (obj.kind) {
    case ObjectiveSpec::Kind::LinearRelu: {
      if (obj.a.size() != static_cast<std::size_t>(T))
        throw DimensionError("eval_objective: linear_relu weights must have length T");
      double s = obj.b;
      for (int t = 0; t < T; ++t) {
        double coord_sum = 0.0;
        for (int k = 0; k < d; ++k) coord_sum += y[t * d + k];
        s += obj.a[t] * coord_sum;
      }
      return s > 0.0 ? s : 0.0;
    }
    case ObjectiveSpec::Kind::Coordinate: {
      if (obj.t > T || obj.k > d)
        throw DimensionError("eval_objective: coordinate index beyond shape");
      return y[(obj.t - 1) * d + (obj.k - 1)];
    }
    case ObjectiveSpec::Kind::Network: {
      if (obj.net->input_dim() != static_cast<int>(y.size()))
        throw DimensionError("eval_objective: network input dim mismatch");
      const auto out = obj.net->forward(y);
      if (!std::isfinite(out[0]))
        throw NumericError("eval_objective: network produced non-finite value");
      return out[0];
    }
    case ObjectiveSpec::Kind::Table:
      throw ParameterError("eval_objective: table objective is indexed, use eval_objective_indexed");
  }
  throw ParameterError("eval_objective: unknown kind");
}

double eval_objective_indexed(const ObjectiveSpec& obj, int j) {
  if (obj.kind != ObjectiveSpec::Kind::Table)
    throw ParameterError("eval_objective_indexed: objective kind carries no table");
  if (j < 0 || j >= static_cast<int>(obj.values.size()))
    throw DimensionError("eval_objective_indexed: index outside table");
  return obj.values[j];
}

std::vector<double> objective_values(const ObjectiveSpec& obj,
                                     const PathBatch& batch) {
  std::vector<double> out(batch.num_paths());
  if (obj.kind == ObjectiveSpec::Kind::Table) {
    if (obj.values.size() != static_cast<std::size_t>(batch.num_paths()))
      throw DimensionError("objective_values: table length does not match grid");
    return obj.values;
  }
  for (int j = 0; j < batch.num_paths(); ++j)
    out[j] = eval_objective(obj, batch.path(j), batch.num_steps(), batch.dim());
  return out;
}

double expected_value(const ObjectiveSpec& obj, const DiscreteMeasure& m) {
  const auto vals = objective_values(obj, m.support());
  double s = 0.0;
  for (int n = 0; n < m.size(); ++n) s += m.weights()[n] * vals[n];
  return s;
}

}  // namespace cotdre
