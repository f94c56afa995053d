#pragma once

#include <map>
#include <span>
#include <vector>

#include "cotdre/measures.hpp"

namespace cotdre {

// Uniform cube partition of [lo, hi]^d with ceil(N^q) cells per axis, where
// q = 1/(T+1) for d = 1 and q = 1/(dT) for d >= 2. Cubes are half-open
// [low, high) with the top face closed on the last cube.
struct QuantizerConfig {
  Bounds bounds;
  int d = 1;
  int T = 1;
  long long N = 1;
  double q = 1.0;
  int cells_per_axis = 1;

  static QuantizerConfig make(Bounds bounds, int d, int T, long long N);

  double edge() const { return (bounds.hi - bounds.lo) / cells_per_axis; }
};

// Axis cell index for a scalar coordinate; throws DomainError out of bounds.
int cell_index(const QuantizerConfig& cfg, double u);
double cell_center(const QuantizerConfig& cfg, int index);

// Center of the cube containing u (d coordinates).
std::vector<double> quantize_point(const QuantizerConfig& cfg,
                                   std::span<const double> u);

// Per-coordinate cell indices for a whole path (length T*d).
std::vector<int> path_cell_indices(const QuantizerConfig& cfg,
                                   std::span<const double> path);

PathBatch quantize_paths(const QuantizerConfig& cfg, const PathBatch& paths);

// Empirical measure of the quantized sample: duplicates merged exactly,
// weights = multiplicities / N.
DiscreteMeasure adapted_empirical(const QuantizerConfig& cfg,
                                  const PathBatch& paths);

enum class KernelMode { Quantized, Identity };

// Conditional suffix distributions given the prefix cell at time t. Only
// occupied cells are present; querying an empty cell throws MissingCellError.
class ConditionalKernel {
public:
  ConditionalKernel(int t, KernelMode mode,
                    std::map<std::vector<int>, DiscreteMeasure> cells)
      : t_(t), mode_(mode), cells_(std::move(cells)) {}

  int t() const { return t_; }
  KernelMode mode() const { return mode_; }
  std::size_t num_cells() const { return cells_.size(); }
  const std::map<std::vector<int>, DiscreteMeasure>& cells() const {
    return cells_;
  }
  const DiscreteMeasure& at(const std::vector<int>& prefix_cell) const;
  // Convenience lookup from raw prefix values x_{1:t}.
  const DiscreteMeasure& at_prefix(const QuantizerConfig& cfg,
                                   std::span<const double> prefix) const;

private:
  int t_;
  KernelMode mode_;
  std::map<std::vector<int>, DiscreteMeasure> cells_;
};

ConditionalKernel conditional_kernel(const QuantizerConfig& cfg,
                                     const PathBatch& paths, int t,
                                     KernelMode mode);

// Convergence rate of the adapted empirical measure.
double rate(long long N, int d, int T);

// Finite-sample radius: C * rate(N) + sqrt(ln(2T/delta) / (c N)).
double radius_schedule(long long N, double delta, double c, double C, int d,
                       int T);

}  // namespace cotdre
