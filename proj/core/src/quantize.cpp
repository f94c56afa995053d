#include "cotdre/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace cotdre {

QuantizerConfig QuantizerConfig::make(Bounds bounds, int d, int T, long long N) {
  if (d < 1 || T < 1) throw DimensionError("QuantizerConfig: d, T must be >= 1");
  if (N < 1) throw ParameterError("QuantizerConfig: N must be >= 1");
  if (!(bounds.lo < bounds.hi))
    throw ParameterError("QuantizerConfig: bounds must satisfy lo < hi");
  QuantizerConfig cfg;
  cfg.bounds = bounds;
  cfg.d = d;
  cfg.T = T;
  cfg.N = N;
  cfg.q = (d == 1) ? 1.0 / (T + 1) : 1.0 / (static_cast<double>(d) * T);
  // ceil(N^q), snapping to the integer when pow lands within rounding noise
  // of it so that e.g. 16^(1/4) yields 2 cells, not 3.
  const double p = std::pow(static_cast<double>(N), cfg.q);
  const double r = std::round(p);
  cfg.cells_per_axis = (std::abs(p - r) < 1e-9 * std::max(1.0, r))
                           ? static_cast<int>(r)
                           : static_cast<int>(std::ceil(p));
  if (cfg.cells_per_axis < 1) cfg.cells_per_axis = 1;
  return cfg;
}

int cell_index(const QuantizerConfig& cfg, double u) {
  if (!(u >= cfg.bounds.lo && u <= cfg.bounds.hi))
    throw DomainError("quantize: coordinate outside bounds");
  const double e = cfg.edge();
  int i = static_cast<int>(std::floor((u - cfg.bounds.lo) / e));
  i = std::clamp(i, 0, cfg.cells_per_axis - 1);
  // Rounding in the division can land one cell off near shared boundaries;
  // settle on the nearest center, ties to the higher index (half-open cells
  // with the top face closed on the last cube).
  int best = i;
  double best_dist = std::abs(u - cell_center(cfg, i));
  for (int cand : {i - 1, i + 1}) {
    if (cand < 0 || cand >= cfg.cells_per_axis) continue;
    const double dist = std::abs(u - cell_center(cfg, cand));
    if (dist < best_dist || (dist == best_dist && cand > best)) {
      best = cand;
      best_dist = dist;
    }
  }
  return best;
}

double cell_center(const QuantizerConfig& cfg, int index) {
  const double c = std::fma(index + 0.5, cfg.edge(), cfg.bounds.lo);
  return std::clamp(c, cfg.bounds.lo, cfg.bounds.hi);
}

std::vector<double> quantize_point(const QuantizerConfig& cfg,
                                   std::span<const double> u) {
  if (u.size() != static_cast<std::size_t>(cfg.d))
    throw DimensionError("quantize_point: expected a d-vector");
  std::vector<double> out(u.size());
  for (std::size_t k = 0; k < u.size(); ++k)
    out[k] = cell_center(cfg, cell_index(cfg, u[k]));
  return out;
}

std::vector<int> path_cell_indices(const QuantizerConfig& cfg,
                                   std::span<const double> path) {
  std::vector<int> out(path.size());
  for (std::size_t c = 0; c < path.size(); ++c) out[c] = cell_index(cfg, path[c]);
  return out;
}

PathBatch quantize_paths(const QuantizerConfig& cfg, const PathBatch& paths) {
  std::vector<double> data;
  data.reserve(paths.data().size());
  for (double v : paths.data()) data.push_back(cell_center(cfg, cell_index(cfg, v)));
  return PathBatch(std::move(data), paths.num_paths(), paths.num_steps(),
                   paths.dim(), paths.bounds());
}

namespace {

// Merge rows keyed by integer cell tuples; multiplicity order follows first
// appearance so output is deterministic in the input order.
DiscreteMeasure merged_measure(const std::vector<std::vector<int>>& keys,
                               const std::vector<std::vector<double>>& rows,
                               int T, int d, Bounds bounds) {
  std::map<std::vector<int>, int> index;
  std::vector<double> data;
  std::vector<long long> counts;
  for (std::size_t n = 0; n < keys.size(); ++n) {
    auto [it, inserted] = index.try_emplace(keys[n], static_cast<int>(counts.size()));
    if (inserted) {
      data.insert(data.end(), rows[n].begin(), rows[n].end());
      counts.push_back(1);
    } else {
      ++counts[it->second];
    }
  }
  const long long total = static_cast<long long>(keys.size());
  std::vector<double> weights(counts.size());
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < counts.size(); ++i) {
    weights[i] = static_cast<double>(counts[i]) / total;
    acc += weights[i];
  }
  weights.back() = 1.0 - acc;
  return DiscreteMeasure(
      PathBatch(std::move(data), static_cast<int>(counts.size()), T, d, bounds),
      std::move(weights));
}

}  // namespace

DiscreteMeasure adapted_empirical(const QuantizerConfig& cfg,
                                  const PathBatch& paths) {
  std::vector<std::vector<int>> keys(paths.num_paths());
  std::vector<std::vector<double>> rows(paths.num_paths());
  for (int n = 0; n < paths.num_paths(); ++n) {
    const auto p = paths.path(n);
    keys[n] = path_cell_indices(cfg, p);
    rows[n].resize(p.size());
    for (std::size_t c = 0; c < p.size(); ++c)
      rows[n][c] = cell_center(cfg, keys[n][c]);
  }
  return merged_measure(keys, rows, paths.num_steps(), paths.dim(),
                        paths.bounds());
}

const DiscreteMeasure& ConditionalKernel::at(
    const std::vector<int>& prefix_cell) const {
  const auto it = cells_.find(prefix_cell);
  if (it == cells_.end())
    throw MissingCellError("conditional kernel: prefix cell holds no samples");
  return it->second;
}

const DiscreteMeasure& ConditionalKernel::at_prefix(
    const QuantizerConfig& cfg, std::span<const double> prefix) const {
  if (prefix.size() != static_cast<std::size_t>(t_) * cfg.d)
    throw DimensionError("conditional kernel: prefix must have shape [t][d]");
  return at(path_cell_indices(cfg, prefix));
}

ConditionalKernel conditional_kernel(const QuantizerConfig& cfg,
                                     const PathBatch& paths, int t,
                                     KernelMode mode) {
  if (t < 1 || t > paths.num_steps() - 1)
    throw ParameterError("conditional_kernel: t must satisfy 1 <= t <= T-1");
  const int d = paths.dim();
  const int suffix_steps = paths.num_steps() - t;

  // Bucket sample indices by prefix cell.
  std::map<std::vector<int>, std::vector<int>> buckets;
  for (int n = 0; n < paths.num_paths(); ++n) {
    const auto p = paths.path(n);
    buckets[path_cell_indices(cfg, p.subspan(0, static_cast<std::size_t>(t) * d))]
        .push_back(n);
  }

  std::map<std::vector<int>, DiscreteMeasure> cells;
  for (const auto& [key, members] : buckets) {
    std::vector<std::vector<int>> keys(members.size());
    std::vector<std::vector<double>> rows(members.size());
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto suffix =
          paths.path(members[m]).subspan(static_cast<std::size_t>(t) * d);
      rows[m].assign(suffix.begin(), suffix.end());
      if (mode == KernelMode::Quantized) {
        keys[m] = path_cell_indices(cfg, suffix);
        for (std::size_t c = 0; c < suffix.size(); ++c)
          rows[m][c] = cell_center(cfg, keys[m][c]);
      } else {
        // Identity mode merges exact duplicates only; encode raw suffixes as
        // their bit patterns so the same map machinery applies.
        keys[m].resize(suffix.size() * 2);
        for (std::size_t c = 0; c < suffix.size(); ++c) {
          long long bits;
          static_assert(sizeof(bits) == sizeof(double));
          std::memcpy(&bits, &rows[m][c], sizeof(bits));
          keys[m][2 * c] = static_cast<int>(bits >> 32);
          keys[m][2 * c + 1] = static_cast<int>(bits & 0xffffffffLL);
        }
      }
    }
    cells.emplace(key, merged_measure(keys, rows, suffix_steps, d,
                                      paths.bounds()));
  }
  return ConditionalKernel(t, mode, std::move(cells));
}

double rate(long long N, int d, int T) {
  if (N < 1) throw ParameterError("rate: N must be >= 1");
  const double n = static_cast<double>(N);
  if (d == 1) return std::pow(n, -1.0 / (T + 1));
  if (d == 2) return std::pow(n, -1.0 / (2.0 * T)) * std::log(n + 1.0);
  return std::pow(n, -1.0 / (static_cast<double>(d) * T));
}

double radius_schedule(long long N, double delta, double c, double C, int d,
                       int T) {
  if (!(delta > 0.0 && delta < 1.0))
    throw ParameterError("radius_schedule: delta must lie in (0, 1)");
  if (!(c > 0.0) || !(C >= 0.0))
    throw ParameterError("radius_schedule: require c > 0 and C >= 0");
  return C * rate(N, d, T) +
         std::sqrt(std::log(2.0 * T / delta) / (c * static_cast<double>(N)));
}

}  // namespace cotdre
