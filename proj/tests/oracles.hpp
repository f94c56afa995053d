#pragma once

// Test-only oracles, kept independent of the library's simplex path: dense
// Gaussian elimination, vertex enumeration of {x >= 0 : Ax = b}, and lattice
// enumeration of discrete measures.

#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace oracle {

inline bool solve_square(std::vector<std::vector<double>> A,
                         std::vector<double> b, std::vector<double>& out,
                         double tol = 1e-10) {
  const int n = static_cast<int>(A.size());
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    if (std::abs(A[piv][col]) < tol) return false;
    std::swap(A[piv], A[col]);
    std::swap(b[piv], b[col]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = A[r][col] / A[col][col];
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) A[r][c] -= f * A[col][c];
      b[r] -= f * b[col];
    }
  }
  out.resize(n);
  for (int i = 0; i < n; ++i) out[i] = b[i] / A[i][i];
  return true;
}

// Row-reduce [A|b]; returns the pivot rows of the reduced system, or an empty
// result if the system is inconsistent.
struct ReducedSystem {
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  bool consistent = true;
  int rank() const { return static_cast<int>(A.size()); }
};

inline ReducedSystem row_reduce(std::vector<std::vector<double>> A,
                                std::vector<double> b, double tol = 1e-9) {
  const int m = static_cast<int>(A.size());
  const int n = m > 0 ? static_cast<int>(A[0].size()) : 0;
  int row = 0;
  for (int col = 0; col < n && row < m; ++col) {
    int piv = -1;
    double best = tol;
    for (int r = row; r < m; ++r) {
      if (std::abs(A[r][col]) > best) {
        best = std::abs(A[r][col]);
        piv = r;
      }
    }
    if (piv < 0) continue;
    std::swap(A[piv], A[row]);
    std::swap(b[piv], b[row]);
    for (int r = 0; r < m; ++r) {
      if (r == row) continue;
      const double f = A[r][col] / A[row][col];
      if (f == 0.0) continue;
      for (int c = 0; c < n; ++c) A[r][c] -= f * A[row][c];
      b[r] -= f * b[row];
    }
    ++row;
  }
  ReducedSystem out;
  for (int r = 0; r < row; ++r) {
    out.A.push_back(A[r]);
    out.b.push_back(b[r]);
  }
  for (int r = row; r < m; ++r) {
    if (std::abs(b[r]) > 1e-8) {
      out.consistent = false;
      break;
    }
  }
  return out;
}

struct Polytope {
  std::vector<std::vector<double>> A;  // equality rows over x >= 0
  std::vector<double> b;
};

// Enumerate all basic feasible solutions (vertices). Exponential; test-scale
// instances only.
inline void for_each_vertex(const Polytope& P,
                            const std::function<void(const std::vector<double>&)>& fn,
                            double tol = 1e-9) {
  const auto red = row_reduce(P.A, P.b);
  if (!red.consistent) return;
  const int r = red.rank();
  const int n = static_cast<int>(P.A.empty() ? 0 : P.A[0].size());
  if (r == 0) {
    fn(std::vector<double>(n, 0.0));
    return;
  }
  std::vector<int> pick(r);
  const std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == r) {
      std::vector<std::vector<double>> As(r, std::vector<double>(r));
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) As[i][j] = red.A[i][pick[j]];
      std::vector<double> xs;
      if (!solve_square(As, red.b, xs)) return;
      std::vector<double> x(n, 0.0);
      for (int j = 0; j < r; ++j) {
        if (xs[j] < -1e-8) return;
        x[pick[j]] = std::max(0.0, xs[j]);
      }
      // Verify against the full original system.
      for (std::size_t row = 0; row < P.A.size(); ++row) {
        double s = 0.0;
        for (int c = 0; c < n; ++c) s += P.A[row][c] * x[c];
        if (std::abs(s - P.b[row]) > 1e-7) return;
      }
      fn(x);
      return;
    }
    for (int c = start; c <= n - (r - depth); ++c) {
      pick[depth] = c;
      rec(c + 1, depth + 1);
    }
  };
  rec(0, 0);
  (void)tol;
}

inline double min_linear_over_vertices(const Polytope& P,
                                       std::span<const double> c) {
  double best = std::numeric_limits<double>::infinity();
  for_each_vertex(P, [&](const std::vector<double>& x) {
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) v += c[i] * x[i];
    best = std::min(best, v);
  });
  return best;
}

inline Polytope transport_polytope(std::span<const double> mu_w,
                                   std::span<const double> nu_w) {
  const int nx = static_cast<int>(mu_w.size());
  const int ny = static_cast<int>(nu_w.size());
  Polytope P;
  for (int i = 0; i < nx; ++i) {
    std::vector<double> row(static_cast<std::size_t>(nx) * ny, 0.0);
    for (int j = 0; j < ny; ++j) row[static_cast<std::size_t>(i) * ny + j] = 1.0;
    P.A.push_back(std::move(row));
    P.b.push_back(mu_w[i]);
  }
  for (int j = 0; j < ny; ++j) {
    std::vector<double> row(static_cast<std::size_t>(nx) * ny, 0.0);
    for (int i = 0; i < nx; ++i) row[static_cast<std::size_t>(i) * ny + j] = 1.0;
    P.A.push_back(std::move(row));
    P.b.push_back(nu_w[j]);
  }
  return P;
}

// All ways to split `total` lattice units over `parts` bins.
inline void for_each_composition(
    int total, int parts, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> counts(parts, 0);
  const std::function<void(int, int)> rec = [&](int bin, int left) {
    if (bin == parts - 1) {
      counts[bin] = left;
      fn(counts);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      counts[bin] = k;
      rec(bin + 1, left - k);
    }
  };
  if (parts >= 1) rec(0, total);
}

// Central finite difference of a scalar function of packed parameters.
inline std::vector<double> finite_difference(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> at, double h = 1e-5) {
  std::vector<double> x(at.begin(), at.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double save = x[i];
    x[i] = save + h;
    const double fp = f(x);
    x[i] = save - h;
    const double fm = f(x);
    x[i] = save;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace oracle
