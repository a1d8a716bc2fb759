#include "qsd/linalg.hpp"

#include <cmath>
#include <string>

#include "qsd/errors.hpp"

namespace qsd {

std::vector<double> solve_tridiagonal(std::vector<double> lower,
                                      std::vector<double> diag,
                                      std::vector<double> upper,
                                      std::vector<double> rhs) {
  size_t n = diag.size();
  if (lower.size() != n || upper.size() != n || rhs.size() != n)
    throw QsdError(ErrKind::DimensionMismatch, "tridiagonal band sizes differ");
  if (n == 0) return {};

  // forward elimination
  for (size_t i = 1; i < n; ++i) {
    double piv = diag[i - 1];
    if (piv == 0.0 || !std::isfinite(piv))
      throw QsdError(ErrKind::SingularSystem,
                     "zero pivot in tridiagonal solve at row " + std::to_string(i));
    double w = lower[i] / piv;
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  if (diag[n - 1] == 0.0 || !std::isfinite(diag[n - 1]))
    throw QsdError(ErrKind::SingularSystem, "zero pivot in tridiagonal solve at last row");

  // back substitution
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
  return x;
}

std::vector<double> solve_dense(std::vector<double> a, std::vector<double> rhs) {
  size_t n = rhs.size();
  if (a.size() != n * n)
    throw QsdError(ErrKind::DimensionMismatch, "dense matrix is not n*n");
  if (n == 0) return {};

  std::vector<size_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = i;

  for (size_t col = 0; col < n; ++col) {
    // partial pivot
    size_t best = col;
    double best_abs = std::abs(a[perm[col] * n + col]);
    for (size_t r = col + 1; r < n; ++r) {
      double v = std::abs(a[perm[r] * n + col]);
      if (v > best_abs) {
        best_abs = v;
        best = r;
      }
    }
    if (!(best_abs > 0.0) || !std::isfinite(best_abs))
      throw QsdError(ErrKind::SingularSystem,
                     "singular dense system at column " + std::to_string(col + 1));
    std::swap(perm[col], perm[best]);

    double piv = a[perm[col] * n + col];
    for (size_t r = col + 1; r < n; ++r) {
      double* row = &a[perm[r] * n];
      double w = row[col] / piv;
      if (w == 0.0) continue;
      row[col] = w;
      const double* prow = &a[perm[col] * n];
      for (size_t c = col + 1; c < n; ++c) row[c] -= w * prow[c];
    }
  }

  // apply L^{-1} (unit lower) then U^{-1}
  std::vector<double> y(n);
  for (size_t i = 0; i < n; ++i) {
    double v = rhs[perm[i]];
    const double* row = &a[perm[i] * n];
    for (size_t c = 0; c < i; ++c) v -= row[c] * y[c];
    y[i] = v;
  }
  std::vector<double> x(n);
  for (size_t i = n; i-- > 0;) {
    double v = y[i];
    const double* row = &a[perm[i] * n];
    for (size_t c = i + 1; c < n; ++c) v -= row[c] * x[c];
    x[i] = v / row[i];
  }
  return x;
}

}  // namespace qsd
