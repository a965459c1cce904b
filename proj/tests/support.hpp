// Shared test fixtures: independent oracles and statistics helpers. Nothing
// here may call the library paths it is used to check.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "pskd/linalg.hpp"
#include "pskd/rng.hpp"

namespace testsupport {

using pskd::Complex;
using pskd::Matrix;
using pskd::Rng;
using pskd::Vector;

inline Matrix random_matrix(long rows, long cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      const double re = g(rng);
      const double im = g(rng);
      m(r, c) = Complex(re, im);
    }
  return m;
}

inline Matrix random_hermitian(long dim, Rng& rng) {
  const Matrix g = random_matrix(dim, dim, rng);
  return 0.5 * (g + g.adjoint());
}

inline Matrix random_density(long dim, Rng& rng) {
  const Matrix g = random_matrix(dim, dim, rng);
  Matrix rho = g * g.adjoint();
  return rho / rho.trace().real();
}

// Small-integer-entry matrix: products of entries are exact in doubles, so
// algebraic identities can be checked with zero tolerance.
inline Matrix random_integer_matrix(long dim, Rng& rng) {
  std::uniform_int_distribution<int> u(-3, 3);
  Matrix m(dim, dim);
  for (long r = 0; r < dim; ++r)
    for (long c = 0; c < dim; ++c) {
      const int re = u(rng);
      const int im = u(rng);
      m(r, c) = Complex(re, im);
    }
  return m;
}

// Brute-force partial trace over explicit index contraction, written against
// the definition rather than the library's stride bookkeeping. keep_first
// selects the first factor of a bipartite da x db split.
inline Matrix oracle_partial_trace(const Matrix& rho, int da, int db, bool keep_first) {
  if (keep_first) {
    Matrix out = Matrix::Zero(da, da);
    for (int i = 0; i < da; ++i)
      for (int j = 0; j < da; ++j)
        for (int k = 0; k < db; ++k)
          out(i, j) += rho(static_cast<long>(i) * db + k, static_cast<long>(j) * db + k);
    return out;
  }
  Matrix out = Matrix::Zero(db, db);
  for (int k = 0; k < db; ++k)
    for (int l = 0; l < db; ++l)
      for (int i = 0; i < da; ++i)
        out(k, l) += rho(static_cast<long>(i) * db + k, static_cast<long>(i) * db + l);
  return out;
}

// -----------------------------------------------------------------------~--
// statistics

inline double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double sample_std(const std::vector<double>& xs) {
  const double mu = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - mu) * (x - mu);
  return std::sqrt(acc / (static_cast<double>(xs.size()) - 1.0));
}

inline double standard_error(const std::vector<double>& xs) {
  return sample_std(xs) / std::sqrt(static_cast<double>(xs.size()));
}

// Pearson chi-square statistic for independence on a contingency table.
inline double chi_square_independence(const std::vector<std::vector<long>>& table) {
  const size_t rows = table.size();
  const size_t cols = table.front().size();
  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  double total = 0.0;
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c) {
      row_sum[r] += static_cast<double>(table[r][c]);
      col_sum[c] += static_cast<double>(table[r][c]);
      total += static_cast<double>(table[r][c]);
    }
  double stat = 0.0;
  for (size_t r = 0; r < rows; ++r)
    for (size_t c = 0; c < cols; ++c) {
      const double expected = row_sum[r] * col_sum[c] / total;
      if (expected > 0.0) {
        const double diff = static_cast<double>(table[r][c]) - expected;
        stat += diff * diff / expected;
      }
    }
  return stat;
}

// Two-sample Kolmogorov-Smirnov p-value (asymptotic Q_KS series).
inline double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  size_t ia = 0, ib = 0;
  while (ia < a.size() && ib < b.size()) {
    const double x = std::min(a[ia], b[ib]);
    while (ia < a.size() && a[ia] <= x) ++ia;
    while (ib < b.size() && b[ib] <= x) ++ib;
    d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  if (lambda < 0.2) return 1.0;  // series only converges for sizable lambda
  double p = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * lambda * lambda * k * k);
    p += 2.0 * sign * term;
    sign = -sign;
    if (term < 1e-12) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace testsupport
