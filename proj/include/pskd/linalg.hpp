#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "rng.hpp"

namespace pskd {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

// Validation tolerances shared across the library.
inline constexpr double kHermitianTol = 1e-10;  // absolute, entrywise
inline constexpr double kUnitaryTol = 1e-10;    // Frobenius norm of U'U - I
inline constexpr double kDegeneracyTol = 1e-9;  // relative to spectral radius
inline constexpr double kDensityTol = 1e-10;    // trace and positivity slack

/// Subsystem layout. Canonical tensor order is A (x) B (x) A' (x) B':
/// d is the key dimension on A and on B, a the shield dimension on A' and B'.
struct SystemShape {
  int d = 2;
  int a = 1;

  int d_prime() const { return a * a; }                       // dim(A'B')
  int local_dim() const { return d * a; }                     // dim(AA') = dim(BB')
  long t() const { return static_cast<long>(d) * d * a * a; }  // hermitian basis size on AA'
  long dim() const { return static_cast<long>(d) * d * a * a; }
  std::vector<int> dims() const { return {d, d, a, a}; }

  void validate() const {
    if (d < 2) throw ConfigError("SystemShape: key dimension d must be >= 2");
    if (a < 1) throw ConfigError("SystemShape: shield dimension a must be >= 1");
  }
  bool operator==(const SystemShape&) const = default;
};

inline Matrix identity(long n) { return Matrix::Identity(n, n); }

inline Matrix sigma_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline Matrix sigma_y() {
  Matrix m(2, 2);
  m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
  return m;
}

inline Matrix sigma_z() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index r = 0; r < a.rows(); ++r)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
  return out;
}

inline Matrix kron(const Matrix& a, const Matrix& b, const Matrix& c) {
  return kron(kron(a, b), c);
}

namespace detail {

inline long dim_product(const std::vector<int>& dims) {
  long total = 1;
  for (int d : dims) {
    if (d < 1) throw ConfigError("subsystem dimensions must be positive");
    total *= d;
  }
  return total;
}

inline std::vector<long> strides_of(const std::vector<int>& dims) {
  std::vector<long> s(dims.size());
  long acc = 1;
  for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
    s[static_cast<size_t>(k)] = acc;
    acc *= dims[static_cast<size_t>(k)];
  }
  return s;
}

// Flat offsets of every multi-index over the listed subsystems, enumerated
// row-major in the order the subsystems are given.
inline std::vector<long> subsystem_offsets(const std::vector<int>& dims,
                                           const std::vector<long>& strides,
                                           const std::vector<int>& subs) {
  std::vector<long> offs{0};
  for (int k : subs) {
    std::vector<long> next;
    next.reserve(offs.size() * static_cast<size_t>(dims[static_cast<size_t>(k)]));
    for (long base : offs)
      for (int v = 0; v < dims[static_cast<size_t>(k)]; ++v)
        next.push_back(base + v * strides[static_cast<size_t>(k)]);
    offs = std::move(next);
  }
  return offs;
}

}  // namespace detail

/// Trace out every subsystem not listed in `keep`. The result is ordered by
/// the original order of the kept factors; the trace is preserved.
inline Matrix partial_trace(const Matrix& rho, const std::vector<int>& dims,
                            std::vector<int> keep) {
  const long total = detail::dim_product(dims);
  if (rho.rows() != total || rho.cols() != total)
    throw ConfigError("partial_trace: operator dimension does not match subsystem dims");
  if (keep.empty()) throw ConfigError("partial_trace: keep set must be non-empty");
  std::sort(keep.begin(), keep.end());
  keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
  for (int k : keep)
    if (k < 0 || k >= static_cast<int>(dims.size()))
      throw ConfigError("partial_trace: keep index out of range");
  std::vector<int> traced;
  for (int k = 0; k < static_cast<int>(dims.size()); ++k)
    if (!std::binary_search(keep.begin(), keep.end(), k)) traced.push_back(k);

  const auto strides = detail::strides_of(dims);
  const auto kept_offs = detail::subsystem_offsets(dims, strides, keep);
  const auto traced_offs = detail::subsystem_offsets(dims, strides, traced);

  const long dk = static_cast<long>(kept_offs.size());
  Matrix out = Matrix::Zero(dk, dk);
  for (long i = 0; i < dk; ++i)
    for (long j = 0; j < dk; ++j) {
      Complex acc(0, 0);
      for (long off : traced_offs) acc += rho(kept_offs[i] + off, kept_offs[j] + off);
      out(i, j) = acc;
    }
  return out;
}

/// Reorders tensor factors. order[k] names the original factor placed at
/// slot k of the output.
inline Matrix permute_subsystems(const Matrix& m, const std::vector<int>& dims,
                                 const std::vector<int>& order) {
  const long total = detail::dim_product(dims);
  if (m.rows() != total || m.cols() != total)
    throw ConfigError("permute_subsystems: operator dimension does not match subsystem dims");
  if (order.size() != dims.size())
    throw ConfigError("permute_subsystems: order must list every factor once");
  std::vector<bool> seen(dims.size(), false);
  for (int k : order) {
    if (k < 0 || k >= static_cast<int>(dims.size()) || seen[static_cast<size_t>(k)])
      throw ConfigError("permute_subsystems: order is not a permutation");
    seen[static_cast<size_t>(k)] = true;
  }
  std::vector<int> new_dims(dims.size());
  for (size_t k = 0; k < order.size(); ++k)
    new_dims[k] = dims[static_cast<size_t>(order[k])];
  const auto old_strides = detail::strides_of(dims);
  const auto new_strides = detail::strides_of(new_dims);

  std::vector<long> map(static_cast<size_t>(total));
  for (long i = 0; i < total; ++i) {
    long out = 0;
    for (size_t k = 0; k < order.size(); ++k) {
      const size_t src = static_cast<size_t>(order[k]);
      const long digit = (i / old_strides[src]) % dims[src];
      out += digit * new_strides[k];
    }
    map[static_cast<size_t>(i)] = out;
  }
  Matrix out(total, total);
  for (long r = 0; r < total; ++r)
    for (long c = 0; c < total; ++c)
      out(map[static_cast<size_t>(r)], map[static_cast<size_t>(c)]) = m(r, c);
  return out;
}

/// (A,B,A',B') -> (AA')(BB') grouping used by local observables. The
/// permutation is an involution; regroup_canonical undoes it.
inline Matrix regroup_local_pairs(const Matrix& m, const SystemShape& shape) {
  return permute_subsystems(m, shape.dims(), {0, 2, 1, 3});
}

inline Matrix regroup_canonical(const Matrix& m, const SystemShape& shape) {
  return permute_subsystems(m, {shape.d, shape.a, shape.d, shape.a}, {0, 2, 1, 3});
}

inline Matrix partial_transpose(const Matrix& rho, const std::vector<int>& dims,
                                int subsystem) {
  const long total = detail::dim_product(dims);
  if (rho.rows() != total || rho.cols() != total)
    throw ConfigError("partial_transpose: operator dimension does not match subsystem dims");
  if (subsystem < 0 || subsystem >= static_cast<int>(dims.size()))
    throw ConfigError("partial_transpose: subsystem index out of range");
  const auto strides = detail::strides_of(dims);
  const long w = strides[static_cast<size_t>(subsystem)];
  const int dw = dims[static_cast<size_t>(subsystem)];
  Matrix out(total, total);
  for (long r = 0; r < total; ++r)
    for (long c = 0; c < total; ++c) {
      const long dr = (r / w) % dw;
      const long dc = (c / w) % dw;
      out(r + (dc - dr) * w, c + (dr - dc) * w) = rho(r, c);
    }
  return out;
}

inline Complex hs_inner(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError("hs_inner: dimension mismatch");
  return (a.conjugate().cwiseProduct(b)).sum();  // Tr(A' B)
}

inline double hs_norm(const Matrix& a) { return std::sqrt(std::abs(hs_inner(a, a))); }

inline bool is_hermitian(const Matrix& m, double tol = kHermitianTol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline bool is_unitary(const Matrix& m, double tol = kUnitaryTol) {
  if (m.rows() != m.cols()) return false;
  return (m.adjoint() * m - identity(m.rows())).norm() <= tol;
}

inline double min_eigenvalue(const Matrix& m) {
  if (!is_hermitian(m))
    throw NumericalError("min_eigenvalue: matrix is not hermitian within 1e-10");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Hermitian operator together with its eigensystem, eigenvalues sorted
/// descending and merged into one projector per (near-)degenerate level.
struct HermitianOperator {
  struct Level {
    double value = 0.0;
    Matrix projector;
    int multiplicity = 0;
  };
  Matrix matrix;
  std::vector<Level> eigensystem;
};

inline HermitianOperator eig_hermitian(const Matrix& m,
                                       double degeneracy_tol = kDegeneracyTol) {
  if (m.rows() != m.cols()) throw ConfigError("eig_hermitian: matrix must be square");
  if (!is_hermitian(m))
    throw NumericalError("eig_hermitian: matrix is not hermitian within 1e-10");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
  if (es.info() != Eigen::Success)
    throw NumericalError("eig_hermitian: eigendecomposition failed");

  const long n = m.rows();
  const auto& vals = es.eigenvalues();   // ascending
  const auto& vecs = es.eigenvectors();
  const double radius = std::max(std::abs(vals(0)), std::abs(vals(n - 1)));
  const double tol = degeneracy_tol * std::max(radius, 1e-12);

  HermitianOperator op;
  op.matrix = m;
  long k = n - 1;
  while (k >= 0) {
    const double anchor = vals(k);
    double sum = 0.0;
    Matrix proj = Matrix::Zero(n, n);
    int mult = 0;
    while (k >= 0 && anchor - vals(k) <= tol) {
      sum += vals(k);
      proj += vecs.col(k) * vecs.col(k).adjoint();
      ++mult;
      --k;
    }
    op.eigensystem.push_back({sum / mult, proj, mult});
  }
  return op;
}

/// Trace-orthonormal hermitian basis, deterministic ordering: normalized
/// identity, symmetric off-diagonal pairs (i<j lexicographic), antisymmetric
/// pairs, then diagonal traceless elements.
struct OperatorBasis {
  int dimension = 0;
  std::vector<Matrix> elements;
};

inline OperatorBasis hermitian_basis(int dim) {
  if (dim < 1) throw ConfigError("hermitian_basis: dimension must be >= 1");
  OperatorBasis basis;
  basis.dimension = dim;
  basis.elements.reserve(static_cast<size_t>(dim) * dim);
  basis.elements.push_back(identity(dim) / std::sqrt(static_cast<double>(dim)));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      Matrix e = Matrix::Zero(dim, dim);
      e(i, j) = inv_sqrt2;
      e(j, i) = inv_sqrt2;
      basis.elements.push_back(e);
    }
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      Matrix e = Matrix::Zero(dim, dim);
      e(i, j) = Complex(0, -inv_sqrt2);
      e(j, i) = Complex(0, inv_sqrt2);
      basis.elements.push_back(e);
    }
  for (int k = 1; k < dim; ++k) {
    Matrix e = Matrix::Zero(dim, dim);
    const double norm = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    for (int j = 0; j < k; ++j) e(j, j) = norm;
    e(k, k) = -static_cast<double>(k) * norm;
    basis.elements.push_back(e);
  }
  return basis;
}

/// Haar-distributed unitary via complex Ginibre + QR with the phase fix
/// that makes the distribution uniform. Deterministic under a fixed engine.
inline Matrix haar_unitary(int dim, Rng& rng) {
  if (dim < 1) throw ConfigError("haar_unitary: dimension must be >= 1");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      g(r, c) = Complex(re, im);
    }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix rmat = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    const Complex rjj = rmat(j, j);
    const double mag = std::abs(rjj);
    q.col(j) *= (mag > 0) ? rjj / mag : Complex(1, 0);
  }
  return q;
}

inline double trace_distance(const Matrix& rho, const Matrix& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols())
    throw ConfigError("trace_distance: dimension mismatch");
  Matrix diff = rho - sigma;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (diff + diff.adjoint()),
                                           Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline void validate_density(const Matrix& rho, const char* what,
                             double tol = kDensityTol) {
  if (rho.rows() != rho.cols())
    throw ConfigError(std::string(what) + ": density operator must be square");
  if (!is_hermitian(rho, kHermitianTol))
    throw ConfigError(std::string(what) + ": density operator is not hermitian");
  if (std::abs(rho.trace().real() - 1.0) > tol || std::abs(rho.trace().imag()) > tol)
    throw ConfigError(std::string(what) + ": density operator trace is not 1");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()),
                                           Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol)
    throw ConfigError(std::string(what) + ": density operator is not positive semidefinite");
}

}  // namespace pskd
