#pragma once

#include <cmath>
#include <vector>

#include "linalg.hpp"
#include "private_state.hpp"

namespace pskd {

/// Twisted phase-error observable U (sigma_x (x) sigma_x (x) I) U'. Unitary
/// conjugation of an involution, so the spectrum is {+1, -1}.
inline HermitianOperator twisted_phase_operator(const Twisting& tw) {
  if (tw.shape.d != 2)
    throw ConfigError("twisted_phase_operator: phase test is defined for key dimension 2");
  const Matrix base = kron(sigma_x(), sigma_x(), identity(tw.shape.d_prime()));
  const Matrix u = assemble_twisting(tw);
  return eig_hermitian(u * base * u.adjoint());
}

/// Expansion of an observable on ABA'B' over a trace-orthonormal hermitian
/// product basis on (AA') x (BB'). The same canonical basis is used on both
/// sides; coefficients are real for a hermitian source.
struct ProductDecomposition {
  struct Term {
    int j_a = 0;
    int j_b = 0;
    double s = 0.0;
  };

  SystemShape shape;
  OperatorBasis basis;           // on AA' and on BB', size t each
  Eigen::MatrixXd coefficients;  // t x t, row = AA' index, col = BB' index
  std::vector<Term> nonzero_terms;
  double prune_tol = 1e-12;

  double parseval_sum() const { return coefficients.squaredNorm(); }

  /// Rebuilds the source operator in canonical ABA'B' ordering from the full
  /// coefficient matrix.
  Matrix reconstruct() const {
    const int local = shape.local_dim();
    Matrix grouped = Matrix::Zero(static_cast<long>(local) * local,
                                  static_cast<long>(local) * local);
    for (long ja = 0; ja < coefficients.rows(); ++ja)
      for (long jb = 0; jb < coefficients.cols(); ++jb) {
        const double s = coefficients(ja, jb);
        if (s == 0.0) continue;
        grouped += s * kron(basis.elements[static_cast<size_t>(ja)],
                            basis.elements[static_cast<size_t>(jb)]);
      }
    return regroup_canonical(grouped, shape);
  }
};

/// Coefficients s_{ja,jb} = Tr[(O_ja (x) O_jb) Sigma'] with Sigma' the source
/// reordered to the (AA')(BB') grouping. Terms with |s| <= prune_tol are kept
/// in the matrix but left out of nonzero_terms.
inline ProductDecomposition decompose_product(const Matrix& sigma,
                                              const SystemShape& shape,
                                              double prune_tol = 1e-12) {
  shape.validate();
  if (sigma.rows() != shape.dim() || sigma.cols() != shape.dim())
    throw ConfigError("decompose_product: operator does not act on ABA'B'");
  if (!is_hermitian(sigma))
    throw NumericalError("decompose_product: operator is not hermitian within 1e-10");

  const Matrix grouped = regroup_local_pairs(sigma, shape);
  const int local = shape.local_dim();
  const long t = shape.t();

  ProductDecomposition dec;
  dec.shape = shape;
  dec.basis = hermitian_basis(local);
  dec.coefficients.resize(t, t);
  dec.prune_tol = prune_tol;

  // Contract the BB' side once per basis element, then sweep the AA' side:
  // s = sum_{i,j,k,l} O_a(i,j) O_b(k,l) Sigma'(j*L+l, i*L+k) = Tr(O_a T_b).
  Matrix tb(local, local);
  for (long jb = 0; jb < t; ++jb) {
    const Matrix& ob = dec.basis.elements[static_cast<size_t>(jb)];
    for (int j = 0; j < local; ++j)
      for (int i = 0; i < local; ++i) {
        Complex acc(0, 0);
        for (int k = 0; k < local; ++k)
          for (int l = 0; l < local; ++l)
            acc += ob(k, l) * grouped(static_cast<long>(j) * local + l,
                                      static_cast<long>(i) * local + k);
        tb(j, i) = acc;
      }
    for (long ja = 0; ja < t; ++ja) {
      const Matrix& oa = dec.basis.elements[static_cast<size_t>(ja)];
      const Complex s = (oa * tb).trace();
      dec.coefficients(ja, jb) = s.real();
    }
  }
  for (long ja = 0; ja < t; ++ja)
    for (long jb = 0; jb < t; ++jb) {
      const double s = dec.coefficients(ja, jb);
      if (std::abs(s) > prune_tol)
        dec.nonzero_terms.push_back({static_cast<int>(ja), static_cast<int>(jb), s});
    }
  return dec;
}

inline double expectation(const Matrix& sigma, const Matrix& rho) {
  if (sigma.rows() != rho.rows() || sigma.cols() != rho.cols())
    throw ConfigError("expectation: dimension mismatch");
  return sigma.cwiseProduct(rho.transpose()).sum().real();  // Re Tr(Sigma rho)
}

inline double expectation(const HermitianOperator& sigma, const Matrix& rho) {
  return expectation(sigma.matrix, rho);
}

/// Same expectation routed through the product terms; agrees with the direct
/// trace up to the reconstruction residual.
inline double expectation_via_terms(const ProductDecomposition& dec, const Matrix& rho) {
  if (rho.rows() != dec.shape.dim() || rho.cols() != dec.shape.dim())
    throw ConfigError("expectation_via_terms: state does not act on ABA'B'");
  const Matrix grouped = regroup_local_pairs(rho, dec.shape);
  const int local = dec.shape.local_dim();
  double acc = 0.0;
  for (const auto& term : dec.nonzero_terms) {
    const Matrix& oa = dec.basis.elements[static_cast<size_t>(term.j_a)];
    const Matrix& ob = dec.basis.elements[static_cast<size_t>(term.j_b)];
    Complex tr(0, 0);
    for (int i = 0; i < local; ++i)
      for (int j = 0; j < local; ++j)
        for (int k = 0; k < local; ++k)
          for (int l = 0; l < local; ++l)
            tr += oa(i, j) * ob(k, l) * grouped(static_cast<long>(j) * local + l,
                                                static_cast<long>(i) * local + k);
    acc += term.s * tr.real();
  }
  return acc;
}

}  // namespace pskd
