#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace pskd {

/// Block-diagonal unitary in the AB computational basis: one unitary block on
/// the shield A'B' per key pair (i,j), stored at index i*d + j.
struct Twisting {
  SystemShape shape;
  std::vector<Matrix> blocks;

  const Matrix& block(int i, int j) const {
    return blocks[static_cast<size_t>(i) * shape.d + static_cast<size_t>(j)];
  }

  void validate() const {
    shape.validate();
    const size_t expected = static_cast<size_t>(shape.d) * shape.d;
    if (blocks.size() != expected)
      throw ConfigError("twisting: expected d^2 shield blocks, got " +
                        std::to_string(blocks.size()));
    const long dp = shape.d_prime();
    for (size_t k = 0; k < blocks.size(); ++k) {
      if (blocks[k].rows() != dp || blocks[k].cols() != dp)
        throw ConfigError("twisting: block " + std::to_string(k) +
                          " does not act on the shield A'B'");
      if (!is_unitary(blocks[k]))
        throw ConfigError("twisting: block " + std::to_string(k) +
                          " is not unitary within 1e-10");
    }
  }
};

inline Twisting identity_twisting(const SystemShape& shape) {
  shape.validate();
  Twisting tw;
  tw.shape = shape;
  tw.blocks.assign(static_cast<size_t>(shape.d) * shape.d, identity(shape.d_prime()));
  return tw;
}

/// Independent Haar block per key pair; fully generic twisting structure.
inline Twisting random_twisting(const SystemShape& shape, Rng& rng) {
  shape.validate();
  Twisting tw;
  tw.shape = shape;
  tw.blocks.reserve(static_cast<size_t>(shape.d) * shape.d);
  for (int k = 0; k < shape.d * shape.d; ++k)
    tw.blocks.push_back(haar_unitary(shape.d_prime(), rng));
  return tw;
}

inline Matrix assemble_twisting(const Twisting& tw) {
  tw.validate();
  const long dp = tw.shape.d_prime();
  Matrix u = Matrix::Zero(tw.shape.dim(), tw.shape.dim());
  for (int i = 0; i < tw.shape.d; ++i)
    for (int j = 0; j < tw.shape.d; ++j) {
      const long off = (static_cast<long>(i) * tw.shape.d + j) * dp;
      u.block(off, off, dp, dp) = tw.block(i, j);
    }
  return u;
}

inline Vector max_entangled(int d) {
  if (d < 2) throw ConfigError("max_entangled: d must be >= 2");
  Vector v = Vector::Zero(static_cast<long>(d) * d);
  const double amp = 1.0 / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < d; ++i) v(static_cast<long>(i) * d + i) = amp;
  return v;
}

/// Twisted maximally entangled state with shield: the density operator, the
/// twisting that generated it, and the shield ancilla used in construction.
struct PrivateState {
  SystemShape shape;
  Matrix gamma;    // density on ABA'B'
  Twisting twisting;
  Matrix ancilla;  // density on A'B'
};

inline PrivateState make_private_state(int d, const Matrix& ancilla,
                                       const Twisting& twisting) {
  if (twisting.shape.d != d)
    throw ConfigError("make_private_state: twisting key dimension disagrees with d");
  twisting.validate();
  const long dp = twisting.shape.d_prime();
  if (ancilla.rows() != dp || ancilla.cols() != dp)
    throw ConfigError("make_private_state: ancilla does not act on the shield A'B'");
  validate_density(ancilla, "ancilla");

  const Vector phi = max_entangled(d);
  const Matrix core = kron(phi * phi.adjoint(), ancilla);  // canonical A,B,A',B'
  const Matrix u = assemble_twisting(twisting);
  PrivateState st;
  st.shape = twisting.shape;
  st.gamma = u * core * u.adjoint();
  st.twisting = twisting;
  st.ancilla = ancilla;
  return st;
}

/// Exact outcome distribution of the computational-basis measurement on AB:
/// p(i,j) = <ij| Tr_{A'B'}(state) |ij>.
inline Eigen::MatrixXd key_correlation(const Matrix& state, const SystemShape& shape) {
  const Matrix rho_ab = partial_trace(state, shape.dims(), {0, 1});
  Eigen::MatrixXd p(shape.d, shape.d);
  for (int i = 0; i < shape.d; ++i)
    for (int j = 0; j < shape.d; ++j)
      p(i, j) = rho_ab(static_cast<long>(i) * shape.d + j,
                       static_cast<long>(i) * shape.d + j).real();
  return p;
}

inline Eigen::MatrixXd key_correlation(const PrivateState& st) {
  return key_correlation(st.gamma, st.shape);
}

/// Purification on system (x) environment, environment dimension = rank.
struct PurifiedState {
  Vector psi;
  long system_dim = 0;
  long env_dim = 0;
};

inline PurifiedState purify(const Matrix& rho, double rank_tol = 1e-12) {
  if (rho.rows() != rho.cols()) throw ConfigError("purify: operator must be square");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()));
  if (es.info() != Eigen::Success) throw NumericalError("purify: eigendecomposition failed");
  const long n = rho.rows();
  std::vector<long> kept;
  for (long k = n - 1; k >= 0; --k)
    if (es.eigenvalues()(k) > rank_tol) kept.push_back(k);
  if (kept.empty()) throw ConfigError("purify: operator has no positive spectrum");

  const long rank = static_cast<long>(kept.size());
  Vector psi = Vector::Zero(n * rank);
  for (long e = 0; e < rank; ++e) {
    const double amp = std::sqrt(es.eigenvalues()(kept[static_cast<size_t>(e)]));
    for (long i = 0; i < n; ++i)
      psi(i * rank + e) = amp * es.eigenvectors()(i, kept[static_cast<size_t>(e)]);
  }
  return {psi, n, rank};
}

inline Matrix purified_marginal(const PurifiedState& p) {
  // Tr_E |psi><psi| without forming the full projector.
  Matrix out = Matrix::Zero(p.system_dim, p.system_dim);
  for (long e = 0; e < p.env_dim; ++e) {
    Vector col(p.system_dim);
    for (long i = 0; i < p.system_dim; ++i) col(i) = p.psi(i * p.env_dim + e);
    out += col * col.adjoint();
  }
  return out;
}

struct PrivacyReport {
  double max_distance = 0.0;       // max pairwise trace distance of Eve's key conditionals
  std::vector<int> excluded;       // key values with (near) zero probability
  std::vector<double> key_probs;   // p(i,i) per key value
};

/// Purifies the state, measures AB in the computational basis, and compares
/// Eve's conditional states across the correlated key outcomes. Any state on
/// ABA'B' is accepted; private states come out at numerical zero.
inline PrivacyReport verify_privacy(const Matrix& state, const SystemShape& shape,
                                    double prob_tol = 1e-12) {
  shape.validate();
  if (state.rows() != shape.dim() || state.cols() != shape.dim())
    throw ConfigError("verify_privacy: state does not act on ABA'B'");
  validate_density(state, "state");

  const PurifiedState pur = purify(state);
  const long dp = shape.d_prime();
  const long rank = pur.env_dim;

  PrivacyReport rep;
  std::vector<Matrix> conditionals;
  for (int i = 0; i < shape.d; ++i) {
    Matrix w(dp, rank);  // shield x environment amplitudes at key outcome (i,i)
    const long base = (static_cast<long>(i) * shape.d + i) * dp;
    for (long x = 0; x < dp; ++x)
      for (long e = 0; e < rank; ++e) w(x, e) = pur.psi((base + x) * rank + e);
    const double p = w.squaredNorm();
    rep.key_probs.push_back(p);
    if (p < prob_tol) {
      rep.excluded.push_back(i);
      continue;
    }
    conditionals.push_back((w.transpose() * w.conjugate()) / p);  // Tr_{A'B'}
  }
  for (size_t i = 0; i < conditionals.size(); ++i)
    for (size_t j = i + 1; j < conditionals.size(); ++j)
      rep.max_distance =
          std::max(rep.max_distance, trace_distance(conditionals[i], conditionals[j]));
  return rep;
}

inline PrivacyReport verify_privacy(const PrivateState& st, double prob_tol = 1e-12) {
  return verify_privacy(st.gamma, st.shape, prob_tol);
}

}  // namespace pskd
