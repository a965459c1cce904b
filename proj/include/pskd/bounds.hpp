#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"

namespace pskd {

/// Binary entropy in bits, with 0 log 0 := 0.
inline double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw ConfigError("binary_entropy: argument outside [0,1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

/// Sampling-theory failure probability 2 e^{-2 m_z delta^2} for the phase
/// error estimate of the untwisted protocol.
inline double lo_chau_bound(long long m_z, double delta) {
  if (m_z < 1) throw ConfigError("lo_chau_bound: m_z must be >= 1");
  if (delta < 0.0) throw ConfigError("lo_chau_bound: delta must be >= 0");
  return 2.0 * std::exp(-2.0 * static_cast<double>(m_z) * delta * delta);
}

/// Small-deviation regime the rate above is quoted for: m_z < (2d^2/(1+2d^2)) n.
inline bool lo_chau_side_condition(long long m_z, double delta, long long n) {
  return static_cast<double>(m_z) <
         (2.0 * delta * delta / (1.0 + 2.0 * delta * delta)) * static_cast<double>(n);
}

/// log2 of the concentration bound for frequency distributions of almost
/// power states: exponent -(delta^2/4 - h(r/n)) n + |Z| log2(n/2 + 1).
inline double chernoff_bound_log2(double delta, long long n, long long r,
                                  int alphabet_size) {
  if (n < 1) throw ConfigError("chernoff_bound_log2: n must be >= 1");
  if (r < 0 || 2 * r > n)
    throw ConfigError("chernoff_bound_log2: requires 0 <= r <= n/2");
  if (alphabet_size < 1)
    throw ConfigError("chernoff_bound_log2: alphabet size must be >= 1");
  if (delta < 0.0) throw ConfigError("chernoff_bound_log2: delta must be >= 0");
  const double h = binary_entropy(static_cast<double>(r) / static_cast<double>(n));
  return -(delta * delta / 4.0 - h) * static_cast<double>(n) +
         static_cast<double>(alphabet_size) *
             std::log2(static_cast<double>(n) / 2.0 + 1.0);
}

/// Classical sampling: |Z| e^{-k eps^2 / (8|Z|)}.
inline double sampling_bound(long long k, double epsilon, int alphabet_size) {
  if (k < 1) throw ConfigError("sampling_bound: k must be >= 1");
  if (epsilon < 0.0) throw ConfigError("sampling_bound: epsilon must be >= 0");
  if (alphabet_size < 1) throw ConfigError("sampling_bound: alphabet size must be >= 1");
  return static_cast<double>(alphabet_size) *
         std::exp(-static_cast<double>(k) * epsilon * epsilon /
                  (8.0 * static_cast<double>(alphabet_size)));
}

/// From per-observable probability distances to the average of the composite
/// observable: sqrt(t) ||L||_HS max_i ||P_i - Q_i||.
inline double averages_gap(long long t, double hs_norm, double max_dist) {
  if (t < 1) throw ConfigError("averages_gap: t must be >= 1");
  if (hs_norm < 0.0 || max_dist < 0.0)
    throw ConfigError("averages_gap: norms and distances must be >= 0");
  return std::sqrt(static_cast<double>(t)) * hs_norm * max_dist;
}

/// ln of the closeness of an n-system reduction of a permutation-invariant
/// (n+k)-system state to a mixture of almost power states:
/// ln 2 - k(r+1)/(2(n+k)) + (1/2) dim^power ln k. The statements in the
/// source material disagree on the power (1 vs 2); it is a parameter.
inline double definetti_bound_ln(long long n, long long k, long long r, int dim,
                                 int exponent_power = 2) {
  if (n < 0) throw ConfigError("definetti_bound_ln: n must be >= 0");
  if (k < 1) throw ConfigError("definetti_bound_ln: k must be >= 1");
  if (r < 0) throw ConfigError("definetti_bound_ln: r must be >= 0");
  if (dim < 1) throw ConfigError("definetti_bound_ln: dim must be >= 1");
  if (exponent_power != 1 && exponent_power != 2)
    throw ConfigError("definetti_bound_ln: exponent_power must be 1 or 2");
  const double dpow = exponent_power == 2
                          ? static_cast<double>(dim) * static_cast<double>(dim)
                          : static_cast<double>(dim);
  return std::log(2.0) -
         static_cast<double>(k) * (static_cast<double>(r) + 1.0) /
             (2.0 * (static_cast<double>(n) + static_cast<double>(k))) +
         0.5 * dpow * std::log(static_cast<double>(k));
}

/// One evaluated bound term: kept in log2 domain, with the linear value
/// saturated at 1 and flagged vacuous when it carries no information.
struct BoundTerm {
  double log2_value = 0.0;
  double linear = 0.0;  // min(1, 2^log2_value)
  bool vacuous = false;

  static BoundTerm from_log2(double v) {
    BoundTerm b;
    b.log2_value = v;
    b.linear = v >= 0.0 ? 1.0 : std::exp2(v);
    b.vacuous = v >= 0.0;
    return b;
  }
  static BoundTerm from_ln(double v) { return from_log2(v / std::log(2.0)); }
};

/// Sum of component linear values (each already saturated at 1), done in log
/// domain so astronomically small terms survive, saturated at 1.
inline BoundTerm sum_bound_terms(std::initializer_list<BoundTerm> terms) {
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& t : terms) mx = std::max(mx, std::min(0.0, t.log2_value));
  double acc = 0.0;
  for (const auto& t : terms) acc += std::exp2(std::min(0.0, t.log2_value) - mx);
  return BoundTerm::from_log2(mx + std::log2(acc));
}

struct BoundsReport {
  std::optional<BoundTerm> lo_chau;
  std::optional<BoundTerm> definetti;        // de Finetti closeness term
  std::optional<BoundTerm> chernoff;         // grouped-measurement concentration term
  std::optional<BoundTerm> sampling;         // classical sampling term
  std::optional<BoundTerm> agreement_total;  // indirect-vs-direct deviation bound
  std::optional<BoundTerm> twisted_total;    // twisted protocol phase-estimate bound
  std::vector<std::string> warnings;
};

struct BoundParams {
  long long n = 0;
  long long m = 0;
  long long m_x = 0;
  long long m_z = 0;
  long long k = 0;
  long long r = -1;  // -1: unspecified (formula default where one exists, else 0)
  long long t = 0;
  double delta = 0.0;
  double epsilon = 0.0;
  int d = 2;
  int d_prime = 1;
  int alphabet_size = 2;
  double hs_norm = 0.0;
  int exponent_power = 2;
};

/// Three-term bound on P(|indirect - direct| > 3 delta) for estimating an
/// observable with t intermediate observables on a permutation-invariant
/// (2m+n)-system state of single-site dimension d:
///   e1 = 2 e^{-n(r+1)/(2(2m+n)) + (1/2) d^power ln n}
///   e2 = (t+1) 2^{-(delta^2/(4 t ||S||^2) - H(r/m')) m' + d log2(m'/2+1)}
///   e3 = d e^{-m delta^2 / (8 d ||S||^2)}
/// with m' = m/t (integer division; a remainder is reported as a warning).
inline BoundsReport agreement_bounds(const BoundParams& p) {
  if (p.m < 1) throw ConfigError("agreement_bounds: m must be >= 1");
  if (p.n < 1) throw ConfigError("agreement_bounds: n must be >= 1");
  if (p.t < 1) throw ConfigError("agreement_bounds: t must be >= 1");
  if (p.r < 0) throw ConfigError("agreement_bounds: r must be >= 0");
  if (p.d < 1) throw ConfigError("agreement_bounds: d must be >= 1");
  if (p.delta < 0.0) throw ConfigError("agreement_bounds: delta must be >= 0");
  if (p.hs_norm <= 0.0) throw ConfigError("agreement_bounds: hs_norm must be > 0");

  BoundsReport rep;
  const long long mp = p.m / p.t;
  if (p.m % p.t != 0)
    rep.warnings.push_back("m is not divisible by t; using m' = floor(m/t)");
  if (mp < 1) throw ConfigError("agreement_bounds: m' = m/t must be >= 1");
  const double ra = static_cast<double>(p.r) / static_cast<double>(mp);
  if (ra > 1.0)
    throw ConfigError("agreement_bounds: entropy argument r/m' exceeds 1");

  const double dpow = p.exponent_power == 2 ? static_cast<double>(p.d) * p.d
                                            : static_cast<double>(p.d);
  BoundTerm e1 = BoundTerm::from_ln(
      std::log(2.0) -
      static_cast<double>(p.n) * (static_cast<double>(p.r) + 1.0) /
          (2.0 * (2.0 * static_cast<double>(p.m) + static_cast<double>(p.n))) +
      0.5 * dpow * std::log(static_cast<double>(p.n)));

  const double hs2 = p.hs_norm * p.hs_norm;
  const double expo =
      -(p.delta * p.delta / (4.0 * static_cast<double>(p.t) * hs2) -
        binary_entropy(ra)) *
          static_cast<double>(mp) +
      static_cast<double>(p.d) * std::log2(static_cast<double>(mp) / 2.0 + 1.0);
  BoundTerm e2 = BoundTerm::from_log2(std::log2(static_cast<double>(p.t) + 1.0) + expo);
  if (2 * p.r > mp) e2.vacuous = true;  // regime of the concentration lemma

  BoundTerm e3 = BoundTerm::from_ln(
      std::log(static_cast<double>(p.d)) -
      static_cast<double>(p.m) * p.delta * p.delta / (8.0 * static_cast<double>(p.d) * hs2));

  rep.definetti = e1;
  rep.chernoff = e2;
  rep.sampling = e3;
  rep.agreement_total = sum_bound_terms({e1, e2, e3});
  return rep;
}

/// Three-term bound on the twisted phase error estimate of the full protocol
/// (n systems, m_z of them tested, t^2 product-observable groups):
///   2 e^{-(n-m_z)(r+1)/(2n) + (1/2) d^4 d'^2 ln(n-m_z)}
///   (t^2+1) 2^{-[delta^2/(36 t^2 d^2 d') - H(r t^2/m_z)] m_z/t^2 + d' d^2 log2(m_z/(2t^2)+1)}
///   d' d^2 e^{-m_z delta^2 / (72 d'^2 d^4 t^2)}
/// Pass r < 0 to use the default r = ceil(d^4 d'^2 ln n).
inline BoundsReport twisted_lo_chau_bounds(long long n, long long m_z, long long r,
                                           int d, int d_prime, long long t,
                                           double delta) {
  if (m_z < 1) throw ConfigError("twisted_lo_chau_bounds: m_z must be >= 1");
  if (n <= m_z) throw ConfigError("twisted_lo_chau_bounds: n must exceed m_z");
  if (t < 1) throw ConfigError("twisted_lo_chau_bounds: t must be >= 1");
  if (d < 2) throw ConfigError("twisted_lo_chau_bounds: d must be >= 2");
  if (d_prime < 1) throw ConfigError("twisted_lo_chau_bounds: d' must be >= 1");
  if (delta < 0.0) throw ConfigError("twisted_lo_chau_bounds: delta must be >= 0");

  const double dd = static_cast<double>(d);
  const double dp = static_cast<double>(d_prime);
  const double d4dp2 = dd * dd * dd * dd * dp * dp;
  const bool r_defaulted = r < 0;
  if (r_defaulted)
    r = static_cast<long long>(std::ceil(d4dp2 * std::log(static_cast<double>(n))));

  const double t2 = static_cast<double>(t) * static_cast<double>(t);
  const double group_size = static_cast<double>(m_z) / t2;
  if (group_size < 1.0)
    throw ConfigError("twisted_lo_chau_bounds: requires m_z >= t^2");

  BoundsReport rep;
  double ra = static_cast<double>(r) * t2 / static_cast<double>(m_z);
  if (ra > 1.0) {
    if (!r_defaulted)
      throw ConfigError("twisted_lo_chau_bounds: entropy argument r t^2/m_z exceeds 1");
    // the asymptotic default r >= d^4 d'^2 ln n does not fit this sample
    // budget; fall back to the largest r inside the concentration regime
    r = static_cast<long long>(std::floor(group_size / 2.0));
    ra = static_cast<double>(r) * t2 / static_cast<double>(m_z);
    rep.warnings.push_back(
        "default r = ceil(d^4 d'^2 ln n) exceeds the entropy domain; clamped to "
        "floor(m_z/(2 t^2)) = " +
        std::to_string(r));
  }

  const double rest = static_cast<double>(n - m_z);
  BoundTerm e1 = BoundTerm::from_ln(
      std::log(2.0) -
      rest * (static_cast<double>(r) + 1.0) / (2.0 * static_cast<double>(n)) +
      0.5 * d4dp2 * std::log(rest));

  const double expo =
      -(delta * delta / (36.0 * t2 * dd * dd * dp) - binary_entropy(ra)) * group_size +
      dp * dd * dd * std::log2(group_size / 2.0 + 1.0);
  BoundTerm e2 = BoundTerm::from_log2(std::log2(t2 + 1.0) + expo);
  if (2.0 * static_cast<double>(r) > group_size) e2.vacuous = true;

  BoundTerm e3 = BoundTerm::from_ln(
      std::log(dp * dd * dd) -
      static_cast<double>(m_z) * delta * delta / (72.0 * dp * dp * dd * dd * dd * dd * t2));

  rep.definetti = e1;
  rep.chernoff = e2;
  rep.sampling = e3;
  rep.twisted_total = sum_bound_terms({e1, e2, e3});
  return rep;
}

/// Asymptotic one-way key fraction max(0, 1 - h(eps_x) - h(eps_z)); zero
/// signals "abort".
inline double key_rate(double eps_x, double eps_z) {
  if (!(eps_x >= 0.0 && eps_x <= 0.5) || !(eps_z >= 0.0 && eps_z <= 0.5))
    throw ConfigError("key_rate: error rates must lie in [0, 1/2]");
  return std::max(0.0, 1.0 - binary_entropy(eps_x) - binary_entropy(eps_z));
}

}  // namespace pskd
