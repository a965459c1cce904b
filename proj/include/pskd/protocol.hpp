#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "bounds.hpp"
#include "estimation.hpp"
#include "linalg.hpp"
#include "observables.hpp"
#include "parallel.hpp"
#include "private_state.hpp"
#include "rng.hpp"

namespace pskd {

/// Per-copy collective attack on Bob's share (B and B').
struct AttackSpec {
  enum class Kind { None, Depolarizing, Dephasing, Custom };
  Kind kind = Kind::None;
  double p = 0.0;
  std::vector<Matrix> kraus;  // on BB', for Custom

  void validate(const SystemShape& shape) const {
    if (kind == Kind::None) return;
    if (kind == Kind::Custom) {
      if (kraus.empty()) throw ConfigError("attack: custom channel needs Kraus operators");
      const int local = shape.local_dim();
      Matrix sum = Matrix::Zero(local, local);
      for (const auto& k : kraus) {
        if (k.rows() != local || k.cols() != local)
          throw ConfigError("attack: Kraus operator does not act on BB'");
        sum += k.adjoint() * k;
      }
      if ((sum - identity(local)).norm() > 1e-9)
        throw ConfigError("attack: Kraus operators are not trace preserving");
      return;
    }
    if (p < 0.0 || p > 1.0) throw ConfigError("attack: p must lie in [0,1]");
  }
};

/// CPTP image of the per-copy state under the attack; trace preserved.
inline Matrix apply_channel(const Matrix& rho, const SystemShape& shape,
                            const AttackSpec& attack) {
  if (rho.rows() != shape.dim() || rho.cols() != shape.dim())
    throw ConfigError("apply_channel: state does not act on ABA'B'");
  if (attack.kind == AttackSpec::Kind::None) return rho;
  attack.validate(shape);

  const int local = shape.local_dim();
  const Matrix grouped = regroup_local_pairs(rho, shape);
  Matrix out;
  switch (attack.kind) {
    case AttackSpec::Kind::Depolarizing: {
      const Matrix alice = partial_trace(grouped, {local, local}, {0});
      out = (1.0 - attack.p) * grouped +
            attack.p * kron(alice, identity(local) / static_cast<double>(local));
      break;
    }
    case AttackSpec::Kind::Dephasing: {
      out = (1.0 - attack.p) * grouped;
      for (int b = 0; b < local; ++b)
        for (int i = 0; i < local; ++i)
          for (int j = 0; j < local; ++j)
            out(static_cast<long>(i) * local + b, static_cast<long>(j) * local + b) +=
                attack.p * grouped(static_cast<long>(i) * local + b,
                                   static_cast<long>(j) * local + b);
      break;
    }
    case AttackSpec::Kind::Custom: {
      out = Matrix::Zero(grouped.rows(), grouped.cols());
      for (const auto& k : attack.kraus) {
        const Matrix full = kron(identity(local), k);
        out += full * grouped * full.adjoint();
      }
      break;
    }
    default:
      return rho;
  }
  const Matrix back = regroup_canonical(out, shape);
  if (std::abs(back.trace().real() - 1.0) > 1e-10 ||
      std::abs(back.trace().imag()) > 1e-10)
    throw NumericalError("apply_channel: trace not preserved");
  return back;
}

/// Fraction of anti-correlated sigma_z (x) sigma_z outcomes over m_x test
/// copies. No untwisting is applied: the test commutes with any twisting.
inline double estimate_bit_error(const Matrix& rho, const SystemShape& shape, long long m_x,
                                 Rng& rng) {
  if (shape.d != 2) throw ConfigError("estimate_bit_error: bit test is defined for d = 2");
  if (m_x < 1) throw ConfigError("estimate_bit_error: m_x must be >= 1");
  const HermitianOperator zz =
      eig_hermitian(kron(sigma_z(), sigma_z(), identity(shape.d_prime())));
  ProjectiveSampler sampler(rho, zz);
  long long errors = 0;
  for (long long i = 0; i < m_x; ++i)
    if (sampler.sample(rng).value < 0.0) ++errors;
  return static_cast<double>(errors) / static_cast<double>(m_x);
}

inline double estimate_bit_error(const StateSource& source, long long m_x, Rng& rng) {
  source.validate();
  return estimate_bit_error(source.realize(rng), source.shape, m_x, rng);
}

struct PhaseEstimate {
  double sigma_x_hat = 0.0;
  double eps_z_hat = 0.0;  // (1 - sigma_x_hat)/2 clamped to [0,1]
  IndirectEstimate detail;
};

/// LOCC estimate of the twisted phase observable over m_z test copies. An
/// estimate within floating-point noise of zero errors is snapped to exactly
/// zero: one real error among m_z samples moves it by >= 1/(2 m_z), far above
/// the snap level.
inline constexpr double kPhaseSnapTol = 1e-12;

inline PhaseEstimate estimate_twisted_phase(const Matrix& rho,
                                            const ProductDecomposition& dec,
                                            long long m_z, Rng& rng,
                                            bool use_all_terms = false) {
  PhaseEstimate est;
  est.detail = indirect_estimate_on(rho, dec, m_z, rng, use_all_terms);
  est.sigma_x_hat = est.detail.value;
  est.eps_z_hat = std::clamp((1.0 - est.sigma_x_hat) / 2.0, 0.0, 1.0);
  if (est.eps_z_hat < kPhaseSnapTol) est.eps_z_hat = 0.0;
  return est;
}

inline PhaseEstimate estimate_twisted_phase(const StateSource& source,
                                            const ProductDecomposition& dec,
                                            long long m_z, Rng& rng,
                                            bool use_all_terms = false) {
  source.validate();
  return estimate_twisted_phase(source.realize(rng), dec, m_z, rng, use_all_terms);
}

struct TwistingSpec {
  enum class Kind { Identity, Random, Explicit };
  Kind kind = Kind::Identity;
  std::uint64_t seed = 0;
  std::vector<Matrix> blocks;  // for Explicit
};

struct AncillaSpec {
  enum class Kind { MaximallyMixed, Explicit };
  Kind kind = Kind::MaximallyMixed;
  Matrix rho;  // for Explicit
};

struct ProtocolConfig {
  SystemShape shape;
  TwistingSpec twisting;
  AncillaSpec ancilla;
  long long n_total = 0;
  long long m_x = 0;
  long long m_z = 0;
  double delta = 0.1;
  long long r = -1;  // -1: the bounds' default r = ceil(d^4 d'^2 ln n)
  AttackSpec attack;
  double threshold_x = 0.11;
  double threshold_z = 0.11;
  std::uint64_t seed = 0;
  int trials = 1;
  bool use_all_terms = false;

  void validate() const {
    shape.validate();
    if (shape.d != 2) throw ConfigError("protocol: key dimension must be 2");
    if (m_x < 1 || m_z < 1) throw ConfigError("protocol: m_x and m_z must be >= 1");
    if (m_x + m_z >= n_total)
      throw ConfigError("protocol: m_x + m_z must leave at least one key copy");
    if (threshold_x < 0.0 || threshold_x > 0.5 || threshold_z < 0.0 || threshold_z > 0.5)
      throw ConfigError("protocol: abort thresholds must lie in [0, 1/2]");
    if (delta < 0.0) throw ConfigError("protocol: delta must be >= 0");
    if (trials < 1) throw ConfigError("protocol: trials must be >= 1");
  }
};

inline Twisting build_twisting(const SystemShape& shape, const TwistingSpec& spec) {
  switch (spec.kind) {
    case TwistingSpec::Kind::Identity:
      return identity_twisting(shape);
    case TwistingSpec::Kind::Random: {
      Rng rng(spec.seed);
      return random_twisting(shape, rng);
    }
    case TwistingSpec::Kind::Explicit: {
      Twisting tw;
      tw.shape = shape;
      tw.blocks = spec.blocks;
      tw.validate();
      return tw;
    }
  }
  throw ConfigError("twisting: unknown kind");
}

inline Matrix build_ancilla(const SystemShape& shape, const AncillaSpec& spec) {
  const long dp = shape.d_prime();
  switch (spec.kind) {
    case AncillaSpec::Kind::MaximallyMixed:
      return identity(dp) / static_cast<double>(dp);
    case AncillaSpec::Kind::Explicit:
      if (spec.rho.rows() != dp || spec.rho.cols() != dp)
        throw ConfigError("ancilla: matrix does not act on the shield A'B'");
      validate_density(spec.rho, "ancilla");
      return spec.rho;
  }
  throw ConfigError("ancilla: unknown kind");
}

struct Transcript {
  std::vector<long long> bit_test_indices;
  std::vector<long long> phase_test_indices;
  std::vector<long> copy_order;          // phase-sample-to-group permutation
  std::vector<PerTermEstimate> groups;   // per-group coefficients, sizes, means
};

struct RunResult {
  double eps_x_hat = 0.0;
  double sigma_x_hat = 0.0;
  double eps_z_hat = 0.0;
  long long key_length = 0;
  bool aborted = false;
  BoundsReport bounds;
  Transcript transcript;
  std::uint64_t seed = 0;
};

/// Everything that is fixed across trials of one configuration.
struct ProtocolContext {
  ProtocolConfig config;
  PrivateState state;
  Matrix attacked;           // per-copy state after the attack
  ProductDecomposition dec;  // of the twisted phase observable
  BoundsReport bounds;       // parameter-level report shared by every trial
};

inline ProtocolContext make_context(const ProtocolConfig& config) {
  config.validate();
  ProtocolContext ctx;
  ctx.config = config;

  const Twisting tw = build_twisting(config.shape, config.twisting);
  const Matrix anc = build_ancilla(config.shape, config.ancilla);
  ctx.state = make_private_state(config.shape.d, anc, tw);
  ctx.attacked = apply_channel(ctx.state.gamma, config.shape, config.attack);
  const HermitianOperator sigma_x_op = twisted_phase_operator(tw);
  ctx.dec = decompose_product(sigma_x_op.matrix, config.shape);

  BoundsReport rep;
  try {
    rep = twisted_lo_chau_bounds(config.n_total, config.m_z, config.r, config.shape.d,
                                 config.shape.d_prime(), config.shape.t(), config.delta);
  } catch (const ConfigError& e) {
    rep.warnings.push_back(std::string("twisted bound not evaluated: ") + e.what());
  }
  rep.lo_chau = BoundTerm::from_ln(std::log(2.0) -
                                   2.0 * static_cast<double>(config.m_z) *
                                       config.delta * config.delta);
  if (!lo_chau_side_condition(config.m_z, config.delta, config.n_total))
    rep.warnings.push_back(
        "m_z exceeds the sampling-rate side condition m_z < (2 delta^2/(1+2 delta^2)) n");

  // Deviation bound for the indirect estimation at these run parameters: one
  // intermediate observable per product group (t^2 of them), single-site
  // space is the whole per-copy system.
  const long long groups = config.shape.t() * config.shape.t();
  const long long n_rest = config.n_total - 2 * config.m_z;
  if (n_rest >= 1 && config.m_z >= groups) {
    const double d4dp2 =
        std::pow(config.shape.d, 4) * std::pow(config.shape.d_prime(), 2);
    long long r_agr = config.r;
    if (r_agr < 0)
      r_agr = std::min(static_cast<long long>(std::ceil(
                           d4dp2 * std::log(static_cast<double>(config.n_total)))),
                       (config.m_z / groups) / 2);
    BoundParams bp;
    bp.n = n_rest;
    bp.m = config.m_z;
    bp.r = r_agr;
    bp.t = groups;
    bp.d = static_cast<int>(config.shape.dim());
    bp.delta = config.delta;
    bp.hs_norm = std::sqrt(static_cast<double>(config.shape.dim()));
    bp.exponent_power = 2;
    try {
      BoundsReport agr = agreement_bounds(bp);
      rep.agreement_total = agr.agreement_total;
      for (auto& w : agr.warnings) rep.warnings.push_back(std::move(w));
    } catch (const ConfigError& e) {
      rep.warnings.push_back(std::string("agreement bound not evaluated: ") + e.what());
    }
  } else {
    rep.warnings.push_back(
        "agreement bound not evaluated: needs n_total >= 2 m_z + 1 and m_z >= t^2");
  }
  ctx.bounds = rep;
  return ctx;
}

/// One full protocol run: random sample selection, bit and phase tests,
/// abort decision, key length. Deterministic under the seed.
inline RunResult run_protocol_seeded(const ProtocolContext& ctx, std::uint64_t seed) {
  const ProtocolConfig& c = ctx.config;
  Rng rng(seed);

  std::vector<long long> indices(static_cast<size_t>(c.n_total));
  std::iota(indices.begin(), indices.end(), 0LL);
  std::shuffle(indices.begin(), indices.end(), rng);

  RunResult r;
  r.seed = seed;
  r.bounds = ctx.bounds;
  r.transcript.bit_test_indices.assign(indices.begin(), indices.begin() + c.m_x);
  r.transcript.phase_test_indices.assign(indices.begin() + c.m_x,
                                         indices.begin() + c.m_x + c.m_z);

  r.eps_x_hat = estimate_bit_error(ctx.attacked, c.shape, c.m_x, rng);
  PhaseEstimate ph =
      estimate_twisted_phase(ctx.attacked, ctx.dec, c.m_z, rng, c.use_all_terms);
  r.sigma_x_hat = ph.sigma_x_hat;
  r.eps_z_hat = ph.eps_z_hat;
  r.transcript.copy_order = std::move(ph.detail.copy_order);
  r.transcript.groups = std::move(ph.detail.terms);

  r.aborted = r.eps_x_hat > c.threshold_x || r.eps_z_hat > c.threshold_z;
  if (!r.aborted) {
    const long long key_copies = c.n_total - c.m_x - c.m_z;
    r.key_length = static_cast<long long>(
        std::floor(static_cast<double>(key_copies) * key_rate(r.eps_x_hat, r.eps_z_hat)));
    if (r.key_length == 0) r.aborted = true;  // zero key length means abort
  }
  if (r.aborted) r.key_length = 0;
  return r;
}

inline RunResult run_protocol(const ProtocolConfig& config) {
  const ProtocolContext ctx = make_context(config);
  return run_protocol_seeded(ctx, child_seed(config.seed, 0));
}

/// Multi-trial run with per-trial derived seeds; trials execute concurrently
/// and results are merged by trial index.
inline std::vector<RunResult> run_trials(const ProtocolConfig& config) {
  const ProtocolContext ctx = make_context(config);
  std::vector<RunResult> out(static_cast<size_t>(config.trials));
  parallel_for_index(config.trials, [&](int i) {
    out[static_cast<size_t>(i)] =
        run_protocol_seeded(ctx, child_seed(config.seed, static_cast<std::uint64_t>(i)));
  });
  return out;
}

}  // namespace pskd
