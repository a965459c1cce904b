#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "linalg.hpp"
#include "observables.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace pskd {

/// Counts per outcome label (eigenvalue-group index 0..K-1).
struct FrequencyDistribution {
  std::vector<long> counts;
  long total = 0;

  explicit FrequencyDistribution(size_t alphabet = 0) : counts(alphabet, 0) {}

  void add(int label) {
    counts.at(static_cast<size_t>(label)) += 1;
    total += 1;
  }
  double prob(int label) const {
    return total > 0 ? static_cast<double>(counts.at(static_cast<size_t>(label))) / total
                     : 0.0;
  }
  std::vector<double> probabilities() const {
    std::vector<double> p(counts.size(), 0.0);
    for (size_t l = 0; l < counts.size(); ++l)
      p[l] = total > 0 ? static_cast<double>(counts[l]) / total : 0.0;
    return p;
  }
};

struct Outcome {
  int index = 0;      // eigenvalue-group index
  double value = 0.0; // eigenvalue
};

namespace detail {

inline void validate_probabilities(std::vector<double>& p, const char* what) {
  double sum = 0.0;
  for (double& x : p) {
    if (x < -1e-9)
      throw NumericalError(std::string(what) + ": negative outcome probability");
    if (x < 0.0) x = 0.0;
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw NumericalError(std::string(what) + ": outcome probabilities do not sum to 1");
  for (double& x : p) x /= sum;
}

inline int sample_index(const std::vector<double>& probs, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (size_t l = 0; l < probs.size(); ++l) {
    acc += probs[l];
    if (u < acc) return static_cast<int>(l);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace detail

/// Projective measurement of a hermitian observable on a fixed state. Outcome
/// probabilities Tr(P_l rho) are computed once at construction and reused for
/// every draw.
class ProjectiveSampler {
 public:
  ProjectiveSampler(const Matrix& rho, const HermitianOperator& obs) {
    if (rho.rows() != obs.matrix.rows() || rho.cols() != obs.matrix.cols())
      throw ConfigError("measure: state and observable dimensions disagree");
    probs_.reserve(obs.eigensystem.size());
    values_.reserve(obs.eigensystem.size());
    for (const auto& level : obs.eigensystem) {
      probs_.push_back(level.projector.cwiseProduct(rho.transpose()).sum().real());
      values_.push_back(level.value);
    }
    detail::validate_probabilities(probs_, "measure");
  }

  Outcome sample(Rng& rng) const {
    const int l = detail::sample_index(probs_, rng);
    return {l, values_[static_cast<size_t>(l)]};
  }

  const std::vector<double>& probabilities() const { return probs_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> probs_;
  std::vector<double> values_;
};

inline Outcome measure(const Matrix& rho, const HermitianOperator& obs, Rng& rng) {
  return ProjectiveSampler(rho, obs).sample(rng);
}

/// Joint local measurement of O_a on AA' and O_b on BB' of one copy. The
/// joint outcome law Tr[(P_la (x) Q_lb) rho'] is cached at construction; its
/// marginals coincide with the single-sided measurement distributions.
class LocalPairSampler {
 public:
  LocalPairSampler(const Matrix& rho_canonical, const SystemShape& shape,
                   const HermitianOperator& obs_a, const HermitianOperator& obs_b) {
    const int local = shape.local_dim();
    if (rho_canonical.rows() != shape.dim())
      throw ConfigError("measure_local_pair: state does not act on ABA'B'");
    if (obs_a.matrix.rows() != local || obs_b.matrix.rows() != local)
      throw ConfigError("measure_local_pair: observables must act on AA' and BB'");
    const Matrix grouped = regroup_local_pairs(rho_canonical, shape);
    ka_ = obs_a.eigensystem.size();
    kb_ = obs_b.eigensystem.size();
    for (const auto& lv : obs_a.eigensystem) values_a_.push_back(lv.value);
    for (const auto& lv : obs_b.eigensystem) values_b_.push_back(lv.value);
    joint_.reserve(ka_ * kb_);
    for (size_t la = 0; la < ka_; ++la)
      for (size_t lb = 0; lb < kb_; ++lb) {
        const Matrix proj = kron(obs_a.eigensystem[la].projector,
                                 obs_b.eigensystem[lb].projector);
        joint_.push_back(proj.cwiseProduct(grouped.transpose()).sum().real());
      }
    detail::validate_probabilities(joint_, "measure_local_pair");
  }

  std::pair<Outcome, Outcome> sample(Rng& rng) const {
    const int flat = detail::sample_index(joint_, rng);
    const int la = flat / static_cast<int>(kb_);
    const int lb = flat % static_cast<int>(kb_);
    return {{la, values_a_[static_cast<size_t>(la)]},
            {lb, values_b_[static_cast<size_t>(lb)]}};
  }

  Eigen::MatrixXd joint_probabilities() const {
    Eigen::MatrixXd p(ka_, kb_);
    for (size_t la = 0; la < ka_; ++la)
      for (size_t lb = 0; lb < kb_; ++lb) p(la, lb) = joint_[la * kb_ + lb];
    return p;
  }

 private:
  size_t ka_ = 0, kb_ = 0;
  std::vector<double> joint_;  // row-major (la, lb)
  std::vector<double> values_a_, values_b_;
};

inline std::pair<Outcome, Outcome> measure_local_pair(const Matrix& rho,
                                                      const SystemShape& shape,
                                                      const HermitianOperator& obs_a,
                                                      const HermitianOperator& obs_b,
                                                      Rng& rng) {
  return LocalPairSampler(rho, shape, obs_a, obs_b).sample(rng);
}

/// Per-copy state generator for permutation-invariant many-copy scenarios:
/// IID, or a mixture of IID whose component is drawn once per protocol run
/// (never per copy), which realizes exactly the integral of tensor powers.
struct StateSource {
  struct Component {
    double weight = 1.0;
    Matrix rho;
  };

  SystemShape shape;
  std::vector<Component> components;

  static StateSource iid(const SystemShape& shape, Matrix rho) {
    StateSource s;
    s.shape = shape;
    s.components.push_back({1.0, std::move(rho)});
    s.validate();
    return s;
  }

  static StateSource mixture(const SystemShape& shape, std::vector<Component> comps) {
    StateSource s;
    s.shape = shape;
    s.components = std::move(comps);
    s.validate();
    return s;
  }

  void validate() const {
    shape.validate();
    if (components.empty()) throw ConfigError("StateSource: no components");
    double sum = 0.0;
    for (const auto& c : components) {
      if (c.weight < 0.0) throw ConfigError("StateSource: negative weight");
      sum += c.weight;
      if (c.rho.rows() != shape.dim() || c.rho.cols() != shape.dim())
        throw ConfigError("StateSource: component does not act on ABA'B'");
      validate_density(c.rho, "StateSource component");
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw ConfigError("StateSource: weights do not sum to 1");
  }

  const Matrix& realize(Rng& rng) const {
    if (components.size() == 1) return components.front().rho;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (const auto& c : components) {
      acc += c.weight;
      if (u < acc) return c.rho;
    }
    return components.back().rho;
  }
};

struct PerTermEstimate {
  int j_a = 0;
  int j_b = 0;
  double s = 0.0;
  long samples = 0;
  double mean = 0.0;  // empirical mean of the outcome products
};

struct IndirectEstimate {
  double value = 0.0;
  std::vector<PerTermEstimate> terms;
  std::vector<long> group_sizes;
  std::vector<long> copy_order;  // seeded assignment permutation; groups take consecutive chunks
};

/// LOCC estimation of the decomposed observable: the m copies are split into
/// one group per active term (all t^2 when use_all_terms is set), each group
/// estimates <O_ja (x) O_jb> as the mean of products of local outcomes, and
/// the weighted sum over coefficients gives the estimate. Unbiased for
/// Tr(Sigma rho) on IID sources. Remainder copies go round-robin to the
/// first groups.
inline IndirectEstimate indirect_estimate_on(const Matrix& rho,
                                             const ProductDecomposition& dec,
                                             long m, Rng& rng,
                                             bool use_all_terms = false) {
  std::vector<ProductDecomposition::Term> terms;
  if (use_all_terms) {
    for (long ja = 0; ja < dec.coefficients.rows(); ++ja)
      for (long jb = 0; jb < dec.coefficients.cols(); ++jb)
        terms.push_back({static_cast<int>(ja), static_cast<int>(jb),
                         dec.coefficients(ja, jb)});
  } else {
    terms = dec.nonzero_terms;
  }
  const long groups = static_cast<long>(terms.size());
  if (groups == 0) throw ConfigError("indirect_estimate: decomposition has no active terms");
  if (m < groups)
    throw ConfigError("indirect_estimate: need at least one copy per term group (m >= " +
                      std::to_string(groups) + ")");

  IndirectEstimate est;
  est.copy_order.resize(static_cast<size_t>(m));
  std::iota(est.copy_order.begin(), est.copy_order.end(), 0L);
  std::shuffle(est.copy_order.begin(), est.copy_order.end(), rng);

  const long base = m / groups;
  const long rem = m % groups;

  std::map<int, HermitianOperator> eig_cache;
  auto eig_of = [&](int j) -> const HermitianOperator& {
    auto it = eig_cache.find(j);
    if (it == eig_cache.end())
      it = eig_cache.emplace(j, eig_hermitian(dec.basis.elements[static_cast<size_t>(j)]))
               .first;
    return it->second;
  };

  for (long g = 0; g < groups; ++g) {
    const auto& term = terms[static_cast<size_t>(g)];
    const long size = base + (g < rem ? 1 : 0);
    est.group_sizes.push_back(size);
    LocalPairSampler sampler(rho, dec.shape, eig_of(term.j_a), eig_of(term.j_b));
    double sum = 0.0;
    for (long i = 0; i < size; ++i) {
      const auto [oa, ob] = sampler.sample(rng);
      sum += oa.value * ob.value;
    }
    const double mean = size > 0 ? sum / static_cast<double>(size) : 0.0;
    est.terms.push_back({term.j_a, term.j_b, term.s, size, mean});
    est.value += term.s * mean;
  }
  return est;
}

inline IndirectEstimate indirect_estimate(const StateSource& source,
                                          const ProductDecomposition& dec, long m,
                                          Rng& rng, bool use_all_terms = false) {
  source.validate();
  return indirect_estimate_on(source.realize(rng), dec, m, rng, use_all_terms);
}

/// Mean of per-copy eigenvalue outcomes of the observable itself.
inline double direct_estimate_on(const Matrix& rho, const HermitianOperator& sigma,
                                 long count, Rng& rng) {
  if (count < 1) throw ConfigError("direct_estimate: count must be >= 1");
  ProjectiveSampler sampler(rho, sigma);
  FrequencyDistribution freq(sampler.values().size());
  for (long i = 0; i < count; ++i) freq.add(sampler.sample(rng).index);
  double mean = 0.0;
  for (size_t l = 0; l < freq.counts.size(); ++l)
    mean += sampler.values()[l] * static_cast<double>(freq.counts[l]);
  return mean / static_cast<double>(count);
}

inline double direct_estimate(const StateSource& source, const HermitianOperator& sigma,
                              long count, Rng& rng) {
  source.validate();
  return direct_estimate_on(source.realize(rng), sigma, count, rng);
}

struct EstimationResult {
  double sigma_indirect = 0.0;  // LOCC estimate from the first m copies
  double sigma_direct = 0.0;    // projective estimate from the remaining m+n copies
  double deviation = 0.0;
  std::vector<long> group_sizes;
  std::vector<PerTermEstimate> per_term;
  std::uint64_t seed = 0;
};

/// Per trial: draw the mixture component, estimate indirectly on m copies and
/// directly (with the reconstructed observable) on the other m+n of the
/// 2m+n copies. Trials run on disjoint child-seeded streams and merge by
/// index, so results are bit-identical for a fixed master seed.
inline std::vector<EstimationResult> agreement_experiment(
    const StateSource& source, const ProductDecomposition& dec, long m, long n,
    int trials, std::uint64_t master_seed, bool use_all_terms = false) {
  if (trials < 1) throw ConfigError("agreement_experiment: trials must be >= 1");
  if (n < 0) throw ConfigError("agreement_experiment: n must be >= 0");
  source.validate();
  const HermitianOperator sigma = eig_hermitian(dec.reconstruct());

  std::vector<EstimationResult> out(static_cast<size_t>(trials));
  parallel_for_index(trials, [&](int i) {
    const std::uint64_t seed = child_seed(master_seed, static_cast<std::uint64_t>(i));
    Rng rng(seed);
    const Matrix& rho = source.realize(rng);
    IndirectEstimate ind = indirect_estimate_on(rho, dec, m, rng, use_all_terms);
    const double dir = direct_estimate_on(rho, sigma, m + n, rng);
    EstimationResult& r = out[static_cast<size_t>(i)];
    r.sigma_indirect = ind.value;
    r.sigma_direct = dir;
    r.deviation = std::abs(ind.value - dir);
    r.group_sizes = std::move(ind.group_sizes);
    r.per_term = std::move(ind.terms);
    r.seed = seed;
  });
  return out;
}

}  // namespace pskd
