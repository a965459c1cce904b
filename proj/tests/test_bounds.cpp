#include <cmath>

#include <catch2/catch.hpp>

#include "bound_oracles.hpp"
#include "pskd/bounds.hpp"
#include "pskd/rng.hpp"

using namespace pskd;

TEST_CASE("binary entropy endpoints, symmetry, and a frozen value", "[bounds]") {
  CHECK(binary_entropy(0.0) == 0.0);
  CHECK(binary_entropy(1.0) == 0.0);
  CHECK(binary_entropy(0.5) == Approx(1.0));
  CHECK(binary_entropy(0.11) == Approx(0.4999159581645280).epsilon(1e-12));
  CHECK(binary_entropy(0.3) == Approx(binary_entropy(0.7)).epsilon(1e-14));
  CHECK_THROWS_AS(binary_entropy(-0.1), ConfigError);
  CHECK_THROWS_AS(binary_entropy(1.1), ConfigError);
}

TEST_CASE("lo_chau_bound values and side condition", "[bounds]") {
  CHECK(lo_chau_bound(100, 0.1) == Approx(0.27067056647322538).margin(1e-14));
  CHECK(lo_chau_bound(100, 0.0) == 2.0);  // vacuous at delta = 0
  // monotone in m_z
  double prev = 2.0;
  for (long long mz : {10LL, 100LL, 1000LL, 10000LL, 100000LL}) {
    const double v = lo_chau_bound(mz, 0.05);
    CHECK(v <= prev);
    prev = v;
  }
  CHECK(lo_chau_side_condition(10, 0.1, 10000));
  CHECK_FALSE(lo_chau_side_condition(500, 0.1, 2000));
  CHECK_THROWS_AS(lo_chau_bound(0, 0.1), ConfigError);
}

TEST_CASE("chernoff bound frozen values and domain", "[bounds]") {
  CHECK(chernoff_bound_log2(1.5, 1000, 0, 2) ==
        Approx(-544.56266641360958).epsilon(1e-12));
  CHECK(chernoff_bound_log2(0.4, 100, 5, 2) ==
        Approx(35.984546395538604).epsilon(1e-12));
  // r = n/2 makes the entropy term dominate: always vacuous
  for (double delta : {0.5, 1.0, 2.0})
    CHECK(chernoff_bound_log2(delta, 1000, 500, 2) >= 0.0);
  CHECK_THROWS_AS(chernoff_bound_log2(0.5, 1000, 501, 2), ConfigError);
  CHECK_THROWS_AS(chernoff_bound_log2(0.5, 0, 0, 2), ConfigError);
}

TEST_CASE("chernoff bound at r=0 drops the entropy term", "[bounds]") {
  for (long long n : {100LL, 1000LL, 100000LL}) {
    const double expected =
        -static_cast<double>(n) * 0.25 * 0.25 / 4.0 + 2.0 * std::log2(n / 2.0 + 1.0);
    CHECK(chernoff_bound_log2(0.25, n, 0, 2) == Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("sampling bound frozen value and limit", "[bounds]") {
  CHECK(sampling_bound(800, 0.25, 2) == Approx(0.087873867246814835).epsilon(1e-12));
  CHECK(sampling_bound(1, 0.0, 2) == 2.0);  // vacuous
  double prev = 2.0;
  for (long long k : {100LL, 1000LL, 10000LL, 1000000LL}) {
    const double v = sampling_bound(k, 0.1, 2);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("averages gap arithmetic", "[bounds]") {
  CHECK(averages_gap(4, 2.0, 0.0) == 0.0);
  CHECK(averages_gap(4, 2.0, 0.1) == Approx(0.4));
  CHECK(averages_gap(1, 1.0, 2.0) == Approx(2.0));
}

TEST_CASE("de Finetti bound frozen value and monotonicity in r", "[bounds]") {
  CHECK(definetti_bound_ln(1000, 1000, 100000, 4, 2) ==
        Approx(-24944.294810587583).epsilon(1e-12));
  // r=0, k=1: 2 e^{-1/(2(n+1))}, just below 2
  const double v = std::exp(definetti_bound_ln(1000, 1, 0, 4, 2));
  CHECK(v < 2.0);
  CHECK(v > 1.99);
  double prev = 1e300;
  for (long long r : {0LL, 10LL, 100LL, 1000LL}) {
    const double x = definetti_bound_ln(1000, 1000, r, 4, 2);
    CHECK(x < prev);
    prev = x;
  }
  CHECK(definetti_bound_ln(10, 10, 0, 3, 1) < definetti_bound_ln(10, 10, 0, 3, 2));
  CHECK_THROWS_AS(definetti_bound_ln(10, 10, 0, 3, 3), ConfigError);
}

TEST_CASE("bound terms saturate consistently", "[bounds]") {
  const BoundTerm small = BoundTerm::from_log2(-10.0);
  CHECK(small.linear == Approx(std::exp2(-10.0)).epsilon(1e-12));
  CHECK_FALSE(small.vacuous);
  const BoundTerm big = BoundTerm::from_log2(3.0);
  CHECK(big.linear == 1.0);
  CHECK(big.vacuous);
  const BoundTerm ln = BoundTerm::from_ln(-std::log(2.0));
  CHECK(ln.log2_value == Approx(-1.0).epsilon(1e-12));
  CHECK(ln.linear == Approx(0.5).epsilon(1e-12));

  const BoundTerm total = sum_bound_terms({small, BoundTerm::from_log2(-11.0)});
  CHECK(total.linear == Approx(std::exp2(-10.0) + std::exp2(-11.0)).epsilon(1e-12));
  const BoundTerm sat = sum_bound_terms({big, small});
  CHECK(sat.linear == 1.0);
  CHECK(sat.vacuous);
  // log-domain survival of astronomically small terms
  const BoundTerm tiny = sum_bound_terms(
      {BoundTerm::from_log2(-4000.0), BoundTerm::from_log2(-4001.0)});
  CHECK(tiny.log2_value == Approx(std::log2(3.0) - 4001.0).epsilon(1e-12));
}

TEST_CASE("agreement bounds: vacuous regime and a frozen exponent", "[bounds]") {
  BoundParams p;
  p.n = 1000000;
  p.m = 1000000;
  p.t = 4;
  p.r = 1000;
  p.d = 2;
  p.delta = 0.5;
  p.hs_norm = 2.0;

  const BoundsReport rep = agreement_bounds(p);
  REQUIRE(rep.sampling.has_value());
  // e3 = 2 e^{-m delta^2/(8 d hs^2)} = 2 e^{-3906.25}
  CHECK(rep.sampling->log2_value ==
        Approx(-3905.5568528194401 / std::log(2.0)).epsilon(1e-12));
  REQUIRE(rep.agreement_total.has_value());

  BoundParams z = p;
  z.delta = 0.0;
  const BoundsReport zero = agreement_bounds(z);
  CHECK(zero.chernoff->vacuous);
  CHECK(zero.sampling->vacuous);
  CHECK(zero.agreement_total->vacuous);

  BoundParams bad = p;
  bad.r = 2 * (p.m / p.t);  // entropy argument above 1
  bad.r += 1;
  CHECK_THROWS_AS(agreement_bounds(bad), ConfigError);

  BoundParams rem = p;
  rem.m = p.m + 1;
  CHECK_FALSE(agreement_bounds(rem).warnings.empty());
}

TEST_CASE("twisted bounds: defaults, vacuous regime, and preconditions", "[bounds]") {
  // d=2, d'=4, t=16, n=1e8, m_z=1e7, delta=0.1; default r = ceil(256 ln 1e8)
  const BoundsReport rep = twisted_lo_chau_bounds(100000000, 10000000, -1, 2, 4, 16, 0.1);
  REQUIRE(rep.definetti.has_value());
  REQUIRE(rep.chernoff.has_value());
  REQUIRE(rep.sampling.has_value());
  REQUIRE(rep.twisted_total.has_value());
  const auto oracle = boundoracle::twisted(100000000, 10000000, 4716, 2, 4, 16, 0.1L);
  CHECK(rep.definetti->log2_value ==
        Approx(static_cast<double>(oracle.e1_ln / std::log(2.0L))).epsilon(1e-9));
  CHECK(rep.chernoff->log2_value ==
        Approx(static_cast<double>(oracle.e2_log2)).epsilon(1e-9));
  CHECK(rep.sampling->log2_value ==
        Approx(static_cast<double>(oracle.e3_ln / std::log(2.0L))).epsilon(1e-9));

  const BoundsReport zero = twisted_lo_chau_bounds(100000, 40000, 0, 2, 4, 16, 0.0);
  CHECK(zero.chernoff->vacuous);
  CHECK(zero.sampling->vacuous);

  // first term decreasing in r at fixed n, m_z
  double prev = 1e300;
  for (long long r : {0LL, 50LL, 150LL}) {
    const double v =
        twisted_lo_chau_bounds(100000, 40000, r, 2, 4, 16, 0.1).definetti->log2_value;
    CHECK(v < prev);
    prev = v;
  }

  CHECK_THROWS_AS(twisted_lo_chau_bounds(100, 50, -1, 2, 4, 16, 0.1), ConfigError);  // m_z < t^2
  CHECK_THROWS_AS(twisted_lo_chau_bounds(100, 200, -1, 2, 4, 16, 0.1), ConfigError); // n <= m_z
}

TEST_CASE("key rate endpoints and frozen threshold value", "[bounds]") {
  CHECK(key_rate(0.0, 0.0) == 1.0);
  CHECK(key_rate(0.11, 0.11) == Approx(1.680836709440087e-4).epsilon(1e-9));
  CHECK(key_rate(0.25, 0.25) == 0.0);  // 2 h(0.25) > 1: abort
  CHECK_THROWS_AS(key_rate(0.6, 0.0), ConfigError);
  CHECK_THROWS_AS(key_rate(0.0, -0.01), ConfigError);
}

TEST_CASE("all bound formulas match the long-double oracle on random parameters",
          "[bounds]") {
  Rng rng(20240601);
  std::uniform_int_distribution<long long> n_dist(1000, 100000000);
  std::uniform_real_distribution<double> delta_dist(0.01, 1.5);
  std::uniform_int_distribution<int> alpha_dist(2, 16);
  std::uniform_int_distribution<int> d_dist(2, 4);
  std::uniform_int_distribution<int> dp_dist(1, 9);
  std::uniform_int_distribution<long long> t_dist(1, 64);

  for (int it = 0; it < 50; ++it) {
    const long long n = n_dist(rng);
    const long long k = n_dist(rng);
    const double delta = delta_dist(rng);
    const double eps = delta_dist(rng);
    const int alphabet = alpha_dist(rng);
    const int d = d_dist(rng);
    const int dp = dp_dist(rng);
    const long long r = std::uniform_int_distribution<long long>(0, n / 2)(rng);

    // linear-domain bounds: keep the exponent within double range so the
    // log comparison is meaningful
    const long long m_lo = std::uniform_int_distribution<long long>(100, 50000)(rng);
    const double delta_lo = std::uniform_real_distribution<double>(0.005, 0.05)(rng);
    CHECK(std::log(lo_chau_bound(m_lo, delta_lo)) ==
          Approx(static_cast<double>(std::log(boundoracle::lo_chau(m_lo, delta_lo))))
              .epsilon(1e-9)
              .margin(1e-12));
    const long long k_lo = std::uniform_int_distribution<long long>(100, 50000)(rng);
    const double eps_lo = std::uniform_real_distribution<double>(0.01, 0.3)(rng);
    CHECK(std::log(sampling_bound(k_lo, eps_lo, alphabet)) ==
          Approx(static_cast<double>(std::log(boundoracle::sampling(k_lo, eps_lo, alphabet))))
              .epsilon(1e-9)
              .margin(1e-12));
    // log-domain bounds over the full parameter spread
    CHECK(chernoff_bound_log2(delta, n, r, alphabet) ==
          Approx(static_cast<double>(boundoracle::chernoff_log2(delta, n, r, alphabet)))
              .epsilon(1e-9)
              .margin(1e-9));
    CHECK(definetti_bound_ln(n, k, r, d, 2) ==
          Approx(static_cast<double>(boundoracle::definetti_ln(n, k, r, d, 2)))
              .epsilon(1e-9));

    // three-term agreement bound
    BoundParams p;
    p.n = n;
    p.m = std::max<long long>(t_dist(rng) * 64, 256);
    p.t = t_dist(rng);
    p.d = d;
    p.delta = delta;
    p.hs_norm = std::sqrt(static_cast<double>(d));
    p.r = std::uniform_int_distribution<long long>(0, (p.m / p.t) / 2)(rng);
    const BoundsReport agr = agreement_bounds(p);
    const auto agr_oracle = boundoracle::agreement(p.n, p.m, p.r, p.t, p.d, p.delta,
                                                   p.hs_norm, p.exponent_power);
    CHECK(agr.definetti->log2_value ==
          Approx(static_cast<double>(agr_oracle.e1_ln / std::log(2.0L)))
              .epsilon(1e-9)
              .margin(1e-9));
    CHECK(agr.chernoff->log2_value ==
          Approx(static_cast<double>(agr_oracle.e2_log2)).epsilon(1e-9).margin(1e-9));
    CHECK(agr.sampling->log2_value ==
          Approx(static_cast<double>(agr_oracle.e3_ln / std::log(2.0L)))
              .epsilon(1e-9)
              .margin(1e-9));

    // three-term twisted bound
    const long long t_tw = std::uniform_int_distribution<long long>(1, 8)(rng);
    const long long m_z = std::max<long long>(n / 10, t_tw * t_tw);
    const long long r_tw =
        std::uniform_int_distribution<long long>(0, m_z / (2 * t_tw * t_tw))(rng);
    const BoundsReport tw = twisted_lo_chau_bounds(n, m_z, r_tw, d, dp, t_tw, delta);
    const auto tw_oracle = boundoracle::twisted(n, m_z, r_tw, d, dp, t_tw, delta);
    CHECK(tw.definetti->log2_value ==
          Approx(static_cast<double>(tw_oracle.e1_ln / std::log(2.0L)))
              .epsilon(1e-9)
              .margin(1e-9));
    CHECK(tw.chernoff->log2_value ==
          Approx(static_cast<double>(tw_oracle.e2_log2)).epsilon(1e-9).margin(1e-9));
    CHECK(tw.sampling->log2_value ==
          Approx(static_cast<double>(tw_oracle.e3_ln / std::log(2.0L)))
              .epsilon(1e-9)
              .margin(1e-9));
  }
}

TEST_CASE("bounds are monotone in the sample count once informative", "[bounds]") {
  // chernoff in n at fixed r=0, delta=1: informative from n=100 on
  double prev = 0.0;
  bool first = true;
  for (long long n = 100; n <= 100000; n *= 10) {
    const double v = chernoff_bound_log2(1.0, n, 0, 2);
    CHECK(v < 0.0);
    if (!first) CHECK(v <= prev);
    prev = v;
    first = false;
  }
  // twisted total in m_z on a grid where the exponents are negative
  double prev_total = 1e300;
  for (long long mz : {1000000LL, 2000000LL, 4000000LL}) {
    const BoundsReport rep = twisted_lo_chau_bounds(100000000, mz, 0, 2, 1, 2, 1.9);
    CHECK(rep.sampling->log2_value < 0.0);
    CHECK(rep.sampling->log2_value <= prev_total);
    prev_total = rep.sampling->log2_value;
  }
}
