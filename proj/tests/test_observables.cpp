#include <catch2/catch.hpp>

#include "pskd/observables.hpp"
#include "support.hpp"

using namespace pskd;
using testsupport::random_density;
using testsupport::random_hermitian;

TEST_CASE("twisted phase operator: untwisted case and spectrum", "[observables]") {
  const SystemShape s1{2, 1};
  const HermitianOperator plain = twisted_phase_operator(identity_twisting(s1));
  CHECK((plain.matrix - kron(sigma_x(), sigma_x())).norm() < 1e-12);

  Rng rng(8);
  const SystemShape s2{2, 2};
  for (int it = 0; it < 5; ++it) {
    const Twisting tw = random_twisting(s2, rng);
    const HermitianOperator sx = twisted_phase_operator(tw);
    // spectrum {+1,-1} with equal multiplicities
    REQUIRE(sx.eigensystem.size() == 2);
    CHECK(sx.eigensystem[0].value == Approx(1.0).margin(1e-9));
    CHECK(sx.eigensystem[1].value == Approx(-1.0).margin(1e-9));
    CHECK(sx.eigensystem[0].multiplicity == s2.dim() / 2);
    CHECK(sx.eigensystem[1].multiplicity == s2.dim() / 2);
    // unitary invariance of the norm
    CHECK(hs_norm(sx.matrix) ==
          Approx(hs_norm(kron(sigma_x(), sigma_x(), identity(4)))).epsilon(1e-12));
    CHECK(hs_norm(sx.matrix) == Approx(2.0 * s2.a));
  }

  SystemShape s3{3, 1};
  CHECK_THROWS_AS(twisted_phase_operator(identity_twisting(s3)), ConfigError);
}

TEST_CASE("decompose_product of sigma_x x sigma_x at a=1", "[observables]") {
  const SystemShape s{2, 1};
  const Matrix xx = kron(sigma_x(), sigma_x());
  const ProductDecomposition dec = decompose_product(xx, s);
  REQUIRE(dec.coefficients.rows() == 4);
  // single term s=2 at the sigma_x/sqrt(2) basis slot (index 1)
  REQUIRE(dec.nonzero_terms.size() == 1);
  CHECK(dec.nonzero_terms[0].j_a == 1);
  CHECK(dec.nonzero_terms[0].j_b == 1);
  CHECK(dec.nonzero_terms[0].s == Approx(2.0));
  CHECK(dec.parseval_sum() == Approx(4.0));
  CHECK((dec.reconstruct() - xx).norm() < 1e-12);
}

TEST_CASE("decompose_product of the identity", "[observables]") {
  // single coefficient Tr(I/sqrt(da))^2 = da at the (identity, identity) slot
  for (int a : {1, 2}) {
    const SystemShape s{2, a};
    const ProductDecomposition dec = decompose_product(identity(s.dim()), s);
    REQUIRE(dec.nonzero_terms.size() == 1);
    CHECK(dec.nonzero_terms[0].j_a == 0);
    CHECK(dec.nonzero_terms[0].j_b == 0);
    CHECK(dec.nonzero_terms[0].s == Approx(2.0 * a));
    CHECK(dec.parseval_sum() == Approx(static_cast<double>(s.dim())));
  }
}

TEST_CASE("decompose_product round trip and parseval on twisted operators", "[observables]") {
  Rng rng(99);
  const SystemShape s{2, 2};
  for (int it = 0; it < 10; ++it) {
    const Twisting tw = random_twisting(s, rng);
    const HermitianOperator sx = twisted_phase_operator(tw);
    const ProductDecomposition dec = decompose_product(sx.matrix, s);
    CHECK((dec.reconstruct() - sx.matrix).norm() <= 1e-9);
    CHECK(dec.parseval_sum() == Approx(16.0).margin(1e-9));  // Tr(Sigma_x^2) = 16
    CHECK(dec.coefficients.rows() == s.t());
    CHECK(dec.coefficients.cols() == s.t());
  }
}

TEST_CASE("decompose-reconstruct is the identity map on random observables", "[observables]") {
  Rng rng(1234);
  for (int it = 0; it < 100; ++it) {
    const SystemShape s = (it % 2 == 0) ? SystemShape{2, 1} : SystemShape{2, 2};
    const Matrix m = random_hermitian(s.dim(), rng);
    const ProductDecomposition dec = decompose_product(m, s);
    CHECK((dec.reconstruct() - m).norm() <= 1e-9);
    CHECK(dec.parseval_sum() == Approx(hs_norm(m) * hs_norm(m)).margin(1e-9));
  }
}

TEST_CASE("decompose_product validates its input", "[observables]") {
  const SystemShape s{2, 1};
  CHECK_THROWS_AS(decompose_product(identity(8), s), ConfigError);
  Matrix bad(4, 4);
  bad.setZero();
  bad(0, 1) = 1.0;  // not hermitian
  CHECK_THROWS_AS(decompose_product(bad, s), NumericalError);
}

TEST_CASE("expectation values", "[observables]") {
  const Vector phi = max_entangled(2);
  const Matrix bell = phi * phi.adjoint();
  CHECK(expectation(kron(sigma_x(), sigma_x()), bell) == Approx(1.0));
  CHECK(expectation(kron(sigma_x(), sigma_x()), identity(4) / 4.0) == Approx(0.0).margin(1e-14));

  // <Sigma_x> on gamma equals <XX x I> on phi x ancilla = 1, any twisting
  Rng rng(55);
  const SystemShape s{2, 2};
  for (int it = 0; it < 5; ++it) {
    const Twisting tw = random_twisting(s, rng);
    const PrivateState st =
        make_private_state(2, testsupport::random_density(4, rng), tw);
    const HermitianOperator sx = twisted_phase_operator(tw);
    const double via_cyclic =
        expectation(kron(sigma_x(), sigma_x(), identity(4)),
                    kron(max_entangled(2) * max_entangled(2).adjoint(), st.ancilla));
    CHECK(via_cyclic == Approx(1.0).margin(1e-10));
    CHECK(expectation(sx, st.gamma) == Approx(1.0).margin(1e-9));
  }
  CHECK_THROWS_AS(expectation(identity(4), identity(8) / 8.0), ConfigError);
}

TEST_CASE("expectation through the decomposition matches the direct trace", "[observables]") {
  Rng rng(321);
  const SystemShape s{2, 2};
  for (int it = 0; it < 10; ++it) {
    const Matrix m = random_hermitian(s.dim(), rng);
    const Matrix rho = random_density(s.dim(), rng);
    const ProductDecomposition dec = decompose_product(m, s);
    CHECK(expectation_via_terms(dec, rho) == Approx(expectation(m, rho)).margin(1e-9));
  }
}
