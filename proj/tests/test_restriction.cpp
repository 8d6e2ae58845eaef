#include <catch_amalgamated.hpp>

#include <random>

#include "abelfn/restriction.hpp"
#include "test_support.hpp"

using namespace abelfn;
using testsup::random_cvec;
using testsup::random_period_matrix;
using testsup::u01;

TEST_CASE("build_embedding on the identity embedding") {
    std::mt19937_64 rng(3);
    PeriodMatrix om = random_period_matrix(2, rng);
    RationalMatrix phi(2, 2);
    phi(0, 0) = Rational(1);
    phi(1, 1) = Rational(1);
    EmbeddingData emb = build_embedding(om.omega, phi, IntMatrix::identity(2),
                                        IntMatrix::identity(2));
    CHECK(frobenius_norm(emb.small_omega.omega - om.omega) <= 1e-14);
}

TEST_CASE("build_embedding rejects a scaled P") {
    GeneratedInstance inst = generate_instance(1, 0, InstanceKind::prym, 5, 1);
    IntMatrix p2 = inst.emb.p;
    for (auto& v : p2.data) v *= 2;
    CHECK_THROWS_MATCHES(build_embedding(inst.emb.big_omega.omega, inst.emb.phi, p2, inst.emb.delta),
                         Error, Catch::Matchers::MessageMatches(
                                    Catch::Matchers::ContainsSubstring("PtPhiNotIdentity")));
}

TEST_CASE("generated instances pass the embedding checks") {
    SECTION("prym(1,1) is 3x3") {
        GeneratedInstance inst = generate_instance(1, 0, InstanceKind::prym, 7, 1);
        CHECK(inst.emb.ambient_dim() == 3);
        CHECK(inst.emb.sub_dim() == 2);
    }
    SECTION("prym(2,1) is 5x5 with delta diag(2,2,1)") {
        GeneratedInstance inst = generate_instance(1, 0, InstanceKind::prym, 8, 2);
        CHECK(inst.emb.ambient_dim() == 5);
        CHECK(inst.emb.delta(0, 0) == 2);
        CHECK(inst.emb.delta(1, 1) == 2);
        CHECK(inst.emb.delta(2, 2) == 1);
    }
    SECTION("generic coordinate sub-torus picks the leading block") {
        GeneratedInstance inst = generate_instance(1, 2, InstanceKind::generic, 9);
        CHECK(std::abs(inst.emb.small_omega.omega(0, 0) - inst.emb.big_omega.omega(0, 0)) <= 1e-14);
    }
    SECTION("different seeds give different matrices") {
        GeneratedInstance a = generate_instance(1, 0, InstanceKind::prym, 1, 1);
        GeneratedInstance b = generate_instance(1, 0, InstanceKind::prym, 2, 1);
        CHECK(frobenius_norm(a.emb.big_omega.omega - b.emb.big_omega.omega) > 1e-6);
    }
}

TEST_CASE("coefficients on the identity embedding reduce to one") {
    std::mt19937_64 rng(12);
    PeriodMatrix om = random_period_matrix(2, rng);
    RationalMatrix phi(2, 2);
    phi(0, 0) = Rational(1);
    phi(1, 1) = Rational(1);
    EmbeddingData emb = build_embedding(om.omega, phi, IntMatrix::identity(2),
                                        IntMatrix::identity(2));
    CoeffVector cv = coeffs_thm2(emb, std::vector<cplx>(2, cplx(0.0)), 1e-12);
    REQUIRE(cv.coeffs.size() == 1);
    CHECK(std::abs(cv.coeffs[0].value - cplx(1.0)) <= 1e-12);
}

TEST_CASE("eq6 path matches the general affine-solver path on prym instances") {
    std::mt19937_64 rng(21);
    for (std::uint64_t seed = 100; seed < 106; ++seed) {
        std::size_t g = 1 + (seed % 2), n = 1 + (seed % 2 == 0 ? 0 : 1);
        GeneratedInstance inst = generate_instance(n, 0, InstanceKind::prym, seed, g);
        PrymSpec spec;
        spec.g = g;
        spec.n = n;
        spec.emb = inst.emb;

        std::vector<cplx> gamma = random_cvec(2 * g + n, 0.5, rng);
        CoeffVector general = coeffs_thm2(spec.emb, gamma, 1e-12);
        CoeffVector direct = coeffs_prym_eq6(spec, gamma, 1e-12);
        REQUIRE(general.coeffs.size() == direct.coeffs.size());
        REQUIRE(general.coeffs.size() == (std::size_t{1} << g));  // 2^g cosets
        for (std::size_t i = 0; i < general.coeffs.size(); ++i) {
            REQUIRE(general.coeffs[i].eps == direct.coeffs[i].eps);
            double scale = std::max(std::abs(general.coeffs[i].value), 1e-30);
            CHECK(std::abs(general.coeffs[i].value - direct.coeffs[i].value) <= 1e-9 * scale);
        }
    }
}

TEST_CASE("eq6 rejects indices outside the theorem's set") {
    GeneratedInstance inst = generate_instance(1, 0, InstanceKind::prym, 31, 1);
    PrymSpec spec;
    spec.g = 1;
    spec.n = 1;
    spec.emb = inst.emb;
    std::vector<cplx> gamma(3, cplx(0.0));
    CHECK_THROWS_AS(eq6_coefficient(spec, {0, 1}, gamma, 1e-10), Error);
    CHECK_THROWS_AS(eq6_coefficient(spec, {2, 0}, gamma, 1e-10), Error);
    CHECK_NOTHROW(eq6_coefficient(spec, {1, 0}, gamma, 1e-10));
}

TEST_CASE("expansion identity") {
    SECTION("identity embedding is exact to evaluation precision") {
        std::mt19937_64 rng(37);
        PeriodMatrix om = random_period_matrix(2, rng);
        RationalMatrix phi(2, 2);
        phi(0, 0) = Rational(1);
        phi(1, 1) = Rational(1);
        EmbeddingData emb = build_embedding(om.omega, phi, IntMatrix::identity(2),
                                            IntMatrix::identity(2));
        ExpansionCheck chk = verify_expansion(emb, random_cvec(2, 0.4, rng),
                                              random_cvec(2, 0.4, rng), 1e-13);
        CHECK(chk.rel_err <= 1e-12);
    }
    SECTION("prym(1,1) random samples") {
        std::mt19937_64 rng(39);
        GeneratedInstance inst = generate_instance(1, 0, InstanceKind::prym, 41, 1);
        for (int s = 0; s < 4; ++s) {
            ExpansionCheck chk = verify_expansion(inst.emb, random_cvec(3, 0.4, rng),
                                                  random_cvec(2, 0.4, rng), 1e-11);
            INFO("sample " << s);
            CHECK(chk.rel_err <= 1e-8);
        }
    }
    SECTION("generic(2,4) random samples") {
        std::mt19937_64 rng(43);
        GeneratedInstance inst = generate_instance(2, 4, InstanceKind::generic, 47);
        for (int s = 0; s < 3; ++s) {
            ExpansionCheck chk = verify_expansion(inst.emb, random_cvec(4, 0.35, rng),
                                                  random_cvec(2, 0.35, rng), 1e-11);
            CHECK(chk.rel_err <= 1e-8);
        }
    }
    SECTION("gamma translation by big-lattice vectors leaves the identity intact") {
        std::mt19937_64 rng(53);
        GeneratedInstance inst = generate_instance(1, 0, InstanceKind::prym, 59, 1);
        std::vector<cplx> z = random_cvec(2, 0.3, rng);
        std::vector<cplx> gamma = random_cvec(3, 0.3, rng);
        // gamma + integer vector + Omega~ * integer vector
        std::vector<cplx> shifted = gamma;
        std::vector<double> k1 = {1, -2, 1}, k2 = {0, 1, -1};
        for (std::size_t i = 0; i < 3; ++i) {
            shifted[i] += k1[i];
            for (std::size_t j = 0; j < 3; ++j)
                shifted[i] += inst.emb.big_omega.omega(i, j) * k2[j];
        }
        ExpansionCheck chk = verify_expansion(inst.emb, shifted, z, 1e-11);
        CHECK(chk.rel_err <= 1e-8);
    }
    SECTION("gamma shift by an integer vector scales coefficients by the predicted phase") {
        std::mt19937_64 rng(61);
        GeneratedInstance inst = generate_instance(1, 0, InstanceKind::prym, 67, 1);
        std::vector<cplx> gamma = random_cvec(3, 0.3, rng);
        std::vector<cplx> shifted = gamma;
        std::vector<std::int64_t> lambda = {2, -1, 1};
        for (std::size_t i = 0; i < 3; ++i) shifted[i] += static_cast<double>(lambda[i]);

        CoeffVector base = coeffs_thm2(inst.emb, gamma, 1e-12);
        CoeffVector moved = coeffs_thm2(inst.emb, shifted, 1e-12);
        // P^t lambda, then phase exp(2 pi i <eps, D^-1 P^t lambda>)
        std::vector<double> ptl(2, 0.0);
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t k = 0; k < 3; ++k)
                ptl[i] += static_cast<double>(inst.emb.p(k, i) * lambda[k]);
        for (std::size_t i = 0; i < base.coeffs.size(); ++i) {
            double phase = 0.0;
            for (std::size_t s = 0; s < 2; ++s)
                phase += static_cast<double>(base.coeffs[i].eps[s]) /
                         static_cast<double>(inst.emb.delta(s, s)) * ptl[s];
            cplx factor = std::exp(cplx(0.0, 2.0 * pi) * phase);
            double scale = std::max(std::abs(base.coeffs[i].value), 1e-20);
            CHECK(std::abs(moved.coeffs[i].value - factor * base.coeffs[i].value) <= 1e-8 * scale);
        }
    }
}

TEST_CASE("empty-solution cosets are sound") {
    // generic embedding with delta = diag(2): (Delta Phi^t) m = eps has no
    // solution for odd eps, and the brute-force scan agrees
    GeneratedInstance inst = generate_instance(1, 3, InstanceKind::generic, 71, 0, {2});
    CoeffVector cv = coeffs_thm2(inst.emb, std::vector<cplx>(3, cplx(0.1, 0.05)), 1e-11);
    REQUIRE(cv.coeffs.size() == 2);
    CHECK(std::abs(cv.coeffs[1].value) == 0.0);
    CHECK(cv.coeffs[1].tail_bound == 0.0);

    // brute force over ||m||_inf <= 8: 2*m_1 = 1 never holds
    bool found = false;
    for (std::int64_t m1 = -8; m1 <= 8 && !found; ++m1)
        if (2 * m1 == 1) found = true;
    CHECK_FALSE(found);

    // the expansion identity still holds with the dead coset
    std::mt19937_64 rng(73);
    ExpansionCheck chk = verify_expansion(inst.emb, random_cvec(3, 0.3, rng),
                                          random_cvec(1, 0.3, rng), 1e-11);
    CHECK(chk.rel_err <= 1e-8);
}

TEST_CASE("audit mode reports corrupted instances that strict mode rejects") {
    GeneratedInstance inst = generate_instance(1, 0, InstanceKind::prym, 79, 1);
    ComplexMatrix corrupted = inst.emb.big_omega.omega;
    corrupted(0, 0) += 1e-3;  // the diagonal couples to the hottest Fourier mode

    CHECK_THROWS_AS(build_embedding(corrupted, inst.emb.phi, inst.emb.p, inst.emb.delta), Error);

    EmbeddingAudit audit = build_embedding_audit(corrupted, inst.emb.phi, inst.emb.p,
                                                 inst.emb.delta);
    CHECK_FALSE(audit.violations.empty());

    // identity breaks visibly on the corrupted data
    std::mt19937_64 rng(83);
    double worst = 0.0;
    for (int s2 = 0; s2 < 5; ++s2) {
        ExpansionCheck chk = verify_expansion(audit.data, random_cvec(3, 0.4, rng),
                                              random_cvec(2, 0.4, rng), 1e-11);
        worst = std::max(worst, chk.rel_err);
    }
    CHECK(worst > 1e-4);
}
