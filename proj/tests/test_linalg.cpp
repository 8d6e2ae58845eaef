#include <catch_amalgamated.hpp>

#include <random>

#include "abelfn/linalg.hpp"

using namespace abelfn;

namespace {

double u01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

IntMatrix random_int_matrix(std::size_t r, std::size_t c, std::int64_t lo, std::int64_t hi,
                            std::mt19937_64& rng) {
    IntMatrix m(r, c);
    for (auto& v : m.data)
        v = lo + static_cast<std::int64_t>(u01(rng) * static_cast<double>(hi - lo + 1));
    return m;
}

bigint big_det(BigIntMatrix m) {
    // fraction-free Bareiss elimination
    if (m.rows != m.cols) return 0;
    std::size_t n = m.rows;
    bigint prev = 1;
    int sign = 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (m(k, k) == 0) {
            std::size_t piv = k;
            for (std::size_t i = k + 1; i < n; ++i)
                if (m(i, k) != 0) { piv = i; break; }
            if (m(piv, k) == 0) return 0;
            m.swap_rows(k, piv);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < n; ++i)
            for (std::size_t j = k + 1; j < n; ++j)
                m(i, j) = (m(i, j) * m(k, k) - m(i, k) * m(k, j)) / prev;
        prev = m(k, k);
    }
    return sign * m(n - 1, n - 1);
}

bigint gcd_big(bigint a, bigint b) {
    a = abs(a); b = abs(b);
    while (b != 0) { bigint t = a % b; a = b; b = t; }
    return a;
}

// independent SNF oracle through determinantal divisors:
// d_1 * ... * d_k = gcd of all k x k minors
std::vector<bigint> determinantal_divisors(const IntMatrix& a) {
    std::size_t r = std::min(a.rows, a.cols);
    std::vector<bigint> div(r, 0);
    for (std::size_t k = 1; k <= r; ++k) {
        bigint g = 0;
        std::vector<std::size_t> ri(k), ci(k);
        std::function<void(std::size_t, std::size_t)> pick_r = [&](std::size_t pos, std::size_t from) {
            if (pos == k) {
                std::function<void(std::size_t, std::size_t)> pick_c = [&](std::size_t cpos,
                                                                           std::size_t cfrom) {
                    if (cpos == k) {
                        BigIntMatrix sub(k, k);
                        for (std::size_t i = 0; i < k; ++i)
                            for (std::size_t j = 0; j < k; ++j) sub(i, j) = a(ri[i], ci[j]);
                        g = gcd_big(g, big_det(sub));
                        return;
                    }
                    for (std::size_t c = cfrom; c < a.cols; ++c) {
                        ci[cpos] = c;
                        pick_c(cpos + 1, c + 1);
                    }
                };
                pick_c(0, 0);
                return;
            }
            for (std::size_t rr = from; rr < a.rows; ++rr) {
                ri[pos] = rr;
                pick_r(pos + 1, rr + 1);
            }
        };
        pick_r(0, 0);
        div[k - 1] = g;
    }
    return div;
}

}  // namespace

TEST_CASE("validate_period_matrix basic shapes") {
    ComplexMatrix m(1, 1);
    m(0, 0) = cplx(0.0, 1.0);
    PeriodMatrix p = validate_period_matrix(m);
    CHECK(p.chol_im(0, 0) == Catch::Approx(1.0));

    ComplexMatrix bad(1, 1);
    bad(0, 0) = cplx(1.0, 0.0);
    CHECK_THROWS_AS(validate_period_matrix(bad), Error);

    ComplexMatrix two(2, 2);
    two(0, 0) = cplx(0, 2); two(0, 1) = cplx(1, 0);
    two(1, 0) = cplx(1, 0); two(1, 1) = cplx(0, 2);
    CHECK_NOTHROW(validate_period_matrix(two));

    ComplexMatrix asym(2, 2);
    asym(0, 0) = cplx(0, 1); asym(0, 1) = cplx(0.5, 0);
    asym(1, 0) = cplx(0.4, 0); asym(1, 1) = cplx(0, 1);
    CHECK_THROWS_AS(validate_period_matrix(asym), Error);
}

TEST_CASE("cholesky factor reproduces Im(omega)") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        std::size_t g = 1 + static_cast<std::size_t>(u01(rng) * 5);
        ComplexMatrix m(g, g);
        RealMatrix a(g, g);
        for (auto& v : a.data) v = u01(rng) - 0.5;
        for (std::size_t i = 0; i < g; ++i)
            for (std::size_t j = 0; j < g; ++j) {
                double im = 0.0;
                for (std::size_t k = 0; k < g; ++k) im += a(i, k) * a(j, k);
                if (i == j) im += 0.5;
                m(i, j) = cplx(u01(rng) - 0.5, im);
                m(j, i) = m(i, j);
            }
        PeriodMatrix p = validate_period_matrix(m);
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < g; ++i)
            for (std::size_t j = 0; j < g; ++j) {
                double rec = 0.0;
                for (std::size_t k = 0; k < g; ++k) rec += p.chol_im(i, k) * p.chol_im(j, k);
                err += (rec - p.omega(i, j).imag()) * (rec - p.omega(i, j).imag());
                scale += p.omega(i, j).imag() * p.omega(i, j).imag();
            }
        CHECK(std::sqrt(err) <= 1e-12 * std::sqrt(scale));
    }
}

TEST_CASE("smith normal form on pinned examples") {
    SECTION("identity") {
        SNFResult s = smith_normal_form(IntMatrix::identity(3));
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                bigint e = i == j ? 1 : 0;
                CHECK(s.d(i, j) == e);
                CHECK(s.u(i, j) == e);
                CHECK(s.v(i, j) == e);
            }
    }
    SECTION("2x2 with divisor chain") {
        IntMatrix a(2, 2);
        a(0, 0) = 2; a(0, 1) = 4; a(1, 0) = 6; a(1, 1) = 8;
        SNFResult s = smith_normal_form(a);
        CHECK(s.d(0, 0) == 2);
        CHECK(s.d(1, 1) == 4);
        // independent determinantal-divisor oracle
        auto div = determinantal_divisors(a);
        CHECK(div[0] == 2);
        CHECK(div[1] / div[0] == 4);
    }
    SECTION("zero matrix") {
        IntMatrix z(2, 2);
        SNFResult s = smith_normal_form(z);
        CHECK(s.d(0, 0) == 0);
        CHECK(s.d(1, 1) == 0);
    }
}

TEST_CASE("smith normal form round trip is exact on random matrices") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 1000; ++rep) {
        std::size_t r = 1 + static_cast<std::size_t>(u01(rng) * 6);
        std::size_t c = 1 + static_cast<std::size_t>(u01(rng) * 6);
        IntMatrix a = random_int_matrix(r, c, -20, 20, rng);
        SNFResult s = smith_normal_form(a);

        BigIntMatrix prod = s.u * BigIntMatrix::from(a) * s.v;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j)
                REQUIRE(prod(i, j) == s.d(i, j));

        REQUIRE(abs(big_det(s.u)) == 1);
        REQUIRE(abs(big_det(s.v)) == 1);

        std::size_t k = std::min(r, c);
        for (std::size_t i = 0; i < k; ++i) {
            REQUIRE(s.d(i, i) >= 0);
            if (i + 1 < k && s.d(i, i) != 0)
                REQUIRE(s.d(i + 1, i + 1) % s.d(i, i) == 0);
            if (s.d(i, i) == 0 && i + 1 < k) REQUIRE(s.d(i + 1, i + 1) == 0);
        }
    }
}

TEST_CASE("smith normal form matches the determinantal-divisor oracle") {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 100; ++rep) {
        std::size_t r = 1 + static_cast<std::size_t>(u01(rng) * 4);
        std::size_t c = 1 + static_cast<std::size_t>(u01(rng) * 4);
        IntMatrix a = random_int_matrix(r, c, -9, 9, rng);
        SNFResult s = smith_normal_form(a);
        auto div = determinantal_divisors(a);
        bigint run = 1;
        for (std::size_t i = 0; i < div.size(); ++i) {
            if (div[i] == 0) {
                REQUIRE(s.d(i, i) == 0);
            } else {
                REQUIRE(run * s.d(i, i) == div[i]);
                run = div[i];
            }
        }
    }
}

TEST_CASE("solve_affine_integer pinned examples") {
    SECTION("identity system") {
        auto sol = solve_affine_integer(IntMatrix::identity(2), {3, -1});
        REQUIRE(sol.has_value());
        CHECK(sol->particular == std::vector<std::int64_t>{3, -1});
        CHECK(sol->kernel_basis.empty());
    }
    SECTION("parity obstruction") {
        IntMatrix a(1, 2);
        a(0, 0) = 2; a(0, 1) = 0;
        CHECK_FALSE(solve_affine_integer(a, {1}).has_value());
    }
    SECTION("one equation, coset equality against brute force") {
        IntMatrix a(1, 2);
        a(0, 0) = 1; a(0, 1) = 1;
        auto sol = solve_affine_integer(a, {2});
        REQUIRE(sol.has_value());
        REQUIRE(sol->kernel_basis.size() == 1);
        // every brute-force solution must be particular + integer multiple of the kernel vector
        for (std::int64_t m0 = -6; m0 <= 6; ++m0)
            for (std::int64_t m1 = -6; m1 <= 6; ++m1) {
                if (m0 + m1 != 2) continue;
                std::int64_t d0 = m0 - sol->particular[0];
                std::int64_t d1 = m1 - sol->particular[1];
                const auto& k = sol->kernel_basis[0];
                bool matched = false;
                for (std::int64_t c = -12; c <= 12; ++c)
                    if (d0 == c * k[0] && d1 == c * k[1]) matched = true;
                REQUIRE(matched);
            }
    }
}

TEST_CASE("solve_affine_integer on random consistent systems") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 300; ++rep) {
        std::size_t r = 1 + static_cast<std::size_t>(u01(rng) * 3);
        std::size_t c = 1 + static_cast<std::size_t>(u01(rng) * 4);
        IntMatrix a = random_int_matrix(r, c, -6, 6, rng);
        std::vector<std::int64_t> x0(c);
        for (auto& v : x0) v = static_cast<std::int64_t>(u01(rng) * 9) - 4;
        std::vector<std::int64_t> b(r, 0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) b[i] += a(i, j) * x0[j];

        auto sol = solve_affine_integer(a, b);
        REQUIRE(sol.has_value());
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<std::int64_t> m = sol->particular;
            for (const auto& k : sol->kernel_basis) {
                std::int64_t coef = static_cast<std::int64_t>(u01(rng) * 11) - 5;
                for (std::size_t j = 0; j < c; ++j) m[j] += coef * k[j];
            }
            for (std::size_t i = 0; i < r; ++i) {
                bigint s = 0;
                for (std::size_t j = 0; j < c; ++j) s += bigint(a(i, j)) * m[j];
                REQUIRE(s == bigint(b[i]));
            }
        }
    }
}

TEST_CASE("kernel basis is sorted by norm") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 50; ++rep) {
        IntMatrix a = random_int_matrix(1, 4, -4, 4, rng);
        auto sol = solve_affine_integer(a, {0});
        REQUIRE(sol.has_value());
        for (std::size_t i = 1; i < sol->kernel_basis.size(); ++i) {
            double prev = 0, cur = 0;
            for (auto v : sol->kernel_basis[i - 1]) prev += double(v) * double(v);
            for (auto v : sol->kernel_basis[i]) cur += double(v) * double(v);
            REQUIRE(prev <= cur);
        }
    }
}

TEST_CASE("rationals stay in lowest terms") {
    Rational r(6, -4);
    CHECK(r.num == -3);
    CHECK(r.den == 2);
    CHECK((Rational(1, 2) + Rational(1, 3)) == Rational(5, 6));
    CHECK((Rational(2, 3) * Rational(3, 4)) == Rational(1, 2));
    CHECK_THROWS_AS(Rational(1, 0), Error);
}
