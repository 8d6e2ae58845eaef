#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace abelfn {

using cplx = std::complex<double>;
using bigint = boost::multiprecision::cpp_int;

inline constexpr double pi = 3.14159265358979323846264338327950288;

enum class errc {
    not_symmetric,
    not_positive_definite,
    overflow,
    no_solution,
    dimension_mismatch,
    capacity_exceeded,
    compatibility_violation,
    degenerate_seed,
    near_theta_zero,
    denominator_near_zero,
    mu_zero,
    fit_residual_too_large,
    positivity_lost,
    state_unbounded,
    bad_input,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::not_symmetric: return "NotSymmetric";
        case errc::not_positive_definite: return "NotPositiveDefinite";
        case errc::overflow: return "Overflow";
        case errc::no_solution: return "NoSolution";
        case errc::dimension_mismatch: return "DimensionMismatch";
        case errc::capacity_exceeded: return "CapacityExceeded";
        case errc::compatibility_violation: return "CompatibilityViolation";
        case errc::degenerate_seed: return "DegenerateSeed";
        case errc::near_theta_zero: return "NearThetaZero";
        case errc::denominator_near_zero: return "DenominatorNearZero";
        case errc::mu_zero: return "MuZero";
        case errc::fit_residual_too_large: return "FitResidualTooLarge";
        case errc::positivity_lost: return "PositivityLost";
        case errc::state_unbounded: return "StateUnbounded";
        case errc::bad_input: return "BadInput";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(errc c, const std::string& what)
        : std::runtime_error(std::string(errc_name(c)) + ": " + what), code_(c) {}
    errc code() const { return code_; }
    const char* name() const { return errc_name(code_); }

private:
    errc code_;
};

// ---------------------------------------------------------------------------
// dense matrices, row-major, sized for g <= ~8

struct RealMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    RealMatrix() = default;
    RealMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static RealMatrix identity(std::size_t n) {
        RealMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

struct ComplexMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<cplx> data;

    ComplexMatrix() = default;
    ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

    cplx& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    cplx operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    bool all_finite() const {
        for (const cplx& z : data)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }
};

inline ComplexMatrix transpose(const ComplexMatrix& a) {
    ComplexMatrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

inline RealMatrix transpose(const RealMatrix& a) {
    RealMatrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

inline ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols != b.rows) throw Error(errc::dimension_mismatch, "matrix product shapes");
    ComplexMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            cplx aik = a(i, k);
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline RealMatrix operator*(const RealMatrix& a, const RealMatrix& b) {
    if (a.cols != b.rows) throw Error(errc::dimension_mismatch, "matrix product shapes");
    RealMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw Error(errc::dimension_mismatch, "matrix difference shapes");
    ComplexMatrix c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = a.data[i] - b.data[i];
    return c;
}

inline ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw Error(errc::dimension_mismatch, "matrix sum shapes");
    ComplexMatrix c(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = a.data[i] + b.data[i];
    return c;
}

inline double frobenius_norm(const ComplexMatrix& a) {
    double s = 0.0;
    for (const cplx& z : a.data) s += std::norm(z);
    return std::sqrt(s);
}

inline double max_abs(const ComplexMatrix& a) {
    double m = 0.0;
    for (const cplx& z : a.data) m = std::max(m, std::abs(z));
    return m;
}

inline std::vector<cplx> mat_vec(const ComplexMatrix& a, const std::vector<cplx>& v) {
    if (a.cols != v.size()) throw Error(errc::dimension_mismatch, "matrix-vector shapes");
    std::vector<cplx> r(a.rows, cplx(0.0));
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) r[i] += a(i, j) * v[j];
    return r;
}

inline std::vector<double> mat_vec(const RealMatrix& a, const std::vector<double>& v) {
    if (a.cols != v.size()) throw Error(errc::dimension_mismatch, "matrix-vector shapes");
    std::vector<double> r(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) r[i] += a(i, j) * v[j];
    return r;
}

// lower-triangular solve L x = b
inline std::vector<double> solve_lower(const RealMatrix& l, const std::vector<double>& b) {
    std::size_t n = l.rows;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < i; ++j) s -= l(i, j) * x[j];
        x[i] = s / l(i, i);
    }
    return x;
}

// upper-triangular solve L^T x = b, with l lower-triangular
inline std::vector<double> solve_lower_transposed(const RealMatrix& l, const std::vector<double>& b) {
    std::size_t n = l.rows;
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= l(j, i) * x[j];
        x[i] = s / l(i, i);
    }
    return x;
}

// Cholesky Y = L L^T; pivots must stay strictly positive.
inline std::optional<RealMatrix> try_cholesky(const RealMatrix& y) {
    std::size_t n = y.rows;
    RealMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = y(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0)) return std::nullopt;
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = y(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

// ---------------------------------------------------------------------------
// PeriodMatrix: symmetric complex matrix with positive definite imaginary part,
// with the Cholesky factor of Im cached.

struct PeriodMatrix {
    std::size_t dim = 0;
    ComplexMatrix omega;
    RealMatrix chol_im;  // lower triangular, Im(omega) = chol_im * chol_im^T

    RealMatrix im() const {
        RealMatrix y(dim, dim);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) y(i, j) = omega(i, j).imag();
        return y;
    }

    // y = Im(omega)^{-1} v via two triangular solves
    std::vector<double> im_solve(const std::vector<double>& v) const {
        return solve_lower_transposed(chol_im, solve_lower(chol_im, v));
    }

    // lower bound on the smallest eigenvalue of Im(omega): 1/||Y^{-1}||_inf
    double im_lambda_min_lb() const {
        double worst = 0.0;
        std::vector<double> e(dim, 0.0);
        RealMatrix yinv(dim, dim);
        for (std::size_t j = 0; j < dim; ++j) {
            e.assign(dim, 0.0);
            e[j] = 1.0;
            auto col = im_solve(e);
            for (std::size_t i = 0; i < dim; ++i) yinv(i, j) = col[i];
        }
        for (std::size_t i = 0; i < dim; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < dim; ++j) row += std::abs(yinv(i, j));
            worst = std::max(worst, row);
        }
        return 1.0 / worst;
    }
};

// Symmetry tolerance 1e-9 relative, with symmetrization below it.
inline PeriodMatrix validate_period_matrix(const ComplexMatrix& m) {
    if (m.rows != m.cols) throw Error(errc::dimension_mismatch, "period matrix must be square");
    if (!m.all_finite()) throw Error(errc::bad_input, "period matrix has non-finite entries");
    std::size_t n = m.rows;
    double scale = max_abs(m);
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            asym = std::max(asym, std::abs(m(i, j) - m(j, i)));
    if (scale > 0.0 && asym > 1e-9 * scale)
        throw Error(errc::not_symmetric, "asymmetry " + std::to_string(asym / scale) + " relative");

    PeriodMatrix p;
    p.dim = n;
    p.omega = ComplexMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) p.omega(i, j) = 0.5 * (m(i, j) + m(j, i));

    RealMatrix y(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) y(i, j) = p.omega(i, j).imag();
    auto l = try_cholesky(y);
    if (!l) throw Error(errc::not_positive_definite, "Im(omega) has a nonpositive Cholesky pivot");
    p.chol_im = std::move(*l);
    return p;
}

// ---------------------------------------------------------------------------
// exact rationals (int64 surface), lowest terms, positive denominator

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n) : num(n), den(1) {}
    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }

    void normalize() {
        if (den == 0) throw Error(errc::bad_input, "rational with zero denominator");
        if (den < 0) { num = -num; den = -den; }
        std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
    }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool is_integer() const { return den == 1; }

    friend Rational operator+(Rational a, Rational b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
    friend Rational operator-(Rational a, Rational b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
    friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
    friend bool operator==(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }
    friend bool operator!=(Rational a, Rational b) { return !(a == b); }
    friend bool operator<(Rational a, Rational b) { return a.num * b.den < b.num * a.den; }
};

struct RationalMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<Rational> data;

    RationalMatrix() = default;
    RationalMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

    Rational& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    Rational operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    ComplexMatrix to_complex() const {
        ComplexMatrix m(rows, cols);
        for (std::size_t i = 0; i < data.size(); ++i) m.data[i] = data[i].value();
        return m;
    }
    RealMatrix to_real() const {
        RealMatrix m(rows, cols);
        for (std::size_t i = 0; i < data.size(); ++i) m.data[i] = data[i].value();
        return m;
    }
};

// ---------------------------------------------------------------------------
// exact integer matrices and Smith normal form

struct IntMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<std::int64_t> data;

    IntMatrix() = default;
    IntMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

    std::int64_t& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    std::int64_t operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static IntMatrix identity(std::size_t n) {
        IntMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
        return m;
    }
    static IntMatrix diagonal(const std::vector<std::int64_t>& d) {
        IntMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    bool is_diagonal() const {
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                if (i != j && (*this)(i, j) != 0) return false;
        return true;
    }

    ComplexMatrix to_complex() const {
        ComplexMatrix m(rows, cols);
        for (std::size_t i = 0; i < data.size(); ++i) m.data[i] = static_cast<double>(data[i]);
        return m;
    }
    RealMatrix to_real() const {
        RealMatrix m(rows, cols);
        for (std::size_t i = 0; i < data.size(); ++i) m.data[i] = static_cast<double>(data[i]);
        return m;
    }

    friend bool operator==(const IntMatrix& a, const IntMatrix& b) {
        return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
    }
};

// arbitrary-precision matrix; the unimodular SNF transforms routinely outgrow
// int64 even for small inputs, so they stay exact here
struct BigIntMatrix {
    std::size_t rows = 0, cols = 0;
    std::vector<bigint> data;

    BigIntMatrix() = default;
    BigIntMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}
    bigint& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const bigint& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static BigIntMatrix identity(std::size_t n) {
        BigIntMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
        return m;
    }
    static BigIntMatrix from(const IntMatrix& a) {
        BigIntMatrix m(a.rows, a.cols);
        for (std::size_t i = 0; i < a.data.size(); ++i) m.data[i] = a.data[i];
        return m;
    }
    void swap_rows(std::size_t a, std::size_t b) {
        for (std::size_t j = 0; j < cols; ++j) std::swap((*this)(a, j), (*this)(b, j));
    }
    void swap_cols(std::size_t a, std::size_t b) {
        for (std::size_t i = 0; i < rows; ++i) std::swap((*this)(i, a), (*this)(i, b));
    }
    // row[a] -= q * row[b]
    void axpy_row(std::size_t a, std::size_t b, const bigint& q) {
        for (std::size_t j = 0; j < cols; ++j) (*this)(a, j) -= q * (*this)(b, j);
    }
    void axpy_col(std::size_t a, std::size_t b, const bigint& q) {
        for (std::size_t i = 0; i < rows; ++i) (*this)(i, a) -= q * (*this)(i, b);
    }
    void negate_row(std::size_t a) {
        for (std::size_t j = 0; j < cols; ++j) (*this)(a, j) = -(*this)(a, j);
    }
    void negate_col(std::size_t a) {
        for (std::size_t i = 0; i < rows; ++i) (*this)(i, a) = -(*this)(i, a);
    }
};

inline BigIntMatrix operator*(const BigIntMatrix& a, const BigIntMatrix& b) {
    if (a.cols != b.rows) throw Error(errc::dimension_mismatch, "matrix product shapes");
    BigIntMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k)
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += a(i, k) * b(k, j);
    return c;
}

struct SNFResult {
    BigIntMatrix u;  // unimodular, rows x rows
    BigIntMatrix v;  // unimodular, cols x cols
    BigIntMatrix d;  // diagonal, nonnegative, divisibility chain
};

// Smith normal form: u * a * v = d with u, v unimodular and d a nonnegative
// diagonal with d_i | d_{i+1}. Everything exact.
inline SNFResult smith_normal_form(const IntMatrix& a) {
    std::size_t m = a.rows, n = a.cols;
    BigIntMatrix d(m, n);
    for (std::size_t i = 0; i < m * n; ++i) d.data[i] = a.data[i];
    BigIntMatrix u = BigIntMatrix::identity(m);
    BigIntMatrix v = BigIntMatrix::identity(n);

    std::size_t r = std::min(m, n);
    for (std::size_t k = 0; k < r; ++k) {
        // pick the smallest nonzero pivot in the trailing block
        for (;;) {
            std::size_t pi = k, pj = k;
            bigint best = 0;
            for (std::size_t i = k; i < m; ++i)
                for (std::size_t j = k; j < n; ++j) {
                    bigint av = abs(d(i, j));
                    if (av != 0 && (best == 0 || av < best)) { best = av; pi = i; pj = j; }
                }
            if (best == 0) goto done_block;  // trailing block is zero
            if (pi != k) { d.swap_rows(k, pi); u.swap_rows(k, pi); }
            if (pj != k) { d.swap_cols(k, pj); v.swap_cols(k, pj); }
            if (d(k, k) < 0) { d.negate_row(k); u.negate_row(k); }

            bool clean = true;
            for (std::size_t i = k + 1; i < m; ++i) {
                if (d(i, k) == 0) continue;
                bigint q = d(i, k) / d(k, k);
                d.axpy_row(i, k, q);
                u.axpy_row(i, k, q);
                if (d(i, k) != 0) clean = false;
            }
            for (std::size_t j = k + 1; j < n; ++j) {
                if (d(k, j) == 0) continue;
                bigint q = d(k, j) / d(k, k);
                d.axpy_col(j, k, q);
                v.axpy_col(j, k, q);
                if (d(k, j) != 0) clean = false;
            }
            if (!clean) continue;

            // divisibility: pivot must divide the whole trailing block
            bool divides = true;
            for (std::size_t i = k + 1; i < m && divides; ++i)
                for (std::size_t j = k + 1; j < n; ++j)
                    if (d(i, j) % d(k, k) != 0) {
                        // fold row i into row k and restart the pivot step
                        d.axpy_row(k, i, bigint(-1));
                        u.axpy_row(k, i, bigint(-1));
                        divides = false;
                        break;
                    }
            if (divides) break;
        }
    }
done_block:;

    SNFResult out;
    out.u = std::move(u);
    out.v = std::move(v);
    out.d = std::move(d);
    return out;
}

struct AffineSolution {
    std::vector<std::int64_t> particular;
    std::vector<std::vector<std::int64_t>> kernel_basis;  // size-reduced, sorted by norm
};

namespace detail {

inline double norm2_big(const std::vector<bigint>& v) {
    double s = 0.0;
    for (const bigint& x : v) {
        double d = static_cast<double>(x);
        s += d * d;
    }
    return s;
}

// pairwise size reduction followed by a norm sort; quotients estimated in
// double, updates exact. Keeps the enumeration ellipsoids well conditioned
// and the narrowed entries small.
inline void size_reduce_big(std::vector<std::vector<bigint>>& basis) {
    if (basis.empty()) return;
    for (int sweep = 0; sweep < 32; ++sweep) {
        bool changed = false;
        std::sort(basis.begin(), basis.end(),
                  [](const auto& a, const auto& b) { return norm2_big(a) < norm2_big(b); });
        for (std::size_t i = 1; i < basis.size(); ++i)
            for (std::size_t j = 0; j < i; ++j) {
                double dot = 0.0, nj = norm2_big(basis[j]);
                if (nj == 0.0) continue;
                for (std::size_t k = 0; k < basis[i].size(); ++k)
                    dot += static_cast<double>(basis[i][k]) * static_cast<double>(basis[j][k]);
                auto q = static_cast<long long>(std::llround(dot / nj));
                if (q != 0) {
                    bigint bq(q);
                    for (std::size_t k = 0; k < basis[i].size(); ++k)
                        basis[i][k] -= bq * basis[j][k];
                    changed = true;
                }
            }
        if (!changed) break;
    }
    std::sort(basis.begin(), basis.end(), [](const auto& a, const auto& b) {
        double na = norm2_big(a), nb = norm2_big(b);
        return na < nb || (na == nb && a < b);
    });
}

inline std::int64_t narrow_one(const bigint& v, const char* what) {
    if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min())
        throw Error(errc::overflow, std::string(what) + " exceeds int64 range");
    return static_cast<std::int64_t>(v);
}

}  // namespace detail

// Solve a*m = b over the integers. Returns a particular solution plus a basis
// of the integer kernel, or nullopt when b is not in the integer image of a.
// The particular solution is reduced against the kernel lattice.
inline std::optional<AffineSolution> solve_affine_integer(const IntMatrix& a,
                                                          const std::vector<std::int64_t>& b) {
    if (a.rows != b.size()) throw Error(errc::dimension_mismatch, "rhs length");
    SNFResult snf = smith_normal_form(a);
    std::size_t m = a.rows, n = a.cols;

    // u a v = d  =>  a (v w) = b with d w = u b
    std::vector<bigint> ub(m, 0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) ub[i] += snf.u(i, j) * b[j];

    std::vector<bigint> w(n, 0);
    std::size_t r = std::min(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        bigint di = (i < r) ? snf.d(i, i) : bigint(0);
        if (di == 0) {
            if (ub[i] != 0) return std::nullopt;
        } else {
            if (ub[i] % di != 0) return std::nullopt;
            w[i] = ub[i] / di;
        }
    }

    std::vector<bigint> part(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) part[i] += snf.v(i, j) * w[j];

    std::vector<std::vector<bigint>> kernel;
    for (std::size_t j = 0; j < n; ++j) {
        bigint dj = (j < r) ? snf.d(j, j) : bigint(0);
        if (dj == 0) {
            std::vector<bigint> col(n);
            for (std::size_t i = 0; i < n; ++i) col[i] = snf.v(i, j);
            kernel.push_back(std::move(col));
        }
    }
    detail::size_reduce_big(kernel);

    // Babai-style rounding of the particular point into the reduced cell
    for (std::size_t pass = 0; pass < 4; ++pass) {
        bool moved = false;
        for (std::size_t j = kernel.size(); j-- > 0;) {
            double nj = detail::norm2_big(kernel[j]);
            if (nj == 0.0) continue;
            double dot = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                dot += static_cast<double>(part[k]) * static_cast<double>(kernel[j][k]);
            auto q = static_cast<long long>(std::llround(dot / nj));
            if (q != 0) {
                bigint bq(q);
                for (std::size_t k = 0; k < n; ++k) part[k] -= bq * kernel[j][k];
                moved = true;
            }
        }
        if (!moved) break;
    }

    AffineSolution sol;
    sol.particular.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        sol.particular[i] = detail::narrow_one(part[i], "particular solution entry");
    for (const auto& col : kernel) {
        std::vector<std::int64_t> k64(n);
        for (std::size_t i = 0; i < n; ++i)
            k64[i] = detail::narrow_one(col[i], "kernel basis entry");
        sol.kernel_basis.push_back(std::move(k64));
    }
    return sol;
}

}  // namespace abelfn
