#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "abelfn/lattice.hpp"
#include "abelfn/linalg.hpp"

namespace abelfn {

// theta function characteristic [a, b], exact rationals in lowest terms
struct Characteristic {
    std::vector<Rational> a;
    std::vector<Rational> b;

    std::size_t dim() const { return a.size(); }

    static Characteristic zero(std::size_t g) {
        Characteristic ch;
        ch.a.assign(g, Rational(0));
        ch.b.assign(g, Rational(0));
        return ch;
    }

    std::vector<double> a_values() const {
        std::vector<double> v(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].value();
        return v;
    }
    std::vector<double> b_values() const {
        std::vector<double> v(b.size());
        for (std::size_t i = 0; i < b.size(); ++i) v[i] = b[i].value();
        return v;
    }

    friend bool operator==(const Characteristic& x, const Characteristic& y) {
        return x.a == y.a && x.b == y.b;
    }
};

struct ThetaValue {
    cplx value{0.0, 0.0};
    double tail_bound = 0.0;
};

namespace detail {

// sum of |terms| outside radius R for the Gaussian exp(-pi ||T^t(n-c)||^2),
// by shells: count(r) <= V_g (r + cell)^g / det T, cell = half the basis-length sum.
// poly_deg-th moment factors are handled by the caller through poly(r).
template <typename PolyFn>
double gaussian_shell_tail(const RealMatrix& t, double radius, PolyFn&& poly) {
    std::size_t g = t.rows;
    double det = 1.0;
    for (std::size_t i = 0; i < g; ++i) det *= t(i, i);
    double cell = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j <= i; ++j) row += t(i, j) * t(i, j);
        cell += std::sqrt(row);
    }
    cell *= 0.5;
    double vg = std::pow(pi, 0.5 * g) / std::tgamma(0.5 * g + 1.0);

    double tail = 0.0;
    for (int k = 0; k < 64; ++k) {
        double r = radius + k;
        double count = vg * std::pow(r + 1.0 + cell, static_cast<double>(g)) / det;
        double term = count * std::exp(-pi * r * r) * poly(r + 1.0);
        tail += term;
        if (term < 1e-300 || term < 1e-18 * tail) break;
    }
    return tail;
}

inline double gaussian_shell_tail(const RealMatrix& t, double radius) {
    return gaussian_shell_tail(t, radius, [](double) { return 1.0; });
}

inline double radius_for_tolerance(double tol, std::size_t g, double lambda_min) {
    double r = std::sqrt((std::log(1.0 / tol) + g * std::log(10.0) + 5.0) / (pi * lambda_min));
    return std::max(r, 1.0 + 0.5 * std::sqrt(static_cast<double>(g)));
}

inline cplx dot(const std::vector<double>& a, const std::vector<cplx>& b) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// lattice reduction of the argument: z = z_red + Omega*m + p with the
// quasi-periodicity cocycle folded into `prefactor`;
// w_lin = -2*pi*i*m is the z-gradient of log(prefactor).
struct ReducedArgument {
    std::vector<cplx> z_red;
    std::vector<std::int64_t> m;
    std::vector<std::int64_t> p;
    cplx prefactor{1.0, 0.0};
};

inline ReducedArgument reduce_argument(const std::vector<cplx>& z, const PeriodMatrix& omega,
                                       const std::vector<double>& a, const std::vector<double>& b) {
    std::size_t g = omega.dim;
    ReducedArgument red;
    red.m.assign(g, 0);
    red.p.assign(g, 0);

    std::vector<double> y(g);
    for (std::size_t i = 0; i < g; ++i) y[i] = z[i].imag();
    std::vector<double> s = omega.im_solve(y);
    for (std::size_t i = 0; i < g; ++i) red.m[i] = std::llround(s[i]);

    std::vector<double> md(g);
    for (std::size_t i = 0; i < g; ++i) md[i] = static_cast<double>(red.m[i]);
    // z' = z - Omega m
    red.z_red.assign(g, cplx(0.0));
    for (std::size_t i = 0; i < g; ++i) {
        cplx om = 0.0;
        for (std::size_t j = 0; j < g; ++j) om += omega.omega(i, j) * md[j];
        red.z_red[i] = z[i] - om;
    }
    // cocycle: theta[a,b](z) = exp(-2pi i<b,m> - pi i<m,Om m> - 2pi i<m,z'>) theta[a,b](z')
    cplx expo = 0.0;
    {
        cplx mOm = 0.0;
        for (std::size_t i = 0; i < g; ++i) {
            cplx row = 0.0;
            for (std::size_t j = 0; j < g; ++j) row += omega.omega(i, j) * md[j];
            mOm += md[i] * row;
        }
        expo = cplx(0.0, -2.0 * pi) * dot(b, md) + cplx(0.0, -pi) * mOm +
               cplx(0.0, -2.0 * pi) * dot(md, red.z_red);
    }
    // integer shift: theta[a,b](z'' + p) = exp(2pi i<a,p>) theta[a,b](z'')
    for (std::size_t i = 0; i < g; ++i) {
        red.p[i] = std::llround(red.z_red[i].real());
        red.z_red[i] -= static_cast<double>(red.p[i]);
    }
    std::vector<double> pd(g);
    for (std::size_t i = 0; i < g; ++i) pd[i] = static_cast<double>(red.p[i]);
    expo += cplx(0.0, 2.0 * pi) * dot(a, pd);
    red.prefactor = std::exp(expo);
    return red;
}

struct SeriesOptions {
    double radius_override = 0.0;  // 0: pick from tolerance
    std::size_t capacity = default_point_capacity;
};

}  // namespace detail

// θ[a,b](z|Ω) = Σ_n exp(πi<(n+a), Ω(n+a)> + 2πi<(n+a), (z+b)>), with argument
// reduction by the period lattice and an a-posteriori rigorous tail bound.
inline ThetaValue theta(const Characteristic& ch, const std::vector<cplx>& z,
                        const PeriodMatrix& omega, double tol,
                        const detail::SeriesOptions& opt = {}) {
    std::size_t g = omega.dim;
    if (ch.a.size() != g || ch.b.size() != g || z.size() != g)
        throw Error(errc::dimension_mismatch, "theta argument dimensions");
    if (!(tol > 0.0)) throw Error(errc::bad_input, "tolerance must be positive");

    std::vector<double> av = ch.a_values(), bv = ch.b_values();
    detail::ReducedArgument red = detail::reduce_argument(z, omega, av, bv);

    std::vector<double> y(g);
    for (std::size_t i = 0; i < g; ++i) y[i] = red.z_red[i].imag();
    std::vector<double> yinv_y = omega.im_solve(y);
    double envelope = std::exp(pi * detail::dot(y, yinv_y));

    std::vector<double> center(g);
    for (std::size_t i = 0; i < g; ++i) center[i] = -(av[i] + yinv_y[i]);

    double lam = omega.im_lambda_min_lb();
    double radius = opt.radius_override > 0.0 ? opt.radius_override
                                              : detail::radius_for_tolerance(tol, g, lam);

    std::vector<double> v(g);
    for (int attempt = 0; attempt < 6; ++attempt) {
        double majorant = detail::gaussian_shell_tail(omega.chol_im, radius);
        if (majorant > tol && opt.radius_override == 0.0 && attempt < 5) {
            radius += 1.5;
            continue;
        }
        cplx sum = 0.0;
        EllipsoidSpec spec{omega.chol_im, center, radius};
        enum_ellipsoid_visit(
            spec,
            [&](const std::vector<std::int64_t>& n) {
                for (std::size_t i = 0; i < g; ++i) v[i] = static_cast<double>(n[i]) + av[i];
                cplx vOv = 0.0;
                for (std::size_t i = 0; i < g; ++i) {
                    cplx row = 0.0;
                    for (std::size_t j = 0; j < g; ++j) row += omega.omega(i, j) * v[j];
                    vOv += v[i] * row;
                }
                cplx lin = 0.0;
                for (std::size_t i = 0; i < g; ++i) lin += v[i] * (red.z_red[i] + bv[i]);
                sum += std::exp(cplx(0.0, pi) * vOv + cplx(0.0, 2.0 * pi) * lin);
            },
            opt.capacity);
        ThetaValue out;
        out.value = red.prefactor * sum;
        out.tail_bound = std::abs(red.prefactor) * envelope * majorant;
        return out;
    }
    throw Error(errc::capacity_exceeded, "theta truncation did not reach tolerance");
}

// Mixed directional derivative along 1..3 directions; each series term gains a
// factor prod_d 2πi<n+a, d>. The reduction prefactor depends on z, so the
// product rule runs over direction subsets in a single enumeration pass.
inline ThetaValue theta_dderiv(const Characteristic& ch, const std::vector<cplx>& z,
                               const PeriodMatrix& omega, const std::vector<std::vector<cplx>>& dirs,
                               double tol, const detail::SeriesOptions& opt = {}) {
    std::size_t g = omega.dim;
    std::size_t k = dirs.size();
    if (k < 1 || k > 3) throw Error(errc::bad_input, "theta_dderiv takes 1 to 3 directions");
    if (ch.a.size() != g || ch.b.size() != g || z.size() != g)
        throw Error(errc::dimension_mismatch, "theta_dderiv argument dimensions");
    for (const auto& d : dirs)
        if (d.size() != g) throw Error(errc::dimension_mismatch, "direction dimensions");
    if (!(tol > 0.0)) throw Error(errc::bad_input, "tolerance must be positive");

    std::vector<double> av = ch.a_values(), bv = ch.b_values();
    detail::ReducedArgument red = detail::reduce_argument(z, omega, av, bv);

    std::vector<double> y(g);
    for (std::size_t i = 0; i < g; ++i) y[i] = red.z_red[i].imag();
    std::vector<double> yinv_y = omega.im_solve(y);
    double envelope = std::exp(pi * detail::dot(y, yinv_y));

    std::vector<double> center(g);
    for (std::size_t i = 0; i < g; ++i) center[i] = -(av[i] + yinv_y[i]);

    // w_d = -2pi i <m, d> per direction (gradient of the cocycle exponent)
    std::vector<double> md(g);
    for (std::size_t i = 0; i < g; ++i) md[i] = static_cast<double>(red.m[i]);
    std::array<cplx, 3> wlin{};
    std::array<double, 3> dnorm{};
    for (std::size_t d = 0; d < k; ++d) {
        cplx s = 0.0;
        double n2 = 0.0;
        for (std::size_t i = 0; i < g; ++i) {
            s += md[i] * dirs[d][i];
            n2 += std::norm(dirs[d][i]);
        }
        wlin[d] = cplx(0.0, -2.0 * pi) * s;
        dnorm[d] = std::sqrt(n2);
    }

    double lam = omega.im_lambda_min_lb();
    double radius = opt.radius_override > 0.0 ? opt.radius_override
                                              : detail::radius_for_tolerance(tol, g, lam);
    double cnorm = std::sqrt(detail::dot(yinv_y, yinv_y));

    std::vector<double> v(g);
    std::size_t nsub = std::size_t{1} << k;
    for (int attempt = 0; attempt < 6; ++attempt) {
        double majorant = detail::gaussian_shell_tail(omega.chol_im, radius);
        if (majorant > tol && opt.radius_override == 0.0 && attempt < 5) {
            radius += 1.5;
            continue;
        }
        // f[S] accumulates the series with polynomial factor over subset S
        std::vector<cplx> f(nsub, cplx(0.0));
        EllipsoidSpec spec{omega.chol_im, center, radius};
        enum_ellipsoid_visit(
            spec,
            [&](const std::vector<std::int64_t>& n) {
                for (std::size_t i = 0; i < g; ++i) v[i] = static_cast<double>(n[i]) + av[i];
                cplx vOv = 0.0;
                for (std::size_t i = 0; i < g; ++i) {
                    cplx row = 0.0;
                    for (std::size_t j = 0; j < g; ++j) row += omega.omega(i, j) * v[j];
                    vOv += v[i] * row;
                }
                cplx lin = 0.0;
                for (std::size_t i = 0; i < g; ++i) lin += v[i] * (red.z_red[i] + bv[i]);
                cplx base = std::exp(cplx(0.0, pi) * vOv + cplx(0.0, 2.0 * pi) * lin);
                std::array<cplx, 3> fac{};
                for (std::size_t d = 0; d < k; ++d) {
                    cplx s = 0.0;
                    for (std::size_t i = 0; i < g; ++i) s += v[i] * dirs[d][i];
                    fac[d] = cplx(0.0, 2.0 * pi) * s;
                }
                for (std::size_t s = 0; s < nsub; ++s) {
                    cplx t = base;
                    for (std::size_t d = 0; d < k; ++d)
                        if (s & (std::size_t{1} << d)) t *= fac[d];
                    f[s] += t;
                }
            },
            opt.capacity);

        // Leibniz: D theta = prefactor * sum_S (prod_{d in S} w_d) F_{S^c}
        cplx total = 0.0;
        double tail = 0.0;
        std::size_t full = nsub - 1;
        for (std::size_t s = 0; s < nsub; ++s) {
            cplx wprod = 1.0;
            double wmag = 1.0;
            for (std::size_t d = 0; d < k; ++d)
                if (s & (std::size_t{1} << d)) {
                    wprod *= wlin[d];
                    wmag *= std::abs(wlin[d]);
                }
            std::size_t comp = full & ~s;
            total += wprod * f[comp];
            // shell majorant with the polynomial moment factor of F_{comp}
            double sub_tail = detail::gaussian_shell_tail(
                omega.chol_im, radius, [&](double r) {
                    double pf = 1.0;
                    for (std::size_t d = 0; d < k; ++d)
                        if (comp & (std::size_t{1} << d))
                            pf *= 2.0 * pi * dnorm[d] * (r / std::sqrt(lam) + cnorm + 1.0);
                    return pf;
                });
            tail += wmag * envelope * sub_tail;
        }
        ThetaValue out;
        out.value = red.prefactor * total;
        out.tail_bound = std::abs(red.prefactor) * tail;
        return out;
    }
    throw Error(errc::capacity_exceeded, "theta_dderiv truncation did not reach tolerance");
}

// ---------------------------------------------------------------------------
// basis of the space of theta functions for polarization Delta

struct ThetaBasis {
    IntMatrix delta;
    PeriodMatrix omega;
    std::vector<Characteristic> elements;
};

inline ThetaBasis basis_thm1(const IntMatrix& delta, const PeriodMatrix& omega) {
    validate_polarization(delta);
    if (delta.rows != omega.dim) throw Error(errc::dimension_mismatch, "polarization vs period matrix");
    ThetaBasis basis;
    basis.delta = delta;
    basis.omega = omega;
    for (const CosetIndex& eps : enum_cosets(delta)) {
        Characteristic ch = Characteristic::zero(delta.rows);
        for (std::size_t s = 0; s < delta.rows; ++s)
            ch.a[s] = Rational(eps.rep[s], delta(s, s));
        basis.elements.push_back(std::move(ch));
    }
    return basis;
}

// Independent evaluation path: Fourier series with coefficients generated from
// the closed-form solution of the coefficient recursion,
//   a_{eps+Delta m} = exp(pi i<m,Om m> + 2pi i<D^-1 eps,Om m> + pi i<D^-1 eps,Om D^-1 eps>),
//   theta_eps(z) = sum_m a_{eps+Delta m} exp(2pi i <eps+Delta m, D^-1 z>).
inline ThetaValue theta_recursion_oracle(const CosetIndex& eps, const IntMatrix& delta,
                                         const PeriodMatrix& omega, const std::vector<cplx>& z,
                                         double tol, const detail::SeriesOptions& opt = {}) {
    validate_polarization(delta);
    std::size_t g = omega.dim;
    if (delta.rows != g || z.size() != g || eps.rep.size() != g)
        throw Error(errc::dimension_mismatch, "recursion oracle dimensions");
    if (!(tol > 0.0)) throw Error(errc::bad_input, "tolerance must be positive");

    std::vector<double> e(g);
    for (std::size_t i = 0; i < g; ++i)
        e[i] = static_cast<double>(eps.rep[i]) / static_cast<double>(delta(i, i));

    std::vector<double> y(g);
    for (std::size_t i = 0; i < g; ++i) y[i] = z[i].imag();
    std::vector<double> yinv_y = omega.im_solve(y);

    std::vector<double> center(g);
    for (std::size_t i = 0; i < g; ++i) center[i] = -(e[i] + yinv_y[i]);
    // peak of the summed part sits at the center: exp(pi c^t Y c)
    RealMatrix yim = omega.im();
    double envelope = std::exp(pi * detail::dot(center, mat_vec(yim, center)));

    // constant coefficient factor exp(pi i <e, Om e>)
    cplx eOe = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
        cplx row = 0.0;
        for (std::size_t j = 0; j < g; ++j) row += omega.omega(i, j) * e[j];
        eOe += e[i] * row;
    }
    cplx ez = 0.0;
    for (std::size_t i = 0; i < g; ++i) ez += e[i] * z[i];
    cplx cst = std::exp(cplx(0.0, pi) * eOe + cplx(0.0, 2.0 * pi) * ez);

    double lam = omega.im_lambda_min_lb();
    double radius = opt.radius_override > 0.0 ? opt.radius_override
                                              : detail::radius_for_tolerance(tol, g, lam);

    std::vector<double> m(g);
    for (int attempt = 0; attempt < 6; ++attempt) {
        double majorant = detail::gaussian_shell_tail(omega.chol_im, radius);
        if (majorant > tol && opt.radius_override == 0.0 && attempt < 5) {
            radius += 1.5;
            continue;
        }
        cplx sum = 0.0;
        EllipsoidSpec spec{omega.chol_im, center, radius};
        enum_ellipsoid_visit(
            spec,
            [&](const std::vector<std::int64_t>& n) {
                for (std::size_t i = 0; i < g; ++i) m[i] = static_cast<double>(n[i]);
                cplx mOm = 0.0, eOm = 0.0;
                for (std::size_t i = 0; i < g; ++i) {
                    cplx row = 0.0;
                    for (std::size_t j = 0; j < g; ++j) row += omega.omega(i, j) * m[j];
                    mOm += m[i] * row;
                    eOm += e[i] * row;
                }
                cplx mz = 0.0;
                for (std::size_t i = 0; i < g; ++i) mz += m[i] * z[i];
                sum += std::exp(cplx(0.0, pi) * mOm + cplx(0.0, 2.0 * pi) * eOm +
                                cplx(0.0, 2.0 * pi) * mz);
            },
            opt.capacity);
        ThetaValue out;
        out.value = cst * sum;
        out.tail_bound = std::abs(cst) * envelope * majorant;
        return out;
    }
    throw Error(errc::capacity_exceeded, "recursion oracle truncation did not reach tolerance");
}

}  // namespace abelfn
