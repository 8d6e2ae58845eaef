#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "abelfn/lattice.hpp"
#include "abelfn/linalg.hpp"
#include "abelfn/theta.hpp"

namespace abelfn {

// (Omega_tilde, Phi, P, Delta) describing an abelian subvariety embedding:
//   P^t Phi = I exactly, Phi*Delta integer, Phi*Omega_small = Omega_tilde*P,
//   Omega_small = P^t Omega_tilde P.
struct EmbeddingData {
    PeriodMatrix big_omega;   // ambient, principally polarized
    RationalMatrix phi;       // ambient_dim x sub_dim, exact rationals
    IntMatrix p;              // ambient_dim x sub_dim
    IntMatrix delta;          // sub_dim x sub_dim diagonal polarization
    PeriodMatrix small_omega; // derived P^t Omega_tilde P

    std::size_t ambient_dim() const { return big_omega.dim; }
    std::size_t sub_dim() const { return small_omega.dim; }
};

namespace detail {

inline ComplexMatrix int_times_period(const IntMatrix& pt, const ComplexMatrix& om) {
    return pt.to_complex() * om;
}

}  // namespace detail

struct EmbeddingAudit {
    EmbeddingData data;
    std::vector<std::string> violations;
};

// Integrality conditions are checked in exact arithmetic; the period relation
// Phi*Omega_small = Omega_tilde*P at 1e-10 relative Frobenius.
inline EmbeddingAudit build_embedding_audit(const ComplexMatrix& big_omega_raw,
                                            const RationalMatrix& phi, const IntMatrix& p,
                                            const IntMatrix& delta) {
    EmbeddingAudit out;
    std::size_t gt = big_omega_raw.rows;
    std::size_t n = phi.cols;
    if (phi.rows != gt || p.rows != gt || p.cols != n || delta.rows != n || delta.cols != n)
        throw Error(errc::dimension_mismatch, "embedding shapes");
    validate_polarization(delta);

    // ambient period matrix; in audit mode asymmetry is recorded, not fatal
    double scale = max_abs(big_omega_raw);
    double asym = 0.0;
    for (std::size_t i = 0; i < gt; ++i)
        for (std::size_t j = i + 1; j < gt; ++j)
            asym = std::max(asym, std::abs(big_omega_raw(i, j) - big_omega_raw(j, i)));
    if (scale > 0.0 && asym > 1e-9 * scale)
        out.violations.push_back("BigOmegaNotSymmetric");
    ComplexMatrix sym(gt, gt);
    for (std::size_t i = 0; i < gt; ++i)
        for (std::size_t j = 0; j < gt; ++j)
            sym(i, j) = 0.5 * (big_omega_raw(i, j) + big_omega_raw(j, i));
    out.data.big_omega = validate_period_matrix(sym);

    // P^t Phi = I_n, exact rational arithmetic
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            Rational s(0);
            for (std::size_t k = 0; k < gt; ++k)
                s = s + Rational(p(k, i)) * phi(k, j);
            if (s != Rational(i == j ? 1 : 0)) {
                out.violations.push_back("PtPhiNotIdentity");
                i = n; break;
            }
        }

    // Phi * Delta integer, exact
    for (std::size_t i = 0; i < gt; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            Rational s = phi(i, j) * Rational(delta(j, j));
            if (!s.is_integer()) {
                out.violations.push_back("PhiDeltaNotIntegral");
                i = gt; break;
            }
        }

    out.data.phi = phi;
    out.data.p = p;
    out.data.delta = delta;

    ComplexMatrix small = transpose(p.to_complex()) * out.data.big_omega.omega * p.to_complex();
    try {
        out.data.small_omega = validate_period_matrix(small);
    } catch (const Error& e) {
        // without a valid induced period matrix nothing downstream can run
        throw Error(errc::compatibility_violation,
                    std::string("P^t Omega P is not a period matrix (") + e.name() + ")");
    }

    ComplexMatrix lhs = phi.to_complex() * out.data.small_omega.omega;
    ComplexMatrix rhs = out.data.big_omega.omega * p.to_complex();
    double rel = frobenius_norm(lhs - rhs) / std::max(frobenius_norm(rhs), 1e-30);
    if (rel > 1e-10) out.violations.push_back("PhiOmegaNeqBigOmegaP");
    return out;
}

inline EmbeddingData build_embedding(const ComplexMatrix& big_omega_raw, const RationalMatrix& phi,
                                     const IntMatrix& p, const IntMatrix& delta) {
    EmbeddingAudit audit = build_embedding_audit(big_omega_raw, phi, p, delta);
    if (!audit.violations.empty())
        throw Error(errc::compatibility_violation, audit.violations.front());
    return std::move(audit.data);
}

// ---------------------------------------------------------------------------
// Prym shape: phi rows (I_g/2 | 0), (0 | I_n), (I_g/2 | 0); P the same with the
// halves replaced by ones; Delta = diag(2,...,2,1,...,1) with n units.

inline RationalMatrix prym_phi(std::size_t g, std::size_t n) {
    RationalMatrix phi(2 * g + n, g + n);
    for (std::size_t j = 0; j < g; ++j) {
        phi(j, j) = Rational(1, 2);
        phi(g + n + j, j) = Rational(1, 2);
    }
    for (std::size_t j = 0; j < n; ++j) phi(g + j, g + j) = Rational(1);
    return phi;
}

inline IntMatrix prym_p(std::size_t g, std::size_t n) {
    IntMatrix p(2 * g + n, g + n);
    for (std::size_t j = 0; j < g; ++j) {
        p(j, j) = 1;
        p(g + n + j, j) = 1;
    }
    for (std::size_t j = 0; j < n; ++j) p(g + j, g + j) = 1;
    return p;
}

inline IntMatrix prym_delta(std::size_t g, std::size_t n) {
    std::vector<std::int64_t> d(g + n, 1);
    for (std::size_t j = 0; j < g; ++j) d[j] = 2;
    return IntMatrix::diagonal(d);
}

struct PrymSpec {
    std::size_t g = 0;  // base-surface genus
    std::size_t n = 0;  // half the fixed-point count minus one
    EmbeddingData emb;

    const PeriodMatrix& pi() const { return emb.small_omega; }
    std::size_t ambient_dim() const { return 2 * g + n; }
    std::size_t sub_dim() const { return g + n; }
};

inline PrymSpec make_prym_spec(std::size_t g, std::size_t n, const ComplexMatrix& big_omega) {
    if (g < 1 || n < 1) throw Error(errc::bad_input, "prym spec needs g >= 1 and n >= 1");
    PrymSpec s;
    s.g = g;
    s.n = n;
    s.emb = build_embedding(big_omega, prym_phi(g, n), prym_p(g, n), prym_delta(g, n));
    return s;
}

// ---------------------------------------------------------------------------
// expansion coefficients

struct CoeffEntry {
    std::vector<std::int64_t> eps;
    cplx value{0.0, 0.0};
    double tail_bound = 0.0;
};

struct CoeffVector {
    IntMatrix delta;
    std::vector<cplx> gamma;        // ambient translation
    std::vector<cplx> small_gamma;  // P^t gamma
    std::vector<CoeffEntry> coeffs; // one per coset representative, lexicographic
    double tol = 0.0;
};

namespace detail {

struct GaussianFrame {
    RealMatrix chol;            // S with G = S S^t
    std::vector<double> center; // minimizer of the real quadratic
    double log_peak = 0.0;      // -pi * q(min) (natural-log scale omitted: stored as exp later)
    double lambda_lb = 0.0;     // lower bound on smallest eigenvalue of G
};

// frame for |exp(pi i <u, Om u> - 2 pi i <u, gamma>)| with u = E x + f:
// the real exponent is -pi [ (Ex+f)^t Y (Ex+f) - 2 (Ex+f)^t Im(gamma) ].
inline GaussianFrame gaussian_frame(const RealMatrix& y, const RealMatrix& e,
                                    const std::vector<double>& f,
                                    const std::vector<double>& im_gamma) {
    std::size_t big = e.rows, k = e.cols;
    RealMatrix g(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < big; ++a)
                for (std::size_t b = 0; b < big; ++b) s += e(a, i) * y(a, b) * e(b, j);
            g(i, j) = s;
        }
    auto chol = try_cholesky(g);
    if (!chol) throw Error(errc::bad_input, "restricted Gram is singular");

    // gradient terms: G x* = E^t (Im gamma - Y f)
    std::vector<double> yf = mat_vec(y, f);
    std::vector<double> rhs(k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t a = 0; a < big; ++a) rhs[i] += e(a, i) * (im_gamma[a] - yf[a]);
    std::vector<double> xstar = solve_lower_transposed(*chol, solve_lower(*chol, rhs));

    // q(x) = x^t G x - 2 x^t rhs + (f^t Y f - 2 f^t Im gamma); q(x*) = c0 - x*^t rhs
    double c0 = dot(f, yf) - 2.0 * dot(f, im_gamma);
    double qmin = c0 - dot(xstar, rhs);

    GaussianFrame fr;
    fr.chol = std::move(*chol);
    fr.center = std::move(xstar);
    fr.log_peak = -pi * qmin;

    // lambda_min(G) >= 1/||G^{-1}||_inf
    double worst = 0.0;
    std::vector<double> col(k);
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> ej(k, 0.0);
        ej[j] = 1.0;
        col = solve_lower_transposed(fr.chol, solve_lower(fr.chol, ej));
        for (std::size_t i = 0; i < k; ++i) g(i, j) = col[i];  // reuse g as G^{-1}
    }
    for (std::size_t i = 0; i < k; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < k; ++j) row += std::abs(g(i, j));
        worst = std::max(worst, row);
    }
    fr.lambda_lb = 1.0 / worst;
    return fr;
}

}  // namespace detail

// Theorem-2 coefficients: for each coset representative eps solve the integer
// system (Delta Phi^t) m = eps and sum
//   exp(pi i<m,Om~ m> - 2pi i<m,gamma>)
// over the affine solution sublattice, times the eps-dependent constant
//   exp(2pi i<eps, D^-1 P^t gamma> - pi i<D^-1 eps, Om D^-1 eps>).
inline CoeffVector coeffs_thm2(const EmbeddingData& emb, const std::vector<cplx>& gamma,
                               double tol) {
    std::size_t gt = emb.ambient_dim(), n = emb.sub_dim();
    if (gamma.size() != gt) throw Error(errc::dimension_mismatch, "gamma length");
    if (!(tol > 0.0)) throw Error(errc::bad_input, "tolerance must be positive");

    CoeffVector out;
    out.delta = emb.delta;
    out.gamma = gamma;
    out.small_gamma = mat_vec(transpose(emb.p.to_complex()), gamma);
    out.tol = tol;

    // integer constraint matrix Delta Phi^t = (Phi Delta)^t
    IntMatrix a(n, gt);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < gt; ++k) {
            Rational r = emb.phi(k, i) * Rational(emb.delta(i, i));
            if (!r.is_integer())
                throw Error(errc::bad_input, "Phi*Delta is not integral on this embedding");
            a(i, k) = r.num;
        }

    RealMatrix y = emb.big_omega.im();
    std::vector<double> im_gamma(gt);
    for (std::size_t i = 0; i < gt; ++i) im_gamma[i] = gamma[i].imag();

    for (const CosetIndex& eps : enum_cosets(emb.delta)) {
        CoeffEntry entry;
        entry.eps = eps.rep;

        // constant factor
        std::vector<double> dinv_eps(n);
        for (std::size_t i = 0; i < n; ++i)
            dinv_eps[i] = static_cast<double>(eps.rep[i]) / static_cast<double>(emb.delta(i, i));
        cplx eps_dpg = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            eps_dpg += dinv_eps[i] * out.small_gamma[i];
        cplx dOd = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cplx row = 0.0;
            for (std::size_t j = 0; j < n; ++j) row += emb.small_omega.omega(i, j) * dinv_eps[j];
            dOd += dinv_eps[i] * row;
        }
        cplx cst = std::exp(cplx(0.0, 2.0 * pi) * eps_dpg - cplx(0.0, pi) * dOd);

        auto sol = solve_affine_integer(a, eps.rep);
        if (!sol) {
            entry.value = 0.0;
            entry.tail_bound = 0.0;
            out.coeffs.push_back(std::move(entry));
            continue;
        }

        std::size_t k = sol->kernel_basis.size();
        std::vector<double> f(gt);
        for (std::size_t i = 0; i < gt; ++i) f[i] = static_cast<double>(sol->particular[i]);

        auto term_at = [&](const std::vector<std::int64_t>& m) {
            std::vector<double> md(gt);
            for (std::size_t i = 0; i < gt; ++i) md[i] = static_cast<double>(m[i]);
            cplx mOm = 0.0;
            for (std::size_t i = 0; i < gt; ++i) {
                cplx row = 0.0;
                for (std::size_t j = 0; j < gt; ++j) row += emb.big_omega.omega(i, j) * md[j];
                mOm += md[i] * row;
            }
            cplx mg = 0.0;
            for (std::size_t i = 0; i < gt; ++i) mg += md[i] * gamma[i];
            return std::exp(cplx(0.0, pi) * mOm - cplx(0.0, 2.0 * pi) * mg);
        };

        if (k == 0) {
            entry.value = cst * term_at(sol->particular);
            entry.tail_bound = 0.0;
            out.coeffs.push_back(std::move(entry));
            continue;
        }

        RealMatrix e(gt, k);
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t i = 0; i < gt; ++i)
                e(i, j) = static_cast<double>(sol->kernel_basis[j][i]);
        detail::GaussianFrame fr = detail::gaussian_frame(y, e, f, im_gamma);

        double radius = detail::radius_for_tolerance(tol, k, fr.lambda_lb);
        std::vector<std::int64_t> m(gt);
        for (int attempt = 0; attempt < 6; ++attempt) {
            double majorant = detail::gaussian_shell_tail(fr.chol, radius);
            if (majorant > tol && attempt < 5) {
                radius += 1.5;
                continue;
            }
            cplx sum = 0.0;
            EllipsoidSpec spec{fr.chol, fr.center, radius};
            enum_ellipsoid_visit(spec, [&](const std::vector<std::int64_t>& x) {
                for (std::size_t i = 0; i < gt; ++i) {
                    std::int64_t s = sol->particular[i];
                    for (std::size_t j = 0; j < k; ++j) s += x[j] * sol->kernel_basis[j][i];
                    m[i] = s;
                }
                sum += term_at(m);
            });
            entry.value = cst * sum;
            entry.tail_bound = std::abs(cst) * std::exp(fr.log_peak) * majorant;
            break;
        }
        out.coeffs.push_back(std::move(entry));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prym specialization: direct sum over m in Z^g with
//   m_eps = (m_1..m_g, 0...0, eps_1-m_1..eps_g-m_g),
//   c_eps = sum exp(pi i<m_eps,Om~ m_eps> + pi i<eps,gamma~> - 2pi i<m_eps,gamma>
//                   - pi i<D^-1 eps, Pi D^-1 eps>).

inline std::vector<cplx> prym_gamma_tilde(const PrymSpec& spec, const std::vector<cplx>& gamma) {
    std::size_t g = spec.g, n = spec.n;
    if (gamma.size() != 2 * g + n) throw Error(errc::dimension_mismatch, "gamma length");
    std::vector<cplx> gt(g + n);
    for (std::size_t j = 0; j < g; ++j) gt[j] = gamma[j] + gamma[g + n + j];
    for (std::size_t j = 0; j < n; ++j) gt[g + j] = gamma[g + j];
    return gt;
}

inline CoeffEntry eq6_coefficient(const PrymSpec& spec, const std::vector<std::int64_t>& eps,
                                  const std::vector<cplx>& gamma, double tol) {
    std::size_t g = spec.g, n = spec.n, gt = 2 * g + n;
    if (eps.size() != g + n) throw Error(errc::dimension_mismatch, "eps length");
    for (std::size_t j = 0; j < g; ++j)
        if (eps[j] != 0 && eps[j] != 1)
            throw Error(errc::bad_input, "eps entries in the 2-block must be 0 or 1");
    for (std::size_t j = g; j < g + n; ++j)
        if (eps[j] != 0)
            throw Error(errc::bad_input, "eps must vanish beyond position g");
    if (!(tol > 0.0)) throw Error(errc::bad_input, "tolerance must be positive");

    const PeriodMatrix& big = spec.emb.big_omega;
    const PeriodMatrix& pi_mat = spec.pi();
    std::vector<cplx> gam_t = prym_gamma_tilde(spec, gamma);

    // constant: exp(pi i<eps,gamma~> - pi i<D^-1 eps, Pi D^-1 eps>)
    cplx eps_gt = 0.0;
    for (std::size_t j = 0; j < g; ++j) eps_gt += static_cast<double>(eps[j]) * gam_t[j];
    std::vector<double> dinv_eps(g + n, 0.0);
    for (std::size_t j = 0; j < g; ++j) dinv_eps[j] = 0.5 * static_cast<double>(eps[j]);
    cplx dPd = 0.0;
    for (std::size_t i = 0; i < g + n; ++i) {
        cplx row = 0.0;
        for (std::size_t j = 0; j < g + n; ++j) row += pi_mat.omega(i, j) * dinv_eps[j];
        dPd += dinv_eps[i] * row;
    }
    cplx cst = std::exp(cplx(0.0, pi) * eps_gt - cplx(0.0, pi) * dPd);

    // m_eps = E m + f with E = [I_g; 0; -I_g], f = (0,...,0, eps_1..eps_g)
    RealMatrix e(gt, g);
    for (std::size_t j = 0; j < g; ++j) {
        e(j, j) = 1.0;
        e(g + n + j, j) = -1.0;
    }
    std::vector<double> f(gt, 0.0);
    for (std::size_t j = 0; j < g; ++j) f[g + n + j] = static_cast<double>(eps[j]);

    RealMatrix y = big.im();
    std::vector<double> im_gamma(gt);
    for (std::size_t i = 0; i < gt; ++i) im_gamma[i] = gamma[i].imag();
    detail::GaussianFrame fr = detail::gaussian_frame(y, e, f, im_gamma);

    double radius = detail::radius_for_tolerance(tol, g, fr.lambda_lb);
    CoeffEntry entry;
    entry.eps = eps;
    std::vector<double> meps(gt);
    for (int attempt = 0; attempt < 6; ++attempt) {
        double majorant = detail::gaussian_shell_tail(fr.chol, radius);
        if (majorant > tol && attempt < 5) {
            radius += 1.5;
            continue;
        }
        cplx sum = 0.0;
        EllipsoidSpec spec_x{fr.chol, fr.center, radius};
        enum_ellipsoid_visit(spec_x, [&](const std::vector<std::int64_t>& m) {
            for (std::size_t i = 0; i < gt; ++i) meps[i] = f[i];
            for (std::size_t j = 0; j < g; ++j) {
                meps[j] += static_cast<double>(m[j]);
                meps[g + n + j] -= static_cast<double>(m[j]);
            }
            cplx mOm = 0.0;
            for (std::size_t i = 0; i < gt; ++i) {
                cplx row = 0.0;
                for (std::size_t j = 0; j < gt; ++j) row += big.omega(i, j) * meps[j];
                mOm += meps[i] * row;
            }
            cplx mg = 0.0;
            for (std::size_t i = 0; i < gt; ++i) mg += meps[i] * gamma[i];
            sum += std::exp(cplx(0.0, pi) * mOm - cplx(0.0, 2.0 * pi) * mg);
        });
        entry.value = cst * sum;
        entry.tail_bound = std::abs(cst) * std::exp(fr.log_peak) * majorant;
        return entry;
    }
    throw Error(errc::capacity_exceeded, "eq6 coefficient truncation did not reach tolerance");
}

inline CoeffVector coeffs_prym_eq6(const PrymSpec& spec, const std::vector<cplx>& gamma,
                                   double tol) {
    CoeffVector out;
    out.delta = spec.emb.delta;
    out.gamma = gamma;
    out.small_gamma = prym_gamma_tilde(spec, gamma);
    out.tol = tol;
    for (const CosetIndex& eps : enum_cosets(spec.emb.delta))
        out.coeffs.push_back(eq6_coefficient(spec, eps.rep, gamma, tol));
    return out;
}

// ---------------------------------------------------------------------------
// numerical check of the expansion identity

struct ExpansionCheck {
    ThetaValue lhs;
    ThetaValue rhs;
    double rel_err = 0.0;
    bool near_zero = false;  // both sides < 1e-20: rel_err holds the absolute error
};

inline ExpansionCheck verify_expansion(const EmbeddingData& emb, const std::vector<cplx>& gamma,
                                       const std::vector<cplx>& z, double tol) {
    std::size_t gt = emb.ambient_dim(), n = emb.sub_dim();
    if (z.size() != n) throw Error(errc::dimension_mismatch, "z length");
    if (gamma.size() != gt) throw Error(errc::dimension_mismatch, "gamma length");

    // lhs: theta(Phi z - gamma | Omega~)
    ComplexMatrix phic = emb.phi.to_complex();
    std::vector<cplx> arg = mat_vec(phic, z);
    for (std::size_t i = 0; i < gt; ++i) arg[i] -= gamma[i];
    ExpansionCheck chk;
    chk.lhs = theta(Characteristic::zero(gt), arg, emb.big_omega, tol);

    // rhs: sum_eps c_eps theta[D^-1 eps, 0](z - P^t gamma | Omega)
    CoeffVector cv = coeffs_thm2(emb, gamma, tol);
    std::vector<cplx> zs(n);
    std::vector<cplx> ptg = mat_vec(transpose(emb.p.to_complex()), gamma);
    for (std::size_t i = 0; i < n; ++i) zs[i] = z[i] - ptg[i];

    cplx rhs = 0.0;
    double rhs_tail = 0.0;
    for (const CoeffEntry& ce : cv.coeffs) {
        Characteristic ch = Characteristic::zero(n);
        for (std::size_t s = 0; s < n; ++s) ch.a[s] = Rational(ce.eps[s], emb.delta(s, s));
        ThetaValue tv = theta(ch, zs, emb.small_omega, tol);
        rhs += ce.value * tv.value;
        rhs_tail += std::abs(ce.value) * tv.tail_bound + ce.tail_bound * (std::abs(tv.value) + tv.tail_bound);
    }
    chk.rhs = ThetaValue{rhs, rhs_tail};

    double la = std::abs(chk.lhs.value), ra = std::abs(chk.rhs.value);
    if (la < 1e-20 && ra < 1e-20) {
        // near a theta zero relative error is meaningless; report absolute error
        chk.near_zero = true;
        chk.rel_err = std::abs(chk.lhs.value - chk.rhs.value);
    } else {
        chk.rel_err = std::abs(chk.lhs.value - chk.rhs.value) / std::max({la, ra, 1e-30});
    }
    return chk;
}

// ---------------------------------------------------------------------------
// synthetic admissible instances:
//   Omega~ = Phi Pi0 Phi^t + Z M Z^t with Z an integer basis of ker(P^t),
// so Omega~ P = Phi Pi0 and P^t Omega~ P = Pi0 by construction.

enum class InstanceKind { generic, prym };

struct GeneratedInstance {
    InstanceKind kind = InstanceKind::generic;
    std::size_t g = 0;   // prym only
    std::size_t n = 0;
    std::uint64_t seed = 0;
    EmbeddingData emb;
};

namespace detail {

// deterministic uniform in [0,1) from raw engine output (library-independent)
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline ComplexMatrix random_symmetric_pd_im(std::size_t k, std::mt19937_64& rng) {
    ComplexMatrix m(k, k);
    RealMatrix a(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) a(i, j) = uniform01(rng) - 0.5;
    double shift = 0.65 + 0.35 * uniform01(rng);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i; j < k; ++j) {
            double re = uniform01(rng) - 0.5;
            double im = 0.0;
            for (std::size_t l = 0; l < k; ++l) im += a(i, l) * a(j, l);
            im *= 0.25;
            if (i == j) im += shift;
            m(i, j) = cplx(re, im);
            m(j, i) = m(i, j);
        }
    return m;
}

inline double det_abs(RealMatrix m) {
    std::size_t n = m.rows;
    double det = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(m(i, k)) > std::abs(m(piv, k))) piv = i;
        if (m(piv, k) == 0.0) return 0.0;
        if (piv != k)
            for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(piv, j));
        det *= m(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            double f = m(i, k) / m(k, k);
            for (std::size_t j = k; j < n; ++j) m(i, j) -= f * m(k, j);
        }
    }
    return std::abs(det);
}

}  // namespace detail

inline GeneratedInstance generate_instance(std::size_t n, std::size_t g_tilde, InstanceKind kind,
                                           std::uint64_t seed, std::size_t prym_g = 0,
                                           const std::vector<std::int64_t>& generic_delta = {}) {
    GeneratedInstance out;
    out.kind = kind;
    out.seed = seed;

    RationalMatrix phi;
    IntMatrix p, delta;
    RealMatrix zbasis;

    if (kind == InstanceKind::prym) {
        std::size_t g = prym_g;
        if (g < 1 || n < 1) throw Error(errc::bad_input, "prym instance needs g >= 1, n >= 1");
        g_tilde = 2 * g + n;
        out.g = g;
        out.n = n;
        phi = prym_phi(g, n);
        p = prym_p(g, n);
        delta = prym_delta(g, n);
        zbasis = RealMatrix(g_tilde, g);  // ker P^t: (v, 0, -v)
        for (std::size_t j = 0; j < g; ++j) {
            zbasis(j, j) = 1.0;
            zbasis(g + n + j, j) = -1.0;
        }
    } else {
        if (n < 1 || g_tilde <= n) throw Error(errc::bad_input, "generic instance needs 1 <= n < g_tilde");
        out.n = n;
        phi = RationalMatrix(g_tilde, n);
        p = IntMatrix(g_tilde, n);
        for (std::size_t j = 0; j < n; ++j) {
            phi(j, j) = Rational(1);
            p(j, j) = 1;
        }
        if (generic_delta.empty()) {
            delta = IntMatrix::identity(n);
        } else {
            if (generic_delta.size() != n) throw Error(errc::bad_input, "generic delta length");
            delta = IntMatrix::diagonal(generic_delta);
        }
        zbasis = RealMatrix(g_tilde, g_tilde - n);  // ker P^t: span of trailing coordinates
        for (std::size_t j = 0; j + n < g_tilde; ++j) zbasis(n + j, j) = 1.0;
    }

    std::size_t sub = phi.cols;
    std::size_t kdim = zbasis.cols;
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < 10; ++attempt) {
        ComplexMatrix pi0 = detail::random_symmetric_pd_im(sub, rng);
        ComplexMatrix mm = detail::random_symmetric_pd_im(kdim, rng);

        ComplexMatrix phic = phi.to_complex();
        ComplexMatrix zc(g_tilde, kdim);
        for (std::size_t i = 0; i < g_tilde; ++i)
            for (std::size_t j = 0; j < kdim; ++j) zc(i, j) = zbasis(i, j);
        ComplexMatrix big = phic * pi0 * transpose(phic) + zc * mm * transpose(zc);

        // conditioning of [Phi  Z]
        RealMatrix joint(g_tilde, g_tilde);
        RealMatrix phir = phi.to_real();
        for (std::size_t i = 0; i < g_tilde; ++i) {
            for (std::size_t j = 0; j < sub; ++j) joint(i, j) = phir(i, j);
            for (std::size_t j = 0; j < kdim; ++j) joint(i, sub + j) = zbasis(i, j);
        }
        double colprod = 1.0;
        for (std::size_t j = 0; j < g_tilde; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < g_tilde; ++i) s += joint(i, j) * joint(i, j);
            colprod *= std::sqrt(s);
        }
        if (detail::det_abs(joint) < 1e-8 * colprod) continue;

        out.emb = build_embedding(big, phi, p, delta);
        return out;
    }
    throw Error(errc::degenerate_seed, "random draw kept producing ill-conditioned frames");
}

}  // namespace abelfn
