#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "abelfn/linalg.hpp"

namespace abelfn {

// Truncation domain { n in Z^g : ||T^t (n - c)|| <= R } with T lower triangular.
struct EllipsoidSpec {
    RealMatrix gram_chol;        // T, lower triangular, positive diagonal
    std::vector<double> center;  // c
    double radius = 0.0;         // R

    std::size_t dim() const { return center.size(); }

    void validate() const {
        std::size_t g = dim();
        if (gram_chol.rows != g || gram_chol.cols != g)
            throw Error(errc::dimension_mismatch, "ellipsoid factor shape");
        for (std::size_t i = 0; i < g; ++i)
            if (!(gram_chol(i, i) > 0.0))
                throw Error(errc::bad_input, "ellipsoid factor needs positive diagonal");
        if (!(radius > 0.0) || !std::isfinite(radius))
            throw Error(errc::bad_input, "ellipsoid radius must be finite and positive");
    }
};

inline constexpr std::size_t default_point_capacity = 100'000'000;

using PointVisitor = std::function<void(const std::vector<std::int64_t>&)>;

// Fincke-Pohst depth-first enumeration over the Cholesky factor. Points are
// visited once each, in lexicographic order of (n_{g-1}, ..., n_0) by the
// recursion itself; callers needing a different order sort the collected set.
inline void enum_ellipsoid_visit(const EllipsoidSpec& spec, const PointVisitor& visit,
                                 std::size_t capacity = default_point_capacity) {
    spec.validate();
    const std::size_t g = spec.dim();
    const RealMatrix& t = spec.gram_chol;
    const double r2 = spec.radius * spec.radius;

    std::vector<std::int64_t> n(g, 0);
    // offs[i] = sum_{j>i} T(j,i) * (n_j - c_j), maintained incrementally
    std::vector<std::vector<double>> offs(g + 1, std::vector<double>(g, 0.0));
    std::vector<double> used(g + 1, 0.0);  // sum of u_k^2 for fixed k > level
    std::size_t count = 0;

    auto descend = [&](auto&& self, std::size_t level) -> void {
        std::size_t i = level - 1;
        double budget = r2 - used[level];
        if (budget < 0.0) return;
        double tii = t(i, i);
        double half = std::sqrt(budget);
        double lo = spec.center[i] + (-half - offs[level][i]) / tii;
        double hi = spec.center[i] + (half - offs[level][i]) / tii;
        auto nlo = static_cast<std::int64_t>(std::ceil(lo));
        auto nhi = static_cast<std::int64_t>(std::floor(hi));
        for (std::int64_t ni = nlo; ni <= nhi; ++ni) {
            double ui = tii * (static_cast<double>(ni) - spec.center[i]) + offs[level][i];
            double u2 = ui * ui;
            if (u2 > budget) continue;
            n[i] = ni;
            if (i == 0) {
                if (++count > capacity)
                    throw Error(errc::capacity_exceeded, "ellipsoid point count exceeds capacity");
                visit(n);
            } else {
                used[i] = used[level] + u2;
                double d = static_cast<double>(ni) - spec.center[i];
                for (std::size_t k = 0; k < i; ++k)
                    offs[i][k] = offs[level][k] + t(i, k) * d;
                self(self, i);
            }
        }
    };
    if (g == 0) return;
    descend(descend, g);
}

inline std::vector<std::vector<std::int64_t>> enum_ellipsoid(
    const EllipsoidSpec& spec, std::size_t capacity = default_point_capacity) {
    std::vector<std::vector<std::int64_t>> out;
    enum_ellipsoid_visit(spec, [&](const std::vector<std::int64_t>& p) { out.push_back(p); },
                         capacity);
    return out;
}

// ---------------------------------------------------------------------------
// coset representatives of Z^g / Delta Z^g

struct CosetIndex {
    IntMatrix delta;
    std::vector<std::int64_t> rep;

    friend bool operator==(const CosetIndex& a, const CosetIndex& b) {
        return a.delta == b.delta && a.rep == b.rep;
    }
};

// Divisibility chain accepted in either order: the classical normal form is
// ascending, the Prym convention writes diag(2,...,2,1,...,1).
inline void validate_polarization(const IntMatrix& delta) {
    if (delta.rows != delta.cols) throw Error(errc::bad_input, "polarization matrix must be square");
    if (!delta.is_diagonal()) throw Error(errc::bad_input, "polarization matrix must be diagonal");
    bool ascending = true, descending = true;
    for (std::size_t s = 0; s < delta.rows; ++s) {
        if (delta(s, s) < 1) throw Error(errc::bad_input, "polarization entries must be positive");
        if (s + 1 < delta.rows) {
            if (delta(s + 1, s + 1) % delta(s, s) != 0) ascending = false;
            if (delta(s, s) % delta(s + 1, s + 1) != 0) descending = false;
        }
    }
    if (!ascending && !descending)
        throw Error(errc::bad_input, "polarization divisibility chain violated");
}

inline std::vector<CosetIndex> enum_cosets(const IntMatrix& delta) {
    validate_polarization(delta);
    std::size_t g = delta.rows;
    std::vector<CosetIndex> out;
    std::vector<std::int64_t> rep(g, 0);
    for (;;) {
        out.push_back(CosetIndex{delta, rep});
        std::size_t s = g;
        while (s-- > 0) {
            if (++rep[s] < delta(s, s)) break;
            rep[s] = 0;
            if (s == 0) return out;
        }
        if (g == 0) return out;
    }
}

// ---------------------------------------------------------------------------
// points of an affine sublattice inside an ellipsoid:
// { particular + sum_i c_i kernel_i } intersected with the spec's domain,
// enumerated through the coefficient coordinates.

inline void enum_affine_sublattice_visit(const std::vector<std::int64_t>& particular,
                                         const std::vector<std::vector<std::int64_t>>& kernel_basis,
                                         const EllipsoidSpec& spec, const PointVisitor& visit,
                                         std::size_t capacity = default_point_capacity) {
    spec.validate();
    const std::size_t g = spec.dim();
    if (particular.size() != g) throw Error(errc::dimension_mismatch, "particular point length");
    const std::size_t k = kernel_basis.size();

    // w0 = T^t (p - c)
    std::vector<double> pc(g);
    for (std::size_t i = 0; i < g; ++i)
        pc[i] = static_cast<double>(particular[i]) - spec.center[i];
    std::vector<double> w0(g, 0.0);
    for (std::size_t i = 0; i < g; ++i)
        for (std::size_t j = i; j < g; ++j) w0[i] += spec.gram_chol(j, i) * pc[j];

    if (k == 0) {
        double q = 0.0;
        for (double w : w0) q += w * w;
        if (q <= spec.radius * spec.radius) visit(particular);
        return;
    }

    // W = T^t K, G = W^t W
    RealMatrix w(g, k);
    for (std::size_t j = 0; j < k; ++j) {
        if (kernel_basis[j].size() != g)
            throw Error(errc::dimension_mismatch, "kernel vector length");
        for (std::size_t i = 0; i < g; ++i) {
            double s = 0.0;
            for (std::size_t l = i; l < g; ++l)
                s += spec.gram_chol(l, i) * static_cast<double>(kernel_basis[j][l]);
            w(i, j) = s;
        }
    }
    RealMatrix gram(k, k);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < g; ++l) s += w(l, i) * w(l, j);
            gram(i, j) = s;
        }
    auto chol = try_cholesky(gram);
    if (!chol) throw Error(errc::bad_input, "kernel basis is not linearly independent");

    std::vector<double> rhs(k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t l = 0; l < g; ++l) rhs[i] -= w(l, i) * w0[l];
    std::vector<double> xstar = solve_lower_transposed(*chol, solve_lower(*chol, rhs));

    // q(x*) = ||w0||^2 - x*^t (W^t w0) with G x* = -W^t w0 = rhs
    double qmin = 0.0;
    for (double v : w0) qmin += v * v;
    for (std::size_t i = 0; i < k; ++i) qmin -= xstar[i] * rhs[i];

    double rx2 = spec.radius * spec.radius - qmin;
    if (rx2 < 0.0) return;

    EllipsoidSpec inner{*chol, xstar, std::sqrt(std::max(rx2, 1e-300))};
    std::vector<std::int64_t> point(g);
    enum_ellipsoid_visit(
        inner,
        [&](const std::vector<std::int64_t>& x) {
            for (std::size_t i = 0; i < g; ++i) {
                std::int64_t s = particular[i];
                for (std::size_t j = 0; j < k; ++j) s += x[j] * kernel_basis[j][i];
                point[i] = s;
            }
            visit(point);
        },
        capacity);
}

inline std::vector<std::vector<std::int64_t>> enum_affine_sublattice(
    const std::vector<std::int64_t>& particular,
    const std::vector<std::vector<std::int64_t>>& kernel_basis, const EllipsoidSpec& spec,
    std::size_t capacity = default_point_capacity) {
    std::vector<std::vector<std::int64_t>> out;
    enum_affine_sublattice_visit(particular, kernel_basis, spec,
                                 [&](const std::vector<std::int64_t>& p) { out.push_back(p); },
                                 capacity);
    return out;
}

}  // namespace abelfn
