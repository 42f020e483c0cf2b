#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cylsec/cutoffs.hpp"
#include "cylsec/geometry.hpp"
#include "cylsec/phase.hpp"

namespace cylsec {

/// Axis-aligned box in phase space; half-infinite extents allowed.
struct SupportBox {
    Interval u, v, x, y;

    bool contains(const PhasePoint& z) const {
        return u.contains(z.u) && v.contains(z.v) && x.contains(z.x) && y.contains(z.y);
    }
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A scalar field on R^4 with its analytic gradient, an exact support box
/// (eval is bitwise zero outside), a bounded box used for norm sampling,
/// and an optional analytic bound on sup - inf.
struct HamiltonianDef {
    std::function<double(const PhasePoint&)> eval;
    std::function<Vec4(const PhasePoint&)> grad;  // (dH/du, dH/dv, dH/dx, dH/dy)
    SupportBox support;
    SupportBox sample_box;
    std::optional<double> energy_bound;
};

/// X_H = (H_v, -H_u, H_y, -H_x), the field with omega0(X_H, .) = dH for
/// omega0 = du^dv + dx^dy.
inline Vec4 vector_field(const HamiltonianDef& H, const PhasePoint& z) {
    const Vec4 g = H.grad(z);
    return {g[1], -g[0], g[3], -g[2]};
}

/// H~ = sum_i i * H(u - (i-1)eps, v, x, y) with H = -f1(u) f2(v) (1+eps) x.
/// Supported in P' x R^2; the flow preserves x and is linear in x, so no
/// energy bound is declared.
inline HamiltonianDef build_section3_H(const ScaleParams& p) {
    const double e = p.eps, d = p.delta;
    const PlateauCutoff f1(d, 2.0 * d, e - 2.0 * d, e - d);
    const PlateauCutoff f2(d, 2.0 * d, 1.0 - 2.0 * d, 1.0 - d);
    const int k = p.k;

    HamiltonianDef H;
    H.eval = [f1, f2, e, k](const PhasePoint& z) {
        double s = 0.0;
        for (int i = 1; i <= k; ++i) {
            const double a = f1(z.u - (i - 1) * e);
            if (a != 0.0) s += i * a;
        }
        return -s * f2(z.v) * (1.0 + e) * z.x;
    };
    H.grad = [f1, f2, e, k](const PhasePoint& z) {
        double s = 0.0, sp = 0.0;
        for (int i = 1; i <= k; ++i) {
            const double t = z.u - (i - 1) * e;
            s += i * f1(t);
            sp += i * f1.deriv(t);
        }
        const double c = 1.0 + e;
        return Vec4{-sp * f2(z.v) * c * z.x,
                    -s * f2.deriv(z.v) * c * z.x,
                    -s * f2(z.v) * c,
                    0.0};
    };
    const double pi = std::numbers::pi;
    H.support = {{d, pi - d}, {d, 1.0 - d}, {-kInf, kInf}, {-kInf, kInf}};
    H.sample_box = {{d, pi - d}, {d, 1.0 - d}, {-1.0, 1.0}, {0.0, 1.0}};
    return H;
}

/// F = -f1(u) f2(v) f3(x) (1+eps) x; supp F in R' x I' x R and
/// ||F|| <= (1+eps)(eps-delta) <= 2 eps.
inline HamiltonianDef build_F(const ScaleParams& p) {
    const double e = p.eps, d = p.delta;
    const PlateauCutoff f1(d, 2.0 * d, e - 2.0 * d, e - d);
    const PlateauCutoff f2(d, 2.0 * d, 1.0 - 2.0 * d, 1.0 - d);
    const PlateauCutoff f3(d, 2.0 * d, e - 2.0 * d, e - d);

    HamiltonianDef F;
    F.eval = [f1, f2, f3, e](const PhasePoint& z) {
        return -f1(z.u) * f2(z.v) * f3(z.x) * (1.0 + e) * z.x;
    };
    F.grad = [f1, f2, f3, e](const PhasePoint& z) {
        const double c = 1.0 + e;
        const double a1 = f1(z.u), a2 = f2(z.v), a3 = f3(z.x);
        return Vec4{-f1.deriv(z.u) * a2 * a3 * c * z.x,
                    -a1 * f2.deriv(z.v) * a3 * c * z.x,
                    -a1 * a2 * c * (f3.deriv(z.x) * z.x + a3),
                    0.0};
    };
    F.support = {{d, e - d}, {d, 1.0 - d}, {d, e - d}, {-kInf, kInf}};
    F.sample_box = {{d, e - d}, {d, 1.0 - d}, {d, e - d}, {0.0, 1.0}};
    F.energy_bound = (1.0 + e) * (e - d);
    return F;
}

/// G_i = -g1(u) g2(v) g3(x) g4(y) (2i-1-eps) x, the translating Hamiltonian
/// of block i. g4 switches on above y_check_i; supp phi_{G_i} lies in
/// R_nu x I x [y_check_i, inf).
inline HamiltonianDef build_G(const ScaleParams& p, int i) {
    if (i < 1 || i > p.k) throw std::invalid_argument("build_G: i out of range");
    const double e = p.eps, d = p.delta, n = p.nu;
    const PlateauCutoff g1(n, d, e - d, e - n);
    const PlateauCutoff g2(n, d, 1.0 - d, 1.0 - n);
    const PlateauCutoff g3(0.0, d, e - d, e);
    const double yc = 1.0 + (2 * i - 1) * d;
    const RampCutoff g4(yc, d, n);
    const double c = 2.0 * i - 1.0 - e;

    HamiltonianDef G;
    G.eval = [g1, g2, g3, g4, c](const PhasePoint& z) {
        return -g1(z.u) * g2(z.v) * g3(z.x) * g4(z.y) * c * z.x;
    };
    G.grad = [g1, g2, g3, g4, c](const PhasePoint& z) {
        const double a1 = g1(z.u), a2 = g2(z.v), a3 = g3(z.x), a4 = g4(z.y);
        return Vec4{-g1.deriv(z.u) * a2 * a3 * a4 * c * z.x,
                    -a1 * g2.deriv(z.v) * a3 * a4 * c * z.x,
                    -a1 * a2 * a4 * c * (g3.deriv(z.x) * z.x + a3),
                    -a1 * a2 * a3 * g4.deriv(z.y) * c * z.x};
    };
    G.support = {{n, e - n}, {n, 1.0 - n}, {0.0, e}, {yc, kInf}};
    G.sample_box = {{n, e - n}, {n, 1.0 - n}, {0.0, e}, {yc, yc + 2.0 * d}};
    G.energy_bound = std::abs(c) * e;
    return G;
}

/// sup H - inf H over a deterministic stratified grid on the sample box.
/// res is the per-axis resolution; axes of zero extent get one sample.
inline double energy_norm(const HamiltonianDef& H, int res = 32) {
    if (res < 1) throw std::invalid_argument("energy_norm: res must be >= 1");
    const auto& b = H.sample_box;
    auto coord = [res](const Interval& iv, int s) {
        if (iv.length() == 0.0) return iv.lo;
        return iv.lo + (s + 0.5) * iv.length() / res;
    };
    auto steps = [res](const Interval& iv) { return iv.length() == 0.0 ? 1 : res; };
    double hi = -kInf, lo = kInf;
    for (int a = 0; a < steps(b.u); ++a)
        for (int c = 0; c < steps(b.v); ++c)
            for (int d = 0; d < steps(b.x); ++d)
                for (int f = 0; f < steps(b.y); ++f) {
                    const double val = H.eval({coord(b.u, a), coord(b.v, c),
                                               coord(b.x, d), coord(b.y, f)});
                    hi = std::max(hi, val);
                    lo = std::min(lo, val);
                }
    // zero is always attained: the support is a proper subset of R^4
    hi = std::max(hi, 0.0);
    lo = std::min(lo, 0.0);
    return hi - lo;
}

}  // namespace cylsec
