#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cylsec/geometry.hpp"
#include "cylsec/hamiltonians.hpp"
#include "cylsec/phase.hpp"

namespace cylsec {

struct FlowSpec {
    double rel_tol = 1e-10;
    double abs_tol = 1e-10;
    double max_step = 0.25;
};

struct FlowError : std::runtime_error {
    FlowError(const std::string& msg, Vec4 last_state, double last_t)
        : std::runtime_error(msg), last(last_state), t(last_t) {}
    Vec4 last;
    double t;
};

namespace detail {

// Dormand-Prince 5(4) with FSAL. Works for forward and reverse time.
// If the field is identically zero along the path the state is returned
// bit-identical to the input (y + h*0 == y).
template <std::size_t N, typename Field>
std::array<double, N> rk45(Field&& f, std::array<double, N> y,
                           double t0, double t1, const FlowSpec& spec) {
    using State = std::array<double, N>;
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                            a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                            a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static constexpr double e1 = 35.0 / 384.0 - 5179.0 / 57600.0,
                            e3 = 500.0 / 1113.0 - 7571.0 / 16695.0,
                            e4 = 125.0 / 192.0 - 393.0 / 640.0,
                            e5 = -2187.0 / 6784.0 + 92097.0 / 339200.0,
                            e6 = 11.0 / 84.0 - 187.0 / 2100.0,
                            e7 = -1.0 / 40.0;

    if (t0 == t1) return y;
    const double dir = t1 > t0 ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    double t = t0;
    double h = dir * std::min(spec.max_step, span);
    State k1 = f(y);

    auto axpy = [](State r, double c, const State& k) {
        for (std::size_t i = 0; i < N; ++i) r[i] += c * k[i];
        return r;
    };

    while (dir * (t1 - t) > 0.0) {
        if (dir * (t + h - t1) > 0.0) h = t1 - t;
        if (std::abs(h) < 1e-14 * span) {
            Vec4 last{0.0, 0.0, 0.0, 0.0};
            for (std::size_t i = 0; i < std::min<std::size_t>(N, 4); ++i) last[i] = y[i];
            throw FlowError("rk45: step size underflow", last, t);
        }

        State s2 = axpy(y, h * a21, k1);
        State k2 = f(s2);
        State s3 = axpy(axpy(y, h * a31, k1), h * a32, k2);
        State k3 = f(s3);
        State s4 = axpy(axpy(axpy(y, h * a41, k1), h * a42, k2), h * a43, k3);
        State k4 = f(s4);
        State s5 = axpy(axpy(axpy(axpy(y, h * a51, k1), h * a52, k2), h * a53, k3), h * a54, k4);
        State k5 = f(s5);
        State s6 = axpy(axpy(axpy(axpy(axpy(y, h * a61, k1), h * a62, k2), h * a63, k3),
                             h * a64, k4), h * a65, k5);
        State k6 = f(s6);
        State ynew = y;
        for (std::size_t i = 0; i < N; ++i)
            ynew[i] += h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        State k7 = f(ynew);

        double err = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                                   e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sc = spec.abs_tol +
                              spec.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
            err = std::max(err, std::abs(ei) / sc);
        }

        if (err <= 1.0) {
            t += h;
            y = ynew;
            k1 = k7;  // FSAL
        }
        const double fac = err == 0.0 ? 5.0
                                      : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h *= fac;
        if (std::abs(h) > spec.max_step) h = dir * spec.max_step;
    }
    return y;
}

}  // namespace detail

/// Solve z' = X_H(z) from t0 to t1 (reverse time allowed). Points outside
/// the support box are fixed points of the exact flow and are returned
/// unchanged without integrating.
inline PhasePoint integrate(const HamiltonianDef& H, const PhasePoint& z0,
                            double t0, double t1, const FlowSpec& spec = {}) {
    if (!H.support.contains(z0)) return z0;
    auto field = [&H](const Vec4& w) { return vector_field(H, to_point(w)); };
    return to_point(detail::rk45<4>(field, to_vec(z0), t0, t1, spec));
}

/// Time-sampled flow path.
struct Trajectory {
    std::vector<double> t;
    std::vector<PhasePoint> z;

    std::size_t size() const { return t.size(); }
};

/// Integrate and record n_samples + 1 equally spaced states on [t0, t1].
inline Trajectory integrate_sampled(const HamiltonianDef& H, const PhasePoint& z0,
                                    double t0, double t1, int n_samples,
                                    const FlowSpec& spec = {}) {
    Trajectory traj;
    traj.t.reserve(n_samples + 1);
    traj.z.reserve(n_samples + 1);
    PhasePoint z = z0;
    traj.t.push_back(t0);
    traj.z.push_back(z);
    for (int s = 1; s <= n_samples; ++s) {
        const double ta = t0 + (t1 - t0) * (s - 1) / n_samples;
        const double tb = t0 + (t1 - t0) * s / n_samples;
        z = integrate(H, z, ta, tb, spec);
        traj.t.push_back(tb);
        traj.z.push_back(z);
    }
    return traj;
}

/// The section-3 map: the time-1 flow of H~ from build_section3_H.
class Section3Map {
public:
    Section3Map(const ScaleParams& p, FlowSpec spec = {})
        : p_(p), fam_(p), H_(build_section3_H(p)), spec_(spec) {}

    const RegionFamily& family() const { return fam_; }
    const HamiltonianDef& hamiltonian() const { return H_; }
    const FlowSpec& spec() const { return spec_; }

    PhasePoint operator()(const PhasePoint& z) const {
        return integrate(H_, z, 0.0, 1.0, spec_);
    }

    /// Equal to operator() but dispatches the exactly-solvable cases:
    /// plateau points translate by i(1+eps) in y, points off every cutoff
    /// ramp are fixed. Used by the bulk samplers; agreement with the
    /// generic route is covered by tests.
    PhasePoint fast(const PhasePoint& z) const {
        const double e = p_.eps, d = p_.delta;
        if (z.v <= d || z.v >= 1.0 - d) return z;
        if (z.u <= d || z.u >= std::numbers::pi - d) return z;
        const int i = static_cast<int>(std::floor(z.u / e)) + 1;
        if (i >= 1 && i <= p_.k) {
            const double ul = z.u - (i - 1) * e;
            if (ul <= d || ul >= e - d) return z;  // between cutoff supports
            if (fam_.R_pprime(i).contains(z.u, z.v) && z.v >= 2.0 * d && z.v <= 1.0 - 2.0 * d &&
                ul >= 2.0 * d && ul <= e - 2.0 * d)
                return {z.u, z.v, z.x, z.y + i * (1.0 + e)};
        }
        return (*this)(z);
    }

private:
    ScaleParams p_;
    RegionFamily fam_;
    HamiltonianDef H_;
    FlowSpec spec_;
};

/// The section-4 map phi_H with H = sum_{ij} H_ij: per-cell conjugated
/// composition phi_{G_i} o phi_F o phi_{G_i}^{-1} in cell-local coordinates,
/// identity outside all support cells.
class Section4Map {
public:
    Section4Map(const ScaleParams& p, FlowSpec spec = {})
        : p_(p), fam_(p), F_(build_F(p)), spec_(spec) {
        G_.reserve(p.k);
        for (int i = 1; i <= p.k; ++i) G_.push_back(build_G(p, i));
    }

    const RegionFamily& family() const { return fam_; }
    const HamiltonianDef& F() const { return F_; }
    const HamiltonianDef& G(int i) const { return G_[static_cast<std::size_t>(i - 1)]; }
    const FlowSpec& spec() const { return spec_; }

    PhasePoint operator()(const PhasePoint& z) const {
        const auto cell = fam_.locate_support_cell(z);
        if (!cell) return z;
        const auto [i, j] = *cell;
        const double us = fam_.u_shift(i), xs = fam_.x_shift(i, j);
        const PhasePoint zl{z.u - us, z.v, z.x - xs, z.y};
        const auto& Gi = G(i);
        PhasePoint w = integrate(Gi, zl, 1.0, 0.0, spec_);  // phi_G^{-1}
        w = integrate(F_, w, 0.0, 1.0, spec_);
        w = integrate(Gi, w, 0.0, 1.0, spec_);
        if (w == zl) return z;  // fixed points stay bit-identical
        return {w.u + us, w.v, w.x + xs, w.y};
    }

    /// Fast route for starting points with y <= y_check_i (in particular the
    /// sampled sets with y in [0,1]): phi_G^{-1} fixes such points, phi_F is
    /// a closed-form y-shift on the f1 f2 plateau, and phi_G reduces to the
    /// planar (x,y) system while (u,v) stays in R'.
    PhasePoint fast_low(const PhasePoint& z) const {
        const auto cell = fam_.locate_support_cell(z);
        if (!cell) return z;
        const auto [i, j] = *cell;
        if (z.y > fam_.y_check(i)) return (*this)(z);
        const double us = fam_.u_shift(i), xs = fam_.x_shift(i, j);
        PhasePoint w{z.u - us, z.v, z.x - xs, z.y};
        const PhasePoint zl = w;

        const double e = p_.eps, d = p_.delta;
        const Rect2 rpp = fam_.R_pprime(1);
        if (rpp.contains(w.u, w.v)) {
            const PlateauCutoff f3(d, 2.0 * d, e - 2.0 * d, e - d);
            w.y += (1.0 + e) * (f3.deriv(w.x) * w.x + f3(w.x));
        } else if (F_.support.contains(w)) {
            w = integrate(F_, w, 0.0, 1.0, spec_);
        }
        if (fam_.R_prime(1).contains(w.u, w.v)) {
            const auto g = planar_flow(i, w.x, w.y);
            w.x = g.first;
            w.y = g.second;
        } else {
            w = integrate(G(i), w, 0.0, 1.0, spec_);
        }
        if (w == zl) return z;
        return {w.u + us, w.v, w.x + xs, w.y};
    }

    /// Time-1 map of the reduced planar system (the (x,y) rows of X_{G_i}
    /// on R' x I x R).
    std::pair<double, double> planar_flow(int i, double x0, double y0,
                                          double t0 = 0.0, double t1 = 1.0) const {
        const double e = p_.eps, d = p_.delta, n = p_.nu;
        const PlateauCutoff g3(0.0, d, e - d, e);
        const RampCutoff g4(fam_.y_check(i), d, n);
        const double c = 2.0 * i - 1.0 - e;
        auto field = [&](const std::array<double, 2>& s) {
            return std::array<double, 2>{
                c * (-g3(s[0]) * g4.deriv(s[1]) * s[0]),
                c * (g3.deriv(s[0]) * s[0] + g3(s[0])) * g4(s[1])};
        };
        const auto r = detail::rk45<2>(field, {x0, y0}, t0, t1, spec_);
        return {r[0], r[1]};
    }

private:
    ScaleParams p_;
    RegionFamily fam_;
    HamiltonianDef F_;
    std::vector<HamiltonianDef> G_;
    FlowSpec spec_;
};

/// Sampled solution of the reduced planar system of block i, recorded as a
/// Trajectory with (x, y) in the last two slots and (u, v) frozen at zero.
inline Trajectory reduced_trajectory(const ScaleParams& p, int i, double x0, double y0,
                                     const FlowSpec& spec = {}, double t0 = 0.0,
                                     double t1 = 1.0, int n_samples = 400) {
    if (i < 1 || i > p.k) throw std::invalid_argument("reduced_trajectory: i out of range");
    Section4Map map(p, spec);
    Trajectory traj;
    traj.t.reserve(n_samples + 1);
    traj.z.reserve(n_samples + 1);
    double x = x0, y = y0;
    traj.t.push_back(t0);
    traj.z.push_back({0.0, 0.0, x, y});
    for (int s = 1; s <= n_samples; ++s) {
        const double ta = t0 + (t1 - t0) * (s - 1) / n_samples;
        const double tb = t0 + (t1 - t0) * s / n_samples;
        const auto r = map.planar_flow(i, x, y, ta, tb);
        x = r.first;
        y = r.second;
        traj.t.push_back(tb);
        traj.z.push_back({0.0, 0.0, x, y});
    }
    return traj;
}

namespace detail {

using Mat4 = std::array<std::array<double, 4>, 4>;

inline Mat4 mat_identity() {
    Mat4 m{};
    for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
    return m;
}

inline Mat4 mat_mul(const Mat4& a, const Mat4& b) {
    Mat4 r{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            double s = 0.0;
            for (int m = 0; m < 4; ++m) s += a[i][m] * b[m][j];
            r[i][j] = s;
        }
    return r;
}

inline double omega_defect(const Mat4& J) {
    static constexpr double Om[4][4] = {
        {0, 1, 0, 0}, {-1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, -1, 0}};
    double defect = 0.0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            double s = 0.0;
            for (int m = 0; m < 4; ++m)
                for (int n = 0; n < 4; ++n) s += J[m][r] * Om[m][n] * J[n][c];
            defect = std::max(defect, std::abs(s - Om[r][c]));
        }
    return defect;
}

/// Flow endpoint together with the Jacobian of the flow map, obtained from
/// the variational equation J' = DX_H(z) J; DX_H comes from central
/// differences of the analytic gradient (second derivatives of H).
inline std::pair<PhasePoint, Mat4> integrate_with_jacobian(
    const HamiltonianDef& H, const PhasePoint& z0, double t0, double t1,
    const FlowSpec& spec, double fd_h = 1e-6) {
    if (!H.support.contains(z0)) return {z0, mat_identity()};
    auto field = [&](const std::array<double, 20>& w) {
        std::array<double, 20> d{};
        const PhasePoint z{w[0], w[1], w[2], w[3]};
        const Vec4 X = vector_field(H, z);
        for (int i = 0; i < 4; ++i) d[i] = X[i];
        double DX[4][4];
        for (int c = 0; c < 4; ++c) {
            Vec4 zp{w[0], w[1], w[2], w[3]}, zm = zp;
            zp[c] += fd_h;
            zm[c] -= fd_h;
            const Vec4 Xp = vector_field(H, to_point(zp));
            const Vec4 Xm = vector_field(H, to_point(zm));
            for (int r = 0; r < 4; ++r) DX[r][c] = (Xp[r] - Xm[r]) / (2.0 * fd_h);
        }
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) {
                double s = 0.0;
                for (int m = 0; m < 4; ++m) s += DX[r][m] * w[4 + 4 * m + c];
                d[4 + 4 * r + c] = s;
            }
        return d;
    };
    std::array<double, 20> s{};
    const Vec4 zv = to_vec(z0);
    for (int i = 0; i < 4; ++i) s[i] = zv[i];
    for (int i = 0; i < 4; ++i) s[4 + 5 * i] = 1.0;
    const auto r = rk45<20>(field, s, t0, t1, spec);
    Mat4 J;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) J[a][b] = r[4 + 4 * a + b];
    return {{r[0], r[1], r[2], r[3]}, J};
}

}  // namespace detail

/// Symplecticity defect of the time-1 map with the Jacobian taken from the
/// variational equation rather than differencing the map. Differencing the
/// composed map is swamped by truncation error wherever the cutoff
/// transitions make higher derivatives large; the tangent flow measures the
/// defect of the numerical flow itself.
inline double symplecticity_defect_tangent(const Section3Map& map, const PhasePoint& z) {
    const auto [w, J] = detail::integrate_with_jacobian(map.hamiltonian(), z, 0.0, 1.0,
                                                        map.spec());
    (void)w;
    return detail::omega_defect(J);
}

inline double symplecticity_defect_tangent(const Section4Map& map, const PhasePoint& z) {
    const auto cell = map.family().locate_support_cell(z);
    if (!cell) return 0.0;
    const auto [i, j] = *cell;
    const PhasePoint zl{z.u - map.family().u_shift(i), z.v,
                        z.x - map.family().x_shift(i, j), z.y};
    const auto [w1, J1] = detail::integrate_with_jacobian(map.G(i), zl, 1.0, 0.0, map.spec());
    const auto [w2, J2] = detail::integrate_with_jacobian(map.F(), w1, 0.0, 1.0, map.spec());
    const auto [w3, J3] = detail::integrate_with_jacobian(map.G(i), w2, 0.0, 1.0, map.spec());
    (void)w3;
    return detail::omega_defect(detail::mat_mul(J3, detail::mat_mul(J2, J1)));
}

/// Max-norm of J^T Omega J - Omega for the central finite-difference
/// Jacobian J of `map` at z; zero for exact symplectomorphisms up to
/// differencing and integration error.
inline double symplecticity_defect(const std::function<PhasePoint(const PhasePoint&)>& map,
                                   const PhasePoint& z, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("symplecticity_defect: h must be positive");
    double J[4][4];
    for (int c = 0; c < 4; ++c) {
        Vec4 zp = to_vec(z), zm = to_vec(z);
        zp[c] += h;
        zm[c] -= h;
        const Vec4 fp = to_vec(map(to_point(zp)));
        const Vec4 fm = to_vec(map(to_point(zm)));
        for (int r = 0; r < 4; ++r) J[r][c] = (fp[r] - fm[r]) / (2.0 * h);
    }
    // Omega = [[0,1,0,0],[-1,0,0,0],[0,0,0,1],[0,0,-1,0]]
    static constexpr double Om[4][4] = {
        {0, 1, 0, 0}, {-1, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, -1, 0}};
    double OJ[4][4];
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            double s = 0.0;
            for (int m = 0; m < 4; ++m) s += Om[r][m] * J[m][c];
            OJ[r][c] = s;
        }
    double defect = 0.0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            double s = 0.0;
            for (int m = 0; m < 4; ++m) s += J[m][r] * OJ[m][c];
            defect = std::max(defect, std::abs(s - Om[r][c]));
        }
    return defect;
}

}  // namespace cylsec
